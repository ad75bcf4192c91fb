//! Bisimilarity compliance checks behind a result cache.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use cfsm::{bisimilar, canonicalize, contract_hash, Cfsm, ContractHash};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;

use crate::registry::ProviderRecord;

/// One compatibility verdict between a requirement and a provider contract,
/// both normalised to the requirement's role name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub requirement_hash: ContractHashHex,
    pub provider_hash: ContractHashHex,
    pub compatible: bool,
    /// Milliseconds since the Unix epoch.
    pub checked_at: u64,
}

/// Hex digest as stored on disk.
pub type ContractHashHex = String;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub checks_run: u64,
    pub audits_run: u64,
    pub audit_mismatches: u64,
}

#[derive(Default)]
struct Counters {
    hits: AtomicU64,
    misses: AtomicU64,
    checks: AtomicU64,
    audits: AtomicU64,
    mismatches: AtomicU64,
}

#[derive(Default)]
pub(crate) struct CacheTables {
    pub entries: HashMap<(ContractHash, ContractHash), CacheEntry>,
    /// Canonical text of every requirement contract seen, by hash.
    pub requirements: HashMap<ContractHash, String>,
}

pub struct ComplianceChecker {
    tables: Mutex<CacheTables>,
    counters: Counters,
    workers: Arc<Semaphore>,
    audit_every: Option<u64>,
    on_change: Box<dyn Fn() + Send + Sync>,
}

impl ComplianceChecker {
    pub fn new(workers: usize, audit_every: Option<u64>) -> Self {
        ComplianceChecker {
            tables: Mutex::new(CacheTables::default()),
            counters: Counters::default(),
            workers: Arc::new(Semaphore::new(workers.max(1))),
            audit_every: audit_every.filter(|&n| n > 0),
            on_change: Box::new(|| {}),
        }
    }

    pub(crate) fn with_change_hook(mut self, hook: impl Fn() + Send + Sync + 'static) -> Self {
        self.on_change = Box::new(hook);
        self
    }

    pub fn stats(&self) -> CacheStats {
        let c = &self.counters;
        CacheStats {
            cache_hits: c.hits.load(Ordering::SeqCst),
            cache_misses: c.misses.load(Ordering::SeqCst),
            checks_run: c.checks.load(Ordering::SeqCst),
            audits_run: c.audits.load(Ordering::SeqCst),
            audit_mismatches: c.mismatches.load(Ordering::SeqCst),
        }
    }

    pub fn cached(&self, requirement: &ContractHash, provider: &ContractHash) -> Option<bool> {
        self.tables
            .lock()
            .entries
            .get(&(requirement.clone(), provider.clone()))
            .map(|e| e.compatible)
    }

    pub fn entry_count(&self) -> usize {
        self.tables.lock().entries.len()
    }

    /// Is `provider` a valid substitute for `requirement`? The provider's
    /// contract is first renamed to the requirement's role.
    pub async fn check(&self, requirement: &Cfsm, provider: &ProviderRecord) -> bool {
        let renamed = match provider.contract.rename_self(requirement.name()) {
            Ok(m) => m,
            Err(e) => {
                tracing::warn!(
                    provider_id = %provider.provider_id,
                    role = %requirement.name(),
                    error = %e,
                    "provider contract cannot take the role"
                );
                return false;
            }
        };
        let req_hash = contract_hash(requirement);
        let prov_hash = contract_hash(&renamed);

        if let Some(compatible) = self.cached(&req_hash, &prov_hash) {
            let hits = self.counters.hits.fetch_add(1, Ordering::SeqCst) + 1;
            if self.audit_every.is_some_and(|n| hits % n == 0) {
                self.audit(requirement, &renamed, compatible).await;
            }
            return compatible;
        }
        self.counters.misses.fetch_add(1, Ordering::SeqCst);

        let compatible = self.run_bisimilarity(requirement, &renamed).await;
        self.counters.checks.fetch_add(1, Ordering::SeqCst);
        tracing::debug!(
            provider_id = %provider.provider_id,
            role = %requirement.name(),
            compatible,
            "compliance check"
        );
        {
            let mut tables = self.tables.lock();
            tables
                .requirements
                .entry(req_hash.clone())
                .or_insert_with(|| canonicalize(requirement).text);
            tables.entries.insert(
                (req_hash.clone(), prov_hash.clone()),
                CacheEntry {
                    requirement_hash: req_hash.as_str().to_owned(),
                    provider_hash: prov_hash.as_str().to_owned(),
                    compatible,
                    checked_at: crate::now_ms(),
                },
            );
        }
        (self.on_change)();
        compatible
    }

    async fn run_bisimilarity(&self, a: &Cfsm, b: &Cfsm) -> bool {
        let _permit = self.workers.acquire().await.expect("semaphore never closed");
        let (a, b) = (a.clone(), b.clone());
        tokio::task::spawn_blocking(move || bisimilar(&a, &b))
            .await
            .expect("bisimilarity check panicked")
    }

    async fn audit(&self, requirement: &Cfsm, renamed: &Cfsm, cached: bool) {
        self.counters.audits.fetch_add(1, Ordering::SeqCst);
        let fresh = self.run_bisimilarity(requirement, renamed).await;
        if fresh != cached {
            self.counters.mismatches.fetch_add(1, Ordering::SeqCst);
            tracing::error!(role = %requirement.name(), cached, fresh, "cache audit mismatch");
        }
    }

    pub(crate) fn tables(&self) -> parking_lot::MutexGuard<'_, CacheTables> {
        self.tables.lock()
    }
}
