use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use cfsm::{contract_hash, parse_cfsm, parse_global_contract, Cfsm, ContractHash};
use futures::future::join_all;
use parking_lot::Mutex;
use search_wire::{BrokerChannelRequest, BrokerChannelResponse, Failure, TcpUri};
use tokio::sync::Notify;
use tokio_util::sync::CancellationToken;
use uuid::Uuid;

use crate::compliance::{CacheStats, ComplianceChecker};
use crate::config::BrokerConfig;
use crate::error::BrokerError;
use crate::init::{two_phase_init, InitFailureKind, InitPlan};
use crate::registry::{AllProviders, CandidateStrategy, ProviderRecord, Registry};
use crate::store::{self, Snapshot, StoredProvider, StoredRequirement};

/// A successful brokerage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Brokerage {
    pub session_id: Uuid,
    /// Chosen provider for every role except the initiator.
    pub assignments: BTreeMap<String, ProviderRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BrokerageFailure {
    InvalidContract(String),
    InvalidUri(String),
    UnknownRole(String),
    NoCandidate(String),
    InitRejected(String),
    Unreachable(String),
}

impl BrokerageFailure {
    pub fn code(&self) -> &'static str {
        match self {
            BrokerageFailure::InvalidContract(_) => "InvalidContract",
            BrokerageFailure::InvalidUri(_) => "InvalidUri",
            BrokerageFailure::UnknownRole(_) => "UnknownRole",
            BrokerageFailure::NoCandidate(_) => "NoCandidate",
            BrokerageFailure::InitRejected(_) => "InitRejected",
            BrokerageFailure::Unreachable(_) => "Unreachable",
        }
    }

    pub fn role(&self) -> Option<&str> {
        match self {
            BrokerageFailure::UnknownRole(r)
            | BrokerageFailure::NoCandidate(r)
            | BrokerageFailure::InitRejected(r)
            | BrokerageFailure::Unreachable(r) => Some(r),
            BrokerageFailure::InvalidContract(_) | BrokerageFailure::InvalidUri(_) => None,
        }
    }

    pub fn to_failure(&self) -> Failure {
        Failure {
            code: self.code().to_owned(),
            detail: self.to_string(),
            role: self.role().map(str::to_owned),
        }
    }
}

impl fmt::Display for BrokerageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BrokerageFailure::InvalidContract(e) => write!(f, "invalid global contract: {e}"),
            BrokerageFailure::InvalidUri(e) => write!(f, "{e}"),
            BrokerageFailure::UnknownRole(r) => write!(f, "role `{r}` is not part of the contract"),
            BrokerageFailure::NoCandidate(r) => write!(f, "no compliant provider for role `{r}`"),
            BrokerageFailure::InitRejected(r) => write!(f, "every candidate for role `{r}` rejected the session"),
            BrokerageFailure::Unreachable(r) => write!(f, "no candidate for role `{r}` could be reached"),
        }
    }
}

impl std::error::Error for BrokerageFailure {}

pub fn brokerage_response(outcome: &Result<Brokerage, BrokerageFailure>) -> BrokerChannelResponse {
    match outcome {
        Ok(b) => BrokerChannelResponse::Assigned {
            session_id: b.session_id,
            assignments: b
                .assignments
                .iter()
                .map(|(role, p)| (role.clone(), p.uri.to_string()))
                .collect(),
        },
        Err(f) => BrokerChannelResponse::Failed { error: f.to_failure() },
    }
}

pub struct Broker {
    config: BrokerConfig,
    registry: Mutex<Registry>,
    strategy: Box<dyn CandidateStrategy>,
    checker: ComplianceChecker,
    dirty: Arc<Notify>,
    save_lock: tokio::sync::Mutex<()>,
}

impl Broker {
    /// Opens a broker with the default candidate strategy, loading any
    /// existing snapshot from `config.db_path`.
    pub fn open(config: BrokerConfig) -> Result<Arc<Broker>, BrokerError> {
        Self::with_strategy(config, Box::new(AllProviders))
    }

    pub fn with_strategy(
        config: BrokerConfig,
        strategy: Box<dyn CandidateStrategy>,
    ) -> Result<Arc<Broker>, BrokerError> {
        let dirty = Arc::new(Notify::new());
        let hook = Arc::clone(&dirty);
        let checker = ComplianceChecker::new(config.workers, config.audit_every)
            .with_change_hook(move || hook.notify_one());
        let broker = Broker {
            registry: Mutex::new(Registry::default()),
            strategy,
            checker,
            dirty,
            save_lock: tokio::sync::Mutex::new(()),
            config,
        };
        if let Some(path) = &broker.config.db_path {
            if let Some(snapshot) = store::load(path)? {
                broker.restore(snapshot)?;
            }
        }
        Ok(Arc::new(broker))
    }

    pub fn config(&self) -> &BrokerConfig {
        &self.config
    }

    fn restore(&self, snapshot: Snapshot) -> Result<(), BrokerError> {
        let mut registry = self.registry.lock();
        for p in snapshot.providers {
            let contract = parse_cfsm(&p.contract)?;
            registry.insert(ProviderRecord {
                provider_id: p.provider_id,
                contract_hash: contract_hash(&contract),
                contract: Arc::new(contract),
                uri: TcpUri::parse(&p.uri)?,
                registered_at: p.registered_at,
            });
        }
        let mut tables = self.checker.tables();
        for r in snapshot.requirements {
            if let Some(h) = ContractHash::from_hex(&r.hash) {
                tables.requirements.insert(h, r.canonical);
            }
        }
        for e in snapshot.compatibility {
            if let (Some(rh), Some(ph)) = (
                ContractHash::from_hex(&e.requirement_hash),
                ContractHash::from_hex(&e.provider_hash),
            ) {
                tables.entries.insert((rh, ph), e);
            }
        }
        Ok(())
    }

    fn snapshot(&self) -> Snapshot {
        let providers = self
            .registry
            .lock()
            .providers()
            .iter()
            .map(|p| StoredProvider {
                provider_id: p.provider_id,
                contract: p.contract.to_string(),
                contract_hash: p.contract_hash.to_string(),
                uri: p.uri.to_string(),
                registered_at: p.registered_at,
            })
            .collect();
        let tables = self.checker.tables();
        let mut requirements: Vec<_> = tables
            .requirements
            .iter()
            .map(|(h, text)| StoredRequirement { hash: h.to_string(), canonical: text.clone() })
            .collect();
        requirements.sort_by(|a, b| a.hash.cmp(&b.hash));
        let mut compatibility: Vec<_> = tables.entries.values().cloned().collect();
        compatibility.sort_by(|a, b| {
            (&a.requirement_hash, &a.provider_hash).cmp(&(&b.requirement_hash, &b.provider_hash))
        });
        Snapshot { providers, requirements, compatibility }
    }

    /// Writes the current state to disk, if a store is configured.
    pub async fn flush(&self) -> std::io::Result<()> {
        let Some(path) = self.config.db_path.clone() else {
            return Ok(());
        };
        let _guard = self.save_lock.lock().await;
        let snapshot = self.snapshot();
        tokio::task::spawn_blocking(move || store::save(&path, &snapshot))
            .await
            .map_err(std::io::Error::other)?
    }

    /// Persists in the background whenever the repository or cache changes.
    pub fn spawn_persister(self: &Arc<Self>, shutdown: CancellationToken) -> tokio::task::JoinHandle<()> {
        let broker = Arc::clone(self);
        tokio::spawn(async move {
            loop {
                tokio::select! {
                    _ = broker.dirty.notified() => {}
                    _ = shutdown.cancelled() => break,
                }
                if let Err(e) = broker.flush().await {
                    tracing::error!(error = %e, "failed to persist broker state");
                }
            }
            if let Err(e) = broker.flush().await {
                tracing::error!(error = %e, "failed to persist broker state");
            }
        })
    }

    pub fn register_provider(&self, contract: &str, uri: &str) -> Result<ProviderRecord, BrokerError> {
        let contract = parse_cfsm(contract)?;
        let uri = TcpUri::parse(uri)?;
        Ok(self.register_provider_contract(contract, uri))
    }

    /// Idempotent on `(contract_hash, uri)`.
    pub fn register_provider_contract(&self, contract: Cfsm, uri: TcpUri) -> ProviderRecord {
        let (record, fresh) = self.registry.lock().register(contract, uri, crate::now_ms());
        if fresh {
            self.dirty.notify_one();
        }
        tracing::info!(
            provider_id = %record.provider_id,
            uri = %record.uri,
            contract_hash = %record.contract_hash,
            fresh,
            "provider registered"
        );
        record
    }

    pub fn providers(&self) -> Vec<ProviderRecord> {
        self.registry.lock().providers().to_vec()
    }

    pub fn find_candidates(&self, requirement: &Cfsm) -> Vec<ProviderRecord> {
        let providers = self.providers();
        self.strategy.candidates(requirement, &providers)
    }

    pub async fn check_compliance(&self, requirement: &Cfsm, provider: &ProviderRecord) -> bool {
        self.checker.check(requirement, provider).await
    }

    pub fn cache_stats(&self) -> CacheStats {
        self.checker.stats()
    }

    pub fn checker(&self) -> &ComplianceChecker {
        &self.checker
    }

    /// First compliant candidate in candidate order, skipping `excluded`.
    /// Checks for all candidates run concurrently.
    pub async fn select(&self, requirement: &Cfsm, excluded: &HashSet<Uuid>) -> Option<ProviderRecord> {
        let candidates: Vec<_> = self
            .find_candidates(requirement)
            .into_iter()
            .filter(|p| !excluded.contains(&p.provider_id))
            .collect();
        let verdicts = join_all(candidates.iter().map(|p| self.check_compliance(requirement, p))).await;
        candidates
            .into_iter()
            .zip(verdicts)
            .find_map(|(p, ok)| ok.then_some(p))
    }

    /// Finds a compliant provider for every non-initiator role and opens the
    /// session with them. A provider failing initiation is skipped and the
    /// role is re-brokered, up to the retry budget.
    pub async fn broker_channel(&self, req: &BrokerChannelRequest) -> Result<Brokerage, BrokerageFailure> {
        let contract = parse_global_contract(&req.global_contract)
            .map_err(|e| BrokerageFailure::InvalidContract(e.to_string()))?;
        if !contract.contains_role(&req.initiator_role) {
            return Err(BrokerageFailure::UnknownRole(req.initiator_role.clone()));
        }
        let initiator_uri =
            TcpUri::parse(&req.initiator_uri).map_err(|e| BrokerageFailure::InvalidUri(e.to_string()))?;
        let session_id = Uuid::new_v4();
        tracing::info!(
            session_id = %session_id,
            initiator_role = %req.initiator_role,
            initiator_uri = %initiator_uri,
            "brokerage started"
        );

        let roles: Vec<&Cfsm> = contract
            .machines()
            .filter(|m| m.name().as_str() != req.initiator_role)
            .collect();
        let mut excluded: HashMap<&str, HashSet<Uuid>> = HashMap::new();
        let mut last_failure: HashMap<&str, BrokerageFailure> = HashMap::new();
        let mut failed = None;

        for attempt in 0..=self.config.retry_budget {
            let mut assignments = BTreeMap::new();
            for requirement in &roles {
                let role = requirement.name().as_str();
                let skip = excluded.entry(role).or_default();
                match self.select(requirement, skip).await {
                    Some(p) => {
                        tracing::info!(
                            session_id = %session_id,
                            role,
                            provider_id = %p.provider_id,
                            uri = %p.uri,
                            attempt,
                            "provider selected"
                        );
                        assignments.insert(role.to_owned(), p);
                    }
                    None => {
                        let failure = last_failure
                            .remove(role)
                            .unwrap_or_else(|| BrokerageFailure::NoCandidate(role.to_owned()));
                        tracing::warn!(session_id = %session_id, role, reason = %failure, "brokerage failed");
                        return Err(failure);
                    }
                }
            }

            let plan = InitPlan {
                session_id,
                global_contract: req.global_contract.clone(),
                providers: assignments.iter().map(|(r, p)| (r.clone(), p.uri.clone())).collect(),
                initiator_role: req.initiator_role.clone(),
                initiator_uri: initiator_uri.clone(),
            };
            match two_phase_init(&plan, self.config.init_timeout).await {
                Ok(()) => {
                    tracing::info!(session_id = %session_id, attempt, "brokerage succeeded");
                    return Ok(Brokerage { session_id, assignments });
                }
                Err(failures) => {
                    for f in failures {
                        tracing::warn!(session_id = %session_id, role = %f.role, kind = ?f.kind, detail = %f.detail, "init failed");
                        let role = roles
                            .iter()
                            .map(|m| m.name().as_str())
                            .find(|r| *r == f.role)
                            .expect("failures name assigned roles");
                        excluded.entry(role).or_default().insert(assignments[role].provider_id);
                        let failure = match f.kind {
                            InitFailureKind::Unreachable => BrokerageFailure::Unreachable(f.role),
                            InitFailureKind::Rejected => BrokerageFailure::InitRejected(f.role),
                        };
                        failed = Some(failure.clone());
                        last_failure.insert(role, failure);
                    }
                }
            }
        }
        let failure = failed.expect("loop exits early unless init failed");
        tracing::warn!(session_id = %session_id, reason = %failure, "retry budget exhausted");
        Err(failure)
    }

    pub async fn broker_channel_response(&self, req: &BrokerChannelRequest) -> BrokerChannelResponse {
        brokerage_response(&self.broker_channel(req).await)
    }
}
