//! Provider repository and candidate lookup strategies.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use cfsm::{contract_hash, Cfsm, ContractHash};
use parking_lot::Mutex;
use search_wire::TcpUri;
use uuid::Uuid;

/// A registered provision contract and the middleware URI serving it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderRecord {
    pub provider_id: Uuid,
    pub contract: Arc<Cfsm>,
    pub contract_hash: ContractHash,
    pub uri: TcpUri,
    /// Milliseconds since the Unix epoch, strictly increasing across records.
    pub registered_at: u64,
}

impl ProviderRecord {
    fn order_key(&self) -> (u64, Uuid) {
        (self.registered_at, self.provider_id)
    }
}

#[derive(Debug, Default)]
pub struct Registry {
    providers: Vec<ProviderRecord>,
    by_key: HashMap<(ContractHash, TcpUri), usize>,
}

impl Registry {
    /// Adds a provider unless `(contract, uri)` is already known. Returns the
    /// record and whether it is new.
    pub fn register(&mut self, contract: Cfsm, uri: TcpUri, now_ms: u64) -> (ProviderRecord, bool) {
        let hash = contract_hash(&contract);
        let key = (hash.clone(), uri.clone());
        if let Some(&i) = self.by_key.get(&key) {
            return (self.providers[i].clone(), false);
        }
        let registered_at = self
            .providers
            .last()
            .map_or(now_ms, |p| now_ms.max(p.registered_at + 1));
        let record = ProviderRecord {
            provider_id: Uuid::new_v4(),
            contract: Arc::new(contract),
            contract_hash: hash,
            uri,
            registered_at,
        };
        self.insert(record.clone());
        (record, true)
    }

    /// Inserts a record loaded from disk, keeping registration order.
    pub(crate) fn insert(&mut self, record: ProviderRecord) {
        let key = (record.contract_hash.clone(), record.uri.clone());
        self.providers.push(record);
        self.providers.sort_by_key(ProviderRecord::order_key);
        self.by_key = self
            .providers
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.contract_hash.clone(), p.uri.clone()), i))
            .collect();
        debug_assert!(self.by_key.contains_key(&key));
    }

    /// All providers ordered by `registered_at`, then `provider_id`.
    pub fn providers(&self) -> &[ProviderRecord] {
        &self.providers
    }

    pub fn len(&self) -> usize {
        self.providers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.providers.is_empty()
    }
}

/// Chooses which providers are worth a compliance check for a requirement.
/// Implementations must preserve the relative order of `providers`.
pub trait CandidateStrategy: Send + Sync {
    fn candidates(&self, requirement: &Cfsm, providers: &[ProviderRecord]) -> Vec<ProviderRecord>;
}

/// Every registered provider, in registration order.
#[derive(Debug, Default, Clone, Copy)]
pub struct AllProviders;

impl CandidateStrategy for AllProviders {
    fn candidates(&self, _requirement: &Cfsm, providers: &[ProviderRecord]) -> Vec<ProviderRecord> {
        providers.to_vec()
    }
}

/// Providers whose contract mentions at least one message label of the
/// requirement. Label sets are memoised per provider.
#[derive(Debug, Default)]
pub struct LabelIndex {
    labels: Mutex<HashMap<Uuid, BTreeSet<String>>>,
}

impl LabelIndex {
    pub fn new() -> Self {
        Self::default()
    }
}

impl CandidateStrategy for LabelIndex {
    fn candidates(&self, requirement: &Cfsm, providers: &[ProviderRecord]) -> Vec<ProviderRecord> {
        let wanted: BTreeSet<&str> = requirement.labels().into_iter().map(|l| l.as_str()).collect();
        let mut index = self.labels.lock();
        providers
            .iter()
            .filter(|p| {
                let labels = index.entry(p.provider_id).or_insert_with(|| {
                    p.contract.labels().into_iter().map(|l| l.as_str().to_owned()).collect()
                });
                labels.iter().any(|l| wanted.contains(l.as_str()))
            })
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(name: &str, label: &str) -> Cfsm {
        Cfsm::builder(name, "q0").send("q0", "B", label, "q1").build().unwrap()
    }

    fn uri(port: u16) -> TcpUri {
        TcpUri::parse(&format!("tcp://127.0.0.1:{port}")).unwrap()
    }

    #[test]
    fn idempotent_on_contract_and_uri() {
        let mut r = Registry::default();
        let (a, fresh) = r.register(machine("A", "x"), uri(1), 10);
        assert!(fresh);
        let (b, fresh) = r.register(machine("A", "x"), uri(1), 20);
        assert!(!fresh);
        assert_eq!(a.provider_id, b.provider_id);
        let (c, fresh) = r.register(machine("A", "x"), uri(2), 20);
        assert!(fresh);
        assert_ne!(a.provider_id, c.provider_id);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn registration_times_strictly_increase() {
        let mut r = Registry::default();
        for (i, l) in ["x", "y", "z"].into_iter().enumerate() {
            r.register(machine("A", l), uri(i as u16), 5);
        }
        let times: Vec<_> = r.providers().iter().map(|p| p.registered_at).collect();
        assert_eq!(times, [5, 6, 7]);
    }
}
