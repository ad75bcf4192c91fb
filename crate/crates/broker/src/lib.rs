//! The service broker.
//!
//! Keeps a repository of provider contracts, checks candidates against a
//! channel's requirement contracts by bisimilarity (with a persistent result
//! cache), and opens sessions with the chosen providers in two phases.

mod broker;
mod compliance;
mod config;
mod error;
mod init;
mod registry;
mod server;
mod store;

pub use broker::{brokerage_response, Broker, Brokerage, BrokerageFailure};
pub use compliance::{CacheEntry, CacheStats, ComplianceChecker};
pub use config::BrokerConfig;
pub use error::BrokerError;
pub use init::{request, two_phase_init, InitFailure, InitFailureKind, InitPlan};
pub use registry::{AllProviders, CandidateStrategy, LabelIndex, ProviderRecord, Registry};
pub use server::serve;
pub use store::{load as load_snapshot, Snapshot};

pub(crate) fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}
