use std::path::PathBuf;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    /// Snapshot file for the repository and the compliance cache. `None`
    /// keeps everything in memory.
    pub db_path: Option<PathBuf>,
    /// Connect and reply deadline for each InitChannel/StartChannel call.
    pub init_timeout: Duration,
    /// How many times brokerage is re-attempted after an init failure.
    pub retry_budget: usize,
    /// Maximum number of bisimilarity checks running at once.
    pub workers: usize,
    /// Re-verify every n-th cache hit against a fresh computation.
    pub audit_every: Option<u64>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            db_path: None,
            init_timeout: Duration::from_secs(5),
            retry_budget: 3,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
            audit_every: None,
        }
    }
}
