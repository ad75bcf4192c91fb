use std::time::Duration;

use search_wire::TcpUri;

/// Exponential backoff for outbound streams: `base`, doubled per failure up
/// to `cap`, giving up after `budget` consecutive failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub cap: Duration,
    pub budget: u32,
}

impl RetryPolicy {
    pub fn delay(&self, failures: u32) -> Duration {
        let factor = 1u32.checked_shl(failures.saturating_sub(1)).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            base: Duration::from_millis(100),
            cap: Duration::from_secs(5),
            budget: 8,
        }
    }
}

/// Random pauses in the outbox pumps, for shaking out ordering bugs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpJitter {
    /// Chance of pausing before a write.
    pub probability: f64,
    pub max_delay: Duration,
}

#[derive(Debug, Clone)]
pub struct MiddlewareConfig {
    /// Listen address of the private (app-facing) interface.
    pub private_addr: TcpUri,
    /// Listen address of the public interface. Port 0 picks a free port.
    pub public_addr: TcpUri,
    /// URI announced to the broker and peers. Defaults to the bound public
    /// address.
    pub advertised: Option<TcpUri>,
    pub broker: TcpUri,
    /// Deadline for a whole brokerage round trip.
    pub brokerage_timeout: Duration,
    /// Deadline for provider registration with the broker.
    pub broker_timeout: Duration,
    pub retry: RetryPolicy,
    /// How long an incoming stream may wait for its session to appear.
    pub session_grace: Duration,
    /// Sessions this middleware accepts before refusing InitChannel.
    pub max_sessions: usize,
    pub jitter: Option<PumpJitter>,
}

impl MiddlewareConfig {
    pub fn new(private_addr: TcpUri, public_addr: TcpUri, broker: TcpUri) -> Self {
        MiddlewareConfig {
            private_addr,
            public_addr,
            advertised: None,
            broker,
            brokerage_timeout: Duration::from_secs(30),
            broker_timeout: Duration::from_secs(5),
            retry: RetryPolicy::default(),
            session_grace: Duration::from_secs(10),
            max_sessions: 4096,
            jitter: None,
        }
    }
}
