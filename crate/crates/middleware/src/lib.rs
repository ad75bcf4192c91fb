//! Per-host middleware. Applications talk to its private interface; peer
//! middlewares and the broker talk to its public one. Channels are bound to
//! sessions lazily on first use, and messages between two roles are
//! delivered in FIFO order over a per-sender stream.

mod channel;
mod client;
mod config;
mod error;
mod node;
mod server;
mod session;

use std::sync::Arc;

use search_wire::TcpUri;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;
use tokio_util::task::TaskTracker;

pub use client::{AppClient, ClientError, SessionNotice};
pub use config::{MiddlewareConfig, PumpJitter, RetryPolicy};
pub use error::MwError;
pub use node::Middleware;
pub use session::{Delivery, SessionState};

/// A middleware with both interfaces listening.
pub struct RunningMiddleware {
    pub node: Arc<Middleware>,
    pub private_uri: TcpUri,
    pub public_uri: TcpUri,
    shutdown: CancellationToken,
    tracker: TaskTracker,
}

impl RunningMiddleware {
    /// Binds both listeners and starts serving.
    pub async fn start(config: MiddlewareConfig) -> std::io::Result<Self> {
        let private = TcpListener::bind(config.private_addr.authority()).await?;
        let public = TcpListener::bind(config.public_addr.authority()).await?;
        let private_uri = TcpUri::from_socket_addr(private.local_addr()?);
        let bound_public = TcpUri::from_socket_addr(public.local_addr()?);
        let public_uri = config.advertised.clone().unwrap_or(bound_public);
        let shutdown = CancellationToken::new();
        let tracker = TaskTracker::new();
        let node = Arc::new(Middleware::new(config, public_uri.clone(), shutdown.clone()));
        tracker.spawn(server::accept_loop(Arc::clone(&node), private, false, shutdown.clone(), tracker.clone()));
        tracker.spawn(server::accept_loop(Arc::clone(&node), public, true, shutdown.clone(), tracker.clone()));
        tracing::info!(private = %private_uri, public = %public_uri, "middleware listening");
        Ok(RunningMiddleware { node, private_uri, public_uri, shutdown, tracker })
    }

    /// Cancellation token that stops the listeners, connections and pumps.
    pub fn shutdown_token(&self) -> CancellationToken {
        self.shutdown.clone()
    }

    /// Stops everything and waits for connection tasks to finish.
    pub async fn shutdown(self) {
        self.shutdown.cancel();
        self.tracker.close();
        self.tracker.wait().await;
    }
}
