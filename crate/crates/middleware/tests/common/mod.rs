#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use search_broker::{serve, Broker, BrokerConfig};
use search_middleware::{MiddlewareConfig, RetryPolicy, RunningMiddleware};
use search_wire::{
    read_message, write_message, BrokerChannelRequest, BrokerChannelResponse, Message, RegisterProviderResponse,
    TcpUri,
};
use tokio::net::TcpListener;
use tokio::task::JoinSet;
use tokio_util::sync::CancellationToken;
use uuid::Uuid;

pub const PAYMENT: &str = include_str!("../../../../contracts/payment.gc");
pub const SELLER: &str = include_str!("../../../../contracts/seller.fsm");
pub const PPS: &str = include_str!("../../../../contracts/pps.fsm");

/// A sends `Msg` to B forever.
pub const STREAM: &str = "\
.machine A
.initial s
s A B ! Msg s
.end
.machine B
.initial s
s B A ? Msg s
.end
";

pub const SINK: &str = "\
.machine Sink
.initial s
s Sink A ? Msg s
.end
";

/// A sends `ToB` to B and `ToC` to C, in any interleaving.
pub const FANOUT: &str = "\
.machine A
.initial s
s A B ! ToB s
s A C ! ToC s
.end
.machine B
.initial s
s B A ? ToB s
.end
.machine C
.initial s
s C A ? ToC s
.end
";

pub const SINK_B: &str = "\
.machine SinkB
.initial s
s SinkB A ? ToB s
.end
";

pub const SINK_C: &str = "\
.machine SinkC
.initial s
s SinkC A ? ToC s
.end
";

pub fn loopback() -> TcpUri {
    TcpUri::parse("tcp://127.0.0.1:0").unwrap()
}

pub struct RealBroker {
    pub broker: Arc<Broker>,
    pub uri: TcpUri,
    token: CancellationToken,
}

impl Drop for RealBroker {
    fn drop(&mut self) {
        self.token.cancel();
    }
}

pub async fn real_broker() -> RealBroker {
    let broker = Broker::open(BrokerConfig { init_timeout: Duration::from_secs(2), ..BrokerConfig::default() }).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
    let token = CancellationToken::new();
    tokio::spawn(serve(Arc::clone(&broker), listener, token.clone()));
    RealBroker { broker, uri, token }
}

pub fn config(broker: &TcpUri) -> MiddlewareConfig {
    let mut config = MiddlewareConfig::new(loopback(), loopback(), broker.clone());
    config.retry = RetryPolicy {
        base: Duration::from_millis(20),
        cap: Duration::from_millis(200),
        budget: 8,
    };
    config.session_grace = Duration::from_secs(2);
    config.brokerage_timeout = Duration::from_secs(10);
    config
}

pub async fn middleware(broker: &TcpUri) -> RunningMiddleware {
    RunningMiddleware::start(config(broker)).await.unwrap()
}

type Reply = dyn Fn(&BrokerChannelRequest) -> BrokerChannelResponse + Send + Sync;

/// Scripted broker: registers anything and answers brokerage requests with
/// `reply` after `delay`, counting them.
pub struct FakeBroker {
    pub uri: TcpUri,
    pub brokerage_requests: Arc<AtomicUsize>,
    pub registrations: Arc<AtomicUsize>,
    task: tokio::task::JoinHandle<()>,
}

impl Drop for FakeBroker {
    fn drop(&mut self) {
        self.task.abort();
    }
}

impl FakeBroker {
    pub async fn spawn(delay: Duration, reply: Arc<Reply>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
        let brokerage_requests = Arc::new(AtomicUsize::new(0));
        let registrations = Arc::new(AtomicUsize::new(0));
        let (b, r) = (Arc::clone(&brokerage_requests), Arc::clone(&registrations));
        let task = tokio::spawn(async move {
            loop {
                let Ok((mut stream, _)) = listener.accept().await else { return };
                let (b, r, reply) = (Arc::clone(&b), Arc::clone(&r), Arc::clone(&reply));
                tokio::spawn(async move {
                    while let Ok(Some(msg)) = read_message(&mut stream).await {
                        let answer: Message = match msg {
                            Message::RegisterProviderRequest(_) => {
                                r.fetch_add(1, Ordering::SeqCst);
                                RegisterProviderResponse::Registered { provider_id: Uuid::new_v4() }.into()
                            }
                            Message::BrokerChannelRequest(req) => {
                                b.fetch_add(1, Ordering::SeqCst);
                                tokio::time::sleep(delay).await;
                                reply(&req).into()
                            }
                            other => panic!("fake broker got {other:?}"),
                        };
                        if write_message(&mut stream, &answer).await.is_err() {
                            return;
                        }
                    }
                });
            }
        });
        FakeBroker { uri, brokerage_requests, registrations, task }
    }

    /// Assigns every brokerage to the fixed `assignments`.
    pub async fn assigning(delay: Duration, assignments: Vec<(&str, &TcpUri)>) -> Self {
        let map: std::collections::BTreeMap<String, String> =
            assignments.into_iter().map(|(r, u)| (r.to_owned(), u.to_string())).collect();
        Self::spawn(
            delay,
            Arc::new(move |_| BrokerChannelResponse::Assigned { session_id: Uuid::new_v4(), assignments: map.clone() }),
        )
        .await
    }
}

/// A stand-in peer middleware on a fixed port that records every frame of
/// every message stream, and can be killed and restarted.
pub struct FakePeer {
    pub uri: TcpUri,
    pub frames: Arc<Mutex<Vec<Message>>>,
    /// Stop reading after the header, so writes back up.
    stall: bool,
    tasks: JoinSet<()>,
}

impl FakePeer {
    pub async fn spawn(stall: bool) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
        let mut peer = FakePeer { uri, frames: Arc::default(), stall, tasks: JoinSet::new() };
        peer.run(listener);
        peer
    }

    fn run(&mut self, listener: TcpListener) {
        let frames = Arc::clone(&self.frames);
        let stall = self.stall;
        self.tasks.spawn(async move {
            let mut conns = JoinSet::new();
            loop {
                let Ok((mut stream, _)) = listener.accept().await else { return };
                let frames = Arc::clone(&frames);
                conns.spawn(async move {
                    while let Ok(Some(msg)) = read_message(&mut stream).await {
                        let header = matches!(msg, Message::MessageExchangeHeader(_));
                        frames.lock().push(msg);
                        if header && stall {
                            std::future::pending::<()>().await;
                        }
                    }
                });
            }
        });
    }

    /// Drops the listener and every open connection.
    pub async fn kill(&mut self) {
        self.tasks.shutdown().await;
    }

    pub async fn restart(&mut self) {
        let listener = TcpListener::bind(self.uri.authority()).await.unwrap();
        self.run(listener);
    }

    pub fn seqs(&self) -> Vec<u64> {
        self.frames
            .lock()
            .iter()
            .filter_map(|m| match m {
                Message::MessageExchange(m) => Some(m.seq),
                _ => None,
            })
            .collect()
    }
}

/// Polls `cond` every 10 ms until it holds or `within` elapses.
pub async fn eventually(within: Duration, mut cond: impl FnMut() -> bool) -> bool {
    let deadline = tokio::time::Instant::now() + within;
    while tokio::time::Instant::now() < deadline {
        if cond() {
            return true;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    cond()
}
