#![allow(dead_code)]

use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use search_broker::{serve, Broker, BrokerConfig};
use search_middleware::{MiddlewareConfig, RunningMiddleware};
use search_wire::TcpUri;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_search"));
    cmd.env_remove("SEARCH_LOG").env("RUST_LOG", "warn");
    cmd
}

pub fn search(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn contract_file(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "contracts", name].iter().collect();
    path.to_string_lossy().into_owned()
}

pub fn free_port() -> u16 {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

pub fn local(port: u16) -> String {
    format!("tcp://127.0.0.1:{port}")
}

/// Blocks until something accepts connections on `port`.
pub fn wait_port(port: u16, within: Duration) -> bool {
    let deadline = Instant::now() + within;
    while Instant::now() < deadline {
        if TcpStream::connect(("127.0.0.1", port)).is_ok() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    false
}

/// A child process killed when dropped.
pub struct Daemon(Option<Child>);

impl Daemon {
    pub fn spawn(args: &[&str]) -> Self {
        Self::from_child(bin().args(args).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap())
    }

    pub fn from_child(child: Child) -> Self {
        Daemon(Some(child))
    }

    fn child(&mut self) -> &mut Child {
        self.0.as_mut().expect("child present until waited")
    }

    pub fn signal(&mut self, sig: &str) {
        let pid = self.child().id().to_string();
        let status = Command::new("kill").args([sig, &pid]).status().unwrap();
        assert!(status.success());
    }

    /// Waits for the process to exit on its own.
    pub fn wait(mut self, within: Duration) -> Option<Output> {
        let deadline = Instant::now() + within;
        while Instant::now() < deadline {
            if self.child().try_wait().unwrap().is_some() {
                return self.0.take().map(|c| c.wait_with_output().unwrap());
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        None
    }
}

impl Drop for Daemon {
    fn drop(&mut self) {
        if let Some(child) = &mut self.0 {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Broker and three middlewares in this process.
pub struct Infra {
    pub broker: Arc<Broker>,
    pub broker_uri: TcpUri,
    pub client: RunningMiddleware,
    pub seller: RunningMiddleware,
    pub pps: RunningMiddleware,
    token: CancellationToken,
}

impl Drop for Infra {
    fn drop(&mut self) {
        self.token.cancel();
        self.client.shutdown_token().cancel();
        self.seller.shutdown_token().cancel();
        self.pps.shutdown_token().cancel();
    }
}

pub async fn infra() -> Infra {
    let broker = Broker::open(BrokerConfig { init_timeout: Duration::from_secs(2), ..BrokerConfig::default() }).unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let broker_uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
    let token = CancellationToken::new();
    tokio::spawn(serve(Arc::clone(&broker), listener, token.clone()));
    let any = TcpUri::parse("tcp://127.0.0.1:0").unwrap();
    let mut mws = Vec::new();
    for _ in 0..3 {
        let config = MiddlewareConfig::new(any.clone(), any.clone(), broker_uri.clone());
        mws.push(RunningMiddleware::start(config).await.unwrap());
    }
    let pps = mws.pop().unwrap();
    let seller = mws.pop().unwrap();
    let client = mws.pop().unwrap();
    Infra { broker, broker_uri, client, seller, pps, token }
}
