//! Argument parsing and dispatch for the `search` binary.

use std::ffi::OsString;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use search_broker::{serve, Broker, BrokerConfig};
use search_middleware::{MiddlewareConfig, RetryPolicy, RunningMiddleware};
use search_wire::TcpUri;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;

use crate::contract;
use crate::demo::{run_payment_demo, DemoOptions, Provider};
use crate::payment::{default_prices, run_client, ClientOptions, PaymentServiceApp, Recorder, SellerApp, PAYMENT_CONTRACT};

fn parse_uri(s: &str) -> Result<TcpUri, String> {
    TcpUri::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "search", version, about = "Contract-based service brokerage: broker, middleware, tools and demo")]
pub struct Cli {
    /// Log filter, e.g. `info` or `search_broker=debug`. Logs go to stderr as JSON.
    #[arg(long, global = true, env = "SEARCH_LOG", default_value = "info")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the broker.
    Broker(BrokerArgs),
    /// Run a middleware with its private and public interfaces.
    Middleware(MiddlewareArgs),
    /// Contract tooling.
    Contract {
        #[command(subcommand)]
        op: ContractOp,
    },
    /// Run a scripted end-to-end scenario.
    Demo {
        #[command(subcommand)]
        scenario: DemoScenario,
    },
    /// Run one of the example apps against a running middleware.
    App(AppArgs),
}

#[derive(Debug, Args)]
pub struct BrokerArgs {
    #[arg(long, env = "SEARCH_BROKER_LISTEN", default_value = "tcp://127.0.0.1:7000", value_parser = parse_uri)]
    pub listen: TcpUri,
    /// Snapshot file for providers and the compliance cache; in memory if absent.
    #[arg(long, env = "SEARCH_BROKER_DB")]
    pub db: Option<PathBuf>,
    /// Deadline for each InitChannel and StartChannel call, in milliseconds.
    #[arg(long, env = "SEARCH_BROKER_INIT_TIMEOUT_MS", default_value_t = 5000)]
    pub init_timeout_ms: u64,
    /// Brokerage attempts after an init failure.
    #[arg(long, env = "SEARCH_BROKER_RETRY_BUDGET", default_value_t = 3)]
    pub retry_budget: usize,
    /// Concurrent compliance checks; defaults to the number of CPUs.
    #[arg(long, env = "SEARCH_BROKER_WORKERS")]
    pub workers: Option<usize>,
    /// Re-verify every n-th cache hit.
    #[arg(long, env = "SEARCH_BROKER_AUDIT_EVERY")]
    pub audit_every: Option<u64>,
}

#[derive(Debug, Args)]
pub struct MiddlewareArgs {
    #[arg(long, env = "SEARCH_MW_PRIVATE", default_value = "tcp://127.0.0.1:7101", value_parser = parse_uri)]
    pub private: TcpUri,
    /// Public listen address, also announced to the broker and peers.
    #[arg(long, env = "SEARCH_MW_PUBLIC", default_value = "tcp://127.0.0.1:7102", value_parser = parse_uri)]
    pub public: TcpUri,
    /// Announce this URI instead of the public listen address.
    #[arg(long, env = "SEARCH_MW_ADVERTISE", value_parser = parse_uri)]
    pub advertise: Option<TcpUri>,
    #[arg(long, env = "SEARCH_MW_BROKER", value_parser = parse_uri)]
    pub broker: TcpUri,
    /// Reconnect attempts towards an unreachable peer before the session closes.
    #[arg(long, env = "SEARCH_MW_RETRY_BUDGET", default_value_t = 8)]
    pub retry_budget: u32,
    #[arg(long, env = "SEARCH_MW_RETRY_BASE_MS", default_value_t = 100)]
    pub retry_base_ms: u64,
    #[arg(long, env = "SEARCH_MW_RETRY_CAP_MS", default_value_t = 5000)]
    pub retry_cap_ms: u64,
}

#[derive(Debug, Subcommand)]
pub enum ContractOp {
    /// Explore the product of a global contract; "ok" or a counterexample.
    Check { file: PathBuf },
    /// SHA-256 of each machine's canonical form.
    Hash { file: PathBuf },
    /// Canonical text of each machine.
    Canon { file: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum DemoScenario {
    /// Buy a book: client, seller and payment service with one broker.
    Payment {
        /// Take this provider's middleware down right after it registered.
        #[arg(long, value_enum)]
        kill_provider: Option<Provider>,
        /// Serve the seller middleware's private interface here and wait for
        /// a seller started elsewhere.
        #[arg(long, value_parser = parse_uri)]
        external_seller: Option<TcpUri>,
        #[arg(long, default_value_t = 30)]
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AppKind {
    Client,
    Seller,
    Pps,
}

#[derive(Debug, Args)]
pub struct AppArgs {
    #[arg(value_enum)]
    pub kind: AppKind,
    /// Private interface of the local middleware.
    #[arg(long, env = "SEARCH_APP_MIDDLEWARE", value_parser = parse_uri)]
    pub middleware: TcpUri,
    /// Sessions to serve before exiting (seller and pps); 0 serves forever.
    #[arg(long, default_value_t = 0)]
    pub sessions: usize,
    /// Item the client buys.
    #[arg(long, default_value = "book")]
    pub item: String,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    crate::logging::init(&cli.log_level);
    if let Command::Contract { op } = &cli.command {
        return run_contract(op);
    }
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return 1;
        }
    };
    runtime.block_on(async move {
        match cli.command {
            Command::Broker(args) => run_broker(args).await,
            Command::Middleware(args) => run_middleware(args).await,
            Command::Demo { scenario } => run_demo(scenario).await,
            Command::App(args) => run_app(args).await,
            Command::Contract { .. } => unreachable!("handled above"),
        }
    })
}

fn run_contract(op: &ContractOp) -> i32 {
    let (file, f): (&PathBuf, fn(&str) -> Result<contract::Outcome, cfsm::Error>) = match op {
        ContractOp::Check { file } => (file, contract::check),
        ContractOp::Hash { file } => (file, contract::hash),
        ContractOp::Canon { file } => (file, contract::canon),
    };
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return 1;
        }
    };
    match f(&text) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            1
        }
    }
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

async fn run_broker(args: BrokerArgs) -> i32 {
    let mut config = BrokerConfig {
        db_path: args.db,
        init_timeout: Duration::from_millis(args.init_timeout_ms),
        retry_budget: args.retry_budget,
        audit_every: args.audit_every,
        ..BrokerConfig::default()
    };
    if let Some(workers) = args.workers {
        config.workers = workers.max(1);
    }
    let broker = match Broker::open(config) {
        Ok(b) => b,
        Err(e) => {
            tracing::error!(error = %e, "cannot open broker store");
            eprintln!("error: cannot open broker store: {e}");
            return 1;
        }
    };
    let listener = match TcpListener::bind(args.listen.authority()).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!(listen = %args.listen, error = %e, "bind failed");
            eprintln!("error: cannot bind {}: {e}", args.listen);
            return 1;
        }
    };
    let bound = listener.local_addr().map(TcpUri::from_socket_addr).unwrap_or(args.listen);
    let shutdown = CancellationToken::new();
    let persister = broker.spawn_persister(shutdown.clone());
    let server = tokio::spawn(serve(Arc::clone(&broker), listener, shutdown.clone()));
    tracing::info!(listen = %bound, providers = broker.providers().len(), "broker listening");
    shutdown_signal().await;
    tracing::info!("shutting down");
    shutdown.cancel();
    let _ = server.await;
    let _ = persister.await;
    match broker.flush().await {
        Ok(()) => {
            tracing::info!("broker state flushed");
            0
        }
        Err(e) => {
            eprintln!("error: cannot persist broker state: {e}");
            1
        }
    }
}

async fn run_middleware(args: MiddlewareArgs) -> i32 {
    let mut config = MiddlewareConfig::new(args.private, args.public, args.broker);
    config.advertised = args.advertise;
    config.retry = RetryPolicy {
        base: Duration::from_millis(args.retry_base_ms),
        cap: Duration::from_millis(args.retry_cap_ms),
        budget: args.retry_budget,
    };
    let running = match RunningMiddleware::start(config).await {
        Ok(r) => r,
        Err(e) => {
            tracing::error!(error = %e, "bind failed");
            eprintln!("error: cannot bind middleware listeners: {e}");
            return 1;
        }
    };
    shutdown_signal().await;
    tracing::info!("shutting down");
    running.shutdown().await;
    0
}

async fn run_demo(scenario: DemoScenario) -> i32 {
    let DemoScenario::Payment { kill_provider, external_seller, timeout_secs } = scenario;
    let opts = DemoOptions { kill_provider, external_seller, timeout: Duration::from_secs(timeout_secs) };
    match run_payment_demo(&opts).await {
        Ok(report) => {
            for entry in &report.trace {
                println!("{entry}");
            }
            tracing::info!(messages = report.trace.len(), elapsed_ms = report.elapsed.as_millis() as u64, "demo finished");
            0
        }
        Err(e) => {
            tracing::error!(error = %e, "demo failed");
            eprintln!("error: {e}");
            1
        }
    }
}

async fn run_app(args: AppArgs) -> i32 {
    let recorder = Recorder::new();
    let result = match args.kind {
        AppKind::Client => {
            let opts = ClientOptions { item: args.item, ..ClientOptions::default() };
            run_client(&args.middleware, PAYMENT_CONTRACT, &opts, &recorder).await.map(|trace| {
                for entry in trace {
                    println!("{entry}");
                }
            })
        }
        AppKind::Seller => match SellerApp::register(&args.middleware, default_prices(), recorder).await {
            Ok(app) => serve_sessions(args.sessions, || app.serve_session()).await,
            Err(e) => Err(e),
        },
        AppKind::Pps => match PaymentServiceApp::register(&args.middleware, recorder).await {
            Ok(app) => serve_sessions(args.sessions, || app.serve_session()).await,
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

async fn serve_sessions<F, Fut>(limit: usize, mut serve: F) -> Result<(), crate::payment::AppError>
where
    F: FnMut() -> Fut,
    Fut: std::future::Future<Output = Result<uuid::Uuid, crate::payment::AppError>>,
{
    let mut served = 0;
    while limit == 0 || served < limit {
        let session = serve().await?;
        served += 1;
        tracing::info!(session_id = %session, served, "session complete");
    }
    Ok(())
}
