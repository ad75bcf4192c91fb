//! Runs the payment example end to end inside one process: a broker, three
//! middlewares and the three apps.

use std::sync::Arc;
use std::time::{Duration, Instant};

use cfsm::parse_global_contract;
use search_broker::{serve, Broker, BrokerConfig};
use search_middleware::{MiddlewareConfig, RunningMiddleware};
use search_wire::TcpUri;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio_util::sync::CancellationToken;

use crate::payment::{
    assert_scenario, default_prices, run_client, AppError, ClientOptions, PaymentServiceApp, Recorder, ScenarioError,
    SellerApp, TraceEntry, PAYMENT_CONTRACT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Provider {
    Pps,
    Seller,
}

#[derive(Debug, Clone)]
pub struct DemoOptions {
    /// Take this provider's middleware down after it registered.
    pub kill_provider: Option<Provider>,
    /// Bind the seller's middleware private interface here and wait for a
    /// seller started elsewhere instead of running one in process.
    pub external_seller: Option<TcpUri>,
    pub timeout: Duration,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions { kill_provider: None, external_seller: None, timeout: Duration::from_secs(30) }
    }
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub trace: Vec<TraceEntry>,
    pub elapsed: Duration,
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("startup failed: {0}")]
    Startup(String),
    #[error(transparent)]
    App(#[from] AppError),
    #[error("trace rejected: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("timed out after {0:?}")]
    Timeout(Duration),
}

struct LocalBroker {
    broker: Arc<Broker>,
    uri: TcpUri,
    token: CancellationToken,
}

async fn start_broker() -> Result<LocalBroker, DemoError> {
    let startup = |e: &dyn std::fmt::Display| DemoError::Startup(e.to_string());
    let broker = Broker::open(BrokerConfig { init_timeout: Duration::from_secs(2), ..BrokerConfig::default() })
        .map_err(|e| startup(&e))?;
    let listener = TcpListener::bind("127.0.0.1:0").await.map_err(|e| startup(&e))?;
    let uri = TcpUri::from_socket_addr(listener.local_addr().map_err(|e| startup(&e))?);
    let token = CancellationToken::new();
    tokio::spawn(serve(Arc::clone(&broker), listener, token.clone()));
    Ok(LocalBroker { broker, uri, token })
}

async fn start_middleware(broker: &TcpUri, private: Option<&TcpUri>) -> Result<RunningMiddleware, DemoError> {
    let any = TcpUri::parse("tcp://127.0.0.1:0").expect("valid uri");
    let config = MiddlewareConfig::new(private.unwrap_or(&any).clone(), any, broker.clone());
    RunningMiddleware::start(config)
        .await
        .map_err(|e| DemoError::Startup(format!("middleware: {e}")))
}

/// Runs one purchase. The returned trace has one line per message.
pub async fn run_payment_demo(opts: &DemoOptions) -> Result<DemoReport, DemoError> {
    let started = Instant::now();
    let broker = start_broker().await?;
    let result = tokio::time::timeout(opts.timeout, drive(&broker, opts)).await;
    broker.token.cancel();
    let trace = result.map_err(|_| DemoError::Timeout(opts.timeout))??;
    Ok(DemoReport { trace, elapsed: started.elapsed() })
}

async fn drive(broker: &LocalBroker, opts: &DemoOptions) -> Result<Vec<TraceEntry>, DemoError> {
    let contract = parse_global_contract(PAYMENT_CONTRACT).map_err(|e| DemoError::Startup(e.to_string()))?;
    let client_mw = start_middleware(&broker.uri, None).await?;
    let seller_mw = start_middleware(&broker.uri, opts.external_seller.as_ref()).await?;
    let pps_mw = start_middleware(&broker.uri, None).await?;
    let recorder = Recorder::new();

    let pps = PaymentServiceApp::register(&pps_mw.private_uri, recorder.clone()).await?;
    let seller = match &opts.external_seller {
        None => Some(SellerApp::register(&seller_mw.private_uri, default_prices(), recorder.clone()).await?),
        Some(uri) => {
            tracing::info!(middleware = %uri, "waiting for the external seller to register");
            while broker.broker.providers().len() < 2 {
                tokio::time::sleep(Duration::from_millis(20)).await;
            }
            None
        }
    };

    let mut middlewares = vec![client_mw];
    let mut providers = tokio::task::JoinSet::new();
    match opts.kill_provider {
        Some(Provider::Pps) => pps_mw.shutdown().await,
        _ => {
            providers.spawn(async move { pps.serve_session().await });
            middlewares.push(pps_mw);
        }
    }
    match opts.kill_provider {
        Some(Provider::Seller) => seller_mw.shutdown().await,
        _ => {
            if let Some(seller) = seller {
                providers.spawn(async move { seller.serve_session().await });
            }
            middlewares.push(seller_mw);
        }
    }

    let outcome = run_client(&middlewares[0].private_uri, PAYMENT_CONTRACT, &ClientOptions::default(), &recorder).await;
    if let Err(e) = outcome {
        providers.abort_all();
        shutdown(middlewares).await;
        return Err(e.into());
    }
    while let Some(joined) = providers.join_next().await {
        if let Ok(Err(e)) = joined {
            shutdown(middlewares).await;
            return Err(e.into());
        }
    }
    shutdown(middlewares).await;
    let trace = recorder.entries();
    assert_scenario(&contract, &trace)?;
    Ok(trace)
}

async fn shutdown(middlewares: Vec<RunningMiddleware>) {
    for mw in middlewares {
        mw.shutdown().await;
    }
}
