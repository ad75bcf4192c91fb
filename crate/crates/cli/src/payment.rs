//! The three-party payment example: a client, a seller and a payment
//! service talking through their middlewares, plus a replay check of the
//! observed trace against the contract.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use cfsm::{Action, GlobalContract};
use parking_lot::Mutex;
use search_middleware::{AppClient, ClientError};
use search_wire::TcpUri;
use thiserror::Error;
use uuid::Uuid;

pub const PAYMENT_CONTRACT: &str = include_str!("../../../contracts/payment.gc");
pub const SELLER_CONTRACT: &str = include_str!("../../../contracts/seller.fsm");
pub const PPS_CONTRACT: &str = include_str!("../../../contracts/pps.fsm");

pub const CLIENT_ROLE: &str = "ClientApp";
pub const SELLER_ROLE: &str = "Srv";
pub const PPS_ROLE: &str = "PPS";

/// One message as observed by the apps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEntry {
    pub sender: String,
    pub receiver: String,
    pub label: String,
    pub body: Vec<u8>,
}

impl TraceEntry {
    pub fn new(sender: &str, receiver: &str, label: &str, body: &[u8]) -> Self {
        TraceEntry {
            sender: sender.to_owned(),
            receiver: receiver.to_owned(),
            label: label.to_owned(),
            body: body.to_vec(),
        }
    }
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}: {}", self.sender, self.receiver, self.label)
    }
}

/// Shared trace of the apps running in this process. Every send is
/// recorded; a receive is recorded only when its sender runs elsewhere,
/// so each message appears once.
#[derive(Clone, Default)]
pub struct Recorder {
    local: Arc<Mutex<BTreeSet<String>>>,
    entries: Arc<Mutex<Vec<TraceEntry>>>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    fn join(&self, role: &str) {
        self.local.lock().insert(role.to_owned());
    }

    fn sent(&self, entry: TraceEntry) {
        self.entries.lock().push(entry);
    }

    fn received(&self, entry: TraceEntry) {
        if !self.local.lock().contains(&entry.sender) {
            self.entries.lock().push(entry);
        }
    }

    pub fn entries(&self) -> Vec<TraceEntry> {
        self.entries.lock().clone()
    }
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{role} step {step}: {source}")]
    Middleware {
        role: String,
        step: usize,
        #[source]
        source: ClientError,
    },
    #[error("{role} step {step}: expected {expected}, got {got}")]
    UnexpectedLabel { role: String, step: usize, expected: String, got: String },
}

impl AppError {
    pub fn step(&self) -> usize {
        match self {
            AppError::Middleware { step, .. } | AppError::UnexpectedLabel { step, .. } => *step,
        }
    }

    /// Error code reported by the middleware, if any.
    pub fn code(&self) -> Option<&str> {
        match self {
            AppError::Middleware { source, .. } => source.code(),
            AppError::UnexpectedLabel { .. } => None,
        }
    }
}

/// Tracks the step index of an app so errors name where they happened.
struct Steps<'a> {
    role: &'a str,
    step: usize,
    recorder: &'a Recorder,
}

impl<'a> Steps<'a> {
    fn new(role: &'a str, recorder: &'a Recorder) -> Self {
        recorder.join(role);
        Steps { role, step: 0, recorder }
    }

    fn fail(&self, source: ClientError) -> AppError {
        AppError::Middleware { role: self.role.to_owned(), step: self.step, source }
    }

    async fn send(&mut self, app: &AppClient, ch: Uuid, to: &str, label: &str, body: &[u8]) -> Result<(), AppError> {
        self.step += 1;
        self.recorder.sent(TraceEntry::new(self.role, to, label, body));
        app.send(ch, to, label, body).await.map_err(|e| self.fail(e))
    }

    async fn recv(&mut self, app: &AppClient, ch: Uuid, from: &str, label: &str) -> Result<Vec<u8>, AppError> {
        self.step += 1;
        let d = app.recv(ch, from).await.map_err(|e| self.fail(e))?;
        if d.label != label {
            return Err(AppError::UnexpectedLabel {
                role: self.role.to_owned(),
                step: self.step,
                expected: label.to_owned(),
                got: d.label,
            });
        }
        self.recorder.received(TraceEntry::new(from, self.role, &d.label, &d.body));
        Ok(d.body)
    }
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    pub item: String,
    pub card: String,
    pub seller_role: String,
    pub pps_role: String,
}

impl Default for ClientOptions {
    fn default() -> Self {
        ClientOptions {
            item: "book".into(),
            card: "4111111111111111".into(),
            seller_role: SELLER_ROLE.into(),
            pps_role: PPS_ROLE.into(),
        }
    }
}

/// Buys `opts.item`: registers the payment channel as ClientApp and walks
/// the four client steps. Returns the client's own view of the exchange.
pub async fn run_client(
    middleware: &TcpUri,
    contract: &str,
    opts: &ClientOptions,
    recorder: &Recorder,
) -> Result<Vec<TraceEntry>, AppError> {
    let mut steps = Steps::new(CLIENT_ROLE, recorder);
    let app = AppClient::connect(middleware).await.map_err(|e| steps.fail(e))?;
    let ch = app.register_channel(contract, CLIENT_ROLE).await.map_err(|e| steps.fail(e))?;
    let seller = opts.seller_role.as_str();
    let pps = opts.pps_role.as_str();

    steps.send(&app, ch, seller, "PurchaseRequest", opts.item.as_bytes()).await?;
    let total = steps.recv(&app, ch, seller, "TotalAmount").await?;
    let card = [opts.card.as_bytes(), b";", &total].concat();
    steps.send(&app, ch, pps, "CardDetailsWithTotalAmount", &card).await?;
    let result = steps.recv(&app, ch, pps, "PaymentResult").await?;
    steps.step += 1;
    app.close(ch).await.map_err(|e| steps.fail(e))?;

    Ok(vec![
        TraceEntry::new(CLIENT_ROLE, seller, "PurchaseRequest", opts.item.as_bytes()),
        TraceEntry::new(seller, CLIENT_ROLE, "TotalAmount", &total),
        TraceEntry::new(CLIENT_ROLE, pps, "CardDetailsWithTotalAmount", &card),
        TraceEntry::new(pps, CLIENT_ROLE, "PaymentResult", &result),
    ])
}

/// Seller backend: quotes a price in minor currency units from its table.
/// Unknown items cost 0.
pub struct SellerApp {
    app: AppClient,
    prices: BTreeMap<String, u64>,
    recorder: Recorder,
}

pub fn default_prices() -> BTreeMap<String, u64> {
    [("book", 1250), ("pen", 199), ("lamp", 4500)]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
}

impl SellerApp {
    pub async fn register(middleware: &TcpUri, prices: BTreeMap<String, u64>, recorder: Recorder) -> Result<Self, AppError> {
        let steps = Steps::new(SELLER_ROLE, &recorder);
        let app = AppClient::connect(middleware).await.map_err(|e| steps.fail(e))?;
        app.register_app(SELLER_CONTRACT).await.map_err(|e| steps.fail(e))?;
        Ok(SellerApp { app, prices, recorder })
    }

    /// Waits for the next session and plays the seller's part in it.
    pub async fn serve_session(&self) -> Result<Uuid, AppError> {
        let mut steps = Steps::new(SELLER_ROLE, &self.recorder);
        let ch = self.app.next_session().await.map_err(|e| steps.fail(e))?.session_id;
        tracing::info!(session_id = %ch, role = SELLER_ROLE, "serving session");
        let item = steps.recv(&self.app, ch, CLIENT_ROLE, "PurchaseRequest").await?;
        let price = self.prices.get(String::from_utf8_lossy(&item).as_ref()).copied().unwrap_or(0);
        steps.send(&self.app, ch, CLIENT_ROLE, "TotalAmount", price.to_string().as_bytes()).await?;
        steps.recv(&self.app, ch, PPS_ROLE, "PaymentConfirmation").await?;
        steps.step += 1;
        self.app.close(ch).await.map_err(|e| steps.fail(e))?;
        Ok(ch)
    }
}

/// Payment service: charges the card, echoes the card details back as the
/// result and confirms the amount to the seller.
pub struct PaymentServiceApp {
    app: AppClient,
    recorder: Recorder,
}

impl PaymentServiceApp {
    pub async fn register(middleware: &TcpUri, recorder: Recorder) -> Result<Self, AppError> {
        let steps = Steps::new(PPS_ROLE, &recorder);
        let app = AppClient::connect(middleware).await.map_err(|e| steps.fail(e))?;
        app.register_app(PPS_CONTRACT).await.map_err(|e| steps.fail(e))?;
        Ok(PaymentServiceApp { app, recorder })
    }

    pub async fn serve_session(&self) -> Result<Uuid, AppError> {
        let mut steps = Steps::new(PPS_ROLE, &self.recorder);
        let ch = self.app.next_session().await.map_err(|e| steps.fail(e))?.session_id;
        tracing::info!(session_id = %ch, role = PPS_ROLE, "serving session");
        let card = steps.recv(&self.app, ch, CLIENT_ROLE, "CardDetailsWithTotalAmount").await?;
        steps.send(&self.app, ch, CLIENT_ROLE, "PaymentResult", &card).await?;
        let amount = card.rsplit(|b| *b == b';').next().unwrap_or_default().to_vec();
        steps.send(&self.app, ch, SELLER_ROLE, "PaymentConfirmation", &amount).await?;
        steps.step += 1;
        self.app.close(ch).await.map_err(|e| steps.fail(e))?;
        Ok(ch)
    }
}

/// Registers a payment service and serves exactly one session.
pub async fn run_payment_service(middleware: &TcpUri, recorder: &Recorder) -> Result<Uuid, AppError> {
    PaymentServiceApp::register(middleware, recorder.clone()).await?.serve_session().await
}

/// Registers a seller with the default prices and serves one session.
pub async fn run_seller(middleware: &TcpUri, recorder: &Recorder) -> Result<Uuid, AppError> {
    SellerApp::register(middleware, default_prices(), recorder.clone()).await?.serve_session().await
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("message {index} ({entry}) names a role outside the contract")]
    UnknownRole { index: usize, entry: String },
    #[error("{role} cannot perform `{action}` at message {index}")]
    Rejected { role: String, index: usize, action: String },
    #[error("{role} stops in non-final state {state}")]
    NotFinal { role: String, state: String },
}

/// Replays the projection of `trace` onto every role through that role's
/// machine and requires each to end in a terminal state.
pub fn assert_scenario(contract: &GlobalContract, trace: &[TraceEntry]) -> Result<(), ScenarioError> {
    for (index, e) in trace.iter().enumerate() {
        if !contract.contains_role(&e.sender) || !contract.contains_role(&e.receiver) {
            return Err(ScenarioError::UnknownRole { index, entry: e.to_string() });
        }
    }
    for machine in contract.machines() {
        let role = machine.name().as_str();
        let mut state = machine.initial();
        for (index, e) in trace.iter().enumerate() {
            let action = if e.sender == role {
                Action::send(role, &e.receiver, &e.label)
            } else if e.receiver == role {
                Action::recv(role, &e.sender, &e.label)
            } else {
                continue;
            };
            let rejected = |action: String| ScenarioError::Rejected { role: role.to_owned(), index, action };
            let action = action.map_err(|_| rejected(e.to_string()))?;
            state = match machine.step(state, &action) {
                Ok(Some(next)) => next,
                _ => return Err(rejected(action.to_string())),
            };
        }
        if !machine.is_terminal(state) {
            return Err(ScenarioError::NotFinal { role: role.to_owned(), state: machine.state_name(state).to_owned() });
        }
    }
    Ok(())
}
