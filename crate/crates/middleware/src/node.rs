//! The middleware's shared state and the operations behind both interfaces.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use cfsm::{bisimilar, contract_hash, parse_cfsm, parse_global_contract, Cfsm, ParticipantId};
use parking_lot::Mutex;
use search_wire::{
    call, BrokerChannelRequest, BrokerChannelResponse, InitChannelRequest, Message, RegisterAppResponse,
    RegisterProviderRequest, RegisterProviderResponse, RoleUris, TcpUri, WireError,
};
use tokio::net::TcpStream;
use tokio::sync::{mpsc, Notify};
use tokio_util::sync::CancellationToken;
use uuid::Uuid;

use crate::channel::{Binding, Channel};
use crate::config::MiddlewareConfig;
use crate::error::MwError;
use crate::session::{Delivery, PumpContext, Session, SessionState};

pub(crate) type Outgoing = mpsc::UnboundedSender<Message>;

struct AppEntry {
    app_id: Uuid,
    contract: Cfsm,
    notify: Outgoing,
}

#[derive(Default)]
struct State {
    channels: HashMap<Uuid, Arc<Channel>>,
    apps: Vec<AppEntry>,
    sessions: HashMap<(Uuid, String), Arc<Session>>,
}

pub struct Middleware {
    config: MiddlewareConfig,
    public_uri: TcpUri,
    state: Mutex<State>,
    sessions_changed: Notify,
    outstanding_brokerages: AtomicUsize,
    brokerage_requests: AtomicU64,
    shutdown: CancellationToken,
}

async fn request(uri: &TcpUri, msg: &Message, timeout: Duration) -> Result<Message, WireError> {
    let exchange = async {
        let mut stream = TcpStream::connect(uri.authority()).await?;
        stream.set_nodelay(true)?;
        call(&mut stream, msg).await
    };
    tokio::time::timeout(timeout, exchange).await.unwrap_or_else(|_| {
        Err(WireError::Io(std::io::Error::new(
            std::io::ErrorKind::TimedOut,
            format!("no reply from {uri} within {timeout:?}"),
        )))
    })
}

impl Middleware {
    pub(crate) fn new(config: MiddlewareConfig, public_uri: TcpUri, shutdown: CancellationToken) -> Self {
        Middleware {
            config,
            public_uri,
            state: Mutex::new(State::default()),
            sessions_changed: Notify::new(),
            outstanding_brokerages: AtomicUsize::new(0),
            brokerage_requests: AtomicU64::new(0),
            shutdown,
        }
    }

    /// URI announced to the broker and to peers.
    pub fn public_uri(&self) -> &TcpUri {
        &self.public_uri
    }

    pub fn config(&self) -> &MiddlewareConfig {
        &self.config
    }

    /// BrokerChannelRequests sent so far.
    pub fn brokerage_requests(&self) -> u64 {
        self.brokerage_requests.load(Ordering::SeqCst)
    }

    pub fn session_state(&self, session_id: Uuid, role: &str) -> Option<SessionState> {
        self.state
            .lock()
            .sessions
            .get(&(session_id, role.to_owned()))
            .map(|s| s.state())
    }

    /// Session bound to a client channel, once brokered.
    pub fn channel_session(&self, channel_id: Uuid) -> Option<Uuid> {
        let channel = self.state.lock().channels.get(&channel_id).cloned()?;
        channel.session_id.get().copied()
    }

    fn pump_context(&self) -> PumpContext {
        PumpContext {
            retry: self.config.retry,
            jitter: self.config.jitter,
            connect_timeout: self.config.broker_timeout,
            shutdown: self.shutdown.clone(),
        }
    }

    fn channel(&self, id: Uuid) -> Result<Arc<Channel>, MwError> {
        self.state.lock().channels.get(&id).cloned().ok_or(MwError::UnknownChannel(id))
    }

    // Private interface.

    /// Registers a provider app and forwards its contract to the broker.
    /// `notify` receives the RegisterAppResponse and, later, one session
    /// notification per session the app is bound to.
    pub async fn register_app(&self, local_contract: &str, notify: Outgoing) -> Result<Uuid, MwError> {
        let contract = parse_cfsm(local_contract).map_err(|e| MwError::InvalidContract(e.to_string()))?;
        let req = RegisterProviderRequest {
            contract: local_contract.to_owned(),
            uri: self.public_uri.to_string(),
        };
        let provider_id = match request(&self.config.broker, &req.into(), self.config.broker_timeout).await {
            Ok(Message::RegisterProviderResponse(RegisterProviderResponse::Registered { provider_id })) => provider_id,
            Ok(Message::RegisterProviderResponse(RegisterProviderResponse::Failed { error })) => {
                return Err(MwError::RegistrationRefused { code: error.code, detail: error.detail })
            }
            Ok(other) => {
                return Err(MwError::BrokerUnreachable(format!("unexpected reply {}", other.message_type())))
            }
            Err(e) => return Err(MwError::BrokerUnreachable(e.to_string())),
        };
        let app_id = Uuid::new_v4();
        let mut state = self.state.lock();
        // Queue the response before any session notification can be.
        let _ = notify.send(RegisterAppResponse::Registered { app_id }.into());
        state.apps.push(AppEntry { app_id, contract, notify });
        tracing::info!(app_id = %app_id, provider_id = %provider_id, role = %state.apps.last().unwrap().contract.name(), "app registered");
        Ok(app_id)
    }

    pub fn unregister_app(&self, app_id: Uuid) {
        self.state.lock().apps.retain(|a| a.app_id != app_id);
        tracing::info!(app_id = %app_id, "app disconnected");
    }

    /// Records a channel. Binding to a session happens on first use.
    pub fn register_channel(&self, global_contract: &str, self_role: &str) -> Result<Uuid, MwError> {
        let contract =
            parse_global_contract(global_contract).map_err(|e| MwError::InvalidContract(e.to_string()))?;
        if !contract.contains_role(self_role) {
            return Err(MwError::UnknownRole(self_role.to_owned()));
        }
        let partners: BTreeSet<String> = contract
            .roles()
            .map(|r| r.to_string())
            .filter(|r| r != self_role)
            .collect();
        let id = Uuid::new_v4();
        let channel = Channel::new(id, self_role.to_owned(), partners, global_contract.to_owned(), Binding::Unbound);
        self.state.lock().channels.insert(id, Arc::new(channel));
        tracing::info!(channel_id = %id, role = self_role, "channel registered");
        Ok(id)
    }

    /// Queues a message and returns without waiting for delivery. The first
    /// use of an unbound channel starts its brokerage.
    pub fn app_send(self: &Arc<Self>, channel_id: Uuid, to: &str, label: &str, body: Vec<u8>) -> Result<(), MwError> {
        let channel = self.channel(channel_id)?;
        channel.check_partner(to)?;
        let mut binding = channel.binding.lock();
        match &mut *binding {
            Binding::Unbound => {
                *binding = Binding::Brokering { pending: vec![(to.to_owned(), label.to_owned(), body)] };
                drop(binding);
                self.spawn_brokerage(channel);
                Ok(())
            }
            Binding::Brokering { pending } => {
                pending.push((to.to_owned(), label.to_owned(), body));
                Ok(())
            }
            Binding::Bound(session) => session.enqueue(to, label.to_owned(), body).map(|_| ()),
            Binding::Failed(e) => Err(e.clone()),
            Binding::Closed => Err(MwError::ChannelClosed("channel closed".into())),
        }
    }

    /// Blocks until the next message from `from` arrives.
    pub async fn app_recv(self: &Arc<Self>, channel_id: Uuid, from: &str) -> Result<Delivery, MwError> {
        let channel = self.channel(channel_id)?;
        channel.check_partner(from)?;
        let session = loop {
            let notified = channel.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let mut binding = channel.binding.lock();
                match &*binding {
                    Binding::Unbound => {
                        *binding = Binding::Brokering { pending: Vec::new() };
                        drop(binding);
                        self.spawn_brokerage(Arc::clone(&channel));
                    }
                    Binding::Brokering { .. } => {}
                    Binding::Bound(s) => break Arc::clone(s),
                    Binding::Failed(e) => return Err(e.clone()),
                    Binding::Closed => return Err(MwError::ChannelClosed("channel closed".into())),
                }
            }
            notified.await;
        };
        session.recv(from).await
    }

    /// Flushes everything queued on the channel to its peers, then closes.
    /// Closing twice is fine.
    pub async fn close_channel(&self, channel_id: Uuid) -> Result<(), MwError> {
        let channel = self.channel(channel_id)?;
        let session = loop {
            let notified = channel.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let mut binding = channel.binding.lock();
                match &*binding {
                    Binding::Brokering { .. } => {}
                    Binding::Bound(s) => break Arc::clone(s),
                    Binding::Unbound | Binding::Failed(_) | Binding::Closed => {
                        *binding = Binding::Closed;
                        drop(binding);
                        channel.changed.notify_waiters();
                        return Ok(());
                    }
                }
            }
            notified.await;
        };
        session.close().await;
        channel.set(Binding::Closed);
        tracing::info!(channel_id = %channel_id, session_id = %session.id, "channel closed");
        Ok(())
    }

    fn spawn_brokerage(self: &Arc<Self>, channel: Arc<Channel>) {
        let mw = Arc::clone(self);
        self.outstanding_brokerages.fetch_add(1, Ordering::SeqCst);
        self.brokerage_requests.fetch_add(1, Ordering::SeqCst);
        tokio::spawn(async move {
            let outcome = mw.broker(&channel).await;
            let binding = match outcome {
                Ok(session) => {
                    let mut binding = channel.binding.lock();
                    if let Binding::Brokering { pending } = std::mem::replace(&mut *binding, Binding::Unbound) {
                        for (to, label, body) in pending {
                            session.enqueue(&to, label, body).expect("partners checked on send");
                        }
                    }
                    let _ = channel.session_id.set(session.id);
                    *binding = Binding::Bound(session);
                    drop(binding);
                    channel.changed.notify_waiters();
                    None
                }
                Err(e) => Some(Binding::Failed(e)),
            };
            if let Some(b) = binding {
                channel.set(b);
            }
            mw.outstanding_brokerages.fetch_sub(1, Ordering::SeqCst);
        });
    }

    async fn broker(&self, channel: &Channel) -> Result<Arc<Session>, MwError> {
        tracing::info!(channel_id = %channel.id, role = %channel.self_role, "brokerage requested");
        let req = BrokerChannelRequest {
            global_contract: channel.contract_text.clone(),
            initiator_role: channel.self_role.clone(),
            initiator_uri: self.public_uri.to_string(),
        };
        let reply = request(&self.config.broker, &req.into(), self.config.brokerage_timeout).await;
        let (session_id, assignments) = match reply {
            Ok(Message::BrokerChannelResponse(BrokerChannelResponse::Assigned { session_id, assignments })) => {
                (session_id, assignments)
            }
            Ok(Message::BrokerChannelResponse(BrokerChannelResponse::Failed { error })) => {
                tracing::warn!(channel_id = %channel.id, code = %error.code, detail = %error.detail, "brokerage failed");
                return Err(MwError::BrokerageFailed { code: error.code, detail: error.detail });
            }
            Ok(other) => {
                return Err(MwError::BrokerageFailed {
                    code: "UnexpectedReply".into(),
                    detail: format!("broker replied with {}", other.message_type()),
                })
            }
            Err(e) => {
                tracing::warn!(channel_id = %channel.id, error = %e, "broker unreachable");
                return Err(MwError::BrokerageFailed { code: "BrokerUnreachable".into(), detail: e.to_string() });
            }
        };
        let mut participants = assignments;
        participants.insert(channel.self_role.clone(), self.public_uri.to_string());
        let missing: Vec<_> = channel.partners.iter().filter(|r| !participants.contains_key(*r)).collect();
        if !missing.is_empty() {
            return Err(MwError::BrokerageFailed {
                code: "IncompleteAssignment".into(),
                detail: format!("no assignment for {missing:?}"),
            });
        }
        let session = Session::new(session_id, channel.self_role.clone(), participants, None, SessionState::Active)
            .map_err(|e| MwError::BrokerageFailed { code: "InvalidUri".into(), detail: e.to_string() })?;
        let session = Arc::new(session);
        self.state
            .lock()
            .sessions
            .insert((session_id, channel.self_role.clone()), Arc::clone(&session));
        self.sessions_changed.notify_waiters();
        session.start_pumps(self.pump_context());
        tracing::info!(channel_id = %channel.id, session_id = %session_id, "channel bound");
        Ok(session)
    }

    // Public interface.

    /// Accepts when a registered app can play `req.role`, creating a pending
    /// session that already buffers incoming messages.
    pub fn handle_init(&self, req: &InitChannelRequest) -> bool {
        let accepted = self.try_init(req);
        tracing::info!(session_id = %req.session_id, role = %req.role, accepted, "init channel");
        accepted
    }

    fn try_init(&self, req: &InitChannelRequest) -> bool {
        let Ok(contract) = parse_global_contract(&req.global_contract) else { return false };
        let Some(machine) = contract.machine(&req.role) else { return false };
        if contract.roles().any(|r| !req.participants.contains_key(r.as_str())) {
            return false;
        }
        let Ok(role) = ParticipantId::new(req.role.as_str()) else { return false };
        let wanted = contract_hash(machine);

        let mut state = self.state.lock();
        let app_id = state.apps.iter().find_map(|app| {
            let renamed = app.contract.rename_self(&role).ok()?;
            (contract_hash(&renamed) == wanted || bisimilar(&renamed, machine)).then_some(app.app_id)
        });
        let Some(app_id) = app_id else { return false };

        let key = (req.session_id, req.role.clone());
        if let Some(existing) = state.sessions.get(&key) {
            if existing.state() != SessionState::Pending {
                return existing.state() == SessionState::Active;
            }
        } else {
            // The app-facing channel id is the session id, so one middleware
            // can serve only one provider role per session.
            let other_role = state
                .sessions
                .iter()
                .any(|((id, r), s)| *id == req.session_id && *r != req.role && s.app_id.is_some());
            if other_role || state.sessions.len() >= self.config.max_sessions {
                return false;
            }
        }
        let Ok(session) = Session::new(
            req.session_id,
            req.role.clone(),
            req.participants.clone(),
            Some(app_id),
            SessionState::Pending,
        ) else {
            return false;
        };
        state.sessions.insert(key, Arc::new(session));
        drop(state);
        self.sessions_changed.notify_waiters();
        true
    }

    /// Activates a pending provider session and notifies its app. The
    /// initiator's middleware also receives StartChannel, possibly before it
    /// learns the session id from the broker; that is acknowledged too.
    pub fn handle_start(&self, session_id: Uuid) -> Result<(), MwError> {
        let state = self.state.lock();
        let provider = state
            .sessions
            .iter()
            .find(|((id, _), s)| *id == session_id && s.app_id.is_some())
            .map(|(_, s)| Arc::clone(s));
        let initiator = state.sessions.keys().any(|(id, _)| *id == session_id);
        drop(state);

        let Some(session) = provider else {
            if initiator || self.outstanding_brokerages.load(Ordering::SeqCst) > 0 {
                return Ok(());
            }
            return Err(MwError::UnknownSession(session_id));
        };
        if !session.activate() {
            return Ok(());
        }
        let partners = session
            .participants
            .keys()
            .filter(|r| **r != session.self_role)
            .cloned()
            .collect();
        let channel = Channel::new(
            session_id,
            session.self_role.clone(),
            partners,
            String::new(),
            Binding::Bound(Arc::clone(&session)),
        );
        let mut state = self.state.lock();
        state.channels.insert(session_id, Arc::new(channel));
        let notify = state
            .apps
            .iter()
            .find(|a| Some(a.app_id) == session.app_id)
            .map(|a| a.notify.clone());
        drop(state);
        session.start_pumps(self.pump_context());
        let notice = RegisterAppResponse::Session { session_id, role_map: session.participants.clone() };
        match notify {
            Some(tx) if tx.send(notice.into()).is_ok() => {
                tracing::info!(session_id = %session_id, role = %session.self_role, "session started, app notified");
            }
            _ => tracing::warn!(session_id = %session_id, "session started but its app is gone"),
        }
        Ok(())
    }

    /// Waits up to the grace period for `find` to produce a session.
    async fn wait_for<T>(&self, mut find: impl FnMut(&State) -> Option<T>) -> Option<T> {
        let deadline = tokio::time::Instant::now() + self.config.session_grace;
        loop {
            let notified = self.sessions_changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            if let Some(found) = find(&self.state.lock()) {
                return Some(found);
            }
            if tokio::time::timeout_at(deadline, notified).await.is_err() {
                return find(&self.state.lock());
            }
        }
    }

    pub(crate) async fn wait_session_id(&self, session_id: Uuid) -> bool {
        self.wait_for(|s| s.sessions.keys().any(|(id, _)| *id == session_id).then_some(()))
            .await
            .is_some()
    }

    pub(crate) async fn wait_session(&self, session_id: Uuid, role: &str) -> Option<Arc<Session>> {
        let key = (session_id, role.to_owned());
        self.wait_for(|s| s.sessions.get(&key).cloned()).await
    }

    /// Marks `sender`'s stream as finished in every local role of the session.
    pub(crate) fn end_sender(&self, session_id: Uuid, sender: &str) {
        let sessions: Vec<_> = self
            .state
            .lock()
            .sessions
            .iter()
            .filter(|((id, _), s)| *id == session_id && s.is_peer(sender))
            .map(|(_, s)| Arc::clone(s))
            .collect();
        for s in sessions {
            s.sender_ended(sender);
        }
    }

    /// Messages accepted from `sender` in the session hosted for `role`.
    pub fn delivered_from(&self, session_id: Uuid, role: &str, sender: &str) -> Option<u64> {
        self.session(session_id, role).map(|s| s.delivered_from(sender))
    }

    /// Messages queued for peers and not yet written.
    pub fn pending_outbound(&self, session_id: Uuid, role: &str) -> Option<usize> {
        self.session(session_id, role).map(|s| s.pending_outbound())
    }

    fn session(&self, session_id: Uuid, role: &str) -> Option<Arc<Session>> {
        self.state.lock().sessions.get(&(session_id, role.to_owned())).cloned()
    }

    /// Role to URI map of a session, for diagnostics.
    pub fn participants(&self, session_id: Uuid, role: &str) -> Option<RoleUris> {
        self.state
            .lock()
            .sessions
            .get(&(session_id, role.to_owned()))
            .map(|s| s.participants.clone())
    }
}
