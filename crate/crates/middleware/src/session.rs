//! Sessions: per-peer FIFO inboxes and outboxes, and the outbox pumps that
//! carry messages to peer middlewares.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use parking_lot::Mutex;
use rand::Rng;
use search_wire::{write_message, AppMessage, Message, MessageExchangeHeader, RoleUris, TcpUri, WireError};
use tokio::io::AsyncWriteExt;
use tokio::net::TcpStream;
use tokio::sync::{watch, Notify};
use tokio_util::sync::CancellationToken;
use uuid::Uuid;

use crate::config::{PumpJitter, RetryPolicy};
use crate::error::MwError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionState {
    /// Initialised by the broker, waiting for StartChannel.
    Pending,
    Active,
    /// Closing: draining outboxes, no new sends.
    Closing,
    Closed(String),
}

/// A message delivered to the local app.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub label: String,
    pub body: Vec<u8>,
}

#[derive(Debug, Default)]
struct Inbox {
    queues: HashMap<String, VecDeque<Delivery>>,
    expected: HashMap<String, u64>,
    /// Senders whose stream ended cleanly.
    ended: HashSet<String>,
}

#[derive(Debug)]
pub struct SeqGap {
    pub expected: u64,
    pub got: u64,
}

#[derive(Debug, Default)]
struct OutboxInner {
    queue: VecDeque<AppMessage>,
    next_seq: u64,
    closing: bool,
}

/// Outgoing FIFO towards one peer role.
#[derive(Debug)]
pub(crate) struct Outbox {
    role: String,
    uri: TcpUri,
    inner: Mutex<OutboxInner>,
    changed: Notify,
    done: watch::Sender<bool>,
}

impl Outbox {
    fn new(role: String, uri: TcpUri) -> Self {
        Outbox {
            role,
            uri,
            inner: Mutex::new(OutboxInner::default()),
            changed: Notify::new(),
            done: watch::channel(false).0,
        }
    }

    fn finish(&self) {
        self.done.send_replace(true);
    }

    pub fn len(&self) -> usize {
        self.inner.lock().queue.len()
    }
}

pub(crate) struct Session {
    pub id: Uuid,
    pub self_role: String,
    /// Every participant's middleware, including this one.
    pub participants: RoleUris,
    /// Local app bound to a provider-side session.
    pub app_id: Option<Uuid>,
    state: Mutex<SessionState>,
    inbox: Mutex<Inbox>,
    /// Signalled on every inbox or state change.
    changed: Notify,
    outboxes: BTreeMap<String, Arc<Outbox>>,
    pumps_started: Mutex<bool>,
}

impl Session {
    pub fn new(
        id: Uuid,
        self_role: String,
        participants: RoleUris,
        app_id: Option<Uuid>,
        state: SessionState,
    ) -> Result<Self, search_wire::UriError> {
        let mut outboxes = BTreeMap::new();
        for (role, uri) in &participants {
            if *role != self_role {
                outboxes.insert(role.clone(), Arc::new(Outbox::new(role.clone(), TcpUri::parse(uri)?)));
            }
        }
        Ok(Session {
            id,
            self_role,
            participants,
            app_id,
            state: Mutex::new(state),
            inbox: Mutex::new(Inbox::default()),
            changed: Notify::new(),
            outboxes,
            pumps_started: Mutex::new(false),
        })
    }

    pub fn state(&self) -> SessionState {
        self.state.lock().clone()
    }

    pub fn is_peer(&self, role: &str) -> bool {
        self.outboxes.contains_key(role)
    }

    /// Pending → Active. Returns whether this call made the transition.
    pub fn activate(&self) -> bool {
        let mut state = self.state.lock();
        if *state == SessionState::Pending {
            *state = SessionState::Active;
            drop(state);
            self.changed.notify_waiters();
            true
        } else {
            false
        }
    }

    /// Appends to the outbox of `to`, assigning the next sequence number.
    pub fn enqueue(&self, to: &str, label: String, body: Vec<u8>) -> Result<u64, MwError> {
        let outbox = self.outboxes.get(to).ok_or_else(|| MwError::UnknownRole(to.to_owned()))?;
        let state = self.state.lock();
        match &*state {
            SessionState::Pending | SessionState::Active => {}
            SessionState::Closing => return Err(MwError::ChannelClosed("channel is closing".into())),
            SessionState::Closed(reason) => return Err(MwError::ChannelClosed(reason.clone())),
        }
        let mut inner = outbox.inner.lock();
        let seq = inner.next_seq;
        inner.next_seq += 1;
        inner.queue.push_back(AppMessage {
            session_id: self.id,
            sender: self.self_role.clone(),
            receiver: to.to_owned(),
            label,
            body,
            seq,
        });
        drop(inner);
        drop(state);
        outbox.changed.notify_one();
        Ok(seq)
    }

    /// Appends an incoming message to the inbox of its sender if its
    /// sequence number is the next expected one.
    pub fn deliver(&self, msg: AppMessage) -> Result<(), SeqGap> {
        let mut inbox = self.inbox.lock();
        let expected = inbox.expected.entry(msg.sender.clone()).or_insert(0);
        if msg.seq != *expected {
            return Err(SeqGap { expected: *expected, got: msg.seq });
        }
        *expected += 1;
        inbox.ended.remove(&msg.sender);
        inbox
            .queues
            .entry(msg.sender)
            .or_default()
            .push_back(Delivery { label: msg.label, body: msg.body });
        drop(inbox);
        self.changed.notify_waiters();
        Ok(())
    }

    /// Records that `sender` closed its stream.
    pub fn sender_ended(&self, sender: &str) {
        self.inbox.lock().ended.insert(sender.to_owned());
        self.changed.notify_waiters();
    }

    /// Count of messages accepted from `sender` so far.
    pub fn delivered_from(&self, sender: &str) -> u64 {
        self.inbox.lock().expected.get(sender).copied().unwrap_or(0)
    }

    /// Blocks until a message from `from` is available.
    pub async fn recv(&self, from: &str) -> Result<Delivery, MwError> {
        if !self.is_peer(from) {
            return Err(MwError::UnknownRole(from.to_owned()));
        }
        loop {
            let notified = self.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let mut inbox = self.inbox.lock();
                if let Some(d) = inbox.queues.get_mut(from).and_then(VecDeque::pop_front) {
                    return Ok(d);
                }
                match &*self.state.lock() {
                    SessionState::Closing => return Err(MwError::ChannelClosed("channel is closing".into())),
                    SessionState::Closed(reason) => return Err(MwError::ChannelClosed(reason.clone())),
                    _ => {}
                }
                if inbox.ended.contains(from) {
                    return Err(MwError::ChannelClosed(format!("{from} closed its stream")));
                }
            }
            notified.await;
        }
    }

    /// Starts one pump per peer. Only the first call has an effect.
    pub fn start_pumps(self: &Arc<Self>, ctx: PumpContext) {
        let mut started = self.pumps_started.lock();
        if *started {
            return;
        }
        *started = true;
        for outbox in self.outboxes.values() {
            tokio::spawn(pump(Arc::clone(self), Arc::clone(outbox), ctx.clone()));
        }
    }

    /// Stops accepting sends, wakes blocked receivers, lets the pumps drain
    /// what is queued and waits for them.
    pub async fn close(&self) {
        {
            let mut state = self.state.lock();
            match &*state {
                SessionState::Closed(_) => return,
                SessionState::Pending | SessionState::Active => *state = SessionState::Closing,
                SessionState::Closing => {}
            }
        }
        self.changed.notify_waiters();
        let running = *self.pumps_started.lock();
        for outbox in self.outboxes.values() {
            outbox.inner.lock().closing = true;
            if running {
                outbox.changed.notify_one();
            } else {
                outbox.finish();
            }
        }
        for outbox in self.outboxes.values() {
            let mut done = outbox.done.subscribe();
            let _ = done.wait_for(|d| *d).await;
        }
        self.set_closed("channel closed".into());
        tracing::info!(session_id = %self.id, role = %self.self_role, "session closed");
    }

    fn set_closed(&self, reason: String) {
        let mut state = self.state.lock();
        if !matches!(*state, SessionState::Closed(_)) {
            *state = SessionState::Closed(reason);
        }
        drop(state);
        self.changed.notify_waiters();
    }

    /// Gives up on the session after a peer stayed unreachable.
    fn fail(&self, reason: String) {
        tracing::warn!(session_id = %self.id, role = %self.self_role, %reason, "session failed");
        self.set_closed(reason);
        for outbox in self.outboxes.values() {
            let mut inner = outbox.inner.lock();
            inner.closing = true;
            inner.queue.clear();
            drop(inner);
            outbox.changed.notify_one();
        }
    }

    pub fn pending_outbound(&self) -> usize {
        self.outboxes.values().map(|o| o.len()).sum()
    }
}

#[derive(Clone)]
pub(crate) struct PumpContext {
    pub retry: RetryPolicy,
    pub jitter: Option<PumpJitter>,
    pub connect_timeout: std::time::Duration,
    pub shutdown: CancellationToken,
}

/// True when the peer closed or reset the stream. Peers never write on a
/// message stream except a ProtocolError right before closing it.
fn peer_gone(stream: &TcpStream) -> bool {
    let mut buf = [0u8; 64];
    match stream.try_read(&mut buf) {
        Ok(_) => true,
        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => false,
        Err(_) => true,
    }
}

async fn open_stream(session: &Session, outbox: &Outbox, ctx: &PumpContext) -> Result<TcpStream, WireError> {
    let connect = async {
        let mut stream = TcpStream::connect(outbox.uri.authority()).await?;
        stream.set_nodelay(true)?;
        let header = MessageExchangeHeader { session_id: session.id, sender: session.self_role.clone() };
        write_message(&mut stream, &header.into()).await?;
        Ok::<_, WireError>(stream)
    };
    match tokio::time::timeout(ctx.connect_timeout, connect).await {
        Ok(r) => r,
        Err(_) => Err(WireError::Io(std::io::Error::new(std::io::ErrorKind::TimedOut, "connect timed out"))),
    }
}

/// Sends the outbox of one peer in order over a lazily opened stream. An
/// entry leaves the queue only after it was written and flushed; on failure
/// the stream is reopened with backoff and sending resumes at the head.
async fn pump(session: Arc<Session>, outbox: Arc<Outbox>, ctx: PumpContext) {
    let mut stream: Option<TcpStream> = None;
    let mut failures = 0u32;
    loop {
        let next = loop {
            let notified = outbox.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            let (front, closing) = {
                let inner = outbox.inner.lock();
                (inner.queue.front().cloned(), inner.closing)
            };
            if let Some(front) = front {
                break front;
            }
            if closing {
                if let Some(mut s) = stream.take() {
                    let _ = s.shutdown().await;
                }
                outbox.finish();
                return;
            }
            tokio::select! {
                _ = &mut notified => {}
                _ = ctx.shutdown.cancelled() => {
                    outbox.finish();
                    return;
                }
            }
        };

        if stream.as_ref().is_some_and(peer_gone) {
            tracing::debug!(session_id = %session.id, peer = %outbox.role, "peer closed the stream");
            stream = None;
        }
        if stream.is_none() {
            match open_stream(&session, &outbox, &ctx).await {
                Ok(s) => {
                    tracing::debug!(session_id = %session.id, peer = %outbox.role, uri = %outbox.uri, "stream opened");
                    stream = Some(s);
                }
                Err(e) => {
                    if !backoff(&session, &outbox, &ctx, &mut failures, &e).await {
                        return;
                    }
                    continue;
                }
            }
        }

        if let Some(j) = ctx.jitter {
            let pause = {
                let mut rng = rand::thread_rng();
                rng.gen_bool(j.probability).then(|| j.max_delay.mul_f64(rng.gen::<f64>()))
            };
            match pause {
                Some(d) => tokio::time::sleep(d).await,
                None => tokio::task::yield_now().await,
            }
        }

        let s = stream.as_mut().expect("opened above");
        match write_message(s, &Message::from(next.clone())).await {
            Ok(()) => {
                failures = 0;
                let mut inner = outbox.inner.lock();
                let popped = inner.queue.pop_front();
                debug_assert_eq!(popped.map(|m| m.seq), Some(next.seq));
            }
            Err(e) => {
                stream = None;
                if !backoff(&session, &outbox, &ctx, &mut failures, &e).await {
                    return;
                }
            }
        }
    }
}

/// Sleeps before the next attempt. Returns false once the retry budget is
/// spent or the middleware shuts down, after failing the session.
async fn backoff(session: &Session, outbox: &Outbox, ctx: &PumpContext, failures: &mut u32, err: &WireError) -> bool {
    *failures += 1;
    tracing::warn!(
        session_id = %session.id,
        peer = %outbox.role,
        uri = %outbox.uri,
        attempt = *failures,
        error = %err,
        "peer unreachable"
    );
    if *failures > ctx.retry.budget {
        session.fail(format!("peer {} unreachable: {err}", outbox.role));
        outbox.finish();
        return false;
    }
    tokio::select! {
        _ = tokio::time::sleep(ctx.retry.delay(*failures)) => true,
        _ = ctx.shutdown.cancelled() => {
            outbox.finish();
            false
        }
    }
}
