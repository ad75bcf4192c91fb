//! Accept loops and per-connection handlers for both interfaces.

use std::sync::Arc;

use search_wire::{
    read_message, write_message, AppRecvResponse, AppSendResponse, CloseChannelResponse, InitChannelResponse,
    Message, MessageExchangeHeader, ProtocolError, RegisterChannelResponse, StartChannelResponse, WireError,
};
use tokio::io::AsyncWrite;
use tokio::net::tcp::OwnedReadHalf;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;
use tokio_util::sync::CancellationToken;
use tokio_util::task::TaskTracker;

use crate::node::Middleware;

pub(crate) async fn accept_loop(
    mw: Arc<Middleware>,
    listener: TcpListener,
    public: bool,
    shutdown: CancellationToken,
    tracker: TaskTracker,
) {
    loop {
        let accepted = tokio::select! {
            _ = shutdown.cancelled() => break,
            r = listener.accept() => r,
        };
        let (stream, peer) = match accepted {
            Ok(pair) => pair,
            Err(e) => {
                tracing::warn!(error = %e, "accept failed");
                continue;
            }
        };
        let _ = stream.set_nodelay(true);
        let mw = Arc::clone(&mw);
        let token = shutdown.clone();
        tracker.spawn(async move {
            let work = async {
                if public {
                    handle_public(&mw, stream).await
                } else {
                    handle_private(&mw, stream).await
                }
            };
            tokio::select! {
                _ = token.cancelled() => {}
                _ = work => {}
            }
            tracing::debug!(peer = %peer, public, "connection finished");
        });
    }
}

async fn send_error<W: AsyncWrite + Unpin>(w: &mut W, code: &str, detail: impl Into<String>) {
    let _ = write_message(w, &ProtocolError::new(code, detail).into()).await;
}

fn wire_error_code(e: &WireError) -> &'static str {
    e.code()
}

async fn handle_private(mw: &Arc<Middleware>, stream: TcpStream) {
    let (mut reader, mut writer) = stream.into_split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Message>();
    let writer_task = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            if write_message(&mut writer, &msg).await.is_err() {
                break;
            }
        }
    });
    let mut apps = Vec::new();
    loop {
        let msg = match read_message(&mut reader).await {
            Ok(Some(m)) => m,
            Ok(None) | Err(WireError::Io(_)) => break,
            Err(e) => {
                let _ = tx.send(ProtocolError::new(wire_error_code(&e), e.to_string()).into());
                break;
            }
        };
        let reply: Option<Message> = match msg {
            Message::RegisterAppRequest(req) => match mw.register_app(&req.local_contract, tx.clone()).await {
                Ok(app_id) => {
                    apps.push(app_id);
                    None
                }
                Err(e) => Some(e.to_protocol_error().into()),
            },
            Message::RegisterChannelRequest(req) => Some(match mw.register_channel(&req.global_contract, &req.self_role) {
                Ok(channel_id) => RegisterChannelResponse { channel_id }.into(),
                Err(e) => e.to_protocol_error().into(),
            }),
            Message::AppSendRequest(req) => Some(match mw.app_send(req.channel_id, &req.to, &req.label, req.body) {
                Ok(()) => AppSendResponse { status: "ok".into() }.into(),
                Err(e) => e.to_protocol_error().into(),
            }),
            Message::AppRecvRequest(req) => Some(match mw.app_recv(req.channel_id, &req.from).await {
                Ok(d) => AppRecvResponse { label: d.label, body: d.body }.into(),
                Err(e) => e.to_protocol_error().into(),
            }),
            Message::CloseChannelRequest(req) => Some(match mw.close_channel(req.channel_id).await {
                Ok(()) => CloseChannelResponse { status: "ok".into() }.into(),
                Err(e) => e.to_protocol_error().into(),
            }),
            other => Some(
                ProtocolError::new("UnexpectedMessage", format!("{} is not served on the private interface", other.message_type()))
                    .into(),
            ),
        };
        if let Some(reply) = reply {
            if tx.send(reply).is_err() {
                break;
            }
        }
    }
    for app_id in apps {
        mw.unregister_app(app_id);
    }
    drop(tx);
    let _ = writer_task.await;
}

async fn handle_public(mw: &Arc<Middleware>, mut stream: TcpStream) {
    loop {
        let msg = match read_message(&mut stream).await {
            Ok(Some(m)) => m,
            Ok(None) | Err(WireError::Io(_)) => return,
            Err(e) => {
                send_error(&mut stream, wire_error_code(&e), e.to_string()).await;
                return;
            }
        };
        let reply: Message = match msg {
            Message::InitChannelRequest(req) => InitChannelResponse { accept: mw.handle_init(&req) }.into(),
            Message::StartChannelRequest(req) => match mw.handle_start(req.session_id) {
                Ok(()) => StartChannelResponse { ack: true }.into(),
                Err(e) => e.to_protocol_error().into(),
            },
            Message::MessageExchangeHeader(header) => {
                let (reader, mut writer) = stream.into_split();
                if let Err((code, detail)) = exchange(mw, header, reader).await {
                    send_error(&mut writer, code, detail).await;
                }
                return;
            }
            other => ProtocolError::new(
                "UnexpectedMessage",
                format!("{} is not served on the public interface", other.message_type()),
            )
            .into(),
        };
        if write_message(&mut stream, &reply).await.is_err() {
            return;
        }
    }
}

/// Receives one sender's message stream after its header.
async fn exchange(
    mw: &Arc<Middleware>,
    header: MessageExchangeHeader,
    mut reader: OwnedReadHalf,
) -> Result<(), (&'static str, String)> {
    if !mw.wait_session_id(header.session_id).await {
        return Err(("UnknownSession", format!("unknown session {}", header.session_id)));
    }
    let mut touched = std::collections::HashMap::new();
    loop {
        let msg = match read_message(&mut reader).await {
            Ok(Some(Message::MessageExchange(m))) => m,
            Ok(Some(other)) => {
                return Err(("UnexpectedMessage", format!("{} inside a message stream", other.message_type())))
            }
            Ok(None) => {
                mw.end_sender(header.session_id, &header.sender);
                return Ok(());
            }
            Err(WireError::Io(_)) => return Ok(()),
            Err(e) => return Err((wire_error_code(&e), e.to_string())),
        };
        if msg.session_id != header.session_id || msg.sender != header.sender {
            return Err((
                "StreamMismatch",
                format!("message from {}/{} on the stream of {}/{}", msg.session_id, msg.sender, header.session_id, header.sender),
            ));
        }
        if !touched.contains_key(&msg.receiver) {
            let Some(session) = mw.wait_session(msg.session_id, &msg.receiver).await else {
                return Err(("UnknownSession", format!("no role {} in session {}", msg.receiver, msg.session_id)));
            };
            if !session.is_peer(&msg.sender) {
                return Err(("UnknownRole", format!("{} is not a participant", msg.sender)));
            }
            touched.insert(msg.receiver.clone(), session);
        }
        let session = &touched[&msg.receiver];
        if let Err(gap) = session.deliver(msg) {
            return Err(("SeqGap", format!("expected seq {}, got {}", gap.expected, gap.got)));
        }
    }
}
