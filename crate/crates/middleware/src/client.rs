//! Client side of the private interface, as used by local applications.

use search_wire::{
    read_message, write_message, AppRecvRequest, AppSendRequest, CloseChannelRequest, Message,
    RegisterAppRequest, RegisterAppResponse, RegisterChannelRequest, RoleUris, TcpUri, WireError,
};
use thiserror::Error;
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::TcpStream;
use tokio::sync::{mpsc, Mutex};
use uuid::Uuid;

use crate::session::Delivery;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("{code}: {detail}")]
    Remote { code: String, detail: String },
    #[error("unexpected reply {0}")]
    Unexpected(String),
    #[error("middleware closed the connection")]
    Disconnected,
}

impl ClientError {
    /// Error code reported by the middleware, if any.
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Remote { code, .. } => Some(code),
            _ => None,
        }
    }
}

/// A session the middleware bound a registered app to. The app uses
/// `session_id` as the channel id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionNotice {
    pub session_id: Uuid,
    pub role_map: RoleUris,
}

struct Exchange {
    writer: OwnedWriteHalf,
    replies: mpsc::UnboundedReceiver<Message>,
}

/// One connection to a middleware's private interface. Requests on one
/// client are answered in order; a pending `recv` holds the connection, so
/// use separate clients for concurrent receives.
pub struct AppClient {
    exchange: Mutex<Exchange>,
    sessions: Mutex<mpsc::UnboundedReceiver<SessionNotice>>,
}

impl AppClient {
    pub async fn connect(uri: &TcpUri) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(uri.authority()).await.map_err(WireError::Io)?;
        stream.set_nodelay(true).map_err(WireError::Io)?;
        let (mut reader, writer) = stream.into_split();
        let (reply_tx, replies) = mpsc::unbounded_channel();
        let (session_tx, sessions) = mpsc::unbounded_channel();
        tokio::spawn(async move {
            while let Ok(Some(msg)) = read_message(&mut reader).await {
                let routed = match msg {
                    Message::RegisterAppResponse(RegisterAppResponse::Session { session_id, role_map }) => {
                        session_tx.send(SessionNotice { session_id, role_map }).is_ok()
                    }
                    other => reply_tx.send(other).is_ok(),
                };
                if !routed {
                    break;
                }
            }
        });
        Ok(AppClient {
            exchange: Mutex::new(Exchange { writer, replies }),
            sessions: Mutex::new(sessions),
        })
    }

    async fn request(&self, msg: Message) -> Result<Message, ClientError> {
        let mut ex = self.exchange.lock().await;
        write_message(&mut ex.writer, &msg).await?;
        match ex.replies.recv().await {
            Some(Message::ProtocolError(e)) => Err(ClientError::Remote { code: e.code, detail: e.detail }),
            Some(reply) => Ok(reply),
            None => Err(ClientError::Disconnected),
        }
    }

    /// Registers a provider contract; the middleware forwards it to the broker.
    pub async fn register_app(&self, local_contract: &str) -> Result<Uuid, ClientError> {
        let req = RegisterAppRequest { local_contract: local_contract.to_owned() };
        match self.request(req.into()).await? {
            Message::RegisterAppResponse(RegisterAppResponse::Registered { app_id }) => Ok(app_id),
            other => Err(ClientError::Unexpected(other.message_type().to_string())),
        }
    }

    /// Waits for the next session this connection's apps are bound to.
    pub async fn next_session(&self) -> Result<SessionNotice, ClientError> {
        self.sessions.lock().await.recv().await.ok_or(ClientError::Disconnected)
    }

    pub async fn register_channel(&self, global_contract: &str, self_role: &str) -> Result<Uuid, ClientError> {
        let req = RegisterChannelRequest {
            global_contract: global_contract.to_owned(),
            self_role: self_role.to_owned(),
        };
        match self.request(req.into()).await? {
            Message::RegisterChannelResponse(r) => Ok(r.channel_id),
            other => Err(ClientError::Unexpected(other.message_type().to_string())),
        }
    }

    pub async fn send(&self, channel_id: Uuid, to: &str, label: &str, body: &[u8]) -> Result<(), ClientError> {
        let req = AppSendRequest {
            channel_id,
            to: to.to_owned(),
            label: label.to_owned(),
            body: body.to_vec(),
        };
        match self.request(req.into()).await? {
            Message::AppSendResponse(_) => Ok(()),
            other => Err(ClientError::Unexpected(other.message_type().to_string())),
        }
    }

    pub async fn recv(&self, channel_id: Uuid, from: &str) -> Result<Delivery, ClientError> {
        let req = AppRecvRequest { channel_id, from: from.to_owned() };
        match self.request(req.into()).await? {
            Message::AppRecvResponse(r) => Ok(Delivery { label: r.label, body: r.body }),
            other => Err(ClientError::Unexpected(other.message_type().to_string())),
        }
    }

    pub async fn close(&self, channel_id: Uuid) -> Result<(), ClientError> {
        match self.request(CloseChannelRequest { channel_id }.into()).await? {
            Message::CloseChannelResponse(_) => Ok(()),
            other => Err(ClientError::Unexpected(other.message_type().to_string())),
        }
    }
}
