//! The closed set of protocol messages and their payloads.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

/// Role name to `tcp://host:port` URI.
pub type RoleUris = BTreeMap<String, String>;

macro_rules! messages {
    ($($name:ident => $ty:ty),* $(,)?) => {
        /// Discriminator carried in the `type` field of every frame.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum MessageType {
            $($name),*
        }

        impl MessageType {
            pub const ALL: &'static [MessageType] = &[$(MessageType::$name),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(MessageType::$name => stringify!($name)),*
                }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s {
                    $(stringify!($name) => Some(MessageType::$name),)*
                    _ => None,
                }
            }
        }

        impl std::fmt::Display for MessageType {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        #[derive(Debug, Clone, PartialEq, Eq)]
        pub enum Message {
            $($name($ty)),*
        }

        impl Message {
            pub fn message_type(&self) -> MessageType {
                match self {
                    $(Message::$name(_) => MessageType::$name),*
                }
            }

            pub(crate) fn payload_value(&self) -> serde_json::Result<Value> {
                match self {
                    $(Message::$name(p) => serde_json::to_value(p)),*
                }
            }

            pub(crate) fn from_payload(kind: MessageType, payload: Value) -> serde_json::Result<Self> {
                match kind {
                    $(MessageType::$name => serde_json::from_value(payload).map(Message::$name)),*
                }
            }
        }
    };
}

messages! {
    RegisterAppRequest => RegisterAppRequest,
    RegisterAppResponse => RegisterAppResponse,
    RegisterChannelRequest => RegisterChannelRequest,
    RegisterChannelResponse => RegisterChannelResponse,
    AppSendRequest => AppSendRequest,
    AppSendResponse => AppSendResponse,
    AppRecvRequest => AppRecvRequest,
    AppRecvResponse => AppRecvResponse,
    CloseChannelRequest => CloseChannelRequest,
    CloseChannelResponse => CloseChannelResponse,
    BrokerChannelRequest => BrokerChannelRequest,
    BrokerChannelResponse => BrokerChannelResponse,
    RegisterProviderRequest => RegisterProviderRequest,
    RegisterProviderResponse => RegisterProviderResponse,
    InitChannelRequest => InitChannelRequest,
    InitChannelResponse => InitChannelResponse,
    StartChannelRequest => StartChannelRequest,
    StartChannelResponse => StartChannelResponse,
    MessageExchangeHeader => MessageExchangeHeader,
    MessageExchange => AppMessage,
    ProtocolError => ProtocolError,
}

macro_rules! impl_from {
    ($($variant:ident => $ty:ty),* $(,)?) => {
        $(impl From<$ty> for Message {
            fn from(p: $ty) -> Self {
                Message::$variant(p)
            }
        })*
    };
}

impl_from! {
    RegisterAppRequest => RegisterAppRequest,
    RegisterAppResponse => RegisterAppResponse,
    RegisterChannelRequest => RegisterChannelRequest,
    RegisterChannelResponse => RegisterChannelResponse,
    AppSendRequest => AppSendRequest,
    AppSendResponse => AppSendResponse,
    AppRecvRequest => AppRecvRequest,
    AppRecvResponse => AppRecvResponse,
    CloseChannelRequest => CloseChannelRequest,
    CloseChannelResponse => CloseChannelResponse,
    BrokerChannelRequest => BrokerChannelRequest,
    BrokerChannelResponse => BrokerChannelResponse,
    RegisterProviderRequest => RegisterProviderRequest,
    RegisterProviderResponse => RegisterProviderResponse,
    InitChannelRequest => InitChannelRequest,
    InitChannelResponse => InitChannelResponse,
    StartChannelRequest => StartChannelRequest,
    StartChannelResponse => StartChannelResponse,
    MessageExchangeHeader => MessageExchangeHeader,
    MessageExchange => AppMessage,
    ProtocolError => ProtocolError,
}

/// Status string used by acknowledgement responses.
pub const STATUS_OK: &str = "ok";

mod b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// Error details carried inside broker responses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Failure {
    pub code: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterAppRequest {
    pub local_contract: String,
}

/// Sent once with the new `app_id`, then once per session the app is bound
/// to. For a session notification the app addresses the session using
/// `session_id` as its channel id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RegisterAppResponse {
    Registered {
        app_id: Uuid,
    },
    Session {
        session_id: Uuid,
        role_map: RoleUris,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterChannelRequest {
    pub global_contract: String,
    pub self_role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterChannelResponse {
    pub channel_id: Uuid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSendRequest {
    pub channel_id: Uuid,
    pub to: String,
    pub label: String,
    #[serde(with = "b64")]
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSendResponse {
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppRecvRequest {
    pub channel_id: Uuid,
    pub from: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppRecvResponse {
    pub label: String,
    #[serde(with = "b64")]
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloseChannelRequest {
    pub channel_id: Uuid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloseChannelResponse {
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrokerChannelRequest {
    pub global_contract: String,
    pub initiator_role: String,
    pub initiator_uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BrokerChannelResponse {
    Assigned {
        session_id: Uuid,
        assignments: RoleUris,
    },
    Failed {
        error: Failure,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterProviderRequest {
    pub contract: String,
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum RegisterProviderResponse {
    Registered { provider_id: Uuid },
    Failed { error: Failure },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitChannelRequest {
    pub session_id: Uuid,
    pub role: String,
    pub global_contract: String,
    pub participants: RoleUris,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitChannelResponse {
    pub accept: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartChannelRequest {
    pub session_id: Uuid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartChannelResponse {
    pub ack: bool,
}

/// First frame on a unidirectional message stream between middlewares.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageExchangeHeader {
    pub session_id: Uuid,
    pub sender: String,
}

/// Application message relayed between middlewares. `seq` counts from 0 per
/// `(session, sender, receiver)` stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppMessage {
    pub session_id: Uuid,
    pub sender: String,
    pub receiver: String,
    pub label: String,
    #[serde(with = "b64")]
    pub body: Vec<u8>,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolError {
    pub code: String,
    pub detail: String,
}

impl ProtocolError {
    pub fn new(code: impl Into<String>, detail: impl Into<String>) -> Self {
        ProtocolError {
            code: code.into(),
            detail: detail.into(),
        }
    }
}
