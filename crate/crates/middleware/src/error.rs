use search_wire::ProtocolError;
use thiserror::Error;
use uuid::Uuid;

/// Failures reported to apps over the private interface.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MwError {
    #[error("unknown channel {0}")]
    UnknownChannel(Uuid),
    #[error("role `{0}` is not a partner on this channel")]
    UnknownRole(String),
    #[error("channel closed: {0}")]
    ChannelClosed(String),
    #[error("brokerage failed ({code}): {detail}")]
    BrokerageFailed { code: String, detail: String },
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("broker unreachable: {0}")]
    BrokerUnreachable(String),
    #[error("registration refused ({code}): {detail}")]
    RegistrationRefused { code: String, detail: String },
    #[error("unknown session {0}")]
    UnknownSession(Uuid),
}

impl MwError {
    pub fn code(&self) -> &'static str {
        match self {
            MwError::UnknownChannel(_) => "UnknownChannel",
            MwError::UnknownRole(_) => "UnknownRole",
            MwError::ChannelClosed(_) => "ChannelClosed",
            MwError::BrokerageFailed { .. } => "BrokerageFailed",
            MwError::InvalidContract(_) => "InvalidContract",
            MwError::BrokerUnreachable(_) => "BrokerUnreachable",
            MwError::RegistrationRefused { .. } => "RegistrationRefused",
            MwError::UnknownSession(_) => "UnknownSession",
        }
    }

    pub fn to_protocol_error(&self) -> ProtocolError {
        ProtocolError::new(self.code(), self.to_string())
    }
}
