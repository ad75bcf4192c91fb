use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("invalid contract: {0}")]
    InvalidContract(#[from] cfsm::Error),
    #[error(transparent)]
    InvalidUri(#[from] search_wire::UriError),
    #[error("role `{0}` is not part of the contract")]
    UnknownRole(String),
    #[error("store error: {0}")]
    Store(#[from] io::Error),
}

impl BrokerError {
    pub fn code(&self) -> &'static str {
        match self {
            BrokerError::InvalidContract(_) => "InvalidContract",
            BrokerError::InvalidUri(_) => "InvalidUri",
            BrokerError::UnknownRole(_) => "UnknownRole",
            BrokerError::Store(_) => "StoreError",
        }
    }
}
