use thiserror::Error;

use crate::model::{Action, ParticipantId};

/// Structural problems with a machine or a global contract.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("`{0}` is not a valid state name")]
    InvalidStateName(String),
    #[error("self-communication in `{0}`")]
    SelfCommunication(Action),
    #[error("action subject `{found}` does not match machine `{expected}`")]
    SubjectMismatch {
        expected: ParticipantId,
        found: ParticipantId,
    },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("duplicate transition `{from} {action} {to}`")]
    DuplicateTransition {
        from: String,
        action: Action,
        to: String,
    },
    #[error("machine `{0}` is defined more than once")]
    DuplicateMachine(ParticipantId),
    #[error("machine `{machine}` communicates with unknown participant `{partner}`")]
    UnknownPartner {
        machine: ParticipantId,
        partner: ParticipantId,
    },
    #[error("a global contract needs at least 2 machines, found {0}")]
    TooFewMachines(usize),
    #[error("machine keyed as `{key}` is named `{name}`")]
    RoleMismatch {
        key: ParticipantId,
        name: ParticipantId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("{}{source}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        line: Option<usize>,
        #[source]
        source: ValidationError,
    },
    #[error("cannot rename to `{0}`: it is already a partner of the machine")]
    NameClash(ParticipantId),
    #[error("ambiguous step from state `{state}` on `{action}`")]
    AmbiguousStep { state: String, action: Action },
    #[error("exploration budget of {0} configurations exceeded")]
    BudgetExceeded(usize),
}

impl Error {
    pub(crate) fn syntax(line: usize, reason: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            reason: reason.into(),
        }
    }

    /// The validation failure behind this error, if it is one.
    pub fn validation(&self) -> Option<&ValidationError> {
        match self {
            Error::Validation { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<ValidationError> for Error {
    fn from(source: ValidationError) -> Self {
        Error::Validation { line: None, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
