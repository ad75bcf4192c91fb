//! Communicating finite state machines used as behavioural contracts.
//!
//! Provides the contract text format, canonical forms and content hashes,
//! strong bisimilarity, deterministic stepping and a safety check over the
//! synchronous product of a global contract.

mod bisim;
mod canon;
mod error;
mod model;
mod parse;
mod safety;

pub use bisim::bisimilar;
pub use canon::{canonicalize, contract_hash, CanonicalForm, ContractHash};
pub use error::{Error, Result, ValidationError};
pub use model::{
    Action, Cfsm, CfsmBuilder, Direction, GlobalContract, MessageLabel, ParticipantId, StateId,
    Transition,
};
pub use parse::{parse_cfsm, parse_global_contract};
pub use safety::{
    check_safety, check_safety_with_budget, Counterexample, SafetyVerdict, Sync, ViolationKind,
    DEFAULT_BUDGET,
};
