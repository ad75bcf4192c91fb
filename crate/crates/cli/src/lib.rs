//! Entry points of the `search` binary, plus the payment example apps and
//! demo as a library for tests.

pub mod cli;
pub mod contract;
pub mod demo;
mod logging;
pub mod payment;

pub use cli::run;
