//! One-shot classical communication over quantum channels: hypothesis-testing
//! divergences, converse and achievability rate expressions, and exact
//! simulation of position-based codes at small dimension.

pub mod error;
pub mod exec;
pub mod optim;
pub mod channel;
pub mod cli;
pub mod bounds;
pub mod coding;
pub mod divergence;
pub mod facts;
pub mod qalg;

pub use error::{Error, Result};
pub use exec::Exec;
