//! Converse and achievable rate expressions evaluated at concrete states,
//! with the σ search and input-state search around them.

mod corollary;
mod input;
mod rates;
mod sigma;

pub use corollary::{identity_channel_corollary, IdentityCorollary, WitnessCheck, COROLLARY_TOL};
pub use input::{optimize_input_state, InputSearch};
pub use rates::{
    achievable_rate, converse_value, corollary_relaxations, BoundKind, BoundScenario, Ceiling,
    RateBound, RateTerm, Setup,
};
pub use sigma::{SigmaSearch, TracePoint};
