//! Register-aware dense linear algebra: layouts, states, partial traces,
//! purifications and distances.

pub mod layout;
pub mod linalg;
pub mod metrics;
pub mod sample;
pub mod state;

pub use layout::{dim_cap, Register, SystemLayout, DEFAULT_DIM_CAP, DIM_CAP_ENV};
pub use linalg::{c, CMat, CVec, C64};
pub use metrics::{fidelity, purified_distance, purify, schmidt_decompose, Schmidt};
pub use sample::{derive_seed, sample, Sample, SampleKind, Sampler};
pub use state::{DensityOp, Eigen, HermOp, Ket};

/// Eigen-decomposition with eigenvalues in descending order.
pub fn herm_eig(h: &HermOp) -> Eigen {
    h.eigen()
}

pub fn tensor(a: &DensityOp, b: &DensityOp) -> crate::Result<DensityOp> {
    a.tensor(b)
}

pub fn partial_trace<S: AsRef<str>>(rho: &DensityOp, keep: &[S]) -> crate::Result<DensityOp> {
    rho.partial_trace(keep)
}

pub fn embed(op: &HermOp, target: &SystemLayout) -> crate::Result<HermOp> {
    op.embed(target)
}
