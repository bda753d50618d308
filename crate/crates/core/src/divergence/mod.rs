//! One-shot information quantities in bits: hypothesis-testing divergence
//! with an optimal test, max-relative entropy and relative entropy.

mod hypothesis;
mod oracle;

pub use hypothesis::{dh_eps, DivergenceResult, HypothesisTest, INFINITE_TYPE2};
pub use oracle::{dh_classical_oracle, dh_rank1_lagrange, dh_rank1_oracle};

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qalg::linalg::{self, CMat};
use crate::qalg::DensityOp;

pub const SUPPORT_TOL: f64 = 1e-10;

/// A quantity in bits that may be unbounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bits {
    Finite(f64),
    Infinite,
}

impl Bits {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bits::Finite(v) => Some(v),
            Bits::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bits::Infinite)
    }

    /// `f64::INFINITY` for the unbounded case.
    pub fn as_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn min(self, other: Bits) -> Bits {
        if self.as_f64() <= other.as_f64() {
            self
        } else {
            other
        }
    }

    pub fn minus(self, x: f64) -> Bits {
        match self {
            Bits::Finite(v) => Bits::Finite(v - x),
            Bits::Infinite => Bits::Infinite,
        }
    }

    /// 2^{-value}; zero when unbounded.
    pub fn exp2_neg(self) -> f64 {
        match self {
            Bits::Finite(v) => (-v).exp2(),
            Bits::Infinite => 0.0,
        }
    }
}

impl std::fmt::Display for Bits {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bits::Finite(v) => write!(f, "{v}"),
            Bits::Infinite => write!(f, "+inf"),
        }
    }
}

impl Serialize for Bits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bits::Finite(v) => s.serialize_f64(*v),
            Bits::Infinite => s.serialize_str("+inf"),
        }
    }
}

pub(crate) fn aligned_pair(rho: &DensityOp, sigma: &DensityOp) -> Result<(CMat, CMat)> {
    if !rho.layout().same_registers(sigma.layout()) {
        return Err(Error::DimensionMismatch(format!(
            "arguments on {} and {}",
            rho.layout(),
            sigma.layout()
        )));
    }
    Ok((rho.matrix().clone(), sigma.aligned_matrix(rho.layout())?))
}

/// Spectral data of σ split into support and kernel, plus ρ's weight on the kernel.
pub(crate) struct SupportSplit {
    pub values: Vec<f64>,
    pub vectors: CMat,
    pub kernel_weight: f64,
    pub threshold: f64,
}

pub(crate) fn support_split(rho: &CMat, sigma: &CMat) -> SupportSplit {
    let (values, vectors) = linalg::herm_eig_raw(sigma);
    let threshold = SUPPORT_TOL;
    let rv = rho * &vectors;
    let mut kernel_weight = 0.0;
    for (k, &l) in values.iter().enumerate() {
        if l <= threshold {
            kernel_weight += vectors.column(k).dotc(&rv.column(k)).re;
        }
    }
    SupportSplit {
        values,
        vectors,
        kernel_weight: kernel_weight.max(0.0),
        threshold,
    }
}

/// D(ρ‖σ) = Tr ρ log ρ − Tr ρ log σ in bits.
pub fn relative_entropy(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    let (r, s) = aligned_pair(rho, sigma)?;
    let split = support_split(&r, &s);
    if split.kernel_weight > SUPPORT_TOL {
        return Err(Error::Support(split.kernel_weight));
    }
    let neg_entropy: f64 = linalg::herm_eigenvalues(&r)
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| l * l.log2())
        .sum();
    let rv = &r * &split.vectors;
    let mut cross = 0.0;
    for (k, &l) in split.values.iter().enumerate() {
        if l > split.threshold {
            let w = split.vectors.column(k).dotc(&rv.column(k)).re;
            cross += w * l.log2();
        }
    }
    Ok(neg_entropy - cross)
}

/// log₂ of the largest eigenvalue of σ^{-1/2} ρ σ^{-1/2} on supp σ.
pub fn dmax(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    let (r, s) = aligned_pair(rho, sigma)?;
    dmax_raw(&r, &s)
}

pub(crate) fn dmax_raw(r: &CMat, s: &CMat) -> Result<f64> {
    let split = support_split(r, s);
    if split.kernel_weight > SUPPORT_TOL {
        return Err(Error::Support(split.kernel_weight));
    }
    let inv = linalg::from_spectrum(&split.values, &split.vectors, |l| {
        if l > split.threshold {
            1.0 / l.sqrt()
        } else {
            0.0
        }
    });
    let m = &inv * r * &inv;
    let top = linalg::herm_eigenvalues(&m).first().copied().unwrap_or(0.0);
    Ok(top.max(1e-300).log2())
}
