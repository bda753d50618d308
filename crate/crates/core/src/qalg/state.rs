use serde::Serialize;

use super::layout::SystemLayout;
use super::linalg::{
    self, c, embed_operator, herm_eig_raw, hermiticity_deviation, kron, max_abs, partial_trace_raw,
    reorder_operator, symmetrize, trace_re, CMat, CVec, C64,
};
use crate::error::{Error, Result};

/// Inputs whose anti-Hermitian part exceeds this (relative to the largest
/// entry) are rejected; smaller deviations are symmetrized away.
pub const HERMITIAN_REJECT: f64 = 1e-8;
pub const PSD_CLIP: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-10;
pub const RANK_TOL: f64 = 1e-10;

fn check_square(m: &CMat, layout: &SystemLayout) -> Result<()> {
    let d = layout.total_dim();
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} matrix on layout {} of dimension {}",
            m.nrows(),
            m.ncols(),
            layout,
            d
        )));
    }
    Ok(())
}

fn validated_hermitian(m: CMat, layout: &SystemLayout) -> Result<CMat> {
    check_square(&m, layout)?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NotHermitian(f64::NAN));
    }
    let dev = hermiticity_deviation(&m);
    if dev > HERMITIAN_REJECT * max_abs(&m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(symmetrize(&m))
}

/// Hermitian operator on a labelled layout.
#[derive(Clone, Debug, PartialEq)]
pub struct HermOp {
    matrix: CMat,
    layout: SystemLayout,
}

#[derive(Clone, Debug, Serialize)]
pub struct Eigen {
    pub values: Vec<f64>,
    #[serde(skip)]
    pub vectors: CMat,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMat {
        linalg::from_spectrum(&self.values, &self.vectors, |l| l)
    }
}

impl HermOp {
    pub fn new(matrix: CMat, layout: SystemLayout) -> Result<Self> {
        let matrix = validated_hermitian(matrix, &layout)?;
        Ok(Self { matrix, layout })
    }

    pub(crate) fn trusted(matrix: CMat, layout: SystemLayout) -> Self {
        debug_assert_eq!(matrix.nrows(), layout.total_dim());
        Self {
            matrix: symmetrize(&matrix),
            layout,
        }
    }

    pub fn identity(layout: &SystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: linalg::identity(d),
            layout: layout.clone(),
        }
    }

    pub fn zero(layout: &SystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: CMat::zeros(d, d),
            layout: layout.clone(),
        }
    }

    /// Rank-one operator |v⟩⟨v| (not normalized).
    pub fn outer(v: &CVec, layout: &SystemLayout) -> Result<Self> {
        if v.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on layout {layout}",
                v.len()
            )));
        }
        Ok(Self::trusted(v * v.adjoint(), layout.clone()))
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    pub fn eigen(&self) -> Eigen {
        let (values, vectors) = herm_eig_raw(&self.matrix);
        Eigen { values, vectors }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::herm_eigenvalues(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.matrix)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::trusted(linalg::herm_fn(&self.matrix, f), self.layout.clone())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
            layout: self.layout.clone(),
        }
    }

    pub fn add(&self, other: &HermOp) -> Result<Self> {
        let m = other.aligned_matrix(&self.layout)?;
        Ok(Self {
            matrix: &self.matrix + m,
            layout: self.layout.clone(),
        })
    }

    pub fn sub(&self, other: &HermOp) -> Result<Self> {
        let m = other.aligned_matrix(&self.layout)?;
        Ok(Self {
            matrix: &self.matrix - m,
            layout: self.layout.clone(),
        })
    }

    /// I − self.
    pub fn complement(&self) -> Self {
        Self {
            matrix: linalg::identity(self.dim()) - &self.matrix,
            layout: self.layout.clone(),
        }
    }

    /// Matrix of this operator with factors ordered as in `layout`, which must hold the same registers.
    pub fn aligned_matrix(&self, layout: &SystemLayout) -> Result<CMat> {
        if &self.layout == layout {
            Ok(self.matrix.clone())
        } else {
            reorder_operator(&self.matrix, &self.layout, layout)
        }
    }

    pub fn reordered(&self, layout: &SystemLayout) -> Result<Self> {
        Ok(Self {
            matrix: self.aligned_matrix(layout)?,
            layout: layout.clone(),
        })
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.clone(),
            layout: self.layout.relabel(f)?,
        })
    }

    pub fn tensor(&self, other: &HermOp) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            layout,
        })
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let (m, layout) = partial_trace_labels(&self.matrix, &self.layout, keep)?;
        Ok(Self { matrix: m, layout })
    }

    /// Identity on every register of `target` that this operator does not act on.
    pub fn embed(&self, target: &SystemLayout) -> Result<Self> {
        Ok(Self {
            matrix: embed_operator(&self.matrix, &self.layout, target)?,
            layout: target.clone(),
        })
    }

    /// Re Tr(self · ρ), with ρ's layout aligned to this operator's.
    pub fn expectation(&self, rho: &DensityOp) -> Result<f64> {
        let m = rho.aligned_matrix(&self.layout)?;
        Ok(linalg::trace_product_re(&self.matrix, &m))
    }

    pub fn is_effect(&self, tol: f64) -> bool {
        let ev = self.eigenvalues();
        ev.first().is_none_or(|&l| l <= 1.0 + tol) && ev.last().is_none_or(|&l| l >= -tol)
    }
}

pub(crate) fn partial_trace_labels<S: AsRef<str>>(
    m: &CMat,
    layout: &SystemLayout,
    keep: &[S],
) -> Result<(CMat, SystemLayout)> {
    let kept = layout.restrict(keep)?;
    let flags: Vec<bool> = layout
        .registers()
        .iter()
        .map(|r| kept.contains(&r.label))
        .collect();
    Ok((partial_trace_raw(m, &layout.dims(), &flags), kept))
}

/// Positive semidefinite operator, unit trace unless marked sub-normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOp {
    matrix: CMat,
    layout: SystemLayout,
    normalized: bool,
}

impl DensityOp {
    pub fn new(matrix: CMat, layout: SystemLayout) -> Result<Self> {
        Self::validated(matrix, layout, true)
    }

    pub fn subnormalized(matrix: CMat, layout: SystemLayout) -> Result<Self> {
        Self::validated(matrix, layout, false)
    }

    fn validated(matrix: CMat, layout: SystemLayout, normalized: bool) -> Result<Self> {
        let matrix = validated_hermitian(matrix, &layout)?;
        let (values, vectors) = herm_eig_raw(&matrix);
        let min = values.last().copied().unwrap_or(0.0);
        if min < -PSD_CLIP {
            return Err(Error::NotPsd(min));
        }
        let matrix = if min < 0.0 {
            symmetrize(&linalg::from_spectrum(&values, &vectors, |l| l.max(0.0)))
        } else {
            matrix
        };
        let tr = trace_re(&matrix);
        if normalized && (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::Trace {
                found: tr,
                expected: "= 1",
            });
        }
        if !normalized && tr > 1.0 + TRACE_TOL {
            return Err(Error::Trace {
                found: tr,
                expected: "<= 1",
            });
        }
        Ok(Self {
            matrix,
            layout,
            normalized,
        })
    }

    /// Skips the spectral checks; for results of operations that preserve positivity.
    pub(crate) fn trusted(matrix: CMat, layout: SystemLayout, normalized: bool) -> Self {
        debug_assert_eq!(matrix.nrows(), layout.total_dim());
        Self {
            matrix: symmetrize(&matrix),
            layout,
            normalized,
        }
    }

    pub fn from_ket(psi: &Ket) -> Self {
        let v = psi.amplitudes();
        Self::trusted(v * v.adjoint(), psi.layout().clone(), true)
    }

    pub fn maximally_mixed(layout: &SystemLayout) -> Self {
        let d = layout.total_dim();
        Self::trusted(
            linalg::identity(d).scale(1.0 / d as f64),
            layout.clone(),
            true,
        )
    }

    pub fn basis(layout: &SystemLayout, index: usize) -> Result<Self> {
        Ok(Self::from_ket(&Ket::basis(layout, index)?))
    }

    pub fn diagonal(probs: &[f64], layout: &SystemLayout) -> Result<Self> {
        if probs.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities on layout {layout}",
                probs.len()
            )));
        }
        let m = CMat::from_diagonal(&CVec::from_iterator(
            probs.len(),
            probs.iter().map(|&p| c(p, 0.0)),
        ));
        Self::new(m, layout.clone())
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.matrix)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product_re(&self.matrix, &self.matrix)
    }

    pub fn as_herm(&self) -> HermOp {
        HermOp {
            matrix: self.matrix.clone(),
            layout: self.layout.clone(),
        }
    }

    pub fn eigen(&self) -> Eigen {
        self.as_herm().eigen()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::herm_eigenvalues(&self.matrix)
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > tol).count()
    }

    /// Leading eigenvector when the state is pure within `tol`.
    pub fn pure_vector(&self, tol: f64) -> Result<Ket> {
        let e = self.eigen();
        let top = e.values.first().copied().unwrap_or(0.0);
        if (top - self.trace()).abs() > tol || (top - 1.0).abs() > tol {
            return Err(Error::NotPure(top));
        }
        Ket::new(e.vectors.column(0).into_owned(), self.layout.clone())
    }

    pub fn aligned_matrix(&self, layout: &SystemLayout) -> Result<CMat> {
        if &self.layout == layout {
            Ok(self.matrix.clone())
        } else {
            reorder_operator(&self.matrix, &self.layout, layout)
        }
    }

    pub fn reordered(&self, layout: &SystemLayout) -> Result<Self> {
        Ok(Self {
            matrix: self.aligned_matrix(layout)?,
            layout: layout.clone(),
            normalized: self.normalized,
        })
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Ok(Self {
            matrix: self.matrix.clone(),
            layout: self.layout.relabel(f)?,
            normalized: self.normalized,
        })
    }

    pub fn tensor(&self, other: &DensityOp) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            layout,
            normalized: self.normalized && other.normalized,
        })
    }

    pub fn partial_trace<S: AsRef<str>>(&self, keep: &[S]) -> Result<Self> {
        let (m, layout) = partial_trace_labels(&self.matrix, &self.layout, keep)?;
        Ok(Self {
            matrix: m,
            layout,
            normalized: self.normalized,
        })
    }

    pub fn trace_out<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        for l in labels {
            self.layout.dim_of(l.as_ref())?;
        }
        let keep = self.layout.without(labels);
        self.partial_trace(&keep.labels())
    }

    /// σ with scalar weight, keeping positivity; `normalized` is set when the result has unit trace.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if s < 0.0 {
            return Err(Error::Parameter {
                name: "scale",
                value: s,
                range: "[0, inf)",
            });
        }
        let m = self.matrix.scale(s);
        let tr = trace_re(&m);
        Ok(Self {
            matrix: m,
            layout: self.layout.clone(),
            normalized: (tr - 1.0).abs() <= TRACE_TOL,
        })
    }

    /// Renormalizes to unit trace.
    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 1e-300 {
            return Err(Error::Trace {
                found: tr,
                expected: "> 0",
            });
        }
        Ok(Self {
            matrix: self.matrix.scale(1.0 / tr),
            layout: self.layout.clone(),
            normalized: true,
        })
    }

    /// Weighted sum of states on the same layout.
    pub fn mixture(parts: &[(f64, &DensityOp)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DimensionMismatch("empty mixture".into()))?
            .1;
        let mut m = CMat::zeros(first.dim(), first.dim());
        for (w, rho) in parts {
            m += rho.aligned_matrix(&first.layout)?.scale(*w);
        }
        Self::subnormalized_or_normalized(m, first.layout.clone())
    }

    fn subnormalized_or_normalized(m: CMat, layout: SystemLayout) -> Result<Self> {
        let tr = trace_re(&m);
        if (tr - 1.0).abs() <= TRACE_TOL {
            Self::new(m, layout)
        } else {
            Self::subnormalized(m, layout)
        }
    }

    /// Largest entrywise difference after aligning `other`'s layout to this one.
    pub fn max_abs_diff(&self, other: &DensityOp) -> Result<f64> {
        Ok(max_abs(&(&self.matrix - other.aligned_matrix(&self.layout)?)))
    }
}

/// Normalized state vector on a labelled layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amplitudes: CVec,
    layout: SystemLayout,
}

impl Ket {
    /// Accepts vectors of unit norm within tolerance and renormalizes them exactly.
    pub fn new(amplitudes: CVec, layout: SystemLayout) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} on layout {layout}",
                amplitudes.len()
            )));
        }
        let n2 = amplitudes.norm_squared();
        if !n2.is_finite() || (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(n2.sqrt()),
            layout,
        })
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(amplitudes: CVec, layout: SystemLayout) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 1e-300) {
            return Err(Error::NotNormalized(n * n));
        }
        Self::new(amplitudes.unscale(n), layout)
    }

    pub fn basis(layout: &SystemLayout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::DimensionMismatch(format!(
                "basis index {index} on layout {layout} of dimension {d}"
            )));
        }
        let mut v = CVec::zeros(d);
        v[index] = c(1.0, 0.0);
        Ok(Self {
            amplitudes: v,
            layout: layout.clone(),
        })
    }

    /// Σ_i |i⟩|i⟩/√d on two registers of dimension d.
    pub fn maximally_entangled(a: &str, b: &str, d: usize) -> Result<Self> {
        let layout = SystemLayout::new([(a, d), (b, d)])?;
        let mut v = CVec::zeros(d * d);
        for i in 0..d {
            v[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
        }
        Self::new(v, layout)
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn density(&self) -> DensityOp {
        DensityOp::from_ket(self)
    }

    pub fn inner(&self, other: &Ket) -> Result<C64> {
        let b = other.aligned(&self.layout)?;
        Ok(self.amplitudes.dotc(&b.amplitudes))
    }

    pub fn tensor(&self, other: &Ket) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self {
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
            layout,
        })
    }

    pub fn aligned(&self, layout: &SystemLayout) -> Result<Self> {
        if &self.layout == layout {
            return Ok(self.clone());
        }
        let perm = linalg::layout_permutation(&self.layout, layout)?;
        Ok(Self {
            amplitudes: linalg::permute_vector(&self.amplitudes, &self.layout.dims(), &perm),
            layout: layout.clone(),
        })
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Ok(Self {
            amplitudes: self.amplitudes.clone(),
            layout: self.layout.relabel(f)?,
        })
    }

    /// Applies an operator acting on a subset of the registers.
    pub fn apply(&self, op: &CMat, on: &SystemLayout) -> Result<CVec> {
        let full = embed_operator(op, on, &self.layout)?;
        Ok(full * &self.amplitudes)
    }
}
