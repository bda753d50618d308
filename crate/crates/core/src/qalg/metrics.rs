use serde::Serialize;

use super::layout::SystemLayout;
use super::linalg::{self, c, psd_sqrt, CMat, CVec};
use super::state::{DensityOp, Ket, RANK_TOL};
use crate::error::{Error, Result};

/// ‖√ρ √σ‖₁.
pub fn fidelity(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    if !rho.layout().same_registers(sigma.layout()) {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between {} and {}",
            rho.layout(),
            sigma.layout()
        )));
    }
    let s = sigma.aligned_matrix(rho.layout())?;
    let f = linalg::trace_norm(&(psd_sqrt(rho.matrix()) * psd_sqrt(&s)));
    Ok(if rho.is_normalized() && sigma.is_normalized() {
        f.clamp(0.0, 1.0)
    } else {
        f.max(0.0)
    })
}

/// √(1 − F²).
pub fn purified_distance(rho: &DensityOp, sigma: &DensityOp) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Purification on `rho`'s registers followed by an environment of dimension rank(ρ).
pub fn purify(rho: &DensityOp, env_label: &str) -> Result<Ket> {
    if !rho.is_normalized() {
        return Err(Error::Trace {
            found: rho.trace(),
            expected: "= 1",
        });
    }
    let e = rho.eigen();
    let kept: Vec<usize> = (0..e.values.len())
        .filter(|&k| e.values[k] > RANK_TOL)
        .collect();
    let r = kept.len().max(1);
    let layout = rho.layout().concat(&SystemLayout::single(env_label, r)?)?;
    let d = rho.dim();
    let mut v = CVec::zeros(d * r);
    for (slot, &k) in kept.iter().enumerate() {
        let w = e.values[k].sqrt();
        for i in 0..d {
            v[i * r + slot] = e.vectors[(i, k)] * w;
        }
    }
    Ket::normalized(v, layout)
}

#[derive(Clone, Debug, Serialize)]
pub struct Schmidt {
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub left: Vec<CVec>,
    #[serde(skip)]
    pub right: Vec<CVec>,
    pub left_layout: SystemLayout,
    pub right_layout: SystemLayout,
}

impl Schmidt {
    /// Σ_k λ_k |l_k⟩|r_k⟩ on left ⊕ right.
    pub fn reconstruct(&self) -> Result<Ket> {
        let layout = self.left_layout.concat(&self.right_layout)?;
        let mut v = CVec::zeros(layout.total_dim());
        for (k, &lam) in self.coefficients.iter().enumerate() {
            v += self.left[k].kronecker(&self.right[k]).scale(lam);
        }
        Ket::new(v, layout)
    }
}

/// Schmidt decomposition across `cut` (kept in layout order) versus the rest.
pub fn schmidt_decompose<S: AsRef<str>>(psi: &Ket, cut: &[S]) -> Result<Schmidt> {
    let layout = psi.layout();
    if cut.is_empty() {
        return Err(Error::InvalidCut("empty cut".into()));
    }
    let left_layout = layout
        .restrict(cut)
        .map_err(|e| Error::InvalidCut(e.to_string()))?;
    let right_layout = layout.without(cut);
    if right_layout.is_empty() {
        return Err(Error::InvalidCut("cut holds every register".into()));
    }
    let ordered = left_layout.concat(&right_layout)?;
    let v = psi.aligned(&ordered)?;
    let (dl, dr) = (left_layout.total_dim(), right_layout.total_dim());
    let m = CMat::from_fn(dl, dr, |i, j| v.amplitudes()[i * dr + j]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut coefficients = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for &k in &order {
        let s = svd.singular_values[k];
        if s <= 1e-14 {
            continue;
        }
        coefficients.push(s);
        left.push(u.column(k).into_owned());
        right.push(CVec::from_iterator(dr, (0..dr).map(|j| vt[(k, j)])));
    }
    if coefficients.is_empty() {
        coefficients.push(0.0);
        left.push(CVec::from_element(dl, c(0.0, 0.0)));
        right.push(CVec::from_element(dr, c(0.0, 0.0)));
    }
    Ok(Schmidt {
        coefficients,
        left,
        right,
        left_layout,
        right_layout,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::linalg::max_abs;

    #[test]
    fn fidelity_mixed_vs_pure() {
        let l = SystemLayout::single("A", 2).unwrap();
        let f = fidelity(
            &DensityOp::maximally_mixed(&l),
            &DensityOp::basis(&l, 0).unwrap(),
        )
        .unwrap();
        assert!((f - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn purify_mixed_qubit() {
        let l = SystemLayout::single("A", 2).unwrap();
        let psi = purify(&DensityOp::maximally_mixed(&l), "E").unwrap();
        assert_eq!(psi.layout().dim_of("E").unwrap(), 2);
        let back = psi.density().partial_trace(&["A"]).unwrap();
        assert!(max_abs(&(back.matrix() - linalg::identity(2).scale(0.5))) < 1e-12);
    }

    #[test]
    fn bell_schmidt() {
        let bell = Ket::maximally_entangled("A", "B", 2).unwrap();
        let s = schmidt_decompose(&bell, &["A"]).unwrap();
        assert_eq!(s.coefficients.len(), 2);
        for x in &s.coefficients {
            assert!((x - 0.5f64.sqrt()).abs() < 1e-12);
        }
        assert!(matches!(
            schmidt_decompose(&bell, &["A", "B"]),
            Err(Error::InvalidCut(_))
        ));
    }
}
