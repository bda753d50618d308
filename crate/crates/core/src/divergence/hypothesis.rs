use serde::Serialize;

use super::{aligned_pair, dmax_raw, support_split, Bits};
use crate::error::{check_unit_interval, Result};
use crate::qalg::linalg::{self, max_abs, trace_product_re, CMat};
use crate::qalg::{DensityOp, HermOp};

/// Type-II errors at or below this are reported as an unbounded divergence.
pub const INFINITE_TYPE2: f64 = 1e-14;
const EXACT_EPS_SLACK: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const BOUNDARY_REL_TOL: f64 = 1e-9;

/// A test 0 ⪯ Λ ⪯ I with its acceptance probabilities under both hypotheses.
#[derive(Clone, Debug)]
pub struct HypothesisTest {
    pub operator: HermOp,
    pub type1: f64,
    pub type2: f64,
}

impl Serialize for HypothesisTest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("HypothesisTest", 3)?;
        st.serialize_field("type1", &self.type1)?;
        st.serialize_field("type2", &self.type2)?;
        st.serialize_field("trace", &self.operator.trace())?;
        st.end()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DivergenceResult {
    pub value: Bits,
    pub eps: f64,
    pub witness: HypothesisTest,
    /// Threshold t* of the Neyman–Pearson test on ρ − tσ.
    pub threshold: f64,
    /// −log₂ Tr(Λσ) recomputed from the witness: a certified lower bound.
    pub certificate_lower: Bits,
    /// −log₂[(1 − ε − Tr(ρ − t*σ)₊)/t*]: weak-duality upper bound.
    pub certificate_upper: Bits,
}

struct Split {
    values: Vec<f64>,
    vectors: CMat,
    /// ⟨v_k|ρ|v_k⟩ for each eigenvector of ρ − tσ
    rho_weights: Vec<f64>,
}

fn split_at(r: &CMat, s: &CMat, t: f64) -> Split {
    let x = r - s.scale(t);
    let (values, vectors) = linalg::herm_eig_raw(&x);
    let rv = r * &vectors;
    let rho_weights = (0..values.len())
        .map(|k| vectors.column(k).dotc(&rv.column(k)).re)
        .collect();
    Split {
        values,
        vectors,
        rho_weights,
    }
}

/// Tr(P_{>0}(ρ − tσ) ρ), non-increasing in t.
fn type1_of_positive_part(sp: &Split) -> f64 {
    sp.values
        .iter()
        .zip(&sp.rho_weights)
        .filter(|(l, _)| **l > 0.0)
        .map(|(_, w)| *w)
        .sum()
}

fn projector(vectors: &CMat, weights: &[f64]) -> CMat {
    linalg::from_spectrum(weights, vectors, |w| w)
}

fn finish(
    r: &CMat,
    s: &CMat,
    lambda: CMat,
    eps: f64,
    threshold: f64,
    rho: &DensityOp,
) -> DivergenceResult {
    let type1 = trace_product_re(&lambda, r);
    let type2 = trace_product_re(&lambda, s).max(0.0);
    let value = if type2 <= INFINITE_TYPE2 {
        Bits::Infinite
    } else {
        Bits::Finite(-type2.log2())
    };
    let target = target_of(eps);
    let certificate_upper = if threshold.is_finite() && threshold > 0.0 {
        let sp = split_at(r, s, threshold);
        let pos: f64 = sp.values.iter().filter(|&&l| l > 0.0).sum();
        let floor = (target - pos) / threshold;
        if floor > 0.0 {
            Bits::Finite(-floor.log2())
        } else {
            Bits::Infinite
        }
    } else {
        Bits::Infinite
    };
    let certificate_lower = if type1 >= target - 1e-9 { value } else { Bits::Finite(0.0) };
    DivergenceResult {
        value,
        eps,
        witness: HypothesisTest {
            operator: HermOp::trusted(lambda, rho.layout().clone()),
            type1,
            type2,
        },
        threshold,
        certificate_lower,
        certificate_upper,
    }
}

fn target_of(eps: f64) -> f64 {
    if eps == 0.0 {
        1.0 - EXACT_EPS_SLACK
    } else {
        1.0 - eps
    }
}

/// D_H^ε(ρ‖σ) = sup { −log₂ Tr(Λσ) : 0 ⪯ Λ ⪯ I, Tr(Λρ) ≥ 1 − ε } with an optimal Λ.
///
/// The optimum is a Neyman–Pearson test: Λ = P_{>0}(ρ − t*σ) + λ·P_{=0}(ρ − t*σ).
/// On the zero eigenspace Tr(Λ₀ρ) = t*·Tr(Λ₀σ) for any Λ₀ supported there, so a
/// single weight λ on that whole subspace loses nothing.
pub fn dh_eps(rho: &DensityOp, sigma: &DensityOp, eps: f64) -> Result<DivergenceResult> {
    check_unit_interval("eps", eps, false)?;
    let (r, s) = aligned_pair(rho, sigma)?;
    let target = target_of(eps);
    let d = r.nrows();

    // ρ's weight outside supp σ can be accepted at no type-II cost.
    let support = support_split(&r, &s);
    if support.kernel_weight >= target {
        let weights: Vec<f64> = support
            .values
            .iter()
            .map(|&l| if l <= support.threshold { 1.0 } else { 0.0 })
            .collect();
        let p = projector(&support.vectors, &weights);
        let scale = (target / support.kernel_weight).min(1.0);
        return Ok(finish(&r, &s, p.scale(scale), eps, f64::INFINITY, rho));
    }

    let mut hi = match dmax_raw(&r, &s) {
        Ok(dm) => (dm + 1.0).exp2(),
        Err(_) => 1.0,
    };
    let mut sp_hi = split_at(&r, &s, hi);
    let mut doublings = 0;
    while type1_of_positive_part(&sp_hi) > target && doublings < 200 {
        hi *= 2.0;
        sp_hi = split_at(&r, &s, hi);
        doublings += 1;
    }
    if type1_of_positive_part(&sp_hi) > target {
        // ρ's remaining weight sits on numerically negligible σ directions
        let weights: Vec<f64> = sp_hi.values.iter().map(|&l| if l > 0.0 { 1.0 } else { 0.0 }).collect();
        let g = type1_of_positive_part(&sp_hi);
        let p = projector(&sp_hi.vectors, &weights);
        return Ok(finish(&r, &s, p.scale(target / g), eps, hi, rho));
    }

    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let sp = split_at(&r, &s, mid);
        if type1_of_positive_part(&sp) > target {
            lo = mid;
        } else {
            hi = mid;
            sp_hi = sp;
        }
    }

    let t = hi;
    let tol = BOUNDARY_REL_TOL * (max_abs(&r) + t * max_abs(&s));
    let mut above = vec![0.0; d];
    let mut boundary = vec![0.0; d];
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..d {
        let l = sp_hi.values[k];
        if l > tol {
            above[k] = 1.0;
            a += sp_hi.rho_weights[k];
        } else if l >= -tol {
            boundary[k] = 1.0;
            b += sp_hi.rho_weights[k];
        }
    }
    let lambda = if a >= target {
        projector(&sp_hi.vectors, &above).scale(target / a)
    } else if b > 0.0 && a + b >= target {
        let w = ((target - a) / b).clamp(0.0, 1.0);
        let weights: Vec<f64> = (0..d).map(|k| above[k] + w * boundary[k]).collect();
        projector(&sp_hi.vectors, &weights)
    } else {
        // boundary band missed the crossing; fall back to the lower threshold's test
        let sp_lo = split_at(&r, &s, lo);
        let weights: Vec<f64> = sp_lo.values.iter().map(|&l| if l > 0.0 { 1.0 } else { 0.0 }).collect();
        let g = type1_of_positive_part(&sp_lo);
        projector(&sp_lo.vectors, &weights).scale((target / g).min(1.0))
    };
    Ok(finish(&r, &s, lambda, eps, t, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::SystemLayout;

    fn diag(p: &[f64]) -> DensityOp {
        let l = SystemLayout::single("A", p.len()).unwrap();
        DensityOp::diagonal(p, &l).unwrap()
    }

    #[test]
    fn self_divergence() {
        let rho = diag(&[0.3, 0.7]);
        let r = dh_eps(&rho, &rho, 0.25).unwrap();
        assert!((r.value.as_f64() - (4.0f64 / 3.0).log2()).abs() < 1e-9);
        assert!((r.witness.type1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn classical_example() {
        let r = dh_eps(&diag(&[0.9, 0.1]), &diag(&[0.5, 0.5]), 0.1).unwrap();
        assert!((r.value.as_f64() - 1.0).abs() < 1e-9);
        let w = r.witness.operator.matrix();
        assert!((w[(0, 0)].re - 1.0).abs() < 1e-9 && w[(1, 1)].re.abs() < 1e-9);
    }

    #[test]
    fn orthogonal_supports_unbounded() {
        let r = dh_eps(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]), 0.3).unwrap();
        assert!(r.value.is_infinite());
    }

    #[test]
    fn exact_constraint_edge() {
        let r = dh_eps(&diag(&[0.5, 0.5]), &diag(&[1.0, 0.0]), 0.0).unwrap();
        assert!(r.value.as_f64().abs() < 1e-9);
    }
}
