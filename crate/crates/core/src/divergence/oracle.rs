//! Independent reference solvers used to cross-check [`dh_eps`](super::dh_eps).

use super::hypothesis::INFINITE_TYPE2;
use super::Bits;
use crate::error::{check_unit_interval, Error, Result};
use crate::optim::nelder_mead;
use crate::qalg::linalg::{self, c, CVec};
use crate::qalg::DensityOp;

fn check_distribution(name: &'static str, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter {
            name,
            value: sum,
            range: "probability vector",
        });
    }
    Ok(())
}

/// Classical Neyman–Pearson: accept outcomes in decreasing order of p/q,
/// splitting the last one, until the accepted p-mass reaches 1 − ε.
pub fn dh_classical_oracle(p: &[f64], q: &[f64], eps: f64) -> Result<Bits> {
    check_unit_interval("eps", eps, false)?;
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution("p", p)?;
    check_distribution("q", q)?;
    let mut order: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    // ratio comparison p_i/q_i > p_j/q_j as p_i q_j > p_j q_i; stable sort keeps index order on ties
    order.sort_by(|&i, &j| (p[j] * q[i]).total_cmp(&(p[i] * q[j])));
    let mut remaining = 1.0 - eps;
    let mut beta = 0.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        if p[i] >= remaining {
            beta += q[i] * remaining / p[i];
            remaining = 0.0;
        } else {
            beta += q[i];
            remaining -= p[i];
        }
    }
    Ok(if beta <= INFINITE_TYPE2 {
        Bits::Infinite
    } else {
        Bits::Finite(-beta.log2())
    })
}

fn pure_parts(rho: &DensityOp, sigma: &DensityOp) -> Result<(CVec, linalg::CMat)> {
    let psi = rho.pure_vector(1e-9)?;
    let s = sigma.aligned_matrix(rho.layout())?;
    Ok((psi.amplitudes().clone(), s))
}

/// Rank-one tests by brute force: grid over unit directions u with
/// |⟨u|ψ⟩|² ≥ 1 − ε, then simplex refinement. Type-II error of the best
/// scaled test is (1 − ε)⟨u|σ|u⟩ / |⟨u|ψ⟩|².
pub fn dh_rank1_oracle(rho: &DensityOp, sigma: &DensityOp, eps: f64) -> Result<Bits> {
    check_unit_interval("eps", eps, false)?;
    let d = rho.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!(
            "grid oracle handles dimension at most 3, got {d}"
        )));
    }
    let (psi, s) = pure_parts(rho, sigma)?;
    if d == 1 {
        let b = (1.0 - eps) * s[(0, 0)].re;
        return Ok(to_bits(b));
    }
    // orthonormal complement of ψ
    let mut perp: Vec<CVec> = Vec::new();
    for k in 0..d {
        let mut v = CVec::zeros(d);
        v[k] = c(1.0, 0.0);
        for _ in 0..2 {
            v -= &psi * psi.dotc(&v);
            for w in &perp {
                v -= w * w.dotc(&v);
            }
        }
        if v.norm() > 1e-6 && perp.len() < d - 1 {
            perp.push(v.unscale(v.norm()));
        }
    }
    let theta_max = (1.0 - eps).sqrt().acos();
    let direction = |x: &[f64]| -> CVec {
        // x = (θ, φ1) for d = 2; (θ, α, φ1, φ2) for d = 3
        let th = x[0].clamp(0.0, theta_max);
        let mut w = CVec::zeros(d);
        if d == 2 {
            w += &perp[0] * c(x[1].cos(), x[1].sin());
        } else {
            w += &perp[0] * c(x[1].cos(), 0.0) * c(x[2].cos(), x[2].sin());
            w += &perp[1] * c(x[1].sin(), 0.0) * c(x[3].cos(), x[3].sin());
        }
        &psi * c(th.cos(), 0.0) + w * c(th.sin(), 0.0)
    };
    let beta = |x: &[f64]| -> f64 {
        let u = direction(x);
        let num = u.dotc(&(&s * &u)).re.max(0.0);
        let ov = u.dotc(&psi).norm_sqr();
        (1.0 - eps) * num / ov
    };
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best = (f64::INFINITY, Vec::new());
    let nt = if d == 2 { 200 } else { 40 };
    let np = if d == 2 { 96 } else { 20 };
    for i in 0..=nt {
        let th = theta_max * i as f64 / nt as f64;
        if d == 2 {
            for j in 0..np {
                let x = vec![th, two_pi * j as f64 / np as f64];
                let v = beta(&x);
                if v < best.0 {
                    best = (v, x);
                }
            }
        } else {
            for a in 0..=12 {
                let al = std::f64::consts::FRAC_PI_2 * a as f64 / 12.0;
                for j in 0..np {
                    for k in 0..np {
                        let x = vec![th, al, two_pi * j as f64 / np as f64, two_pi * k as f64 / np as f64];
                        let v = beta(&x);
                        if v < best.0 {
                            best = (v, x);
                        }
                    }
                }
            }
        }
    }
    let mut x = best.1;
    let mut value = best.0;
    for step in [0.05, 0.005, 0.0005] {
        let m = nelder_mead(&beta, &x, step, 4000);
        if m.value <= value {
            value = m.value;
            x = m.x;
        }
    }
    Ok(to_bits(value))
}

fn to_bits(beta: f64) -> Bits {
    if beta <= INFINITE_TYPE2 {
        Bits::Infinite
    } else {
        Bits::Finite(-beta.log2())
    }
}

/// Rank-one optimum from the stationarity condition u ∝ (σ + νI)⁻¹ψ.
///
/// Minimizing ⟨u|σ|u⟩ over ⟨ψ|u⟩ = 1, ‖u‖² ≤ 1/(1 − ε) is convex, so the
/// multiplier ν ≥ 0 that makes the overlap constraint tight (or ν = 0 when it
/// is slack) gives the global rank-one optimum in any dimension.
pub fn dh_rank1_lagrange(rho: &DensityOp, sigma: &DensityOp, eps: f64) -> Result<Bits> {
    check_unit_interval("eps", eps, false)?;
    let (psi, s) = pure_parts(rho, sigma)?;
    let (mu, vecs) = linalg::herm_eig_raw(&s);
    let weights: Vec<f64> = (0..mu.len())
        .map(|k| vecs.column(k).dotc(&psi).norm_sqr())
        .collect();
    let target = 1.0 - eps;
    let scale = mu.first().copied().unwrap_or(1.0).max(1e-300);
    let kernel = 1e-13 * scale;
    let ker_weight: f64 = mu
        .iter()
        .zip(&weights)
        .filter(|(m, _)| **m <= kernel)
        .map(|(_, w)| *w)
        .sum();
    if ker_weight >= target {
        return Ok(Bits::Infinite);
    }
    // A = ⟨ψ|u⟩, B = ‖u‖², C = ⟨u|σ|u⟩ for u = (σ + νI)⁻¹ψ
    let moments = |nu: f64| -> (f64, f64, f64) {
        let (mut a, mut b, mut cc) = (0.0, 0.0, 0.0);
        for (m, w) in mu.iter().zip(&weights) {
            let m = m.max(0.0);
            let inv = 1.0 / (m + nu);
            a += w * inv;
            b += w * inv * inv;
            cc += m * w * inv * inv;
        }
        (a, b, cc)
    };
    let overlap = |nu: f64| {
        let (a, b, _) = moments(nu);
        a * a / b
    };
    let nu = if ker_weight <= 0.0 && mu.iter().all(|&m| m > kernel) && overlap(0.0) >= target {
        0.0
    } else {
        let (mut lo, mut hi) = ((1e-30 * scale).ln(), (1e12 * scale).ln());
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if overlap(mid.exp()) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi.exp()
    };
    let (a, _, cc) = moments(nu);
    Ok(to_bits(target * cc / (a * a)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::SystemLayout;

    #[test]
    fn classical_examples() {
        let v = dh_classical_oracle(&[0.9, 0.1], &[0.5, 0.5], 0.1).unwrap();
        assert!((v.as_f64() - 1.0).abs() < 1e-12);
        let v = dh_classical_oracle(&[1.0, 0.0], &[0.5, 0.5], 0.0).unwrap();
        assert!((v.as_f64() - 1.0).abs() < 1e-12);
        let v = dh_classical_oracle(&[0.2, 0.8], &[0.2, 0.8], 0.5).unwrap();
        assert!((v.as_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank1_pure_vs_mixed() {
        let l = SystemLayout::single("A", 2).unwrap();
        let rho = DensityOp::basis(&l, 0).unwrap();
        let sigma = DensityOp::maximally_mixed(&l);
        let v = dh_rank1_oracle(&rho, &sigma, 0.0).unwrap();
        assert!((v.as_f64() - 1.0).abs() < 1e-4);
        let v = dh_rank1_lagrange(&rho, &sigma, 0.0).unwrap();
        assert!((v.as_f64() - 1.0).abs() < 1e-9);
    }
}
