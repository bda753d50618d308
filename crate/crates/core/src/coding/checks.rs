use serde::Serialize;

use crate::error::{Error, Result};
use crate::qalg::linalg::{self, pinv_sqrt, psd_sqrt, trace_product_re, CMat};
use crate::qalg::{fidelity, purified_distance, DensityOp, HermOp, Sampler, SystemLayout};

use super::position::PINV_THRESHOLD;

/// Idempotence residual above which a projector is rejected.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Tr(A²ρ) at or below this makes the gentle-measurement ratio undefined.
pub const DEGENERATE_WEIGHT: f64 = 1e-14;

/// Smallest eigenvalue of (1+c)(I−S) + (2+c+1/c)T − [I − (S+T)^{-1/2} S (S+T)^{-1/2}].
///
/// Non-negative up to roundoff whenever 0 ⪯ S ⪯ I, T ⪰ 0 and c > 0.
pub fn hn_check(s: &HermOp, t: &HermOp, c: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter {
            name: "c",
            value: c,
            range: "(0, inf)",
        });
    }
    let sm = s.matrix();
    let tm = t.aligned_matrix(s.layout())?;
    let d = s.dim();
    let id = linalg::identity(d);
    let root = pinv_sqrt(&linalg::symmetrize(&(sm + &tm)), PINV_THRESHOLD);
    let lhs = &id - &root * sm * &root;
    let rhs = (&id - sm).scale(1.0 + c) + tm.scale(2.0 + c + 1.0 / c);
    Ok(linalg::min_eigenvalue(&linalg::symmetrize(&(rhs - lhs))))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeqCheck {
    /// Probability that every test in turn rejects.
    pub lhs: f64,
    /// 1 − 4 Σ Tr(Π_i ρ).
    pub rhs: f64,
    pub holds: bool,
}

pub(crate) fn check_projector(p: &HermOp) -> Result<()> {
    let m = p.matrix();
    let res = linalg::max_abs(&(m * m - m));
    if res > PROJECTOR_TOL {
        return Err(Error::NotProjector(res));
    }
    Ok(())
}

/// Both sides of the non-commutative union bound for projectors Π_1, …, Π_k applied in order.
pub fn seq_check(rho: &DensityOp, projectors: &[HermOp]) -> Result<SeqCheck> {
    let layout = rho.layout();
    let mut state = rho.matrix().clone();
    let id = linalg::identity(rho.dim());
    let mut sum = 0.0;
    for p in projectors {
        check_projector(p)?;
        let pm = p.aligned_matrix(layout)?;
        sum += trace_product_re(&pm, rho.matrix());
        let bar = &id - &pm;
        state = &bar * state * &bar;
    }
    let lhs = linalg::trace_re(&state);
    let rhs = 1.0 - 4.0 * sum;
    Ok(SeqCheck {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}

/// F(ρ, AρA / Tr(A²ρ)) − √Tr(A²ρ); `None` when Tr(A²ρ) is degenerate.
pub fn gentle_measurement_margin(rho: &DensityOp, a: &HermOp) -> Result<Option<f64>> {
    let am = a.aligned_matrix(rho.layout())?;
    let post = &am * rho.matrix() * &am;
    let w = linalg::trace_re(&post);
    if w <= DEGENERATE_WEIGHT {
        return Ok(None);
    }
    let post = DensityOp::new(linalg::symmetrize(&post).unscale(w), rho.layout().clone())?;
    Ok(Some(fidelity(rho, &post)? - w.sqrt()))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GentlePovmCheck {
    /// |F²(ρ, ρ') − Σ Tr(A_i ρ)²|.
    pub equality_deviation: f64,
    /// Σ Tr(A_i ρ)² − Σ Tr(A_i² ρ)².
    pub inequality_margin: f64,
}

/// Gentle-POVM identity for a pure ρ and A_i = √M_i, with ρ' = Σ A_i ρ A_i.
pub fn gentle_povm_check(rho: &DensityOp, povm: &[HermOp]) -> Result<GentlePovmCheck> {
    let psi = rho.pure_vector(1e-9)?;
    let layout = rho.layout();
    let mut post = CMat::zeros(rho.dim(), rho.dim());
    let mut first = 0.0;
    let mut second = 0.0;
    for m in povm {
        let mm = m.aligned_matrix(layout)?;
        let a = psd_sqrt(&mm);
        post += &a * rho.matrix() * &a;
        let ta = psi.amplitudes().dotc(&(&a * psi.amplitudes())).re;
        let tm = psi.amplitudes().dotc(&(&mm * psi.amplitudes())).re;
        first += ta * ta;
        second += tm * tm;
    }
    let post = DensityOp::subnormalized(linalg::symmetrize(&post), layout.clone())?;
    let f = fidelity(rho, &post)?;
    Ok(GentlePovmCheck {
        equality_deviation: (f * f - first).abs(),
        inequality_margin: first - second,
    })
}

/// P(ρ, σ) − |√Tr(Πσ) − √Tr(Πρ)|.
pub fn measurement_closeness_margin(rho: &DensityOp, sigma: &DensityOp, pi: &HermOp) -> Result<f64> {
    let a = pi.expectation(rho)?.max(0.0).sqrt();
    let b = pi.expectation(sigma)?.max(0.0).sqrt();
    Ok(purified_distance(rho, sigma)? - (a - b).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GentleMode {
    /// Closeness of measurement statistics under purified distance.
    Closeness,
    /// Gentle measurement lemma for a single operator.
    Operator,
    /// Gentle POVM identity on pure states.
    Povm,
}

#[derive(Clone, Debug, Serialize)]
pub struct GentleReport {
    pub mode: GentleMode,
    pub dim: usize,
    pub trials: usize,
    pub passed: usize,
    pub degenerate: usize,
    pub worst_margin: f64,
}

/// Seeded random instances of one gentle-measurement statement at dimension `dim`.
pub fn gentle_checks(mode: GentleMode, dim: usize, trials: usize, seed: u64) -> Result<GentleReport> {
    let layout = SystemLayout::single("S", dim)?;
    let mut rep = GentleReport {
        mode,
        dim,
        trials,
        passed: 0,
        degenerate: 0,
        worst_margin: f64::INFINITY,
    };
    for k in 0..trials {
        let mut smp = Sampler::new(crate::qalg::derive_seed(&[seed, dim as u64, k as u64]));
        let margin = match mode {
            GentleMode::Closeness => {
                let rho = smp.density(&layout);
                let sigma = smp.density(&layout);
                let pi = smp.effect(&layout);
                Some(measurement_closeness_margin(&rho, &sigma, &pi)?)
            }
            GentleMode::Operator => {
                let rho = smp.density(&layout);
                let a = smp.effect(&layout);
                gentle_measurement_margin(&rho, &a)?
            }
            GentleMode::Povm => {
                let rho = smp.pure(&layout).density();
                let outcomes = 2 + smp.index(3);
                let povm = smp.povm(&layout, outcomes);
                let g = gentle_povm_check(&rho, &povm)?;
                // square roots of a rank-deficient ρ' carry errors near √ε_machine
                Some((1e-7 - g.equality_deviation).min(g.inequality_margin))
            }
        };
        match margin {
            None => rep.degenerate += 1,
            Some(m) => {
                rep.worst_margin = rep.worst_margin.min(m);
                if m >= -1e-9 {
                    rep.passed += 1;
                }
            }
        }
    }
    Ok(rep)
}
