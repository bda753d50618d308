use serde::Serialize;

use crate::divergence::dh_eps;
use crate::error::{check_unit_interval, Error, Result};
use crate::qalg::{c, CVec, DensityOp, Ket, SystemLayout};

/// Agreement required between the analytic and the numerical witness values.
pub const COROLLARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct WitnessCheck {
    pub name: &'static str,
    pub value: f64,
    pub target: f64,
    pub ok: bool,
}

/// Entanglement-assisted rate ceiling of the noiseless d-dimensional channel
/// and the explicit test that attains it.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCorollary {
    pub dim: usize,
    pub eps: f64,
    /// log₂(d² / (1−ε)).
    pub ceiling: f64,
    /// Schmidt coefficients of the resource (uniform).
    pub lambda: Vec<f64>,
    /// Amplitudes of the rank-one test |π⟩ = Σ a_i |ii⟩.
    pub a: Vec<f64>,
    pub checks: Vec<WitnessCheck>,
    /// D_H^ε(Φ ‖ π ⊗ π) computed by the general solver.
    pub numerical: f64,
    pub holds: bool,
}

pub fn identity_channel_corollary(dim: usize, eps: f64) -> Result<IdentityCorollary> {
    if dim < 2 {
        return Err(Error::Parameter {
            name: "dim",
            value: dim as f64,
            range: ">= 2",
        });
    }
    check_unit_interval("eps", eps, false)?;
    let d = dim as f64;
    let ceiling = (d * d / (1.0 - eps)).log2();
    let lambda = vec![d.sqrt().recip(); dim];
    let a = vec![((1.0 - eps) / d).sqrt(); dim];

    let layout = SystemLayout::new([("B", dim), ("Bp", dim)])?;
    let mut amps = CVec::zeros(dim * dim);
    for i in 0..dim {
        amps[i * dim + i] = c(a[i], 0.0);
    }
    let phi = Ket::maximally_entangled("B", "Bp", dim)?.density();
    let half = DensityOp::maximally_mixed(&SystemLayout::single("B", dim)?);
    let prod = half.tensor(&DensityOp::maximally_mixed(&SystemLayout::single("Bp", dim)?))?;
    let quad = |rho: &DensityOp| -> Result<f64> {
        let w = rho.aligned_matrix(&layout)? * &amps;
        Ok(amps.dotc(&w).re)
    };

    let sum_l2: f64 = lambda.iter().map(|l| l * l).sum();
    let sum_a2: f64 = a.iter().map(|x| x * x).sum();
    let overlap: f64 = a.iter().zip(&lambda).map(|(x, l)| x * l).sum::<f64>().powi(2);
    let type2 = quad(&prod)?;
    let mut checks = vec![
        WitnessCheck {
            name: "schmidt_normalized",
            value: sum_l2,
            target: 1.0,
            ok: (sum_l2 - 1.0).abs() <= COROLLARY_TOL,
        },
        WitnessCheck {
            name: "test_norm_at_most_one",
            value: sum_a2,
            target: 1.0,
            ok: sum_a2 <= 1.0 + COROLLARY_TOL,
        },
        WitnessCheck {
            name: "acceptance_at_least_one_minus_eps",
            value: overlap,
            target: 1.0 - eps,
            ok: overlap >= 1.0 - eps - COROLLARY_TOL,
        },
        WitnessCheck {
            name: "type_two_error",
            value: type2,
            target: (1.0 - eps) / (d * d),
            ok: (type2 - (1.0 - eps) / (d * d)).abs() <= COROLLARY_TOL,
        },
    ];
    let accept = quad(&phi)?;
    checks.push(WitnessCheck {
        name: "operator_acceptance",
        value: accept,
        target: overlap,
        ok: (accept - overlap).abs() <= COROLLARY_TOL,
    });
    let numerical = dh_eps(&phi, &prod, eps)?.value.as_f64();
    checks.push(WitnessCheck {
        name: "solver_matches_ceiling",
        value: numerical,
        target: ceiling,
        ok: (numerical - ceiling).abs() <= 1e-7,
    });
    let holds = checks.iter().all(|c| c.ok);
    Ok(IdentityCorollary {
        dim,
        eps,
        ceiling,
        lambda,
        a,
        checks,
        numerical,
        holds,
    })
}
