use serde::{Deserialize, Serialize};

use super::KrausChannel;
use crate::error::{check_unit_interval, Error, Result};
use crate::qalg::linalg::{self, c, CMat};
use crate::qalg::SystemLayout;

/// Parametric channel families on a single register of dimension `dim`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    Identity,
    /// (1 − p)ρ + p·I/d.
    Depolarizing { p: f64 },
    /// Kraus {√(1−p) I, √p Z}; Z is the clock matrix when d > 2.
    Dephasing { p: f64 },
    AmplitudeDamping { gamma: f64 },
    /// Output dimension d + 1; the last basis state flags an erasure.
    Erasure { p: f64 },
}

fn clock(d: usize) -> CMat {
    let w = 2.0 * std::f64::consts::PI / d as f64;
    CMat::from_fn(d, d, |i, j| {
        if i == j {
            c((w * i as f64).cos(), (w * i as f64).sin())
        } else {
            c(0.0, 0.0)
        }
    })
}

fn shift(d: usize) -> CMat {
    CMat::from_fn(d, d, |i, j| {
        if i == (j + 1) % d {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    })
}

impl Builtin {
    pub fn build(&self, dim: usize, in_label: &str, out_label: &str) -> Result<KrausChannel> {
        let d = dim;
        let input = SystemLayout::single(in_label, d)?;
        let same_out = || SystemLayout::single(out_label, d);
        match *self {
            Builtin::Identity => KrausChannel::identity_between(&input, &same_out()?),
            Builtin::Depolarizing { p } => {
                check_unit_interval("p", p, true)?;
                let d2 = (d * d) as f64;
                let x = shift(d);
                let z = clock(d);
                let mut kraus = vec![linalg::identity(d).scale((1.0 - p + p / d2).sqrt())];
                if p > 0.0 {
                    let w = (p / d2).sqrt();
                    let mut xa = linalg::identity(d);
                    for a in 0..d {
                        let mut zb = linalg::identity(d);
                        for b in 0..d {
                            if a + b > 0 {
                                kraus.push((&xa * &zb).scale(w));
                            }
                            zb = &zb * &z;
                        }
                        xa = &xa * &x;
                    }
                }
                KrausChannel::new(kraus, input, same_out()?)
            }
            Builtin::Dephasing { p } => {
                check_unit_interval("p", p, true)?;
                let kraus = vec![
                    linalg::identity(d).scale((1.0 - p).sqrt()),
                    clock(d).scale(p.sqrt()),
                ];
                KrausChannel::new(kraus, input, same_out()?)
            }
            Builtin::AmplitudeDamping { gamma } => {
                check_unit_interval("gamma", gamma, true)?;
                if d != 2 {
                    return Err(Error::Unsupported(format!(
                        "amplitude damping is defined on qubits, got dimension {d}"
                    )));
                }
                let mut k0 = CMat::zeros(2, 2);
                k0[(0, 0)] = c(1.0, 0.0);
                k0[(1, 1)] = c((1.0 - gamma).sqrt(), 0.0);
                let mut k1 = CMat::zeros(2, 2);
                k1[(0, 1)] = c(gamma.sqrt(), 0.0);
                KrausChannel::new(vec![k0, k1], input, same_out()?)
            }
            Builtin::Erasure { p } => {
                check_unit_interval("p", p, true)?;
                let out = SystemLayout::single(out_label, d + 1)?;
                let mut k0 = CMat::zeros(d + 1, d);
                for i in 0..d {
                    k0[(i, i)] = c((1.0 - p).sqrt(), 0.0);
                }
                let mut kraus = vec![k0];
                for i in 0..d {
                    let mut k = CMat::zeros(d + 1, d);
                    k[(d, i)] = c(p.sqrt(), 0.0);
                    kraus.push(k);
                }
                KrausChannel::new(kraus, input, out)
            }
        }
    }
}
