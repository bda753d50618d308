use serde::Serialize;

use super::protocols::{unassisted_single, CodeParams, Unassisted};
use super::report::{ProtocolReport, Scenario};
use crate::error::{Error, Result};
use crate::qalg::linalg::{trace_product_re, CMat};
use crate::qalg::{derive_seed, Sampler};

/// Default limit on the number of enumerated shared strings.
pub const DEFAULT_STRING_CAP: usize = 4096;
/// Symbols with probability at or below this never occur in a shared string.
const SYMBOL_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug)]
pub struct DerandomizeOptions {
    pub cap: usize,
    /// Draw this many strings from pⁿ when exhaustive enumeration exceeds the cap.
    pub samples: Option<usize>,
}

impl Default for DerandomizeOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_STRING_CAP,
            samples: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DerandomizeReport {
    pub protocol: ProtocolReport,
    /// Symbol of the shared register at each copy, 0-based.
    pub best_string: Vec<usize>,
    pub best_avg_error: f64,
    /// pⁿ-weighted error over the examined strings.
    pub randomized_avg_error: f64,
    pub candidates: usize,
    pub exhaustive: bool,
    /// Best fixed string does no worse than the shared-randomness average.
    pub holds: bool,
}

/// Replaces the shared random string of an unassisted single-receiver code by the best fixed one.
pub fn derandomize(
    setup: &Unassisted<'_>,
    rate: u32,
    eps: f64,
    params: &CodeParams,
    opts: DerandomizeOptions,
) -> Result<DerandomizeReport> {
    let stage = unassisted_single(setup, rate, eps, params)?;
    let scenario = match setup {
        Unassisted::P2p { .. } => Scenario::P2pUa,
        _ => Scenario::GpUa,
    };
    let code = &stage.code;
    let n = code.copies();
    let side = code.side().clone();
    let k = code.position().total_dim();
    let dx = side.total_dim();

    // ρ_X^u for every symbol u, from the joint output on side ⊕ position.
    let joint = stage.joint.aligned_matrix(&side.concat(code.position())?)?;
    let mut probs = vec![0.0; k];
    let mut conditional = Vec::with_capacity(k);
    for u in 0..k {
        let mut block = CMat::zeros(dx, dx);
        for x in 0..dx {
            for y in 0..dx {
                block[(x, y)] = joint[(x * k + u, y * k + u)];
            }
        }
        probs[u] = (0..dx).map(|x| block[(x, x)].re).sum();
        if probs[u] > SYMBOL_FLOOR {
            block.unscale_mut(probs[u]);
        }
        conditional.push(block);
    }
    let support: Vec<usize> = (0..k).filter(|&u| probs[u] > SYMBOL_FLOOR).collect();

    let count = (support.len() as f64).powi(n as i32);
    let (strings, exhaustive) = if count <= opts.cap as f64 {
        (enumerate(&support, n), true)
    } else if let Some(s) = opts.samples {
        let mut smp = Sampler::new(derive_seed(&[params.seed, 0x5eed]));
        let drawn = (0..s)
            .map(|_| (0..n).map(|_| draw(&mut smp, &probs, &support)).collect())
            .collect();
        (drawn, false)
    } else {
        return Err(Error::EnumerationCap {
            count,
            cap: opts.cap,
        });
    };

    let full = code.layout().total_dim();
    debug_assert_eq!(full, dx * k.pow(n as u32));
    let mut best = (f64::INFINITY, Vec::new());
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for s in &strings {
        let idx = s.iter().fold(0, |acc, &u| acc * k + u);
        let stride = k.pow(n as u32);
        let mut success = 0.0;
        for m in 0..n {
            let om = code.omega(m).matrix();
            let mut block = CMat::zeros(dx, dx);
            for x in 0..dx {
                for y in 0..dx {
                    block[(x, y)] = om[(x * stride + idx, y * stride + idx)];
                }
            }
            success += trace_product_re(&block, &conditional[s[m]]);
        }
        let err = 1.0 - success / n as f64;
        let p: f64 = s.iter().map(|&u| probs[u]).product();
        weighted += p * err;
        weight += p;
        if err < best.0 {
            best = (err, s.clone());
        }
    }
    let randomized = if exhaustive { weighted } else { weighted / weight };
    let mut protocol = ProtocolReport::new(scenario, vec![rate], vec![eps], params.delta);
    protocol.checks.extend(stage.checks);
    protocol.stages.push(stage.report);
    let protocol = protocol.settle();
    Ok(DerandomizeReport {
        best_string: best.1,
        best_avg_error: best.0,
        randomized_avg_error: randomized,
        candidates: strings.len(),
        exhaustive,
        holds: best.0 <= randomized + 1e-12,
        protocol,
    })
}

fn enumerate(support: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                support.iter().map(move |&u| {
                    let mut t = s.clone();
                    t.push(u);
                    t
                })
            })
            .collect();
    }
    out
}

fn draw(smp: &mut Sampler, probs: &[f64], support: &[usize]) -> usize {
    let r = smp.uniform(0.0, 1.0);
    let mut acc = 0.0;
    for &u in support {
        acc += probs[u];
        if r < acc {
            return u;
        }
    }
    *support.last().expect("non-empty support")
}
