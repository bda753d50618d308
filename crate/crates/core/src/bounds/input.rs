use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::nelder_mead;
use crate::qalg::{c, derive_seed, CVec, Ket, Sampler, SystemLayout};

#[derive(Clone, Debug, Serialize)]
pub struct InputSearch {
    #[serde(skip)]
    pub best: Ket,
    pub amplitudes: Vec<[f64; 2]>,
    pub value: f64,
    /// Best objective value after each restart.
    pub trace: Vec<f64>,
}

fn ket_of(x: &[f64], layout: &SystemLayout) -> Option<Ket> {
    let v = CVec::from_iterator(x.len() / 2, x.chunks(2).map(|p| c(p[0], p[1])));
    if v.norm() < 1e-12 {
        return None;
    }
    Ket::normalized(v, layout.clone()).ok()
}

/// Maximizes `objective` over pure states on `layout` by simplex descent on
/// unnormalized real coordinates, one restart per seed-derived start.
pub fn optimize_input_state<F>(
    objective: F,
    layout: &SystemLayout,
    restarts: usize,
    seed: u64,
    max_iters: u64,
) -> Result<InputSearch>
where
    F: Fn(&Ket) -> Result<f64>,
{
    if restarts == 0 {
        return Err(Error::Parameter {
            name: "restarts",
            value: 0.0,
            range: ">= 1",
        });
    }
    let d = layout.total_dim();
    let neg = |x: &[f64]| match ket_of(x, layout).map(|k| objective(&k)) {
        Some(Ok(v)) if v.is_finite() => -v,
        _ => f64::MAX,
    };
    let mut best: Option<(f64, Ket)> = None;
    let mut trace = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let g = Sampler::new(derive_seed(&[seed, r as u64])).ginibre(d, 1);
        let x0: Vec<f64> = g.iter().flat_map(|z| [z.re, z.im]).collect();
        let m = nelder_mead(&neg, &x0, 0.1, max_iters);
        if let Some(k) = ket_of(&m.x, layout) {
            let v = objective(&k)?;
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, k));
            }
        }
        trace.push(best.as_ref().map_or(f64::NEG_INFINITY, |b| b.0));
    }
    let (value, best) = best.ok_or_else(|| Error::Unsupported("input search found no valid state".into()))?;
    Ok(InputSearch {
        amplitudes: best.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
        best,
        value,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::DensityOp;

    #[test]
    fn finds_a_basis_state() {
        let l = SystemLayout::single("A", 3).unwrap();
        let target = DensityOp::basis(&l, 2).unwrap();
        let r = optimize_input_state(|k| Ok(k.density().matrix()[(2, 2)].re * target.trace()), &l, 3, 7, 400).unwrap();
        assert!(r.value > 1.0 - 1e-6, "{}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    }
}
