use serde::Serialize;

use crate::divergence::Bits;
use crate::error::Result;
use crate::exec::Exec;
use crate::optim::nelder_mead;
use crate::qalg::linalg::{self, CMat};
use crate::qalg::{c, derive_seed, DensityOp, Sampler, SystemLayout};

/// Stand-in objective for an unbounded divergence inside the simplex search.
const UNBOUNDED_COST: f64 = 1e3;

/// Local search over σ = G†G / Tr(G†G).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaSearch {
    pub optimize: bool,
    pub restarts: usize,
    pub max_iters: u64,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SigmaSearch {
    fn default() -> Self {
        Self {
            optimize: false,
            restarts: 4,
            max_iters: 300,
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePoint {
    pub candidate: String,
    pub value: Bits,
    /// Running minimum over the trace so far.
    pub best: Bits,
}

pub(crate) struct SigmaMin {
    pub value: Bits,
    pub sigma: DensityOp,
    pub trace: Vec<TracePoint>,
}

fn sigma_of(x: &[f64], layout: &SystemLayout) -> DensityOp {
    let d = layout.total_dim();
    let g = CMat::from_fn(d, d, |i, j| c(x[2 * (i * d + j)], x[2 * (i * d + j) + 1]));
    let m = g.adjoint() * &g;
    let tr = linalg::trace_re(&m).max(1e-300);
    DensityOp::trusted(linalg::symmetrize(&m.unscale(tr)), layout.clone(), true)
}

fn params_of(sigma: &DensityOp) -> Vec<f64> {
    let g = linalg::psd_sqrt(sigma.matrix());
    g.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn cost(v: Bits) -> f64 {
    v.finite().unwrap_or(UNBOUNDED_COST)
}

/// Minimum of `f` over the named candidates and, when asked, over simplex
/// restarts (the first from the best candidate, the rest from random G).
pub(crate) fn minimize_sigma<F>(
    f: &F,
    candidates: Vec<(String, DensityOp)>,
    layout: &SystemLayout,
    search: &SigmaSearch,
) -> Result<SigmaMin>
where
    F: Fn(&DensityOp) -> Result<Bits> + Sync,
{
    let mut trace = Vec::new();
    let mut best: Option<(Bits, DensityOp)> = None;
    let mut push = |name: String, v: Bits, s: DensityOp, best: &mut Option<(Bits, DensityOp)>| {
        if best.as_ref().is_none_or(|(b, _)| v.as_f64() < b.as_f64()) {
            *best = Some((v, s));
        }
        trace.push(TracePoint {
            candidate: name,
            value: v,
            best: best.as_ref().map(|b| b.0).unwrap_or(v),
        });
    };
    for (name, s) in candidates {
        let s = s.reordered(layout)?;
        let v = f(&s)?;
        push(name, v, s, &mut best);
    }
    if search.optimize && search.restarts > 0 {
        let start = params_of(&best.as_ref().expect("at least one candidate").1);
        let d = layout.total_dim();
        let runs = search.exec.map(search.restarts, |r| {
            let x0 = if r == 0 {
                start.clone()
            } else {
                let g = Sampler::new(derive_seed(&[search.seed, r as u64])).ginibre(d, d);
                g.iter().flat_map(|z| [z.re, z.im]).collect()
            };
            let obj = |x: &[f64]| f(&sigma_of(x, layout)).map(cost).unwrap_or(f64::MAX);
            nelder_mead(&obj, &x0, 0.2, search.max_iters)
        });
        for (r, m) in runs.into_iter().enumerate() {
            let s = sigma_of(&m.x, layout);
            let v = f(&s)?;
            push(format!("restart {r} ({} iterations)", m.iterations), v, s, &mut best);
        }
    }
    let (value, sigma) = best.expect("at least one candidate");
    Ok(SigmaMin { value, sigma, trace })
}
