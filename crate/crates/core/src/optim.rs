//! Derivative-free minimization (Nelder–Mead) over unconstrained real vectors.

use argmin::core::{CostFunction, Error as ArgminError, Executor, State};
use argmin::solver::neldermead::NelderMead;

struct Objective<'a, F> {
    f: &'a F,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, ArgminError> {
        let v = (self.f)(p);
        // the simplex ordering needs finite, comparable values
        Ok(if v.is_nan() { f64::MAX } else { v.clamp(-f64::MAX, f64::MAX) })
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
}

/// Nelder–Mead from `x0` with an axis-aligned initial simplex of size `step`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, max_iters: u64) -> Minimum {
    let start = Minimum {
        x: x0.to_vec(),
        value: f(x0),
        iterations: 0,
    };
    if x0.is_empty() {
        return start;
    }
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let solver = match NelderMead::new(simplex).with_sd_tolerance(1e-13) {
        Ok(s) => s,
        Err(_) => return start,
    };
    let run = Executor::new(Objective { f }, solver)
        .configure(|s| s.max_iters(max_iters))
        .run();
    match run {
        Ok(res) => {
            let state = res.state();
            match state.get_best_param() {
                Some(x) if state.get_best_cost() <= start.value => Minimum {
                    x: x.clone(),
                    value: state.get_best_cost(),
                    iterations: state.get_iter(),
                },
                _ => start,
            }
        }
        Err(_) => start,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(&f, &[-1.2, 1.0], 0.5, 2000);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }
}
