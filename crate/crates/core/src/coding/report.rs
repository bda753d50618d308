use serde::Serialize;

use crate::divergence::{dh_eps, Bits};
use crate::error::Result;
use crate::qalg::{derive_seed, DensityOp, Sampler, SystemLayout};

/// Slack allowed between a simulated error and the bound it is checked against.
pub const BOUND_TOL: f64 = 1e-8;
/// Slack for the converse floor D_H(φ_MM' ‖ φ_M ⊗ σ) ≥ log|M|.
pub const FLOOR_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    P2pEa,
    GpEa,
    BroadcastEa,
    MacEa,
    P2pUa,
    GpUa,
    BroadcastUa,
    MacUa,
}

impl Scenario {
    pub fn is_assisted(self) -> bool {
        matches!(
            self,
            Scenario::P2pEa | Scenario::GpEa | Scenario::BroadcastEa | Scenario::MacEa
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacStrategy {
    PgmAFirst,
    PgmBFirst,
    Sequential,
}

/// The hypothesis test behind one position code.
#[derive(Clone, Debug, Serialize)]
pub struct TestSummary {
    pub register: String,
    pub eps: f64,
    pub divergence: Bits,
    pub type1: f64,
    pub type2: f64,
    /// Rate penalty of the theorem in bits; absent when it is undefined (ε = 0).
    pub penalty: Option<f64>,
    /// D_H − penalty: the largest rate the theorem admits with this test.
    pub rate_limit: Option<Bits>,
}

impl TestSummary {
    pub fn admits(&self, rate: f64) -> bool {
        self.rate_limit.is_some_and(|l| rate <= l.as_f64() + 1e-12)
    }
}

/// Converse floor evaluated on a code's exact input/output distribution.
#[derive(Clone, Debug, Serialize)]
pub struct FloorCheck {
    pub messages: usize,
    pub rate: f64,
    pub eps_prime: f64,
    pub values: Vec<Bits>,
    pub min_value: Bits,
    pub holds: bool,
}

/// φ_MM' = (1/n) Σ_m |m⟩⟨m| ⊗ Σ_j P(j|m) |j⟩⟨j| from `confusion` rows P(·|m); the
/// correlation test pairs m with output `correct[m]`. Checks
/// D_H^{ε'}(φ_MM' ‖ φ_M ⊗ σ) ≥ log₂ n for `samples` random σ, ε' the average error.
pub fn floor_check(
    confusion: &[Vec<f64>],
    correct: &[usize],
    samples: usize,
    seed: u64,
) -> Result<Option<FloorCheck>> {
    let n = confusion.len();
    let k = confusion.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Ok(None);
    }
    let mut probs = Vec::with_capacity(n * k);
    let mut hit = 0.0;
    for (m, row) in confusion.iter().enumerate() {
        let clipped: Vec<f64> = row.iter().map(|p| p.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        for (j, p) in clipped.iter().enumerate() {
            let q = p / total / n as f64;
            if j == correct[m] {
                hit += q;
            }
            probs.push(q);
        }
    }
    let eps_prime = (1.0 - hit).max(0.0);
    if eps_prime >= 1.0 - 1e-12 {
        return Ok(None);
    }
    let lm = SystemLayout::single("M", n)?;
    let lo = SystemLayout::single("M'", k)?;
    let phi = DensityOp::diagonal(&probs, &lm.concat(&lo)?)?;
    let uniform = DensityOp::maximally_mixed(&lm);
    let rate = (n as f64).log2();
    let mut values = Vec::with_capacity(samples);
    for s in 0..samples {
        let sigma = Sampler::new(derive_seed(&[seed, s as u64])).density(&lo);
        values.push(dh_eps(&phi, &uniform.tensor(&sigma)?, eps_prime)?.value);
    }
    let min_value = values.iter().copied().fold(Bits::Infinite, Bits::min);
    Ok(Some(FloorCheck {
        messages: n,
        rate,
        eps_prime,
        holds: min_value.as_f64() >= rate - FLOOR_TOL,
        values,
        min_value,
    }))
}

/// One decoding stage: a receiver, or one message of a multiple-access decoder.
#[derive(Clone, Debug, Serialize)]
pub struct StageReport {
    pub name: String,
    pub rate: u32,
    pub copies: Vec<usize>,
    pub tests: Vec<TestSummary>,
    /// Hayashi–Nagaoka parameter c, when the bound uses one.
    pub hn_constant: Option<f64>,
    /// Success per message (per message pair for multiple-access stages).
    pub per_message_success: Vec<f64>,
    pub worst_error: f64,
    pub avg_error: f64,
    /// Bound implied by the proof's operator inequality at the computed test; may exceed 1.
    pub analytic_bound: f64,
    /// The theorem's stated error, promised when the rate condition holds.
    pub headline_bound: f64,
    pub headline_applies: bool,
    pub headline_holds: Option<bool>,
    pub bound_satisfied: bool,
    /// Rows: sent message; columns: decoded outcome, failure last.
    pub confusion: Vec<Vec<f64>>,
    pub floor: Option<FloorCheck>,
}

impl StageReport {
    pub(crate) fn settle(&mut self) {
        let n = self.per_message_success.len().max(1) as f64;
        self.worst_error = self
            .per_message_success
            .iter()
            .map(|s| 1.0 - s)
            .fold(0.0, f64::max);
        self.avg_error = self.per_message_success.iter().map(|s| 1.0 - s).sum::<f64>() / n;
        self.bound_satisfied = self.worst_error <= self.analytic_bound.min(1.0) + BOUND_TOL;
        self.headline_holds = self
            .headline_applies
            .then(|| self.worst_error <= self.headline_bound.min(1.0) + BOUND_TOL);
    }
}

/// An operator or distance statement evaluated on the simulated code itself.
#[derive(Clone, Debug, Serialize)]
pub struct InSituCheck {
    pub name: String,
    /// Smallest slack seen; negative beyond tolerance means a violation.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub holds: bool,
}

impl InSituCheck {
    pub(crate) fn new(name: &str, worst_margin: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            worst_margin,
            tolerance,
            holds: worst_margin >= -tolerance,
        }
    }
}

/// Joint decoding statistics of a two-message code.
#[derive(Clone, Debug, Serialize)]
pub struct JointReport {
    pub per_pair_success: Vec<f64>,
    pub worst_error: f64,
    pub avg_error: f64,
    pub marginal_worst_errors: [f64; 2],
    pub floor: Option<FloorCheck>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolReport {
    pub scenario: Scenario,
    pub strategy: Option<MacStrategy>,
    pub rates: Vec<u32>,
    pub eps: Vec<f64>,
    pub delta: f64,
    pub stages: Vec<StageReport>,
    pub joint: Option<JointReport>,
    pub checks: Vec<InSituCheck>,
    pub worst_error: f64,
    pub bound_satisfied: bool,
    pub checks_passed: bool,
    pub notes: Vec<String>,
}

impl ProtocolReport {
    pub(crate) fn new(scenario: Scenario, rates: Vec<u32>, eps: Vec<f64>, delta: f64) -> Self {
        Self {
            scenario,
            strategy: None,
            rates,
            eps,
            delta,
            stages: Vec::new(),
            joint: None,
            checks: Vec::new(),
            worst_error: 0.0,
            bound_satisfied: true,
            checks_passed: true,
            notes: Vec::new(),
        }
    }

    pub(crate) fn settle(mut self) -> Self {
        self.worst_error = self.stages.iter().map(|s| s.worst_error).fold(0.0, f64::max);
        self.bound_satisfied = self.stages.iter().all(|s| s.bound_satisfied);
        let floors = self
            .stages
            .iter()
            .filter_map(|s| s.floor.as_ref())
            .chain(self.joint.iter().filter_map(|j| j.floor.as_ref()));
        self.checks_passed = self.checks.iter().all(|c| c.holds) && floors.clone().all(|f| f.holds);
        self
    }

    /// Headline figures that the theorem promises here but the exact code misses.
    pub fn headline_violations(&self) -> Vec<&str> {
        self.stages
            .iter()
            .filter(|s| s.headline_holds == Some(false))
            .map(|s| s.name.as_str())
            .collect()
    }

    /// True when every asserted inequality held.
    pub fn passed(&self) -> bool {
        self.bound_satisfied && self.checks_passed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_code_meets_floor() {
        let conf = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let f = floor_check(&conf, &[0, 1], 5, 3).unwrap().unwrap();
        assert!(f.holds);
        assert_eq!(f.eps_prime, 0.0);
    }

    #[test]
    fn noisy_code_meets_floor() {
        let conf = vec![
            vec![0.7, 0.2, 0.05, 0.05],
            vec![0.1, 0.6, 0.1, 0.2],
            vec![0.3, 0.3, 0.3, 0.1],
        ];
        let f = floor_check(&conf, &[0, 1, 2], 5, 9).unwrap().unwrap();
        assert!(f.holds, "{f:?}");
    }
}
