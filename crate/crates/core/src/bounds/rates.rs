use serde::{Deserialize, Serialize};

use super::sigma::{minimize_sigma, SigmaSearch, TracePoint};
use crate::channel::KrausChannel;
use crate::coding::protocols::{
    apply_channel, check_classical, check_product, gp_checks, labels_of, validate_sender,
};
use crate::coding::{MacSender, Receiver};
use crate::divergence::{dh_eps, dmax, Bits};
use crate::error::{check_unit_interval, Error, Result};
use crate::qalg::{DensityOp, SystemLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundScenario {
    P2pEa,
    GpEa,
    BroadcastEa,
    /// Per-sender bounds conditioned on the single-copy side registers A″B″.
    MacEa,
    /// Per-sender bounds on C A′ B′ together with a sum-rate bound.
    MacEaSumRate,
    P2pUa,
    GpUa,
    BroadcastUa,
    MacUa,
}

impl BoundScenario {
    pub fn is_assisted(self) -> bool {
        matches!(
            self,
            BoundScenario::P2pEa
                | BoundScenario::GpEa
                | BoundScenario::BroadcastEa
                | BoundScenario::MacEa
                | BoundScenario::MacEaSumRate
        )
    }

    pub fn senders_or_receivers(self) -> usize {
        match self {
            BoundScenario::P2pEa | BoundScenario::GpEa | BoundScenario::P2pUa | BoundScenario::GpUa => 1,
            _ => 2,
        }
    }
}

/// Channel, states and register roles a bound is evaluated at.
#[derive(Clone, Copy, Debug)]
pub enum Setup<'a> {
    P2p {
        channel: &'a KrausChannel,
        state: &'a DensityOp,
    },
    Gp {
        channel: &'a KrausChannel,
        tau: &'a DensityOp,
        state: &'a DensityOp,
    },
    Broadcast {
        channel: &'a KrausChannel,
        state: &'a DensityOp,
        receivers: &'a [Receiver; 2],
    },
    Mac {
        channel: &'a KrausChannel,
        alice: &'a MacSender,
        bob: &'a MacSender,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Converse,
    Achievable,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateTerm {
    /// "R", "R1", "R2", "R1+R2", …
    pub name: String,
    pub eps: f64,
    /// D_H value before any penalty.
    pub divergence: Bits,
    pub penalty: Option<f64>,
    pub value: Bits,
    /// Achievable terms only: whether the rate is non-negative.
    pub feasible: Option<bool>,
    /// σ candidates tried, for terms with an inner minimization.
    pub trace: Vec<TracePoint>,
    /// Minimizing σ, for terms with an inner minimization.
    #[serde(skip)]
    pub sigma: Option<DensityOp>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Ceiling {
    pub name: String,
    pub bits: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateBound {
    pub scenario: BoundScenario,
    pub kind: BoundKind,
    pub terms: Vec<RateTerm>,
    /// Dimension ceilings of the unassisted converses.
    pub ceilings: Vec<Ceiling>,
    /// D_max penalty of a relaxed converse.
    pub dmax_penalty: Option<f64>,
    pub evaluated_at: String,
    pub feasible: bool,
}

impl RateBound {
    pub fn term(&self, name: &str) -> Option<&RateTerm> {
        self.terms.iter().find(|t| t.name == name)
    }
}

/// One divergence to evaluate: ρ against either a fixed reference or
/// σ_out ⊗ `rest` minimized over σ on `out`.
struct TermSpec {
    name: String,
    rho: DensityOp,
    eps: f64,
    reference: Reference,
}

enum Reference {
    Fixed(DensityOp),
    SigmaMin { out: SystemLayout, rest: DensityOp },
}

fn arity(scenario: BoundScenario, setup: &Setup<'_>, eps: &[f64]) -> Result<()> {
    let ok = matches!(
        (scenario, setup),
        (BoundScenario::P2pEa | BoundScenario::P2pUa, Setup::P2p { .. })
            | (BoundScenario::GpEa | BoundScenario::GpUa, Setup::Gp { .. })
            | (BoundScenario::BroadcastEa | BoundScenario::BroadcastUa, Setup::Broadcast { .. })
            | (
                BoundScenario::MacEa | BoundScenario::MacEaSumRate | BoundScenario::MacUa,
                Setup::Mac { .. }
            )
    );
    if !ok {
        return Err(Error::Unsupported(format!(
            "scenario {scenario:?} does not match the supplied setup"
        )));
    }
    if eps.len() != scenario.senders_or_receivers() {
        return Err(Error::DimensionMismatch(format!(
            "{scenario:?} takes {} error parameter(s), got {}",
            scenario.senders_or_receivers(),
            eps.len()
        )));
    }
    for &e in eps {
        check_unit_interval("eps", e, false)?;
    }
    Ok(())
}

/// Output state split into channel outputs and resource registers.
struct Split {
    rho: DensityOp,
    out: SystemLayout,
    resource: SystemLayout,
}

fn single_split(setup: &Setup<'_>, classical: bool) -> Result<Split> {
    let (channel, state) = match *setup {
        Setup::P2p { channel, state } => (channel, state),
        Setup::Gp { channel, tau, state } => {
            gp_checks(channel, tau, state)?;
            (channel, state)
        }
        _ => unreachable!("checked by arity"),
    };
    let (rho, resource) = apply_channel(channel, state)?;
    if classical {
        check_classical(state, &labels_of(&resource))?;
    }
    let out = rho.layout().without(&labels_of(&resource));
    Ok(Split { rho, out, resource })
}

fn broadcast_splits(setup: &Setup<'_>, classical: bool, product: bool) -> Result<[Split; 2]> {
    let Setup::Broadcast {
        channel,
        state,
        receivers,
    } = *setup
    else {
        unreachable!("checked by arity")
    };
    if product {
        check_product(state, &receivers[0].resource, &receivers[1].resource, "receiver resources")?;
    }
    if classical {
        check_classical(state, &receivers[0].resource)?;
        check_classical(state, &receivers[1].resource)?;
    }
    let (rho, _) = apply_channel(channel, state)?;
    let split = |r: &Receiver| -> Result<Split> {
        let keep: Vec<&String> = r.outputs.iter().chain(&r.resource).collect();
        let joint = rho.partial_trace(&keep)?;
        Ok(Split {
            out: joint.layout().restrict(&r.outputs)?,
            resource: joint.layout().restrict(&r.resource)?,
            rho: joint,
        })
    };
    Ok([split(&receivers[0])?, split(&receivers[1])?])
}

/// ρ = N(ψ_A ⊗ ψ_B) on C, both resources and both side registers.
fn mac_output<'a>(setup: &Setup<'a>, classical: bool) -> Result<(DensityOp, [&'a MacSender; 2])> {
    let Setup::Mac {
        channel,
        alice,
        bob,
    } = *setup
    else {
        unreachable!("checked by arity")
    };
    validate_sender(alice, channel, classical)?;
    validate_sender(bob, channel, classical)?;
    let input = alice.state.tensor(&bob.state)?;
    Ok((
        channel.apply_on(&input, &labels_of(channel.in_layout()))?,
        [alice, bob],
    ))
}

fn marginal(rho: &DensityOp, layout: &SystemLayout) -> Result<DensityOp> {
    rho.partial_trace(&layout.labels())
}

fn sigma_term(name: &str, s: &Split, eps: f64) -> Result<TermSpec> {
    Ok(TermSpec {
        name: name.into(),
        rho: s.rho.clone(),
        eps,
        reference: Reference::SigmaMin {
            out: s.out.clone(),
            rest: marginal(&s.rho, &s.resource)?,
        },
    })
}

fn product_term(name: &str, s: &Split, eps: f64) -> Result<TermSpec> {
    Ok(TermSpec {
        name: name.into(),
        rho: s.rho.clone(),
        eps,
        reference: Reference::Fixed(marginal(&s.rho, &s.out)?.tensor(&marginal(&s.rho, &s.resource)?)?),
    })
}

/// ρ_{P X} against ρ_X ⊗ ρ_P for P = `resource`, X = `rest` (both within ρ).
fn split_of(rho: &DensityOp, resource: &[String], rest: &SystemLayout) -> Result<Split> {
    let keep: Vec<String> = labels_of(rest).into_iter().chain(resource.iter().cloned()).collect();
    let joint = rho.partial_trace(&keep)?;
    Ok(Split {
        out: joint.layout().restrict(&labels_of(rest))?,
        resource: joint.layout().restrict(resource)?,
        rho: joint,
    })
}

fn evaluate(spec: TermSpec, candidates: &[DensityOp], search: &SigmaSearch) -> Result<RateTerm> {
    let eps = spec.eps;
    let (divergence, trace, sigma) = match spec.reference {
        Reference::Fixed(reference) => (dh_eps(&spec.rho, &reference, eps)?.value, Vec::new(), None),
        Reference::SigmaMin { out, rest } => {
            let mut cands = vec![("channel output marginal".to_string(), marginal(&spec.rho, &out)?)];
            for (i, s) in candidates.iter().enumerate() {
                if s.layout().same_registers(&out) {
                    cands.push((format!("candidate {i}"), s.clone()));
                } else {
                    return Err(Error::DimensionMismatch(format!(
                        "σ candidate {i} lives on {} but the outputs are {out}",
                        s.layout()
                    )));
                }
            }
            let f = |s: &DensityOp| -> Result<Bits> { Ok(dh_eps(&spec.rho, &s.tensor(&rest)?, eps)?.value) };
            let m = minimize_sigma(&f, cands, &out, search)?;
            (m.value, m.trace, Some(m.sigma))
        }
    };
    Ok(RateTerm {
        name: spec.name,
        eps,
        divergence,
        penalty: None,
        value: divergence,
        feasible: None,
        trace,
        sigma,
    })
}

fn describe(setup: &Setup<'_>) -> String {
    match setup {
        Setup::P2p { channel, state } => format!(
            "channel {} -> {}; state on {}",
            channel.in_layout(),
            channel.out_layout(),
            state.layout()
        ),
        Setup::Gp { channel, tau, state } => format!(
            "channel {} -> {}; channel state on {}; state on {}",
            channel.in_layout(),
            channel.out_layout(),
            tau.layout(),
            state.layout()
        ),
        Setup::Broadcast { channel, state, .. } => format!(
            "channel {} -> {}; state on {}",
            channel.in_layout(),
            channel.out_layout(),
            state.layout()
        ),
        Setup::Mac { channel, alice, bob } => format!(
            "channel {} -> {}; senders on {} and {}",
            channel.in_layout(),
            channel.out_layout(),
            alice.state.layout(),
            bob.state.layout()
        ),
    }
}

fn log_ceiling(dim: usize, eps_total: f64) -> f64 {
    if eps_total >= 1.0 {
        f64::INFINITY
    } else {
        (dim as f64).log2() / (1.0 - eps_total)
    }
}

/// Converse expression(s) of the scenario evaluated at the given state(s).
///
/// Terms with an inner min over σ take the channel-output marginal plus
/// `sigma_candidates` (each on the relevant output registers) and, when
/// `search.optimize` is set, refine by simplex descent.
pub fn converse_value(
    scenario: BoundScenario,
    setup: &Setup<'_>,
    eps: &[f64],
    sigma_candidates: &[DensityOp],
    search: &SigmaSearch,
) -> Result<RateBound> {
    arity(scenario, setup, eps)?;
    let classical = !scenario.is_assisted();
    let mut ceilings = Vec::new();
    let specs = match scenario {
        BoundScenario::P2pEa | BoundScenario::GpEa | BoundScenario::P2pUa | BoundScenario::GpUa => {
            let s = single_split(setup, classical)?;
            if classical {
                ceilings.push(Ceiling {
                    name: "R".into(),
                    bits: log_ceiling(s.out.total_dim(), eps[0]),
                });
            }
            vec![sigma_term("R", &s, eps[0])?]
        }
        BoundScenario::BroadcastEa | BoundScenario::BroadcastUa => {
            let [b, c] = broadcast_splits(setup, classical, true)?;
            if classical {
                ceilings.push(Ceiling {
                    name: "R1+R2".into(),
                    bits: log_ceiling(b.out.total_dim() * c.out.total_dim(), eps[0] + eps[1]),
                });
            }
            vec![sigma_term("R1", &b, eps[0])?, sigma_term("R2", &c, eps[1])?]
        }
        BoundScenario::MacEa => {
            let (rho, senders) = mac_output(setup, false)?;
            let x = rho
                .layout()
                .without(&senders[0].resource)
                .without(&senders[1].resource);
            let mut out = Vec::new();
            for (i, s) in senders.iter().enumerate() {
                out.push(product_term(&format!("R{}", i + 1), &split_of(&rho, &s.resource, &x)?, eps[i])?);
            }
            out
        }
        BoundScenario::MacEaSumRate => {
            let (rho, senders) = mac_output(setup, false)?;
            let sides: Vec<String> = senders.iter().flat_map(|s| s.side.iter().cloned()).collect();
            let rho = rho.partial_trace(&labels_of(&rho.layout().without(&sides)))?;
            let mut out = Vec::new();
            for (i, s) in senders.iter().enumerate() {
                let rest = rho.layout().without(&s.resource);
                out.push(product_term(&format!("R{}", i + 1), &split_of(&rho, &s.resource, &rest)?, eps[i])?);
            }
            let c = rho
                .layout()
                .without(&senders[0].resource)
                .without(&senders[1].resource);
            let reference = marginal(&rho, &c)?
                .tensor(&rho.partial_trace(&senders[0].resource)?)?
                .tensor(&rho.partial_trace(&senders[1].resource)?)?;
            let sum_eps = eps[0] + eps[1];
            if sum_eps >= 1.0 {
                return Err(Error::Parameter {
                    name: "eps1 + eps2",
                    value: sum_eps,
                    range: "[0, 1)",
                });
            }
            out.push(TermSpec {
                name: "R1+R2".into(),
                rho: rho.clone(),
                eps: sum_eps,
                reference: Reference::Fixed(reference),
            });
            out
        }
        BoundScenario::MacUa => {
            let (rho, senders) = mac_output(setup, true)?;
            let c = rho
                .layout()
                .without(&senders[0].resource)
                .without(&senders[1].resource)
                .without(&senders[0].side)
                .without(&senders[1].side);
            ceilings.push(Ceiling {
                name: "R1+R2".into(),
                bits: log_ceiling(c.total_dim(), eps[0] + eps[1]),
            });
            let mut out = Vec::new();
            for (i, s) in senders.iter().enumerate() {
                out.push(sigma_term(&format!("R{}", i + 1), &split_of(&rho, &s.resource, &c)?, eps[i])?);
            }
            out
        }
    };
    let terms = specs
        .into_iter()
        .map(|s| evaluate(s, sigma_candidates, search))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateBound {
        scenario,
        kind: BoundKind::Converse,
        terms,
        ceilings,
        dmax_penalty: None,
        evaluated_at: describe(setup),
        feasible: true,
    })
}

fn penalised(mut t: RateTerm, penalty: f64) -> RateTerm {
    t.penalty = Some(penalty);
    t.value = t.divergence.minus(penalty);
    t.feasible = Some(t.value.as_f64() >= 0.0);
    t
}

/// Achievable rate(s) of the scenario's coding theorem at the given state(s);
/// negative values are returned as such and flagged infeasible.
pub fn achievable_rate(scenario: BoundScenario, setup: &Setup<'_>, eps: &[f64], delta: f64) -> Result<RateBound> {
    arity(scenario, setup, eps)?;
    check_unit_interval("delta", delta, false)?;
    if delta <= 0.0 {
        return Err(Error::Parameter {
            name: "delta",
            value: delta,
            range: "(0, 1)",
        });
    }
    for &e in eps {
        if e <= 0.0 {
            return Err(Error::Parameter {
                name: "eps",
                value: e,
                range: "(0, 1)",
            });
        }
    }
    let classical = !scenario.is_assisted();
    let four_eps = |e: f64| (4.0 * e / (delta * delta)).log2();
    let inv_delta = -delta.log2();
    let none = SigmaSearch::default();
    let eval = |spec: TermSpec, penalty: f64| -> Result<RateTerm> { Ok(penalised(evaluate(spec, &[], &none)?, penalty)) };
    let terms = match scenario {
        BoundScenario::P2pEa => {
            let s = single_split(setup, false)?;
            check_unit_interval("eps + delta", eps[0] + delta, false)?;
            vec![eval(product_term("R", &s, eps[0] + delta)?, inv_delta)?]
        }
        BoundScenario::GpEa | BoundScenario::P2pUa | BoundScenario::GpUa => {
            let s = single_split(setup, classical)?;
            vec![eval(product_term("R", &s, eps[0])?, four_eps(eps[0]))?]
        }
        BoundScenario::BroadcastEa | BoundScenario::BroadcastUa => {
            let [b, c] = broadcast_splits(setup, classical, true)?;
            vec![
                eval(product_term("R1", &b, eps[0])?, four_eps(eps[0]))?,
                eval(product_term("R2", &c, eps[1])?, four_eps(eps[1]))?,
            ]
        }
        BoundScenario::MacEa => {
            let (rho, senders) = mac_output(setup, false)?;
            let x = rho
                .layout()
                .without(&senders[0].resource)
                .without(&senders[1].resource);
            let mut out = Vec::new();
            for (suffix, pen) in [("pgm", true), ("sequential", false)] {
                for (i, s) in senders.iter().enumerate() {
                    let spec = product_term(&format!("R{} {suffix}", i + 1), &split_of(&rho, &s.resource, &x)?, eps[i])?;
                    out.push(eval(spec, if pen { four_eps(eps[i]) } else { inv_delta })?);
                }
            }
            out
        }
        BoundScenario::MacEaSumRate => {
            return Err(Error::Unsupported(
                "the sum-rate converse has no matching coding theorem".into(),
            ))
        }
        BoundScenario::MacUa => {
            let (rho, senders) = mac_output(setup, true)?;
            let c = rho
                .layout()
                .without(&senders[0].resource)
                .without(&senders[1].resource);
            let mut out = Vec::new();
            for (i, s) in senders.iter().enumerate() {
                out.push(eval(product_term(&format!("R{}", i + 1), &split_of(&rho, &s.resource, &c)?, eps[i])?, inv_delta)?);
            }
            out
        }
    };
    Ok(RateBound {
        scenario,
        kind: BoundKind::Achievable,
        feasible: terms.iter().all(|t| t.feasible != Some(false)),
        terms,
        ceilings: Vec::new(),
        dmax_penalty: None,
        evaluated_at: describe(setup),
    })
}

/// Converse with the product constraint on the resources dropped and paid for
/// by D_max of the resource state against the product of its marginals.
///
/// `GpEa`: R ≤ min_σ D_H^ε − D_max(ψ_SB′ ‖ ψ_S ⊗ ψ_B′), needing only ψ_S = τ_S.
/// `BroadcastEa`: per-receiver terms unchanged, plus R1+R2 ≤ both − D_max(ψ_B′C′ ‖ ψ_B′ ⊗ ψ_C′).
pub fn corollary_relaxations(
    scenario: BoundScenario,
    setup: &Setup<'_>,
    eps: &[f64],
    sigma_candidates: &[DensityOp],
    search: &SigmaSearch,
) -> Result<RateBound> {
    arity(scenario, setup, eps)?;
    match (scenario, *setup) {
        (BoundScenario::GpEa, Setup::Gp { channel, tau, state }) => {
            let s_labels = labels_of(tau.layout());
            let dev = state.partial_trace(&s_labels)?.max_abs_diff(tau)?;
            if dev > crate::coding::PRODUCT_TOL {
                return Err(Error::ProductCondition(format!(
                    "state register marginal differs from τ by {dev:e}"
                )));
            }
            let (rho, resource) = apply_channel(channel, state)?;
            let r_labels = labels_of(&resource);
            let out = rho.layout().without(&r_labels);
            let split = Split { rho, out, resource };
            let term = evaluate(sigma_term("R", &split, eps[0])?, sigma_candidates, search)?;
            let both: Vec<String> = s_labels.iter().chain(&r_labels).cloned().collect();
            let joint = state.partial_trace(&both)?;
            let penalty = dmax(&joint, &state.partial_trace(&s_labels)?.tensor(&state.partial_trace(&r_labels)?)?)?;
            let mut t = term;
            t.penalty = Some(penalty);
            t.value = t.divergence.minus(penalty);
            Ok(RateBound {
                scenario,
                kind: BoundKind::Converse,
                terms: vec![t],
                ceilings: Vec::new(),
                dmax_penalty: Some(penalty),
                evaluated_at: describe(setup),
                feasible: true,
            })
        }
        (BoundScenario::BroadcastEa, Setup::Broadcast { state, receivers, .. }) => {
            let [b, c] = broadcast_splits(setup, false, false)?;
            let t1 = evaluate(sigma_term("R1", &b, eps[0])?, sigma_candidates, search)?;
            let t2 = evaluate(sigma_term("R2", &c, eps[1])?, sigma_candidates, search)?;
            let both: Vec<&String> = receivers[0].resource.iter().chain(&receivers[1].resource).collect();
            let joint = state.partial_trace(&both)?;
            let prod = state
                .partial_trace(&receivers[0].resource)?
                .tensor(&state.partial_trace(&receivers[1].resource)?)?;
            let penalty = dmax(&joint, &prod)?;
            let sum = match (t1.value, t2.value) {
                (Bits::Finite(a), Bits::Finite(b)) => Bits::Finite(a + b - penalty),
                _ => Bits::Infinite,
            };
            let sum_term = RateTerm {
                name: "R1+R2".into(),
                eps: eps[0] + eps[1],
                divergence: sum.minus(-penalty),
                penalty: Some(penalty),
                value: sum,
                feasible: None,
                trace: Vec::new(),
                sigma: None,
            };
            Ok(RateBound {
                scenario,
                kind: BoundKind::Converse,
                terms: vec![t1, t2, sum_term],
                ceilings: Vec::new(),
                dmax_penalty: Some(penalty),
                evaluated_at: describe(setup),
                feasible: true,
            })
        }
        _ => Err(Error::Unsupported(
            "relaxed converses exist for gp_ea and broadcast_ea only".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalg::Ket;

    fn bell(a: &str, b: &str) -> DensityOp {
        Ket::maximally_entangled(a, b, 2).unwrap().density()
    }

    fn qubit_identity() -> KrausChannel {
        KrausChannel::identity_between(
            &SystemLayout::single("A", 2).unwrap(),
            &SystemLayout::single("B", 2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_qubit_converse_and_achievable() {
        let ch = qubit_identity();
        let psi = bell("A", "B'");
        let setup = Setup::P2p { channel: &ch, state: &psi };
        let search = SigmaSearch {
            optimize: true,
            restarts: 2,
            max_iters: 150,
            ..SigmaSearch::default()
        };
        let conv = converse_value(BoundScenario::P2pEa, &setup, &[0.1], &[], &search).unwrap();
        let r = conv.term("R").unwrap();
        assert!((r.value.as_f64() - (4.0f64 / 0.9).log2()).abs() < 1e-6, "{:?}", r.value);
        assert!(r.trace.windows(2).all(|w| w[1].best.as_f64() <= w[0].best.as_f64()));
        let ach = achievable_rate(BoundScenario::P2pEa, &setup, &[0.1], 0.1).unwrap();
        let a = ach.term("R").unwrap();
        assert!((a.value.as_f64() - ((4.0f64 / 0.8).log2() - 10f64.log2())).abs() < 1e-7);
        assert!(a.value.as_f64() <= r.value.as_f64());
    }

    #[test]
    fn unassisted_ceiling_and_infeasible_rates() {
        let outs = [
            DensityOp::diagonal(&[0.9, 0.1], &SystemLayout::single("B", 2).unwrap()).unwrap(),
            DensityOp::diagonal(&[0.1, 0.9], &SystemLayout::single("B", 2).unwrap()).unwrap(),
        ];
        let ch = KrausChannel::cq("A", &outs).unwrap();
        let l = SystemLayout::new([("U", 2), ("A", 2)]).unwrap();
        let ens = DensityOp::diagonal(&[0.5, 0.0, 0.0, 0.5], &l).unwrap();
        let setup = Setup::P2p { channel: &ch, state: &ens };
        let conv = converse_value(BoundScenario::P2pUa, &setup, &[0.1], &[], &SigmaSearch::default()).unwrap();
        assert!((conv.ceilings[0].bits - 1.0 / 0.9).abs() < 1e-12);
        assert!(conv.terms[0].value.as_f64() <= conv.ceilings[0].bits + 1e-9);
        let ach = achievable_rate(BoundScenario::P2pUa, &setup, &[0.01], 0.1).unwrap();
        assert!(!ach.feasible);
        assert!(ach.terms[0].value.as_f64() < 0.0);
    }

    #[test]
    fn rejects_mismatched_setup_and_bad_eps() {
        let ch = qubit_identity();
        let psi = bell("A", "B'");
        let setup = Setup::P2p { channel: &ch, state: &psi };
        assert!(converse_value(BoundScenario::GpEa, &setup, &[0.1], &[], &SigmaSearch::default()).is_err());
        assert!(converse_value(BoundScenario::P2pEa, &setup, &[1.0], &[], &SigmaSearch::default()).is_err());
        assert!(achievable_rate(BoundScenario::P2pEa, &setup, &[0.0], 0.1).is_err());
    }

    #[test]
    fn mac_converse_families() {
        let ins = SystemLayout::new([("A", 2), ("Bi", 2)]).unwrap();
        let outs = SystemLayout::new([("X1", 2), ("X2", 2)]).unwrap();
        let ch = KrausChannel::identity_between(&ins, &outs).unwrap();
        let a = MacSender { state: bell("A", "A'"), resource: vec!["A'".into()], side: vec![] };
        let b = MacSender { state: bell("Bi", "B'"), resource: vec!["B'".into()], side: vec![] };
        let setup = Setup::Mac { channel: &ch, alice: &a, bob: &b };
        let per = converse_value(BoundScenario::MacEa, &setup, &[0.1, 0.1], &[], &SigmaSearch::default()).unwrap();
        let ceiling = (4.0f64 / 0.9).log2();
        for t in &per.terms {
            assert!((t.value.as_f64() - ceiling).abs() < 1e-6, "{}: {:?}", t.name, t.value);
        }
        let sum = converse_value(BoundScenario::MacEaSumRate, &setup, &[0.1, 0.1], &[], &SigmaSearch::default()).unwrap();
        assert_eq!(sum.terms.len(), 3);
        assert!((sum.term("R1+R2").unwrap().value.as_f64() - (16.0f64 / 0.8).log2()).abs() < 1e-6);
        assert!(achievable_rate(BoundScenario::MacEaSumRate, &setup, &[0.1, 0.1], 0.1).is_err());
        let ach = achievable_rate(BoundScenario::MacEa, &setup, &[0.1, 0.1], 0.1).unwrap();
        assert_eq!(ach.terms.len(), 4);
    }

    #[test]
    fn relaxations_pay_for_correlated_resources() {
        let ins = SystemLayout::new([("A1", 2), ("A2", 2)]).unwrap();
        let outs = SystemLayout::new([("B", 2), ("C", 2)]).unwrap();
        let ch = KrausChannel::identity_between(&ins, &outs).unwrap();
        let rx = [
            Receiver { outputs: vec!["B".into()], resource: vec!["B'".into()] },
            Receiver { outputs: vec!["C".into()], resource: vec!["C'".into()] },
        ];
        let product = bell("A1", "B'").tensor(&bell("A2", "C'")).unwrap();
        let setup = Setup::Broadcast { channel: &ch, state: &product, receivers: &rx };
        let r = corollary_relaxations(BoundScenario::BroadcastEa, &setup, &[0.1, 0.1], &[], &SigmaSearch::default()).unwrap();
        assert!(r.dmax_penalty.unwrap().abs() < 1e-9);
        // B′C′ classically correlated: penalty 1 bit
        let l = SystemLayout::new([("A1", 2), ("A2", 2), ("B'", 2), ("C'", 2)]).unwrap();
        let mut p = vec![0.0; 16];
        p[0] = 0.125;
        p[15] = 0.125;
        for i in 0..16 {
            let (bp, cp) = ((i >> 1) & 1, i & 1);
            if bp == cp && i != 0 && i != 15 {
                p[i] = 0.125;
            }
        }
        let corr = DensityOp::diagonal(&p, &l).unwrap();
        let setup = Setup::Broadcast { channel: &ch, state: &corr, receivers: &rx };
        assert!(matches!(
            converse_value(BoundScenario::BroadcastEa, &setup, &[0.1, 0.1], &[], &SigmaSearch::default()),
            Err(Error::ProductCondition(_))
        ));
        let r = corollary_relaxations(BoundScenario::BroadcastEa, &setup, &[0.1, 0.1], &[], &SigmaSearch::default()).unwrap();
        assert!((r.dmax_penalty.unwrap() - 1.0).abs() < 1e-9);
        let s = r.term("R1+R2").unwrap();
        let expected = r.terms[0].value.as_f64() + r.terms[1].value.as_f64() - 1.0;
        assert!((s.value.as_f64() - expected).abs() < 1e-12);
    }
}
