use serde::{Deserialize, Serialize};

use super::checks::seq_check;
use super::position::{
    build_position_povm, copies_layout, position_label, position_state, unused_label, CopyGroup,
    PositionCode,
};
use super::report::{
    floor_check, InSituCheck, JointReport, MacStrategy, ProtocolReport, Scenario, StageReport,
    TestSummary,
};
use crate::channel::{neumark_dilate, KrausChannel};
use crate::divergence::dh_eps;
use crate::error::{check_unit_interval, Error, Result};
use crate::qalg::linalg::{self, trace_product_re, CMat};
use crate::qalg::{c, derive_seed, dim_cap, DensityOp, HermOp, SystemLayout};

/// Tolerance for the product and marginal conditions on resource states.
pub const PRODUCT_TOL: f64 = 1e-9;
/// Largest off-diagonal entry allowed in a register declared classical.
pub const CLASSICAL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodeParams {
    pub delta: f64,
    /// Hayashi–Nagaoka parameter; defaults to δ/ε (1 when ε = 0).
    pub c: Option<f64>,
    pub seed: u64,
    /// Random σ per converse-floor check.
    pub floor_samples: usize,
}

impl Default for CodeParams {
    fn default() -> Self {
        Self {
            delta: 0.1,
            c: None,
            seed: 0,
            floor_samples: 5,
        }
    }
}

impl CodeParams {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn hn_constant(&self, eps: f64) -> f64 {
        self.c
            .unwrap_or(if eps > 0.0 { self.delta / eps } else { 1.0 })
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Parameter {
                name: "delta",
                value: self.delta,
                range: "(0, 1)",
            });
        }
        if let Some(c) = self.c {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Parameter {
                    name: "c",
                    value: c,
                    range: "(0, inf)",
                });
            }
        }
        Ok(())
    }
}

/// Outputs and pre-shared resource registers held by one broadcast receiver.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Receiver {
    pub outputs: Vec<String>,
    pub resource: Vec<String>,
}

/// One multiple-access sender: a state on its channel input, the copied
/// resource (A′, or U when unassisted) and an optional single-copy side resource (A″).
#[derive(Clone, Debug)]
pub struct MacSender {
    pub state: DensityOp,
    pub resource: Vec<String>,
    pub side: Vec<String>,
}

/// Inputs of the unassisted protocols; the resource registers are classical.
#[derive(Clone, Copy, Debug)]
pub enum Unassisted<'a> {
    P2p {
        channel: &'a KrausChannel,
        ensemble: &'a DensityOp,
    },
    Gp {
        channel: &'a KrausChannel,
        tau: &'a DensityOp,
        ensemble: &'a DensityOp,
    },
    Broadcast {
        channel: &'a KrausChannel,
        ensemble: &'a DensityOp,
        receivers: &'a [Receiver; 2],
    },
    Mac {
        channel: &'a KrausChannel,
        alice: &'a MacSender,
        bob: &'a MacSender,
    },
}

#[derive(Clone, Copy, Debug)]
enum Penalty {
    /// log₂(1/δ)
    InvDelta,
    /// log₂(4ε/δ²)
    FourEps,
}

impl Penalty {
    fn bits(self, eps: f64, delta: f64) -> Option<f64> {
        match self {
            Penalty::InvDelta => Some(-delta.log2()),
            Penalty::FourEps => (eps > 0.0).then(|| (4.0 * eps / (delta * delta)).log2()),
        }
    }
}

struct Rule {
    eps: f64,
    eps_test: f64,
    penalty: Penalty,
    headline: f64,
    /// The headline follows from the operator bound only for c ≤ 1.
    needs_small_c: bool,
}

fn hn_bound(c: f64, miss: f64, copies: usize, type2: f64) -> f64 {
    (1.0 + c) * miss + (2.0 + c + 1.0 / c) * copies as f64 * type2
}

pub(crate) fn labels_of(layout: &SystemLayout) -> Vec<String> {
    layout.labels().into_iter().map(String::from).collect()
}

/// Index of the sub-register tuple `labels` for every basis index of `layout`.
fn index_keys(layout: &SystemLayout, labels: &[String]) -> Vec<usize> {
    let dims = layout.dims();
    let selected: Vec<bool> = layout
        .registers()
        .iter()
        .map(|r| labels.iter().any(|l| *l == r.label))
        .collect();
    (0..layout.total_dim())
        .map(|mut i| {
            let mut key = 0;
            let mut weight = 1;
            for (k, &d) in dims.iter().enumerate().rev() {
                let digit = i % d;
                i /= d;
                if selected[k] {
                    key += digit * weight;
                    weight *= d;
                }
            }
            key
        })
        .collect()
}

/// Largest entry of `m` coupling different basis values of the `labels` registers.
pub(crate) fn offdiag_weight(m: &CMat, layout: &SystemLayout, labels: &[String]) -> f64 {
    let keys = index_keys(layout, labels);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if keys[i] != keys[j] {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

fn pinch(op: &HermOp, labels: &[String]) -> HermOp {
    let keys = index_keys(op.layout(), labels);
    let mut m = op.matrix().clone();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if keys[i] != keys[j] {
                m[(i, j)] = c(0.0, 0.0);
            }
        }
    }
    HermOp::trusted(m, op.layout().clone())
}

pub(crate) fn check_classical(state: &DensityOp, labels: &[String]) -> Result<()> {
    for l in labels {
        let dev = offdiag_weight(state.matrix(), state.layout(), std::slice::from_ref(l));
        if dev > CLASSICAL_TOL {
            return Err(Error::NotClassical {
                label: l.clone(),
                deviation: dev,
            });
        }
    }
    Ok(())
}

/// ψ_{PQ} = ψ_P ⊗ ψ_Q within tolerance; vacuous when either side is empty.
pub(crate) fn check_product(state: &DensityOp, p: &[String], q: &[String], what: &str) -> Result<()> {
    if p.is_empty() || q.is_empty() {
        return Ok(());
    }
    let both: Vec<&String> = p.iter().chain(q).collect();
    let joint = state.partial_trace(&both)?;
    let prod = state.partial_trace(p)?.tensor(&state.partial_trace(q)?)?;
    let dev = joint.max_abs_diff(&prod)?;
    if dev > PRODUCT_TOL {
        return Err(Error::ProductCondition(format!(
            "{what}: deviation {dev:e} from the product of marginals"
        )));
    }
    Ok(())
}

pub(crate) fn check_eps(eps: f64, delta: f64) -> Result<()> {
    check_unit_interval("eps", eps, false)
        .and_then(|_| check_unit_interval("delta", delta, false))
}

fn check_size(side: usize, parts: &[(usize, usize)], extra: usize) -> Result<()> {
    let cap = dim_cap();
    let mut d = side.checked_mul(extra);
    for &(dim, copies) in parts {
        d = d.and_then(|d| {
            u32::try_from(copies)
                .ok()
                .and_then(|k| dim.checked_pow(k))
                .and_then(|p| d.checked_mul(p))
        });
    }
    match d {
        Some(d) if d <= cap => Ok(()),
        Some(d) => Err(Error::DimensionCap { dim: d, cap }),
        None => Err(Error::DimensionCap {
            dim: usize::MAX,
            cap,
        }),
    }
}

fn copies_of(rate: u32) -> Result<usize> {
    if rate > 20 {
        return Err(Error::Parameter {
            name: "rate",
            value: rate as f64,
            range: "[0, 20]",
        });
    }
    Ok(1usize << rate)
}

struct PreparedTest {
    summary: TestSummary,
    test: HermOp,
    marginal: DensityOp,
}

/// Optimal test for ρ_{XP} against ρ_X ⊗ ρ_P at smoothing `eps`.
fn prepare_test(
    joint: &DensityOp,
    position: &SystemLayout,
    eps: f64,
    penalty: Option<f64>,
    classical: bool,
) -> Result<PreparedTest> {
    let pl = labels_of(position);
    let side = joint.layout().without(&pl);
    let rho_x = joint.partial_trace(&side.labels())?;
    let marginal = joint.partial_trace(&pl)?;
    let sigma = rho_x.tensor(&marginal)?;
    let dh = dh_eps(joint, &sigma, eps)?;
    let mut test = dh.witness.operator.clone();
    if classical {
        test = pinch(&test, &pl);
    }
    let summary = TestSummary {
        register: pl.join(""),
        eps,
        divergence: dh.value,
        type1: dh.witness.type1,
        type2: dh.witness.type2,
        penalty,
        rate_limit: penalty.map(|p| dh.value.minus(p)),
    };
    Ok(PreparedTest {
        summary,
        test,
        marginal,
    })
}

pub(crate) struct SingleStage {
    pub report: StageReport,
    pub code: PositionCode,
    pub joint: DensityOp,
    pub checks: Vec<InSituCheck>,
}

fn single_stage(
    name: &str,
    joint: &DensityOp,
    position: &SystemLayout,
    rate: u32,
    rule: &Rule,
    params: &CodeParams,
    classical: bool,
    salt: u64,
) -> Result<SingleStage> {
    let n = copies_of(rate)?;
    let side_dim = joint.dim() / position.total_dim();
    check_size(side_dim, &[(position.total_dim(), n)], 1)?;
    let penalty = rule.penalty.bits(rule.eps, params.delta);
    let prep = prepare_test(joint, position, rule.eps_test, penalty, classical)?;
    let code = build_position_povm(&prep.test, position, n, &SystemLayout::trivial())?;
    let group = [CopyGroup {
        position,
        copies: n,
        marginal: &prep.marginal,
    }];
    let states: Vec<DensityOp> = (0..n)
        .map(|m| position_state(joint, &group, &[m], code.layout()))
        .collect::<Result<_>>()?;
    let confusion: Vec<Vec<f64>> = states
        .iter()
        .map(|s| code.outcome_probabilities(s))
        .collect::<Result<_>>()?;
    let per_message_success = (0..n).map(|m| confusion[m][m]).collect();

    let c = params.hn_constant(rule.eps);
    let miss = (1.0 - prep.summary.type1).max(0.0);
    let admissible = prep.summary.admits(rate as f64);
    let correct: Vec<usize> = (0..n).collect();
    let floor = floor_check(
        &confusion,
        &correct,
        params.floor_samples,
        derive_seed(&[params.seed, salt]),
    )?;
    let mut report = StageReport {
        name: name.to_string(),
        rate,
        copies: vec![n],
        hn_constant: Some(c),
        analytic_bound: hn_bound(c, miss, n, prep.summary.type2),
        headline_bound: rule.headline,
        headline_applies: admissible && (!rule.needs_small_c || c <= 1.0),
        tests: vec![prep.summary],
        per_message_success,
        worst_error: 0.0,
        avg_error: 0.0,
        headline_holds: None,
        bound_satisfied: false,
        confusion,
        floor,
    };
    report.settle();

    let mut checks = vec![InSituCheck::new(
        &format!("povm_completeness:{name}"),
        -code.diagnostics().sum_residual,
        1e-9,
    )];
    if let Some(dev) = code.neumark_deviation(&states)? {
        checks.push(InSituCheck::new(&format!("neumark_agreement:{name}"), -dev, 1e-8));
    }
    Ok(SingleStage {
        report,
        code,
        joint: joint.clone(),
        checks,
    })
}

/// Channel output on the channel's registers plus the untouched resource registers.
pub(crate) fn apply_channel(channel: &KrausChannel, state: &DensityOp) -> Result<(DensityOp, SystemLayout)> {
    let inputs = labels_of(channel.in_layout());
    let resource = state.layout().without(&inputs);
    if resource.is_empty() {
        return Err(Error::Unsupported(
            "the state carries no resource register beyond the channel input".into(),
        ));
    }
    Ok((channel.apply_on(state, &inputs)?, resource))
}

pub(crate) fn gp_checks(channel: &KrausChannel, tau: &DensityOp, state: &DensityOp) -> Result<()> {
    let s = labels_of(tau.layout());
    tau.layout().check_subset_of(channel.in_layout())?;
    let dev = state.partial_trace(&s)?.max_abs_diff(tau)?;
    if dev > PRODUCT_TOL {
        return Err(Error::ProductCondition(format!(
            "state register marginal differs from τ by {dev:e}"
        )));
    }
    let resource = labels_of(&state.layout().without(&labels_of(channel.in_layout())));
    check_product(state, &s, &resource, "state register vs resource")
}

fn single_report(
    scenario: Scenario,
    stages: Vec<SingleStage>,
    rates: Vec<u32>,
    eps: Vec<f64>,
    params: &CodeParams,
) -> ProtocolReport {
    let mut rep = ProtocolReport::new(scenario, rates, eps, params.delta);
    for s in stages {
        rep.checks.extend(s.checks);
        rep.stages.push(s.report);
    }
    rep.settle()
}

/// Entanglement-assisted point-to-point code: test at smoothing ε + δ, rate penalty log₂(1/δ).
pub fn simulate_p2p_ea(
    channel: &KrausChannel,
    psi: &DensityOp,
    rate: u32,
    eps: f64,
    params: &CodeParams,
) -> Result<ProtocolReport> {
    params.validate()?;
    check_eps(eps, params.delta)?;
    check_unit_interval("eps + delta", eps + params.delta, false)?;
    let (joint, position) = apply_channel(channel, psi)?;
    let rule = Rule {
        eps,
        eps_test: eps + params.delta,
        penalty: Penalty::InvDelta,
        headline: 2.0 * eps + params.delta,
        needs_small_c: false,
    };
    let stage = single_stage("message", &joint, &position, rate, &rule, params, false, 0)?;
    Ok(single_report(Scenario::P2pEa, vec![stage], vec![rate], vec![eps], params))
}

/// Entanglement-assisted code for a channel with state τ_S, requiring ψ_{SB′} = τ_S ⊗ ψ_{B′}.
pub fn simulate_gp_ea(
    channel: &KrausChannel,
    tau: &DensityOp,
    psi: &DensityOp,
    rate: u32,
    eps: f64,
    params: &CodeParams,
) -> Result<ProtocolReport> {
    params.validate()?;
    check_eps(eps, params.delta)?;
    gp_checks(channel, tau, psi)?;
    let (joint, position) = apply_channel(channel, psi)?;
    let rule = Rule {
        eps,
        eps_test: eps,
        penalty: Penalty::FourEps,
        headline: eps + 2.0 * params.delta,
        needs_small_c: true,
    };
    let stage = single_stage("message", &joint, &position, rate, &rule, params, false, 0)?;
    Ok(single_report(Scenario::GpEa, vec![stage], vec![rate], vec![eps], params))
}

fn broadcast(
    scenario: Scenario,
    channel: &KrausChannel,
    psi: &DensityOp,
    receivers: &[Receiver; 2],
    rates: [u32; 2],
    eps: [f64; 2],
    params: &CodeParams,
) -> Result<ProtocolReport> {
    params.validate()?;
    for e in eps {
        check_eps(e, params.delta)?;
    }
    let classical = !scenario.is_assisted();
    let [bob, charlie] = receivers;
    check_product(psi, &bob.resource, &charlie.resource, "receiver resources")?;
    if classical {
        check_classical(psi, &bob.resource)?;
        check_classical(psi, &charlie.resource)?;
    }
    let (out, resource) = apply_channel(channel, psi)?;
    let declared: Vec<&String> = bob.resource.iter().chain(&charlie.resource).collect();
    if resource.len() != declared.len() || declared.iter().any(|l| !resource.contains(l)) {
        return Err(Error::Unsupported(format!(
            "receiver resources must be exactly the non-input registers {resource}"
        )));
    }
    let mut stages = Vec::new();
    for (i, (r, name)) in receivers.iter().zip(["bob", "charlie"]).enumerate() {
        let keep: Vec<&String> = r.outputs.iter().chain(&r.resource).collect();
        let joint = out.partial_trace(&keep)?;
        let position = joint.layout().restrict(&r.resource)?;
        let rule = Rule {
            eps: eps[i],
            eps_test: eps[i],
            penalty: Penalty::FourEps,
            headline: eps[i] + 2.0 * params.delta,
            needs_small_c: true,
        };
        stages.push(single_stage(
            name, &joint, &position, rates[i], &rule, params, classical, i as u64,
        )?);
    }
    let mut rep = single_report(scenario, stages, rates.to_vec(), eps.to_vec(), params);
    if scenario == Scenario::BroadcastEa {
        for (s, e) in rep.stages.clone().iter().zip(eps) {
            if s.headline_applies {
                let stated = e + params.delta;
                rep.notes.push(format!(
                    "{}: the statement's error figure eps + delta = {stated} {}",
                    s.name,
                    if s.worst_error <= stated + 1e-8 { "also holds" } else { "is exceeded" }
                ));
            }
        }
    }
    Ok(rep)
}

/// Entanglement-assisted broadcast code; each receiver runs its own position decoder.
pub fn simulate_broadcast_ea(
    channel: &KrausChannel,
    psi: &DensityOp,
    receivers: &[Receiver; 2],
    rates: [u32; 2],
    eps: [f64; 2],
    params: &CodeParams,
) -> Result<ProtocolReport> {
    broadcast(Scenario::BroadcastEa, channel, psi, receivers, rates, eps, params)
}

/// Entanglement-assisted multiple-access code under one of the decoding strategies.
pub fn simulate_mac_ea(
    channel: &KrausChannel,
    alice: &MacSender,
    bob: &MacSender,
    rates: [u32; 2],
    eps: [f64; 2],
    strategy: MacStrategy,
    params: &CodeParams,
) -> Result<ProtocolReport> {
    mac(Scenario::MacEa, channel, alice, bob, rates, eps, strategy, params)
}

pub(crate) fn validate_sender(s: &MacSender, channel: &KrausChannel, classical: bool) -> Result<()> {
    if s.resource.is_empty() {
        return Err(Error::Unsupported("sender has no resource register".into()));
    }
    let layout = s.state.layout();
    for l in s.resource.iter().chain(&s.side) {
        layout.dim_of(l)?;
    }
    let rest = layout.without(&s.resource).without(&s.side);
    rest.check_subset_of(channel.in_layout())?;
    check_product(&s.state, &s.resource, &s.side, "copied vs single-copy resource")?;
    if classical {
        check_classical(&s.state, &s.resource)?;
    }
    Ok(())
}

struct MacSetup {
    layout: SystemLayout,
    pos: [SystemLayout; 2],
    copies: [usize; 2],
    tests: [PreparedTest; 2],
    states: Vec<DensityOp>,
}

#[allow(clippy::too_many_arguments)]
fn mac_setup(
    channel: &KrausChannel,
    alice: &MacSender,
    bob: &MacSender,
    rates: [u32; 2],
    eps: [f64; 2],
    penalty: Penalty,
    params: &CodeParams,
    classical: bool,
    extra_dim: usize,
) -> Result<MacSetup> {
    validate_sender(alice, channel, classical)?;
    validate_sender(bob, channel, classical)?;
    let input = alice.state.tensor(&bob.state)?;
    let rho = channel.apply_on(&input, &labels_of(channel.in_layout()))?;
    let resources = [&alice.resource, &bob.resource];
    let pos = [
        rho.layout().restrict(resources[0])?,
        rho.layout().restrict(resources[1])?,
    ];
    let copies = [copies_of(rates[0])?, copies_of(rates[1])?];
    let x = rho
        .layout()
        .without(resources[0])
        .without(resources[1]);
    check_size(
        x.total_dim(),
        &[
            (pos[0].total_dim(), copies[0]),
            (pos[1].total_dim(), copies[1]),
        ],
        extra_dim,
    )?;
    let mut tests = Vec::with_capacity(2);
    for i in 0..2 {
        let keep: Vec<String> = labels_of(&x).into_iter().chain(resources[i].iter().cloned()).collect();
        let joint = rho.partial_trace(&keep)?;
        tests.push(prepare_test(
            &joint,
            &pos[i],
            eps[i],
            penalty.bits(eps[i], params.delta),
            classical,
        )?);
    }
    let tests: [PreparedTest; 2] = tests.try_into().map_err(|_| Error::Unsupported("two tests".into()))?;
    let layout = x
        .concat(&copies_layout(&pos[0], copies[0])?)?
        .concat(&copies_layout(&pos[1], copies[1])?)?;
    let groups = [
        CopyGroup {
            position: &pos[0],
            copies: copies[0],
            marginal: &tests[0].marginal,
        },
        CopyGroup {
            position: &pos[1],
            copies: copies[1],
            marginal: &tests[1].marginal,
        },
    ];
    let mut states = Vec::with_capacity(copies[0] * copies[1]);
    for m1 in 0..copies[0] {
        for m2 in 0..copies[1] {
            states.push(position_state(&rho, &groups, &[m1, m2], &layout)?);
        }
    }
    Ok(MacSetup {
        layout,
        pos,
        copies,
        tests,
        states,
    })
}

#[allow(clippy::too_many_arguments)]
fn mac(
    scenario: Scenario,
    channel: &KrausChannel,
    alice: &MacSender,
    bob: &MacSender,
    rates: [u32; 2],
    eps: [f64; 2],
    strategy: MacStrategy,
    params: &CodeParams,
) -> Result<ProtocolReport> {
    params.validate()?;
    for e in eps {
        check_eps(e, params.delta)?;
    }
    let classical = !scenario.is_assisted();
    let mut rep = ProtocolReport::new(scenario, rates.to_vec(), eps.to_vec(), params.delta);
    rep.strategy = Some(strategy);
    match strategy {
        MacStrategy::Sequential => {
            let setup = mac_setup(
                channel, alice, bob, rates, eps, Penalty::InvDelta, params, classical, 2,
            )?;
            sequential(&setup, rates, eps, params, &mut rep)?;
        }
        MacStrategy::PgmAFirst | MacStrategy::PgmBFirst => {
            let setup = mac_setup(
                channel, alice, bob, rates, eps, Penalty::FourEps, params, classical, 1,
            )?;
            let first = usize::from(strategy == MacStrategy::PgmBFirst);
            pgm_two_stage(&setup, rates, eps, first, params, &mut rep)?;
        }
    }
    Ok(rep.settle())
}

/// Pair index → column of the joint outcome table (sender-1 outcome major).
fn pair_column(a1: usize, a2: usize, n2: usize) -> usize {
    a1 * (n2 + 1) + a2
}

fn joint_report(
    joint_probs: &[Vec<f64>],
    copies: [usize; 2],
    params: &CodeParams,
) -> Result<JointReport> {
    let [n1, n2] = copies;
    let mut per_pair = Vec::with_capacity(n1 * n2);
    let mut marg = [0.0f64; 2];
    let mut correct = Vec::with_capacity(n1 * n2);
    for m1 in 0..n1 {
        for m2 in 0..n2 {
            let row = &joint_probs[m1 * n2 + m2];
            let col = pair_column(m1, m2, n2);
            correct.push(col);
            per_pair.push(row[col]);
            let p1: f64 = (0..=n2).map(|b| row[pair_column(m1, b, n2)]).sum();
            let p2: f64 = (0..=n1).map(|a| row[pair_column(a, m2, n2)]).sum();
            marg[0] = marg[0].max(1.0 - p1);
            marg[1] = marg[1].max(1.0 - p2);
        }
    }
    let floor = floor_check(
        joint_probs,
        &correct,
        params.floor_samples,
        derive_seed(&[params.seed, 99]),
    )?;
    let worst = per_pair.iter().map(|s| 1.0 - s).fold(0.0, f64::max);
    let avg = per_pair.iter().map(|s| 1.0 - s).sum::<f64>() / per_pair.len() as f64;
    Ok(JointReport {
        per_pair_success: per_pair,
        worst_error: worst,
        avg_error: avg,
        marginal_worst_errors: marg,
        floor,
    })
}

fn pgm_two_stage(
    setup: &MacSetup,
    rates: [u32; 2],
    eps: [f64; 2],
    first: usize,
    params: &CodeParams,
    rep: &mut ProtocolReport,
) -> Result<()> {
    let second = 1 - first;
    let mut codes = Vec::with_capacity(2);
    for i in 0..2 {
        let other = copies_layout(&setup.pos[1 - i], setup.copies[1 - i])?;
        let code = build_position_povm(&setup.tests[i].test, &setup.pos[i], setup.copies[i], &other)?;
        codes.push(code.reordered(&setup.layout)?);
    }
    for (i, code) in codes.iter().enumerate() {
        rep.checks.push(InSituCheck::new(
            &format!("povm_completeness:m{}", i + 1),
            -code.diagnostics().sum_residual,
            1e-9,
        ));
    }
    let (cf, cs) = (&codes[first], &codes[second]);
    let roots = cf.kraus_roots();
    let [n1, n2] = setup.copies;
    let nf = setup.copies[first];
    let ns = setup.copies[second];
    let mut succ_first = Vec::with_capacity(n1 * n2);
    let mut succ_second = Vec::with_capacity(n1 * n2);
    let mut conf_first = vec![vec![0.0; nf + 1]; nf];
    let mut conf_second = vec![vec![0.0; ns + 1]; ns];
    let mut joint_probs = Vec::with_capacity(n1 * n2);
    let mut transfer_margin = f64::INFINITY;
    for m1 in 0..n1 {
        for m2 in 0..n2 {
            let msgs = [m1, m2];
            let (mf, ms) = (msgs[first], msgs[second]);
            let omega = setup.states[m1 * n2 + m2].matrix();
            let pf: Vec<f64> = cf.povm().iter().map(|e| trace_product_re(e.matrix(), omega)).collect();
            let alone = trace_product_re(cs.omega(ms).matrix(), omega);
            let branches: Vec<CMat> = roots.iter().map(|r| r * omega * r).collect();
            let mut post = CMat::zeros(omega.nrows(), omega.ncols());
            for b in &branches {
                post += b;
            }
            let ps: Vec<f64> = cs.povm().iter().map(|e| trace_product_re(e.matrix(), &post)).collect();
            for j in 0..=nf {
                conf_first[mf][j] += pf[j] / ns as f64;
            }
            for j in 0..=ns {
                conf_second[ms][j] += ps[j] / nf as f64;
            }
            succ_first.push(pf[mf]);
            succ_second.push(ps[ms]);

            let e1 = (1.0 - pf[mf]).clamp(0.0, 1.0);
            let e_alone = (1.0 - alone).max(0.0);
            let e_after = 1.0 - ps[ms];
            let bound = (e_alone.sqrt() + (1.0 - (1.0 - e1) * (1.0 - e1)).max(0.0).sqrt()).powi(2);
            transfer_margin = transfer_margin.min(bound - e_after);

            let mut row = vec![0.0; (n1 + 1) * (n2 + 1)];
            for (a, b_a) in branches.iter().enumerate() {
                for (b, e) in cs.povm().iter().enumerate() {
                    let p = trace_product_re(e.matrix(), b_a);
                    let (a1, a2) = if first == 0 { (a, b) } else { (b, a) };
                    row[pair_column(a1, a2, n2)] = p;
                }
            }
            joint_probs.push(row);
        }
    }
    rep.checks.push(InSituCheck::new("gentle_transfer", transfer_margin, 1e-9));

    let sf = &setup.tests[first].summary;
    let ss = &setup.tests[second].summary;
    let cfst = params.hn_constant(eps[first]);
    let csnd = params.hn_constant(eps[second]);
    let hn_first = hn_bound(cfst, (1.0 - sf.type1).max(0.0), nf, sf.type2);
    let hn_second = hn_bound(csnd, (1.0 - ss.type1).max(0.0), ns, ss.type2);
    let admits_first = sf.admits(rates[first] as f64) && cfst <= 1.0;
    let admits_second = ss.admits(rates[second] as f64) && csnd <= 1.0;
    let delta = params.delta;
    let head_first = eps[first] + 2.0 * delta;
    let head_second = eps[second] + 2.0 * delta + 3.0 * head_first.sqrt();

    let ident = |n: usize| (0..n).collect::<Vec<_>>();
    let mut st_first = StageReport {
        name: format!("m{}", first + 1),
        rate: rates[first],
        copies: vec![nf],
        tests: vec![sf.clone()],
        hn_constant: Some(cfst),
        per_message_success: succ_first,
        worst_error: 0.0,
        avg_error: 0.0,
        analytic_bound: hn_first,
        headline_bound: head_first,
        headline_applies: admits_first,
        headline_holds: None,
        bound_satisfied: false,
        floor: floor_check(&conf_first, &ident(nf), params.floor_samples, derive_seed(&[params.seed, 0]))?,
        confusion: conf_first,
    };
    st_first.settle();
    let mut st_second = StageReport {
        name: format!("m{}", second + 1),
        rate: rates[second],
        copies: vec![ns],
        tests: vec![ss.clone()],
        hn_constant: Some(csnd),
        per_message_success: succ_second,
        worst_error: 0.0,
        avg_error: 0.0,
        analytic_bound: hn_second + 3.0 * hn_first.sqrt(),
        headline_bound: head_second,
        headline_applies: admits_first && admits_second,
        headline_holds: None,
        bound_satisfied: false,
        floor: floor_check(&conf_second, &ident(ns), params.floor_samples, derive_seed(&[params.seed, 1]))?,
        confusion: conf_second,
    };
    st_second.settle();
    rep.stages.push(st_first);
    rep.stages.push(st_second);
    rep.joint = Some(joint_report(&joint_probs, setup.copies, params)?);
    Ok(())
}

fn sequential(
    setup: &MacSetup,
    rates: [u32; 2],
    eps: [f64; 2],
    params: &CodeParams,
    rep: &mut ProtocolReport,
) -> Result<()> {
    let j = unused_label(&setup.layout, "J");
    let full = setup.layout.concat(&SystemLayout::single(j.clone(), 2)?)?;
    let d = full.total_dim();
    let id = linalg::identity(d);
    let mut projectors: [Vec<CMat>; 2] = [Vec::new(), Vec::new()];
    let mut idempotence: f64 = 0.0;
    for i in 0..2 {
        let t = &setup.tests[i].test;
        let dil = neumark_dilate(&[t.clone(), t.complement()], &j)?;
        let p = dil.projector(0);
        idempotence = idempotence.max(linalg::max_abs(&(p.matrix() * p.matrix() - p.matrix())));
        let pos = &setup.pos[i];
        for m in 1..=setup.copies[i] {
            let relabeled = p.relabel(|l| {
                if pos.contains(l) {
                    position_label(l, m)
                } else {
                    l.to_string()
                }
            })?;
            projectors[i].push(relabeled.embed(&full)?.into_matrix());
        }
    }
    rep.checks.push(InSituCheck::new("dilation_idempotence", -idempotence, 1e-10));

    let [n1, n2] = setup.copies;
    let mut j0 = CMat::zeros(2, 2);
    j0[(0, 0)] = c(1.0, 0.0);
    let mut joint_probs = Vec::with_capacity(n1 * n2);
    let mut union_margin = f64::INFINITY;
    let mut agreement: f64 = 0.0;
    for m1 in 0..n1 {
        for m2 in 0..n2 {
            let rho0 = linalg::kron(setup.states[m1 * n2 + m2].matrix(), &j0);
            let mut branches = Vec::with_capacity(n1 + 1);
            let mut rem = rho0.clone();
            for p in &projectors[0] {
                branches.push(p * &rem * p);
                let bar = &id - p;
                rem = &bar * rem * &bar;
            }
            branches.push(rem);
            let mut row = vec![0.0; (n1 + 1) * (n2 + 1)];
            for (a, b_a) in branches.iter().enumerate() {
                let mut rem = b_a.clone();
                for (b, p) in projectors[1].iter().enumerate() {
                    row[pair_column(a, b, n2)] = trace_product_re(p, &rem);
                    let bar = &id - p;
                    rem = &bar * rem * &bar;
                }
                row[pair_column(a, n2, n2)] = linalg::trace_re(&rem);
            }

            // Success = every test up to the correct position rejects except
            // the correct one, which accepts; complement that one.
            let family: Vec<HermOp> = projectors[0][..=m1]
                .iter()
                .enumerate()
                .map(|(k, p)| if k == m1 { &id - p } else { p.clone() })
                .chain(
                    projectors[1][..=m2]
                        .iter()
                        .enumerate()
                        .map(|(k, p)| if k == m2 { &id - p } else { p.clone() }),
                )
                .map(|m| HermOp::trusted(m, full.clone()))
                .collect();
            let rho = DensityOp::trusted(rho0, full.clone(), true);
            let sc = seq_check(&rho, &family)?;
            union_margin = union_margin.min(sc.lhs - sc.rhs);
            agreement = agreement.max((sc.lhs - row[pair_column(m1, m2, n2)]).abs());
            joint_probs.push(row);
        }
    }
    rep.checks.push(InSituCheck::new("sequential_union_bound", union_margin, 1e-9));
    rep.checks.push(InSituCheck::new("sequential_branch_agreement", -agreement, 1e-9));

    let [s1, s2] = [&setup.tests[0].summary, &setup.tests[1].summary];
    let analytic = 4.0
        * ((1.0 - s1.type1).max(0.0)
            + (1.0 - s2.type1).max(0.0)
            + n1 as f64 * s1.type2
            + n2 as f64 * s2.type2);
    let joint = joint_report(&joint_probs, setup.copies, params)?;
    let correct: Vec<usize> = (0..n1)
        .flat_map(|m1| (0..n2).map(move |m2| pair_column(m1, m2, n2)))
        .collect();
    let mut stage = StageReport {
        name: "joint".into(),
        rate: rates[0] + rates[1],
        copies: vec![n1, n2],
        tests: vec![s1.clone(), s2.clone()],
        hn_constant: None,
        per_message_success: joint.per_pair_success.clone(),
        worst_error: 0.0,
        avg_error: 0.0,
        analytic_bound: analytic,
        headline_bound: 4.0 * (eps[0] + eps[1] + 2.0 * params.delta),
        headline_applies: s1.admits(rates[0] as f64) && s2.admits(rates[1] as f64),
        headline_holds: None,
        bound_satisfied: false,
        floor: floor_check(&joint_probs, &correct, params.floor_samples, derive_seed(&[params.seed, 2]))?,
        confusion: joint_probs,
    };
    stage.settle();
    rep.stages.push(stage);
    rep.joint = Some(joint);
    Ok(())
}

/// Shared-randomness codes over classical resource registers, one per scenario.
pub fn simulate_unassisted(
    setup: &Unassisted<'_>,
    rates: &[u32],
    eps: &[f64],
    params: &CodeParams,
) -> Result<ProtocolReport> {
    params.validate()?;
    let want = match setup {
        Unassisted::P2p { .. } | Unassisted::Gp { .. } => 1,
        _ => 2,
    };
    if rates.len() != want || eps.len() != want {
        return Err(Error::DimensionMismatch(format!(
            "scenario takes {want} rate(s) and error(s)"
        )));
    }
    match *setup {
        Unassisted::P2p { .. } | Unassisted::Gp { .. } => {
            let stage = unassisted_single(setup, rates[0], eps[0], params)?;
            let scenario = if matches!(setup, Unassisted::P2p { .. }) {
                Scenario::P2pUa
            } else {
                Scenario::GpUa
            };
            let mut rep = single_report(scenario, vec![stage], rates.to_vec(), eps.to_vec(), params);
            if scenario == Scenario::P2pUa {
                rep.notes.push(format!(
                    "position decoding with c = delta/eps guarantees eps + 2 delta = {}",
                    eps[0] + 2.0 * params.delta
                ));
            }
            Ok(rep)
        }
        Unassisted::Broadcast {
            channel,
            ensemble,
            receivers,
        } => broadcast(
            Scenario::BroadcastUa,
            channel,
            ensemble,
            receivers,
            [rates[0], rates[1]],
            [eps[0], eps[1]],
            params,
        ),
        Unassisted::Mac {
            channel,
            alice,
            bob,
        } => mac(
            Scenario::MacUa,
            channel,
            alice,
            bob,
            [rates[0], rates[1]],
            [eps[0], eps[1]],
            MacStrategy::Sequential,
            params,
        ),
    }
}

pub(crate) fn unassisted_single(
    setup: &Unassisted<'_>,
    rate: u32,
    eps: f64,
    params: &CodeParams,
) -> Result<SingleStage> {
    check_eps(eps, params.delta)?;
    let (channel, ensemble, headline) = match *setup {
        Unassisted::P2p { channel, ensemble } => (channel, ensemble, eps + params.delta),
        Unassisted::Gp {
            channel,
            tau,
            ensemble,
        } => {
            gp_checks(channel, tau, ensemble)?;
            (channel, ensemble, eps + 2.0 * params.delta)
        }
        _ => {
            return Err(Error::Unsupported(
                "single-receiver scenarios only".into(),
            ))
        }
    };
    let (joint, position) = apply_channel(channel, ensemble)?;
    check_classical(ensemble, &labels_of(&position))?;
    let rule = Rule {
        eps,
        eps_test: eps,
        penalty: Penalty::FourEps,
        headline,
        needs_small_c: true,
    };
    single_stage("message", &joint, &position, rate, &rule, params, true, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Builtin, KrausChannel};
    use crate::qalg::Ket;

    fn bell(a: &str, b: &str) -> DensityOp {
        Ket::maximally_entangled(a, b, 2).unwrap().density()
    }

    #[test]
    fn pinch_removes_cross_terms() {
        let l = SystemLayout::new([("U", 2), ("B", 2)]).unwrap();
        let h = HermOp::identity(&l).add(&bell("U", "B").as_herm()).unwrap();
        let p = pinch(&h, &["U".to_string()]);
        assert!(offdiag_weight(p.matrix(), &l, &["U".to_string()]) == 0.0);
        assert!(offdiag_weight(h.matrix(), &l, &["U".to_string()]) > 0.4);
    }

    #[test]
    fn noiseless_qubit_one_bit() {
        let ch = Builtin::Identity.build(2, "A", "B").unwrap();
        let rep = simulate_p2p_ea(&ch, &bell("A", "B'"), 1, 0.0, &CodeParams::with_delta(0.25)).unwrap();
        let s = &rep.stages[0];
        // Ω(m) = S^{-1/2} Φ_m S^{-1/2} with overlapping Bell tests: (2 + √3)/4
        let exact = (2.0 + 3f64.sqrt()) / 4.0;
        for p in &s.per_message_success {
            assert!((p - exact).abs() < 1e-9, "{p}");
        }
        assert!(rep.passed(), "{:?}", rep.checks);
    }

    #[test]
    fn depolarized_positions_are_symmetric() {
        let ch = Builtin::Depolarizing { p: 1.0 }.build(2, "A", "B").unwrap();
        let rep = simulate_p2p_ea(&ch, &bell("A", "B'"), 1, 0.1, &CodeParams::with_delta(0.1)).unwrap();
        let s = &rep.stages[0];
        assert!((s.per_message_success[0] - s.per_message_success[1]).abs() < 1e-10);
        assert!(rep.bound_satisfied);
    }

    #[test]
    fn classical_check_rejects_coherent_register() {
        let ch = Builtin::Identity.build(2, "A", "B").unwrap();
        let psi = bell("U", "A");
        let err = simulate_unassisted(&Unassisted::P2p { channel: &ch, ensemble: &psi }, &[1], &[0.1], &CodeParams::default());
        assert!(matches!(err, Err(Error::NotClassical { .. })));
    }

    fn mac_senders() -> (KrausChannel, MacSender, MacSender) {
        let ins = SystemLayout::new([("A", 2), ("Bi", 2)]).unwrap();
        let outs = SystemLayout::new([("X1", 2), ("X2", 2)]).unwrap();
        let ch = KrausChannel::identity_between(&ins, &outs)
            .unwrap()
            .then(&Builtin::Depolarizing { p: 0.2 }.build(2, "X1", "X1").unwrap().tensor(
                &KrausChannel::identity(&SystemLayout::single("X2", 2).unwrap()),
            ).unwrap())
            .unwrap();
        let a = MacSender { state: bell("A", "A'"), resource: vec!["A'".into()], side: vec![] };
        let b = MacSender { state: bell("Bi", "B'"), resource: vec!["B'".into()], side: vec![] };
        (ch, a, b)
    }

    #[test]
    fn mac_strategies_respect_analytic_bounds() {
        let (ch, a, b) = mac_senders();
        for strategy in [MacStrategy::PgmAFirst, MacStrategy::PgmBFirst, MacStrategy::Sequential] {
            let rep = simulate_mac_ea(&ch, &a, &b, [1, 1], [0.1, 0.1], strategy, &CodeParams::with_delta(0.1)).unwrap();
            assert!(rep.bound_satisfied, "{strategy:?}");
            assert!(rep.checks_passed, "{strategy:?} {:?}", rep.checks);
            let j = rep.joint.as_ref().unwrap();
            assert_eq!(j.per_pair_success.len(), 4);
        }
    }

    #[test]
    fn broadcast_receivers_decode_independently() {
        let ins = SystemLayout::new([("A1", 2), ("A2", 2)]).unwrap();
        let outs = SystemLayout::new([("B", 2), ("C", 2)]).unwrap();
        let ch = KrausChannel::identity_between(&ins, &outs).unwrap();
        let psi = bell("A1", "B'").tensor(&bell("A2", "C'")).unwrap();
        let rx = [
            Receiver { outputs: vec!["B".into()], resource: vec!["B'".into()] },
            Receiver { outputs: vec!["C".into()], resource: vec!["C'".into()] },
        ];
        let rep = simulate_broadcast_ea(&ch, &psi, &rx, [1, 0], [0.1, 0.1], &CodeParams::with_delta(0.1)).unwrap();
        assert!(rep.passed());
        assert!((rep.stages[1].per_message_success[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn gp_rejects_correlated_state_register() {
        let io = SystemLayout::new([("A", 2), ("S", 2)]).unwrap();
        let ch = KrausChannel::identity(&io);
        let tau = DensityOp::maximally_mixed(&SystemLayout::single("S", 2).unwrap());
        let good = bell("A", "B'").tensor(&tau).unwrap();
        let rep = simulate_gp_ea(&ch, &tau, &good, 1, 0.1, &CodeParams::with_delta(0.1)).unwrap();
        assert!(rep.passed());
        let bad = bell("S", "B'").tensor(&DensityOp::maximally_mixed(&SystemLayout::single("A", 2).unwrap())).unwrap();
        assert!(matches!(
            simulate_gp_ea(&ch, &tau, &bad, 1, 0.1, &CodeParams::with_delta(0.1)),
            Err(Error::ProductCondition(_))
        ));
    }

    #[test]
    fn unassisted_mac_over_classical_inputs() {
        let l = |u: &str, a: &str| SystemLayout::new([(u, 2), (a, 2)]).unwrap();
        let ens = |u: &str, a: &str| DensityOp::diagonal(&[0.5, 0.0, 0.0, 0.5], &l(u, a)).unwrap();
        let ins = SystemLayout::new([("A", 2), ("Bi", 2)]).unwrap();
        let outs = SystemLayout::new([("X1", 2), ("X2", 2)]).unwrap();
        let ch = KrausChannel::identity_between(&ins, &outs).unwrap();
        let a = MacSender { state: ens("U1", "A"), resource: vec!["U1".into()], side: vec![] };
        let b = MacSender { state: ens("U2", "Bi"), resource: vec!["U2".into()], side: vec![] };
        let rep = simulate_unassisted(&Unassisted::Mac { channel: &ch, alice: &a, bob: &b }, &[1, 1], &[0.1, 0.1], &CodeParams::with_delta(0.1)).unwrap();
        assert_eq!(rep.strategy, Some(MacStrategy::Sequential));
        assert!(rep.passed(), "{:?}", rep.checks);
    }
}
