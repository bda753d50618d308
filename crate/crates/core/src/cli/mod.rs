//! Command-line front end. Reports are JSON (CSV for `sweep`); exit code 0
//! when every asserted inequality holds, 2 when one is violated, 1 on input
//! errors.

pub mod spec;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::bounds::{
    achievable_rate, converse_value, corollary_relaxations, identity_channel_corollary, BoundScenario,
    SigmaSearch, Setup,
};
use crate::channel::KrausChannel;
use crate::coding::{
    derandomize, simulate_broadcast_ea, simulate_gp_ea, simulate_mac_ea, simulate_p2p_ea,
    simulate_unassisted, CodeParams, DerandomizeOptions, MacSender, MacStrategy, ProtocolReport,
    Unassisted, DEFAULT_STRING_CAP,
};
use crate::divergence::{dh_eps, dmax, relative_entropy, Bits};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::facts::{verify_suite, Fact, DEFAULT_DIMS};
use spec::{channel_shorthand, parse_channel, parse_state, read_json, state_shorthand, LoadedState};

pub const EXIT_PASS: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_VIOLATION: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "oneshot-qcap", version, about = "One-shot classical communication bounds and code simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Evaluate trials and grid points in index order on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// D_H^ε, D_max and relative entropy of two states.
    Divergence(DivergenceArgs),
    /// Converse or achievable rate expressions at given states.
    Bound(BoundArgs),
    /// Exact simulation of a position-based code.
    Simulate(SimulateArgs),
    /// Randomized verification of the operator and divergence facts.
    Verify(VerifyArgs),
    /// Simulations over a rate × ε × δ grid, written as CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DivergenceArgs {
    #[arg(long)]
    pub rho: PathBuf,
    #[arg(long)]
    pub sigma: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum BoundTarget {
    P2pEa,
    GpEa,
    BroadcastEa,
    MacEa,
    MacEaSumRate,
    P2pUa,
    GpUa,
    BroadcastUa,
    MacUa,
    IdentityCorollary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum BoundKindArg {
    Converse,
    Achievable,
    /// Converse with the resource product condition traded for a D_max penalty.
    Relaxed,
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    pub scenario: BoundTarget,
    /// Channel spec file or shorthand such as `identity2`, `depolarizing2:0.5`.
    #[arg(long)]
    pub channel: Option<String>,
    /// State spec file (twice for multiple access) or `bell`.
    #[arg(long)]
    pub state: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = BoundKindArg::Converse)]
    pub kind: BoundKindArg,
    /// Extra σ candidates for the converse minimization (state spec files).
    #[arg(long)]
    pub sigma: Vec<PathBuf>,
    /// Refine the σ minimization by simplex descent.
    #[arg(long)]
    pub optimize: bool,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 300)]
    pub max_iters: u64,
    /// Input dimension for `identity_corollary`.
    #[arg(long = "dimA", default_value_t = 2)]
    pub dim_a: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum SimTarget {
    P2pEa,
    GpEa,
    BroadcastEa,
    MacEa,
    P2pUa,
    GpUa,
    BroadcastUa,
    MacUa,
}

impl SimTarget {
    fn parts(self) -> usize {
        match self {
            SimTarget::P2pEa | SimTarget::GpEa | SimTarget::P2pUa | SimTarget::GpUa => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum StrategyArg {
    PgmAFirst,
    PgmBFirst,
    Sequential,
}

impl From<StrategyArg> for MacStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::PgmAFirst => MacStrategy::PgmAFirst,
            StrategyArg::PgmBFirst => MacStrategy::PgmBFirst,
            StrategyArg::Sequential => MacStrategy::Sequential,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CodeArgs {
    /// Channel spec file or shorthand such as `identity2`, `depolarizing2:0.5`.
    #[arg(long)]
    pub channel: String,
    /// State spec file (twice for multiple access) or `bell`.
    #[arg(long, required = true)]
    pub state: Vec<String>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Hayashi–Nagaoka constant; defaults to δ/ε.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, value_enum, default_value_t = StrategyArg::Sequential)]
    pub strategy: StrategyArg,
    /// Random σ per converse-floor check.
    #[arg(long, default_value_t = 5)]
    pub floor_samples: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    pub scenario: SimTarget,
    #[command(flatten)]
    #[serde(flatten)]
    pub code: CodeArgs,
    /// Rate in bits (two values for two messages).
    #[arg(long = "R", alias = "rate", value_delimiter = ',', required = true)]
    pub rate: Vec<u32>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// Replace the shared randomness of p2p_ua / gp_ua by the best fixed string.
    #[arg(long)]
    pub derandomize: bool,
    #[arg(long, default_value_t = DEFAULT_STRING_CAP)]
    pub string_cap: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// `all` or a comma-separated list of fact names.
    #[arg(long, default_value = "all")]
    pub facts: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DIMS.to_vec())]
    pub dims: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    pub scenario: SimTarget,
    #[command(flatten)]
    #[serde(flatten)]
    pub code: CodeArgs,
    /// Rates; two-message scenarios use the same rate for both.
    #[arg(long = "R", alias = "rate", value_delimiter = ',', required = true)]
    pub rate: Vec<u32>,
    /// Error parameters; two-message scenarios use the same value for both.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps: Vec<f64>,
    /// δ grid; overrides --delta.
    #[arg(long = "deltas", value_delimiter = ',')]
    pub deltas: Vec<f64>,
}

/// Rendered report and the exit code it implies.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub body: String,
}

#[derive(Serialize)]
struct Envelope<'a, A: Serialize, T: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    args: &'a A,
    inputs: &'a BTreeMap<String, Value>,
    passed: bool,
    result: T,
}

fn render<A: Serialize, T: Serialize>(
    cli: &Cli,
    command: &str,
    args: &A,
    inputs: &BTreeMap<String, Value>,
    passed: bool,
    result: T,
) -> Result<Outcome> {
    let env = Envelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cli.seed,
        args,
        inputs,
        passed,
        result,
    };
    let mut body = serde_json::to_string_pretty(&env)?;
    body.push('\n');
    Ok(Outcome {
        code: if passed { EXIT_PASS } else { EXIT_VIOLATION },
        body,
    })
}

/// Resolved channel and states with the documents they came from.
struct Inputs {
    channel: Option<KrausChannel>,
    states: Vec<LoadedState>,
    docs: BTreeMap<String, Value>,
}

fn load_doc(arg: &str, shorthand: impl FnOnce(&str) -> Option<Value>) -> Result<Value> {
    let path = Path::new(arg);
    if path.exists() {
        return read_json(path);
    }
    shorthand(arg).ok_or_else(|| Error::spec(arg, "no such file and not a recognised shorthand"))
}

fn load_inputs(channel: Option<&str>, states: &[String]) -> Result<Inputs> {
    let mut docs = BTreeMap::new();
    let channel = match channel {
        Some(c) => {
            let doc = load_doc(c, channel_shorthand)?;
            let ch = parse_channel(&doc).map_err(|e| prefix("channel", e))?;
            docs.insert("channel".into(), doc);
            Some(ch)
        }
        None => None,
    };
    let mut loaded = Vec::new();
    for (i, s) in states.iter().enumerate() {
        let doc = load_doc(s, |x| state_shorthand(x, channel.as_ref()))?;
        let key = format!("state[{i}]");
        loaded.push(parse_state(&doc).map_err(|e| prefix(&key, e))?);
        docs.insert(key, doc);
    }
    Ok(Inputs {
        channel,
        states: loaded,
        docs,
    })
}

fn prefix(what: &str, e: Error) -> Error {
    match e {
        Error::Spec { path, message } => Error::spec(format!("{what}: {path}"), message),
        other => Error::spec(what, other.to_string()),
    }
}

fn count_check(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::spec(what, format!("expected {want} value(s), got {got}")))
    }
}

fn required<'a, T>(v: Option<&'a T>, what: &str) -> Result<&'a T> {
    v.ok_or_else(|| Error::spec(what, "required for this scenario"))
}

fn sender(channel: &KrausChannel, s: &LoadedState) -> MacSender {
    let inputs: Vec<&str> = channel.in_layout().labels();
    let resource = s.resource.clone().unwrap_or_else(|| {
        s.state
            .layout()
            .labels()
            .into_iter()
            .filter(|l| !inputs.contains(l) && !s.side.iter().any(|x| x == l))
            .map(String::from)
            .collect()
    });
    MacSender {
        state: s.state.clone(),
        resource,
        side: s.side.clone(),
    }
}

fn pair<T: Copy>(v: &[T]) -> [T; 2] {
    [v[0], v[1]]
}

fn simulate_once(
    target: SimTarget,
    inputs: &Inputs,
    rates: &[u32],
    eps: &[f64],
    strategy: MacStrategy,
    params: &CodeParams,
) -> Result<ProtocolReport> {
    let ch = required(inputs.channel.as_ref(), "--channel")?;
    let n = target.parts();
    count_check("--state", inputs.states.len(), if matches!(target, SimTarget::MacEa | SimTarget::MacUa) { 2 } else { 1 })?;
    count_check("--R", rates.len(), n)?;
    count_check("--eps", eps.len(), n)?;
    let s0 = &inputs.states[0];
    match target {
        SimTarget::P2pEa => simulate_p2p_ea(ch, &s0.state, rates[0], eps[0], params),
        SimTarget::GpEa => simulate_gp_ea(ch, required(s0.tau.as_ref(), "state.tau")?, &s0.state, rates[0], eps[0], params),
        SimTarget::BroadcastEa => simulate_broadcast_ea(
            ch,
            &s0.state,
            required(s0.receivers.as_ref(), "state.receivers")?,
            pair(rates),
            pair(eps),
            params,
        ),
        SimTarget::MacEa => {
            let (a, b) = (sender(ch, s0), sender(ch, &inputs.states[1]));
            simulate_mac_ea(ch, &a, &b, pair(rates), pair(eps), strategy, params)
        }
        SimTarget::MacUa => {
            let (a, b) = (sender(ch, s0), sender(ch, &inputs.states[1]));
            simulate_unassisted(&Unassisted::Mac { channel: ch, alice: &a, bob: &b }, rates, eps, params)
        }
        _ => simulate_unassisted(&unassisted_setup(target, ch, s0)?, rates, eps, params),
    }
}

fn unassisted_setup<'a>(target: SimTarget, ch: &'a KrausChannel, s: &'a LoadedState) -> Result<Unassisted<'a>> {
    Ok(match target {
        SimTarget::P2pUa => Unassisted::P2p {
            channel: ch,
            ensemble: &s.state,
        },
        SimTarget::GpUa => Unassisted::Gp {
            channel: ch,
            tau: required(s.tau.as_ref(), "state.tau")?,
            ensemble: &s.state,
        },
        SimTarget::BroadcastUa => Unassisted::Broadcast {
            channel: ch,
            ensemble: &s.state,
            receivers: required(s.receivers.as_ref(), "state.receivers")?,
        },
        _ => return Err(Error::Unsupported(format!("{target:?} has no single-sender unassisted setup"))),
    })
}

fn code_params(cli: &Cli, code: &CodeArgs, delta: f64) -> CodeParams {
    CodeParams {
        delta,
        c: code.c,
        seed: cli.seed,
        floor_samples: code.floor_samples,
    }
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn run_divergence(cli: &Cli, a: &DivergenceArgs) -> Result<Outcome> {
    let inputs = load_inputs(None, &[a.rho.display().to_string(), a.sigma.display().to_string()])?;
    let (rho, sigma) = (&inputs.states[0].state, &inputs.states[1].state);
    #[derive(Serialize)]
    struct Report {
        dh: crate::divergence::DivergenceResult,
        dmax: Bits,
        relative_entropy: Bits,
    }
    let unbounded = |r: Result<f64>| match r {
        Ok(v) => Ok(Bits::Finite(v)),
        Err(Error::Support(_)) => Ok(Bits::Infinite),
        Err(e) => Err(e),
    };
    let report = Report {
        dh: dh_eps(rho, sigma, a.eps)?,
        dmax: unbounded(dmax(rho, sigma))?,
        relative_entropy: unbounded(relative_entropy(rho, sigma))?,
    };
    render(cli, "divergence", a, &inputs.docs, true, report)
}

fn bound_scenario(t: BoundTarget) -> Option<BoundScenario> {
    Some(match t {
        BoundTarget::P2pEa => BoundScenario::P2pEa,
        BoundTarget::GpEa => BoundScenario::GpEa,
        BoundTarget::BroadcastEa => BoundScenario::BroadcastEa,
        BoundTarget::MacEa => BoundScenario::MacEa,
        BoundTarget::MacEaSumRate => BoundScenario::MacEaSumRate,
        BoundTarget::P2pUa => BoundScenario::P2pUa,
        BoundTarget::GpUa => BoundScenario::GpUa,
        BoundTarget::BroadcastUa => BoundScenario::BroadcastUa,
        BoundTarget::MacUa => BoundScenario::MacUa,
        BoundTarget::IdentityCorollary => return None,
    })
}

fn run_bound(cli: &Cli, a: &BoundArgs) -> Result<Outcome> {
    let Some(scenario) = bound_scenario(a.scenario) else {
        count_check("--eps", a.eps.len().max(1), 1)?;
        let r = identity_channel_corollary(a.dim_a, a.eps.first().copied().unwrap_or(0.0))?;
        return render(cli, "bound", a, &BTreeMap::new(), r.holds, r);
    };
    let inputs = load_inputs(Some(required(a.channel.as_ref(), "--channel")?), &a.state)?;
    let ch = inputs.channel.as_ref().expect("loaded");
    let two_senders = matches!(scenario, BoundScenario::MacEa | BoundScenario::MacEaSumRate | BoundScenario::MacUa);
    count_check("--state", inputs.states.len(), if two_senders { 2 } else { 1 })?;
    let s0 = &inputs.states[0];
    let senders;
    let setup = match scenario {
        BoundScenario::P2pEa | BoundScenario::P2pUa => Setup::P2p {
            channel: ch,
            state: &s0.state,
        },
        BoundScenario::GpEa | BoundScenario::GpUa => Setup::Gp {
            channel: ch,
            tau: required(s0.tau.as_ref(), "state.tau")?,
            state: &s0.state,
        },
        BoundScenario::BroadcastEa | BoundScenario::BroadcastUa => Setup::Broadcast {
            channel: ch,
            state: &s0.state,
            receivers: required(s0.receivers.as_ref(), "state.receivers")?,
        },
        _ => {
            senders = [sender(ch, s0), sender(ch, &inputs.states[1])];
            Setup::Mac {
                channel: ch,
                alice: &senders[0],
                bob: &senders[1],
            }
        }
    };
    let mut docs = inputs.docs.clone();
    let mut candidates = Vec::new();
    for (i, p) in a.sigma.iter().enumerate() {
        let doc = read_json(p)?;
        let key = format!("sigma[{i}]");
        candidates.push(parse_state(&doc).map_err(|e| prefix(&key, e))?.state);
        docs.insert(key, doc);
    }
    let search = SigmaSearch {
        optimize: a.optimize,
        restarts: a.restarts,
        max_iters: a.max_iters,
        seed: cli.seed,
        exec: exec(cli),
    };
    let r = match a.kind {
        BoundKindArg::Converse => converse_value(scenario, &setup, &a.eps, &candidates, &search)?,
        BoundKindArg::Achievable => achievable_rate(scenario, &setup, &a.eps, a.delta)?,
        BoundKindArg::Relaxed => corollary_relaxations(scenario, &setup, &a.eps, &candidates, &search)?,
    };
    render(cli, "bound", a, &docs, true, r)
}

fn run_simulate(cli: &Cli, a: &SimulateArgs) -> Result<Outcome> {
    let inputs = load_inputs(Some(&a.code.channel), &a.code.state)?;
    let params = code_params(cli, &a.code, a.code.delta);
    if a.derandomize {
        if !matches!(a.scenario, SimTarget::P2pUa | SimTarget::GpUa) {
            return Err(Error::spec("--derandomize", "only p2p_ua and gp_ua use a shared random string"));
        }
        count_check("--R", a.rate.len(), 1)?;
        count_check("--eps", a.eps.len(), 1)?;
        count_check("--state", inputs.states.len(), 1)?;
        let ch = required(inputs.channel.as_ref(), "--channel")?;
        let setup = unassisted_setup(a.scenario, ch, &inputs.states[0])?;
        let opts = DerandomizeOptions {
            cap: a.string_cap,
            samples: None,
        };
        let r = derandomize(&setup, a.rate[0], a.eps[0], &params, opts)?;
        let passed = r.holds && r.protocol.passed();
        return render(cli, "simulate", a, &inputs.docs, passed, r);
    }
    let r = simulate_once(a.scenario, &inputs, &a.rate, &a.eps, a.code.strategy.into(), &params)?;
    render(cli, "simulate", a, &inputs.docs, r.passed(), r)
}

fn run_verify(cli: &Cli, a: &VerifyArgs) -> Result<Outcome> {
    let facts = if a.facts == "all" {
        Fact::ALL.to_vec()
    } else {
        a.facts
            .split(',')
            .map(|n| {
                Fact::from_name(n.trim()).ok_or_else(|| Error::spec("--facts", format!("unknown fact `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    let r = verify_suite(&facts, &a.dims, a.trials, cli.seed, exec(cli))?;
    render(cli, "verify", a, &BTreeMap::new(), r.all_passed, r)
}

#[derive(Serialize)]
struct SweepRow {
    index: usize,
    rate: u32,
    eps: f64,
    delta: f64,
    worst_error: Option<f64>,
    analytic_bound: Option<f64>,
    bound_satisfied: Option<bool>,
    checks_passed: Option<bool>,
    error: String,
}

fn run_sweep(cli: &Cli, a: &SweepArgs) -> Result<Outcome> {
    let inputs = load_inputs(Some(&a.code.channel), &a.code.state)?;
    let deltas = if a.deltas.is_empty() { vec![a.code.delta] } else { a.deltas.clone() };
    let mut grid = Vec::new();
    for &r in &a.rate {
        for &e in &a.eps {
            for &d in &deltas {
                grid.push((r, e, d));
            }
        }
    }
    let n = a.scenario.parts();
    let strategy: MacStrategy = a.code.strategy.into();
    let rows = exec(cli).map(grid.len(), |i| {
        let (r, e, d) = grid[i];
        let params = code_params(cli, &a.code, d);
        let res = simulate_once(a.scenario, &inputs, &vec![r; n], &vec![e; n], strategy, &params);
        let mut row = SweepRow {
            index: i,
            rate: r,
            eps: e,
            delta: d,
            worst_error: None,
            analytic_bound: None,
            bound_satisfied: None,
            checks_passed: None,
            error: String::new(),
        };
        match res {
            Ok(rep) => {
                row.worst_error = Some(rep.worst_error);
                row.analytic_bound = Some(rep.stages.iter().map(|s| s.analytic_bound).fold(0.0, f64::max));
                row.bound_satisfied = Some(rep.bound_satisfied);
                row.checks_passed = Some(rep.checks_passed);
            }
            Err(e) => row.error = e.to_string(),
        }
        row
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Unsupported(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Unsupported(e.to_string()))?)
        .expect("csv output is UTF-8");
    let failed_input = rows.iter().any(|r| !r.error.is_empty());
    let violated = rows
        .iter()
        .any(|r| r.bound_satisfied == Some(false) || r.checks_passed == Some(false));
    let code = if violated {
        EXIT_VIOLATION
    } else if failed_input {
        EXIT_INPUT
    } else {
        EXIT_PASS
    };
    Ok(Outcome { code, body })
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Divergence(a) => run_divergence(cli, a),
        Command::Bound(a) => run_bound(cli, a),
        Command::Simulate(a) => run_simulate(cli, a),
        Command::Verify(a) => run_verify(cli, a),
        Command::Sweep(a) => run_sweep(cli, a),
    }
}

/// Parses, runs and writes the report; returns the process exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &outcome.body),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(outcome.body.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    outcome.code
}
