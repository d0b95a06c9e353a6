//! Command-line front end. Every command produces a JSON report and an exit
//! code: 0 when the command succeeds and any checked property holds, 1 when
//! a property fails or a hypothesis is violated, 2 on input or usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::analysis::{
    blocking_oracle, cluster_block_transform, commoner_live, efcn_to_fcn, free_choice_expansion, is_bounded_with_cap,
    is_live, AnalysisError, Boundedness, LiveBoundedFcn, Liveness, DEFAULT_NODE_CAP,
};
use crate::io::{load_net, to_json, IoError, LoadedNet};
use crate::net::{Marking, ParikhVector, PetriNet, TransId};
use crate::throughput::{
    build_r, compare_sim, parametric_check, perron_vector, RoutingMatrix, ThroughputError, ThroughputVector,
    DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use crate::timed::{measure_tau, open_expansion, simulate, SimConfig, StopRule, TimedError, DEFAULT_EVENT_CAP};

#[derive(Debug, Parser)]
#[command(name = "fcnet", version, about = "Analyze and simulate Free Choice Petri nets")]
pub struct Cli {
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Cap on explored markings, routed steps and simulated events.
    #[arg(long, global = true, env = "FCNET_CAP")]
    pub cap: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Accept identifiers that use the prefixes of generated nodes.
    #[arg(long, global = true)]
    pub allow_generated: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Net class flags and liveness and boundedness verdicts.
    Classify { file: PathBuf },
    /// Blocking marking of a transition (or of its cluster).
    Blocking(BlockingArgs),
    /// Timed simulation with the dater log written as CSV.
    Simulate(SimulateArgs),
    /// Perron vector of the routing matrix, with optional cross-checks.
    Throughput(ThroughputArgs),
    /// Write a transformed net.
    Expand(ExpandArgs),
    /// Time to reach the blocking marking when a transition never completes.
    Tau(TauArgs),
}

#[derive(Debug, Args)]
pub struct BlockingArgs {
    pub file: PathBuf,
    pub transition: String,
    /// Also enumerate the reachable blocking markings and compare.
    #[arg(long)]
    pub oracle: bool,
    /// Block the whole cluster of the transition.
    #[arg(long)]
    pub cluster: bool,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("stop").required(true).args(["horizon", "firings", "events"])))]
pub struct SimulateArgs {
    pub file: PathBuf,
    /// Stop at this instant.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Stop after `n` completions of transition `t`, given as `t:n`.
    #[arg(long)]
    pub firings: Option<String>,
    /// Stop after this many completions in total.
    #[arg(long)]
    pub events: Option<u64>,
    /// Write the dater log here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThroughputArgs {
    /// Net file with a routing section.
    #[arg(conflicts_with = "matrix")]
    pub file: Option<PathBuf>,
    /// Routing matrix as CSV, header row of transition ids.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Check the five-transition parametric family on these branch weights
    /// (default 0.05, 0.10, ..., 0.95).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub grid: Option<Vec<f64>>,
    /// Compare against simulated throughputs (needs a timing section).
    #[arg(long, requires = "file")]
    pub validate_sim: bool,
    /// Completions simulated for --validate-sim.
    #[arg(long, default_value_t = 100_000)]
    pub events: u64,
    /// Largest accepted relative error of simulated ratios.
    #[arg(long, default_value_t = 0.03)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("transform").required(true).args(["free_choice", "open", "efcn"])))]
pub struct ExpandArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub free_choice: bool,
    /// Open expansion at this transition, from its blocking marking.
    #[arg(long, value_name = "TRANSITION")]
    pub open: Option<String>,
    #[arg(long)]
    pub efcn: bool,
    /// Output file; the net is printed when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TauArgs {
    pub file: PathBuf,
    pub transition: String,
    #[arg(long, default_value_t = 1000)]
    pub replications: u64,
}

/// Outcome of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandResult {
    pub code: i32,
    pub report: Value,
    pub text: String,
}

impl CommandResult {
    fn new(code: i32, mut report: Map<String, Value>, text: String) -> Self {
        let status = match code {
            0 => "ok",
            1 => "fail",
            _ => "error",
        };
        report.insert("status".into(), status.into());
        CommandResult {
            code,
            report: Value::Object(report),
            text,
        }
    }

    fn error(code: i32, message: impl ToString) -> Self {
        let message = message.to_string();
        let mut report = Map::new();
        report.insert("error".into(), message.clone().into());
        CommandResult::new(code, report, format!("error: {message}\n"))
    }

    /// What the binary prints on stdout.
    pub fn output(&self, json: bool) -> String {
        if json {
            let mut s = serde_json::to_string_pretty(&self.report).expect("reports serialize");
            s.push('\n');
            s
        } else {
            self.text.clone()
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> (CommandResult, bool)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => (run(&cli), cli.json),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let mut r = CommandResult::error(code, e.kind());
            r.text = e.to_string();
            (r, false)
        }
    }
}

pub fn run(cli: &Cli) -> CommandResult {
    let ctx = Context {
        cap: cli.cap,
        seed: cli.seed,
        allow_generated: cli.allow_generated,
    };
    match &cli.command {
        Command::Classify { file } => ctx.classify(file),
        Command::Blocking(args) => ctx.blocking(args),
        Command::Simulate(args) => ctx.simulate(args),
        Command::Throughput(args) => ctx.throughput(args),
        Command::Expand(args) => ctx.expand(args),
        Command::Tau(args) => ctx.tau(args),
    }
}

struct Context {
    cap: Option<usize>,
    seed: u64,
    allow_generated: bool,
}

/// Early return with an error result.
macro_rules! bail {
    ($code:expr, $e:expr) => {
        return CommandResult::error($code, $e)
    };
}

macro_rules! attempt {
    ($code:expr, $e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => bail!($code, e),
        }
    };
}

fn marking_json(net: &PetriNet, m: &Marking) -> Value {
    Value::Object(net.places().map(|p| (net.place_name(p).to_string(), m[p].into())).collect())
}

fn parikh_json(net: &PetriNet, v: &ParikhVector) -> Value {
    Value::Object(net.transitions().map(|t| (net.transition_name(t).to_string(), v.get(t).into())).collect())
}

fn per_transition(net: &PetriNet, values: &[f64]) -> Value {
    Value::Object(net.transitions().map(|t| (net.transition_name(t).to_string(), json!(values[t.0]))).collect())
}

fn vector_json(v: &ThroughputVector) -> Value {
    Value::Object(v.transitions.iter().cloned().zip(v.x.iter().map(|x| json!(x))).collect())
}

fn analysis_code(e: &AnalysisError) -> i32 {
    match e {
        AnalysisError::HypothesisViolated(_) | AnalysisError::BlockingFailed(_) | AnalysisError::Truncated { .. } => 1,
        _ => 2,
    }
}

fn throughput_code(e: &ThroughputError) -> i32 {
    match e {
        ThroughputError::NotStronglyConnected
        | ThroughputError::Reducible
        | ThroughputError::NoConvergence { .. }
        | ThroughputError::SpectralRadiusNotOne { .. } => 1,
        ThroughputError::Timed(e) => timed_code(e),
        _ => 2,
    }
}

fn timed_code(e: &TimedError) -> i32 {
    use crate::routed::RoutedError;
    match e {
        TimedError::HypothesisViolated(_)
        | TimedError::Routed(RoutedError::HypothesisViolated(_) | RoutedError::NotEquitable | RoutedError::StepCapExceeded(_)) => 1,
        TimedError::Analysis(a) => analysis_code(a),
        _ => 2,
    }
}

impl Context {
    fn node_cap(&self) -> usize {
        self.cap.unwrap_or(DEFAULT_NODE_CAP)
    }

    fn load(&self, file: &Path) -> Result<LoadedNet, IoError> {
        load_net(file, self.allow_generated)
    }

    fn transition(&self, net: &PetriNet, name: &str) -> Result<TransId, String> {
        net.transition(name).ok_or_else(|| format!("unknown transition `{name}`"))
    }

    fn classify(&self, file: &Path) -> CommandResult {
        let loaded = attempt!(2, self.load(file));
        let net = &loaded.net;
        let class = net.classify();
        let cap = self.node_cap();
        let bounded = match is_bounded_with_cap(net, cap) {
            Boundedness::Bounded(k) => json!(k),
            Boundedness::Unbounded(_) => json!(false),
            Boundedness::Inconclusive => Value::Null,
        };
        let live = match is_live(net, cap) {
            Liveness::Live => json!(true),
            Liveness::NotLive { .. } => json!(false),
            Liveness::Inconclusive => Value::Null,
        };
        let commoner = if class.is_free_choice {
            commoner_live(net).map_or(Value::Null, |r| json!(r.is_live()))
        } else {
            Value::Null
        };
        let mut report = Map::new();
        report.insert("places".into(), net.place_count().into());
        report.insert("transitions".into(), net.transition_count().into());
        report.insert("t_net".into(), class.is_t_net.into());
        report.insert("s_net".into(), class.is_s_net.into());
        report.insert("fcn".into(), class.is_free_choice.into());
        report.insert("efcn".into(), class.is_extended_free_choice.into());
        report.insert("strongly_connected".into(), net.is_strongly_connected().into());
        report.insert("live".into(), live.clone());
        report.insert("commoner_live".into(), commoner.clone());
        report.insert("bounded".into(), bounded.clone());
        let mut text = String::new();
        let _ = writeln!(
            text,
            "{} places, {} transitions",
            net.place_count(),
            net.transition_count()
        );
        let _ = writeln!(
            text,
            "t-net: {}  s-net: {}  free choice: {}  extended free choice: {}",
            class.is_t_net, class.is_s_net, class.is_free_choice, class.is_extended_free_choice
        );
        let _ = writeln!(text, "live: {live}  commoner live: {commoner}  bounded: {bounded}");
        CommandResult::new(0, report, text)
    }

    fn blocking(&self, args: &BlockingArgs) -> CommandResult {
        let loaded = attempt!(2, self.load(&args.file));
        let net = &loaded.net;
        let b = attempt!(2, self.transition(net, &args.transition));
        let cap = self.node_cap();
        let certified = match LiveBoundedFcn::certify(net, cap) {
            Ok(c) => c,
            Err(e) => {
                let code = analysis_code(&e);
                return CommandResult::error(code, e);
            }
        };
        let cluster = args.cluster || !net.is_non_conflicting(b);
        let result = attempt!(1, certified.blocking_marking(b));

        let mut report = Map::new();
        report.insert("transition".into(), args.transition.clone().into());
        report.insert("cluster".into(), cluster.into());
        report.insert("blocking_marking".into(), net.format_marking(&result.blocking_marking).into());
        report.insert("marking".into(), marking_json(net, &result.blocking_marking));
        report.insert("witness".into(), json!(net.format_word(&result.witness)));
        report.insert("parikh".into(), parikh_json(net, &result.parikh));
        report.insert("enabled".into(), json!(net.format_word(&result.enabled)));
        report.insert("witness_bound".into(), certified.witness_bound().into());
        let mut text = format!(
            "blocking marking: {}\nwitness: [{}]\nenabled: [{}]\n",
            net.format_marking(&result.blocking_marking),
            net.format_word(&result.witness).join(", "),
            net.format_word(&result.enabled).join(", ")
        );

        let mut code = 0;
        if args.oracle {
            let oracle = if net.is_non_conflicting(b) {
                blocking_oracle(net, b, cap)
            } else {
                cluster_block_transform(net, b).and_then(|c| c.oracle(cap))
            };
            let oracle = attempt!(1, oracle);
            let agrees = oracle.blocking.len() == 1
                && oracle.avoiding.len() == 1
                && oracle.blocking.contains(&result.blocking_marking)
                && oracle.avoiding.contains(&result.blocking_marking);
            let fmt = |s: &std::collections::BTreeSet<Marking>| -> Vec<String> {
                s.iter().map(|m| net.format_marking(m)).collect()
            };
            report.insert(
                "oracle".into(),
                json!({
                    "blocking": fmt(&oracle.blocking),
                    "avoiding": fmt(&oracle.avoiding),
                    "agrees": agrees,
                }),
            );
            let _ = writeln!(
                text,
                "oracle: {} blocking, {} avoiding, {}",
                oracle.blocking.len(),
                oracle.avoiding.len(),
                if agrees { "agrees" } else { "DISAGREES" }
            );
            if !agrees {
                code = 1;
            }
        }
        CommandResult::new(code, report, text)
    }

    fn simulate(&self, args: &SimulateArgs) -> CommandResult {
        let loaded = attempt!(2, self.load(&args.file));
        let net = &loaded.net;
        let Some(timing) = &loaded.timing else {
            bail!(2, "the net file has no timing section");
        };
        let routing = attempt!(2, loaded.routing_or_trivial());
        let stop = if let Some(h) = args.horizon {
            StopRule::MaxClock(h)
        } else if let Some(spec) = &args.firings {
            let Some((t, n)) = spec.rsplit_once(':') else {
                bail!(2, format!("--firings expects `transition:count`, got `{spec}`"));
            };
            let t = attempt!(2, self.transition(net, t));
            let n: u64 = attempt!(2, n.parse().map_err(|_| format!("bad count `{n}`")));
            StopRule::MaxFirings(t, n)
        } else {
            StopRule::MaxEvents(args.events.expect("one stop rule is required"))
        };
        let outcome = attempt!(2, simulate(net, &routing, timing, &SimConfig::new(self.seed, stop)));
        if let Some(path) = &args.csv {
            attempt!(2, std::fs::write(path, outcome.log.to_csv()));
        }
        let rates = if outcome.clock > 0.0 {
            outcome.log.throughput_estimate(outcome.clock).rates
        } else {
            vec![0.0; net.transition_count()]
        };
        let completed: Vec<f64> = outcome.completed.iter().map(|&c| c as f64).collect();
        let mut report = Map::new();
        report.insert("clock".into(), json!(outcome.clock));
        report.insert("events".into(), outcome.events.into());
        report.insert("rates".into(), per_transition(net, &rates));
        report.insert(
            "completed".into(),
            Value::Object(
                net.transitions()
                    .map(|t| (net.transition_name(t).to_string(), outcome.completed[t.0].into()))
                    .collect(),
            ),
        );
        report.insert("quiescent".into(), (outcome.stop == crate::timed::StopReason::Quiescent).into());
        let mut text = format!("clock {} after {} completions\n", outcome.clock, outcome.events);
        for t in net.transitions() {
            let _ = writeln!(
                text,
                "{}: {} completions, rate {}",
                net.transition_name(t),
                completed[t.0],
                rates[t.0]
            );
        }
        CommandResult::new(0, report, text)
    }

    fn throughput(&self, args: &ThroughputArgs) -> CommandResult {
        let mut report = Map::new();
        let mut text = String::new();
        let mut code = 0;

        let matrix = match (&args.file, &args.matrix) {
            (Some(file), _) => {
                let loaded = attempt!(2, self.load(file));
                let routing = attempt!(2, loaded.routing_or_trivial());
                let r = match build_r(&loaded.net, &routing) {
                    Ok(r) => r,
                    Err(e) => bail!(throughput_code(&e), e),
                };
                Some((r, Some(loaded)))
            }
            (None, Some(path)) => {
                let text = attempt!(2, std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display())));
                Some((attempt!(2, RoutingMatrix::from_csv(&text)), None))
            }
            (None, None) if args.grid.is_some() => None,
            (None, None) => bail!(2, "give a net file, --matrix or --grid"),
        };

        if let Some((r, loaded)) = &matrix {
            let v = match perron_vector(r, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER) {
                Ok(v) => v,
                Err(e) => bail!(throughput_code(&e), e),
            };
            report.insert("x".into(), vector_json(&v));
            report.insert("residual".into(), json!(v.residual));
            report.insert("spectral_radius".into(), json!(v.spectral_radius));
            report.insert("iterations".into(), v.iterations.into());
            for (t, x) in v.transitions.iter().zip(&v.x) {
                let _ = writeln!(text, "x[{t}] = {x:.6}");
            }
            let _ = writeln!(text, "residual {:e}, spectral radius {}", v.residual, v.spectral_radius);

            if args.validate_sim {
                let loaded = loaded.as_ref().expect("--validate-sim requires a net file");
                let Some(timing) = &loaded.timing else {
                    bail!(2, "the net file has no timing section");
                };
                let routing = attempt!(2, loaded.routing_or_trivial());
                let events = self.cap.map_or(args.events, |c| args.events.min(c as u64));
                let cmp = match compare_sim(&loaded.net, &routing, timing, StopRule::MaxEvents(events), self.seed) {
                    Ok(c) => c,
                    Err(e) => bail!(throughput_code(&e), e),
                };
                let net = &loaded.net;
                report.insert("sim_ratios".into(), per_transition(net, &cmp.sim_ratios));
                report.insert("sim_rates".into(), per_transition(net, &cmp.rates));
                report.insert("scale".into(), per_transition(net, &cmp.scale));
                report.insert("max_rel_err".into(), json!(cmp.max_rel_err));
                report.insert("invariant_residual".into(), json!(cmp.invariant_residual));
                let _ = writeln!(
                    text,
                    "simulated {} completions to clock {}: max relative ratio error {:.4}",
                    cmp.events, cmp.clock, cmp.max_rel_err
                );
                if cmp.max_rel_err.is_nan() || cmp.max_rel_err > args.tolerance {
                    code = 1;
                }
            }
        }

        if let Some(grid) = &args.grid {
            let grid: Vec<f64> = if grid.is_empty() {
                (1..=19).map(|k| f64::from(k) * 0.05).collect()
            } else {
                grid.clone()
            };
            let rows = parametric_check(&grid);
            let pass = rows.iter().all(|r| r.pass);
            report.insert("parametric".into(), json!(rows));
            report.insert("parametric_pass".into(), pass.into());
            let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
            let _ = writeln!(
                text,
                "parametric family: {} points, worst error {worst:e}, {}",
                rows.len(),
                if pass { "pass" } else { "FAIL" }
            );
            if !pass {
                code = 1;
            }
        }
        CommandResult::new(code, report, text)
    }

    fn expand(&self, args: &ExpandArgs) -> CommandResult {
        let loaded = attempt!(2, self.load(&args.file));
        let net = &loaded.net;
        let (kind, out) = if args.free_choice {
            let e = attempt!(2, free_choice_expansion(net));
            ("free-choice", to_json(&e.net, None, None))
        } else if args.efcn {
            let e = attempt!(2, efcn_to_fcn(net));
            ("efcn", to_json(&e, None, None))
        } else {
            let name = args.open.as_deref().expect("one transform is required");
            let b = attempt!(2, self.transition(net, name));
            let certified = attempt!(2, LiveBoundedFcn::certify(net, self.node_cap()));
            let m_b = attempt!(2, certified.blocking_marking(b)).blocking_marking;
            let open = attempt!(2, open_expansion(net, b, &m_b));
            let routing = loaded.routing.as_ref().map(|r| open.routing(net, r));
            let timing = loaded.timing.as_ref().map(|t| open.timing(net, t));
            ("open", to_json(&open.net, routing.as_ref(), timing.as_ref()))
        };
        let mut report = Map::new();
        report.insert("transform".into(), kind.into());
        let text = match &args.output {
            Some(path) => {
                attempt!(2, std::fs::write(path, &out));
                report.insert("output".into(), path.display().to_string().into());
                format!("wrote {}\n", path.display())
            }
            None => out.clone(),
        };
        report.insert("net".into(), attempt!(2, serde_json::from_str::<Value>(&out)));
        CommandResult::new(0, report, text)
    }

    fn tau(&self, args: &TauArgs) -> CommandResult {
        let loaded = attempt!(2, self.load(&args.file));
        let net = &loaded.net;
        let b = attempt!(2, self.transition(net, &args.transition));
        let Some(timing) = &loaded.timing else {
            bail!(2, "the net file has no timing section");
        };
        let routing = attempt!(2, loaded.routing_or_trivial());
        let cap = self.cap.map_or(DEFAULT_EVENT_CAP, |c| c as u64);
        let sample = match measure_tau(net, &routing, timing, b, args.replications, self.seed, cap) {
            Ok(s) => s,
            Err(e) => bail!(timed_code(&e), e),
        };
        let mut report = Map::new();
        report.insert("transition".into(), args.transition.clone().into());
        report.insert("blocking_marking".into(), net.format_marking(&sample.blocking_marking).into());
        report.insert("replications".into(), args.replications.into());
        report.insert("settled".into(), sample.values.len().into());
        report.insert("cap_outs".into(), sample.cap_outs.into());
        report.insert("wrong_markings".into(), sample.wrong_markings.into());
        report.insert("mean".into(), json!(sample.mean()));
        report.insert("max".into(), json!(sample.max()));
        let text = format!(
            "blocking marking {}: mean tau {} (max {}) over {} replications, {} cap-outs\n",
            net.format_marking(&sample.blocking_marking),
            sample.mean(),
            sample.max(),
            sample.values.len(),
            sample.cap_outs
        );
        let code = if sample.cap_outs == 0 && sample.wrong_markings == 0 { 0 } else { 1 };
        CommandResult::new(code, report, text)
    }
}

/// Entry point of the binary: runs the command, prints its output and
/// returns the exit code.
pub fn main_with(args: impl IntoIterator<Item = OsString>) -> i32 {
    let (result, json) = run_from(args);
    let out = result.output(json);
    if result.code == 2 && !json {
        eprint!("{out}");
    } else {
        print!("{out}");
    }
    result.code
}
