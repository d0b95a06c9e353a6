//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bernoulli_routing, left_fixed_point, net_a, net_b, periodic_routing, q, to_f64, Q};
use fcnet::analysis::{
    blocking_marking, blocking_oracle, check_live_bounded, commoner_live, free_choice_expansion, is_bounded,
    is_bounded_with_cap, is_home_state, is_live, reachability, AnalysisError, Boundedness, Hypothesis, Liveness,
    DEFAULT_NODE_CAP,
};
use fcnet::cli::run_from;
use fcnet::generate::{random_fcn, random_free_choice, random_net, GeneratorConfig};
use fcnet::net::{Marking, PetriNet, TransId};
use fcnet::routed::{routed_blocking_unchecked, routed_parikh_unique_unchecked, DEFAULT_STEP_CAP};
use fcnet::routing::RoutingSpec;
use fcnet::stream::RandomStreams;
use fcnet::throughput::{
    branching_family_vector, compare_sim, parametric_check, perron_vector, RoutingMatrix, DEFAULT_MAX_ITER,
    DEFAULT_TOLERANCE,
};
use fcnet::timed::{measure_tau, simulate, Distribution, SimConfig, StopRule, TimingSpec, DEFAULT_EVENT_CAP};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, limit: Duration, check: impl FnOnce() -> Check) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|panic| {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("too slow ({detail})")),
            other => other,
        };
        let (verdict, detail) = match &outcome {
            Ok(detail) => ("PASS", detail),
            Err(detail) => ("FAIL", detail),
        };
        println!(
            "criterion {id:>2} {verdict} [{:.3} s / {} s] {name}: {detail}",
            elapsed.as_secs_f64(),
            limit.as_secs_f64()
        );
        if outcome.is_err() {
            self.failures += 1;
        }
    }
}

fn secs(s: f64) -> Duration {
    Duration::from_secs_f64(s)
}

const GENERATED_NETS: usize = 200;

/// Live bounded free choice nets with at most 8 places and transitions and
/// bound at most 3.
fn generated_nets() -> Vec<(PetriNet, u32)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let config = GeneratorConfig::default();
    (0..GENERATED_NETS).map(|_| random_fcn(&mut rng, &config)).collect()
}

fn exact_example() -> Vec<Vec<Q>> {
    let t = |n| q(n, 10);
    let z = Q::from_integer(0);
    vec![
        vec![t(4), t(3), z, z, z],
        vec![t(4), t(4), t(4), z, z],
        vec![z, t(1), t(4), t(3), t(7)],
        vec![z, z, t(5), z, z],
        vec![z, z, z, t(3), t(7)],
    ]
}

fn eigenvector() -> Check {
    let exact = left_fixed_point(&exact_example());
    let expected: Vec<Q> = [2, 3, 12, 12, 28].iter().map(|&n| q(n, 57)).collect();
    ensure!(exact == expected, "oracle gives {exact:?}");
    let entries = exact_example().iter().map(|row| row.iter().map(to_f64).collect()).collect();
    let names = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
    let r = RoutingMatrix::new(names, entries).map_err(|e| e.to_string())?;
    let v = perron_vector(&r, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).map_err(|e| e.to_string())?;
    let err = v.x.iter().zip(&exact).map(|(a, b)| (a - to_f64(b)).abs()).fold(0.0, f64::max);
    ensure!(err < 1e-9, "error {err:e}");
    let rounded: Vec<String> = v.x.iter().map(|x| format!("{x:.2}")).collect();
    ensure!(rounded == ["0.04", "0.05", "0.21", "0.21", "0.49"], "rounds to {rounded:?}");
    Ok(format!("x = {rounded:?}, error {err:.1e}"))
}

fn parametric() -> Check {
    let grid: Vec<f64> = (1..20).map(|k| f64::from(k) * 0.05).collect();
    let rows = parametric_check(&grid);
    ensure!(rows.len() == 19, "{} rows", rows.len());
    let mut worst: f64 = 0.0;
    for (k, row) in (1..20).zip(&rows) {
        let x = q(k, 20);
        let d = Q::from_integer(12) + Q::from_integer(17) * x;
        let expected: Vec<f64> = [2, 3, 12, 12]
            .iter()
            .map(|&c| Q::from_integer(c) * x / d)
            .chain([(Q::from_integer(12) - Q::from_integer(12) * x) / d])
            .map(|v| to_f64(&v))
            .collect();
        ensure!(row.pass, "x = {} reported as failing", row.x);
        let err = row.computed.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let formula = branching_family_vector(row.x);
        let err_formula = formula.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(err < 1e-8 && err_formula < 1e-12, "x = {}: error {err:e}", row.x);
        worst = worst.max(err);
    }
    Ok(format!("19 points, worst error {worst:.1e}"))
}

fn oracle_equivalence(nets: &[(PetriNet, u32)]) -> Check {
    let mut pairs = 0;
    let mut longest = 0;
    for (i, (net, bound)) in nets.iter().enumerate() {
        let class = net.classify();
        ensure!(class.is_free_choice, "net {i} is not free choice");
        ensure!(net.place_count() <= 8 && net.transition_count() <= 8 && *bound <= 3, "net {i} too large");
        let graph = reachability(net, net.initial_marking(), DEFAULT_NODE_CAP);
        ensure!(!graph.truncated(), "net {i}: truncated reachability graph");
        let t = net.transition_count() as u64;
        let witness_bound = u64::from(*bound) * t * (t + 1) / 2;
        for b in net.transitions().filter(|&b| net.is_non_conflicting(b)) {
            let result = blocking_marking(net, b).map_err(|e| format!("net {i}: {e}"))?;
            let m_b = &result.blocking_marking;
            let oracle = blocking_oracle(net, b, DEFAULT_NODE_CAP).map_err(|e| format!("net {i}: {e}"))?;
            let singleton = BTreeSet::from([m_b.clone()]);
            ensure!(oracle.blocking == singleton, "net {i}, {}: R_b has {} markings", net.transition_name(b), oracle.blocking.len());
            ensure!(oracle.avoiding == singleton, "net {i}, {}: R_b' differs", net.transition_name(b));
            ensure!(is_home_state(&graph, m_b, b), "net {i}, {}: not a home state", net.transition_name(b));
            ensure!(net.enabled_transitions(m_b) == [b], "net {i}: wrong enabled set");
            let (reached, _) = net.fire_sequence(net.initial_marking(), &result.witness).map_err(|e| e.to_string())?;
            ensure!(&reached == m_b && !result.witness.contains(&b), "net {i}: witness does not replay");
            ensure!(result.witness.len() as u64 <= witness_bound, "net {i}: witness of length {}", result.witness.len());
            longest = longest.max(result.witness.len());
            pairs += 1;
        }
    }
    ensure!(pairs >= nets.len(), "only {pairs} transitions checked");
    Ok(format!("{} nets, {pairs} non-conflicting transitions, longest witness {longest}", nets.len()))
}

fn counterexamples() -> Check {
    let cases = [
        ("ctrex-non-live.json", Hypothesis::NotLive),
        ("ctrex-unbounded.json", Hypothesis::Unbounded),
        ("ctrex-not-free-choice.json", Hypothesis::NotFreeChoice),
    ];
    let mut found = Vec::new();
    for (file, dropped) in cases {
        let net = common::load(file).net;
        let b = net.transition("b").ok_or("no transition b")?;
        let class = net.classify();
        let bounded = is_bounded_with_cap(&net, 10_000);
        match dropped {
            Hypothesis::NotLive => {
                ensure!(class.is_free_choice && bounded.bound().is_some(), "{file} drops more than liveness");
                ensure!(matches!(is_live(&net, 10_000), Liveness::NotLive { .. }), "{file} is live");
            }
            Hypothesis::Unbounded => {
                ensure!(class.is_free_choice && commoner_live(&net).map_err(|e| e.to_string())?.is_live(), "{file} drops more than boundedness");
                ensure!(matches!(bounded, Boundedness::Unbounded(_)), "{file} is bounded");
            }
            _ => {
                ensure!(!class.is_free_choice, "{file} is free choice");
                ensure!(bounded.bound().is_some() && is_live(&net, 10_000) == Liveness::Live, "{file} drops more than free choice");
            }
        }
        let markings = match blocking_oracle(&net, b, 10_000) {
            Ok(oracle) => oracle.blocking.len(),
            Err(AnalysisError::Truncated { partial, .. }) => partial.blocking.len(),
            Err(e) => return Err(format!("{file}: {e}")),
        };
        ensure!(markings >= 2, "{file}: {markings} blocking markings");
        match blocking_marking(&net, b) {
            Err(AnalysisError::HypothesisViolated(h)) if h == dropped => {}
            other => return Err(format!("{file}: blocking_marking gave {other:?}")),
        }
        found.push(format!("{file}: {markings}"));
    }
    Ok(found.join(", "))
}

fn commoner_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fcn_rng = ChaCha8Rng::seed_from_u64(55);
    let (mut live, mut dead, mut drawn) = (0, 0, 0);
    let config = GeneratorConfig::default();
    while live + dead < 500 {
        drawn += 1;
        let candidate = if drawn % 4 == 0 {
            // A live net with a perturbed marking, which may or may not stay live.
            let (net, _) = random_fcn(&mut fcn_rng, &config);
            let marking = net.places().map(|_| fcn_rng.random_range(0..=2)).collect();
            Some(net.with_initial_marking(Marking::from_vec(marking)))
        } else {
            random_free_choice(&mut rng, 8, 8)
        };
        let Some(net) = candidate else { continue };
        if is_bounded_with_cap(&net, 20_000).bound().is_none() {
            continue;
        }
        let explicit = is_live(&net, 200_000);
        if explicit == Liveness::Inconclusive {
            continue;
        }
        let structural = commoner_live(&net).map_err(|e| e.to_string())?;
        ensure!(structural.is_live() == explicit.is_live(), "disagreement on {:?}", net.to_description());
        if explicit.is_live() {
            live += 1;
        } else {
            dead += 1;
        }
    }
    ensure!(live >= 50 && dead >= 50, "unbalanced sample: {live} live, {dead} not live");
    Ok(format!("500 bounded nets ({live} live, {dead} not live) from {drawn} draws"))
}

fn parikh_uniqueness(nets: &[(PetriNet, u32)]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut runs = 0;
    for (i, (net, _)) in nets.iter().enumerate() {
        let routing = periodic_routing(&mut rng, net);
        ensure!(routing.is_equitable(net), "net {i}: routing not equitable");
        for b in net.transitions() {
            let report = routed_parikh_unique_unchecked(net, &routing, b, 100, i as u64, RandomStreams::new(i as u64))
                .map_err(|e| format!("net {i}: {e}"))?;
            ensure!(report.unique, "net {i}, {}: Parikh vectors differ", net.transition_name(b));
            ensure!(report.monotone, "net {i}, {}: prefix exceeds the final vector", net.transition_name(b));
            ensure!(report.sticky, "net {i}, {}: enabling was not sticky", net.transition_name(b));
            runs += 101;
        }
    }
    Ok(format!("{} nets, {runs} routed runs", nets.len()))
}

fn t_net_uniformity() -> Check {
    let net = net_a();
    let routing = RoutingSpec::trivial(&net);
    let (t1, t2) = (TransId(0), TransId(1));
    let exp = TimingSpec::uniform_all(&net, Distribution::Exponential { rate: 1.0 }).map_err(|e| e.to_string())?;
    let out = simulate(&net, &routing, &exp, &SimConfig::new(7, StopRule::MaxEvents(100_000))).map_err(|e| e.to_string())?;
    let rates = out.log.throughput_estimate(out.clock).rates;
    let ratio = rates[t1.0] / rates[t2.0];
    ensure!((ratio - 1.0).abs() < 0.02, "exponential ratio {ratio}");
    let det = TimingSpec::named(
        &net,
        &[("t1", Distribution::Deterministic { value: 1.0 }), ("t2", Distribution::Deterministic { value: 2.0 })],
    )
    .map_err(|e| e.to_string())?;
    let out = simulate(&net, &routing, &det, &SimConfig::new(7, StopRule::MaxClock(150_000.0))).map_err(|e| e.to_string())?;
    ensure!(out.events == 100_000, "{} deterministic firings", out.events);
    let rates = out.log.throughput_estimate(150_000.0).rates;
    ensure!(rates == [1.0 / 3.0, 1.0 / 3.0], "deterministic rates {rates:?}");
    Ok(format!("exponential ratio {ratio:.4}, deterministic rates exactly 1/3"))
}

fn ratio_prediction() -> Check {
    let net = net_b();
    let routing = RoutingSpec::bernoulli(&net, &[("p0", &[("a", 0.3), ("b", 0.7)])]).map_err(|e| e.to_string())?;
    let exp = TimingSpec::uniform_all(&net, Distribution::Exponential { rate: 1.0 }).map_err(|e| e.to_string())?;
    let uniform = TimingSpec::uniform_all(&net, Distribution::Uniform { lo: 0.5, hi: 1.5 }).map_err(|e| e.to_string())?;
    let stop = StopRule::MaxEvents(100_000);
    let first = compare_sim(&net, &routing, &exp, stop, 8).map_err(|e| e.to_string())?;
    let second = compare_sim(&net, &routing, &uniform, stop, 9).map_err(|e| e.to_string())?;
    let expected = [0.15, 0.35, 0.15, 0.35];
    let err = first.prediction.x.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure!(err < 1e-9, "predicted x = {:?}", first.prediction.x);
    ensure!(first.prediction == second.prediction, "prediction depends on timing");
    ensure!(first.rates != second.rates, "timing did not change the rates");
    ensure!(first.max_rel_err < 0.03, "exponential: max relative error {}", first.max_rel_err);
    ensure!(second.max_rel_err < 0.03, "uniform: max relative error {}", second.max_rel_err);
    Ok(format!(
        "max relative error {:.4} (exp), {:.4} (uniform); scale {:.4} vs {:.4}",
        first.max_rel_err, second.max_rel_err, first.scale[0], second.scale[0]
    ))
}

fn tau_finiteness() -> Check {
    let net = net_b();
    let c = net.transition("c").ok_or("no c")?;
    let routing = RoutingSpec::bernoulli(&net, &[("p0", &[("a", 0.5), ("b", 0.5)])]).map_err(|e| e.to_string())?;
    let timing = TimingSpec::uniform_all(&net, Distribution::Exponential { rate: 1.0 }).map_err(|e| e.to_string())?;
    let mut means = Vec::new();
    for seed in [101, 202] {
        let sample = measure_tau(&net, &routing, &timing, c, 10_000, seed, DEFAULT_EVENT_CAP).map_err(|e| e.to_string())?;
        ensure!(sample.cap_outs == 0, "seed {seed}: {} cap-outs", sample.cap_outs);
        ensure!(sample.wrong_markings == 0, "seed {seed}: {} runs ended elsewhere", sample.wrong_markings);
        ensure!(sample.values.len() == 10_000, "seed {seed}: {} values", sample.values.len());
        ensure!(sample.values.iter().all(|v| v.is_finite() && *v >= 0.0), "seed {seed}: non-finite value");
        means.push(sample.mean());
    }
    let gap = (means[0] - means[1]).abs() / ((means[0] + means[1]) / 2.0);
    ensure!(gap < 0.05, "batch means {means:?} differ by {:.1}%", 100.0 * gap);
    Ok(format!("2 x 10000 replications, means {:.4} and {:.4} ({:.2}% apart)", means[0], means[1], 100.0 * gap))
}

fn cli_report(args: &[&str]) -> String {
    let mut full = vec!["fcnet", "--json"];
    full.extend_from_slice(args);
    let (result, _) = run_from(full);
    result.output(true)
}

fn determinism() -> Check {
    let loaded = common::load("branching.json");
    let (net, routing, timing) = (&loaded.net, loaded.routing.as_ref().unwrap(), loaded.timing.as_ref().unwrap());
    let log = |seed| {
        simulate(net, routing, timing, &SimConfig::new(seed, StopRule::MaxEvents(20_000)))
            .map(|out| out.log.to_csv())
            .map_err(|e| e.to_string())
    };
    let first = log(3)?;
    ensure!(first == log(3)?, "dater logs differ for the same seed");
    ensure!(first != log(4)?, "dater logs ignore the seed");

    let path = |name: &str| common::fixture(name).display().to_string();
    let commands: Vec<Vec<String>> = vec![
        vec!["classify".into(), path("branching.json")],
        vec!["classify".into(), path("efcn.json")],
        vec!["blocking".into(), path("net-b.json"), "c".into(), "--oracle".into()],
        vec!["blocking".into(), path("net-b.json"), "a".into(), "--oracle".into()],
        vec!["blocking".into(), path("ctrex-not-free-choice.json"), "b".into(), "--oracle".into()],
        vec!["throughput".into(), path("branching.json")],
        vec!["throughput".into(), "--matrix".into(), path("branching-matrix.csv")],
        vec!["throughput".into(), "--grid".into()],
        vec!["expand".into(), path("branching.json"), "--free-choice".into()],
        vec!["expand".into(), path("efcn.json"), "--efcn".into()],
        vec!["expand".into(), path("net-b.json"), "--open".into(), "c".into()],
    ];
    for command in &commands {
        let args: Vec<&str> = command.iter().map(String::as_str).collect();
        let report = cli_report(&args);
        ensure!(serde_json::from_str::<serde_json::Value>(&report).is_ok(), "{args:?}: not JSON");
        ensure!(report == cli_report(&args), "{args:?}: reports differ");
    }
    Ok(format!("{} bytes of dater CSV, {} analysis reports", first.len(), commands.len()))
}

fn expansion_correspondences(nets: &[(PetriNet, u32)]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut candidates: Vec<PetriNet> = nets.iter().map(|(net, _)| net.clone()).collect();
    candidates.push(common::load("branching.json").net);
    candidates.push(common::load("efcn.json").net);
    let mut unrestricted = 0;
    while unrestricted < 100 {
        if let Some(net) = random_net(&mut rng, 5, 5) {
            candidates.push(net);
            unrestricted += 1;
        }
    }
    let (mut bounded, mut unbounded, mut routed_nets, mut blocked) = (0, 0, 0, 0);
    for (i, net) in candidates.iter().enumerate() {
        let expansion = free_choice_expansion(net).map_err(|e| e.to_string())?;
        let original = is_bounded(net);
        let expanded = is_bounded(&expansion.net);
        ensure!(
            original.bound().is_some() == expanded.bound().is_some(),
            "net {i}: boundedness differs ({original:?} vs {expanded:?})"
        );
        if original.bound().is_some() {
            bounded += 1;
        } else {
            unbounded += 1;
        }
        if i < nets.len() {
            ensure!(check_live_bounded(&expansion.net, DEFAULT_NODE_CAP).is_ok(), "net {i}: expansion not live");
        } else if check_live_bounded(&expansion.net, DEFAULT_NODE_CAP).is_err() {
            continue;
        }
        routed_nets += 1;
        let routings: Vec<RoutingSpec> = (0..20)
            .map(|k| if k % 2 == 0 { periodic_routing(&mut rng, net) } else { bernoulli_routing(&mut rng, net) })
            .collect();
        for b in net.transitions() {
            let mut finals = BTreeSet::new();
            for (k, routing) in routings.iter().enumerate() {
                ensure!(routing.is_equitable(net), "net {i}: routing {k} not equitable");
                let run = routed_blocking_unchecked(net, routing, b, DEFAULT_STEP_CAP, RandomStreams::new(k as u64))
                    .map_err(|e| format!("net {i}, {}: {e}", net.transition_name(b)))?;
                finals.insert(run.final_state.marking().clone());
            }
            ensure!(finals.len() == 1, "net {i}, {}: {} distinct final markings", net.transition_name(b), finals.len());
            if i < nets.len() && net.is_non_conflicting(b) {
                let m_b = blocking_marking(net, b).map_err(|e| e.to_string())?.blocking_marking;
                ensure!(finals.contains(&m_b), "net {i}, {}: routed and unrouted markings differ", net.transition_name(b));
            }
            blocked += 1;
        }
    }
    Ok(format!(
        "{} nets ({bounded} bounded, {unbounded} unbounded); {routed_nets} nets with live bounded expansion, {blocked} transitions x 20 routings",
        candidates.len()
    ))
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };
    suite.run(1, "eigenvector of the example matrix", secs(0.1), eigenvector);
    suite.run(2, "parametric family", secs(1.0), parametric);

    let start = Instant::now();
    let nets = generated_nets();
    let generation = start.elapsed();
    suite.run(3, "blocking oracle equivalence", secs(60.0), || {
        ensure!(generation < secs(60.0), "generation took {:.1} s", generation.as_secs_f64());
        oracle_equivalence(&nets).map(|d| format!("{d}; generation {:.2} s", generation.as_secs_f64()))
    });
    suite.run(4, "counterexample detection", secs(5.0), counterexamples);
    suite.run(5, "siphon-trap and explicit liveness agree", secs(60.0), commoner_consistency);
    suite.run(6, "routed Parikh uniqueness", secs(120.0), || parikh_uniqueness(&nets));
    suite.run(7, "T-net uniformity", secs(10.0), t_net_uniformity);
    suite.run(8, "ratio prediction", secs(30.0), ratio_prediction);
    suite.run(9, "time to block is finite", secs(60.0), tau_finiteness);
    suite.run(10, "determinism", secs(60.0), determinism);
    suite.run(11, "expansion correspondences", secs(120.0), || expansion_correspondences(&nets));

    if suite.failures == 0 {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 11 criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
