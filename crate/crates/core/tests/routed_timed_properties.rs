//! Property checks for the routed token game and the timed simulator on
//! random live bounded free choice nets.

mod common;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bernoulli_routing, periodic_routing};
use fcnet::analysis::{reachability, DEFAULT_NODE_CAP};
use fcnet::generate::{random_fcn, GeneratorConfig};
use fcnet::net::{Marking, PetriNet, TransId};
use fcnet::routed::{
    routed_blocking_unchecked, routed_parikh_unique, routed_reachability, Order, RoutedNet, RunOptions,
    DEFAULT_STEP_CAP,
};
use fcnet::routing::RoutingSpec;
use fcnet::stream::RandomStreams;
use fcnet::timed::{
    open_expansion, simulate, Distribution, SimConfig, Simulator, SourceSchedule, StopReason, StopRule, TimingSpec,
};

fn instance(seed: u64) -> (PetriNet, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = GeneratorConfig { max_places: 6, max_transitions: 6, ..GeneratorConfig::default() };
    let (net, _) = random_fcn(&mut rng, &config);
    (net, rng)
}

fn random_timing<R: Rng>(rng: &mut R, net: &PetriNet) -> TimingSpec {
    let dists: Vec<_> = net
        .transitions()
        .map(|t| {
            let d = match rng.random_range(0..3) {
                0 => Distribution::Exponential { rate: rng.random_range(0.5..2.0) },
                1 => Distribution::Uniform { lo: 0.5, hi: rng.random_range(0.5..2.0) },
                _ => Distribution::Deterministic { value: rng.random_range(1..4) as f64 },
            };
            (t, d)
        })
        .collect();
    TimingSpec::new(net, dists).unwrap()
}

fn state_equation(net: &PetriNet, completed: &[u64]) -> Marking {
    let counts: Vec<i64> = completed.iter().map(|&c| c as i64).collect();
    let delta = net.incidence().apply(&counts);
    Marking::from_vec(
        net.places()
            .map(|p| u32::try_from(i64::from(net.initial_marking()[p]) + delta[p.0]).unwrap())
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parikh_vectors_agree_and_enabling_is_sticky(seed in any::<u64>()) {
        let (net, mut rng) = instance(seed);
        let routing = periodic_routing(&mut rng, &net);
        let b = TransId(rng.random_range(0..net.transition_count()));
        let report = routed_parikh_unique(&net, &routing, b, 20, seed, RandomStreams::new(seed)).unwrap();
        prop_assert!(report.unique, "{:?}", report.counterexample);
        prop_assert!(report.monotone);
        prop_assert!(report.sticky);
        prop_assert!(net.enabled_transitions(report.reference.final_state.marking()).iter().all(|&t| t == b
            || !RoutedNet::new(&net, &routing, RandomStreams::new(seed)).unwrap()
                .is_enabled(&report.reference.final_state, t)));
    }

    #[test]
    fn pending_lists_track_the_marking(seed in any::<u64>(), steps in 0usize..60) {
        let (net, mut rng) = instance(seed);
        let routing = bernoulli_routing(&mut rng, &net);
        let routed = RoutedNet::new(&net, &routing, RandomStreams::new(seed)).unwrap();
        let mut state = routed.init();
        for _ in 0..steps {
            let enabled = routed.enabled(&state);
            let Some(&t) = enabled.choose(&mut rng) else { break };
            routed.fire_in_place(&mut state, t).unwrap();
            for p in net.places() {
                prop_assert_eq!(state.pending(p).len() as u32, state.marking()[p]);
                let assigned: usize = net.consumers(p).iter().map(|&t| state.assigned(p, t)).sum();
                prop_assert_eq!(assigned as u32, state.marking()[p]);
            }
        }
    }

    #[test]
    fn routed_states_are_reachable_and_live(seed in any::<u64>()) {
        let (net, mut rng) = instance(seed);
        let routing = periodic_routing(&mut rng, &net);
        let plain = reachability(&net, net.initial_marking(), DEFAULT_NODE_CAP);
        let routed = routed_reachability(&net, &routing, 200_000).unwrap();
        for state in &routed.states {
            prop_assert!(plain.contains(state.marking()));
        }
        prop_assert!(routed.is_live(&net));
    }

    #[test]
    fn shuffled_blocking_runs_end_in_the_same_marking(seed in any::<u64>()) {
        let (net, mut rng) = instance(seed);
        let routing = bernoulli_routing(&mut rng, &net);
        let b = TransId(rng.random_range(0..net.transition_count()));
        let streams = RandomStreams::new(seed);
        let reference = routed_blocking_unchecked(&net, &routing, b, DEFAULT_STEP_CAP, streams).unwrap();
        let routed = RoutedNet::new(&net, &routing, streams).unwrap();
        for i in 0..10 {
            let run = routed.run(&routed.init(), &RunOptions {
                avoid: Some(b),
                order: Order::Shuffled(seed.wrapping_add(i)),
                ..RunOptions::default()
            }).unwrap();
            prop_assert_eq!(run.final_state.marking(), reference.final_state.marking());
            prop_assert_eq!(&run.parikh, &reference.parikh);
        }
    }

    #[test]
    fn simulation_conserves_tokens_and_never_idles(seed in any::<u64>()) {
        let (net, mut rng) = instance(seed);
        let routing = bernoulli_routing(&mut rng, &net);
        let timing = random_timing(&mut rng, &net);
        let config = SimConfig::new(seed, StopRule::MaxEvents(2_000));
        let mut sim = Simulator::new(&net, &routing, &timing, &config).unwrap();
        let mut last = 0.0;
        for _ in 0..2_000 {
            let done = sim.step();
            prop_assert!(done.is_some());
            let done = done.unwrap();
            prop_assert!(done.instant >= last);
            last = done.instant;
            let completed: Vec<u64> = net.transitions().map(|t| sim.completed(t)).collect();
            prop_assert_eq!(sim.total_marking(), state_equation(&net, &completed));
            prop_assert!(net.transitions().any(|t| sim.in_progress(t) > 0));
        }
    }

    #[test]
    fn daters_are_deterministic_and_sorted(seed in any::<u64>()) {
        let (net, mut rng) = instance(seed);
        let routing = bernoulli_routing(&mut rng, &net);
        let timing = random_timing(&mut rng, &net);
        let config = SimConfig::new(seed, StopRule::MaxClock(50.0));
        let first = simulate(&net, &routing, &timing, &config).unwrap();
        let second = simulate(&net, &routing, &timing, &config).unwrap();
        prop_assert_eq!(first.log.to_csv(), second.log.to_csv());
        for t in net.transitions() {
            let xs = first.log.daters(t);
            prop_assert!(xs.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(xs.len() as u64, first.completed[t.0]);
        }
    }

    #[test]
    fn open_expansion_is_causal_and_homogeneous(seed in any::<u64>(), k in 1usize..5, shift in 0.0f64..50.0) {
        let (net, mut rng) = instance(seed);
        let routing = bernoulli_routing(&mut rng, &net);
        let timing = random_timing(&mut rng, &net);
        let b = TransId(rng.random_range(0..net.transition_count()));
        prop_assume!(net.inputs(b).iter().any(|p| !net.outputs(b).contains(p)));
        let run = routed_blocking_unchecked(&net, &routing, b, DEFAULT_STEP_CAP, RandomStreams::new(seed)).unwrap();
        let open = open_expansion(&net, b, run.final_state.marking()).unwrap();
        prop_assert!(open.net.enabled_transitions(open.marking()).iter().all(|&t| t == open.input));
        let (r, t) = (open.routing(&net, &routing), open.timing(&net, &timing));
        let mut inputs: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..20.0)).collect();
        inputs.sort_by(f64::total_cmp);
        let outputs = |offset: f64| {
            let config = SimConfig {
                sources: vec![(open.input, SourceSchedule::Instants(inputs.iter().map(|x| x + offset).collect()))],
                ..SimConfig::new(seed, StopRule::MaxEvents(1_000_000))
            };
            let out = simulate(&open.net, &r, &t, &config).unwrap();
            assert_eq!(out.stop, StopReason::Quiescent);
            assert_eq!(&out.marking, open.marking());
            out.log.daters(open.b_out).to_vec()
        };
        let base = outputs(0.0);
        prop_assert_eq!(base.len(), k);
        for (y, x) in base.iter().zip(&inputs) {
            prop_assert!(y >= x);
        }
        let shifted = outputs(shift);
        for (y, z) in base.iter().zip(&shifted) {
            prop_assert!((z - y - shift).abs() < 1e-9 * (1.0 + z.abs()), "{} vs {} + {}", z, y, shift);
        }
    }
}

#[test]
fn net_b_rates_settle_over_doubling_horizons() {
    let net = common::net_b();
    let routing = RoutingSpec::bernoulli(&net, &[("p0", &[("a", 0.3), ("b", 0.7)])]).unwrap();
    let timing = TimingSpec::uniform_all(&net, Distribution::Exponential { rate: 1.0 }).unwrap();
    let out = simulate(&net, &routing, &timing, &SimConfig::new(9, StopRule::MaxClock(64_000.0))).unwrap();
    let mut horizon = 1_000.0;
    let mut previous = out.log.throughput_estimate(horizon).rates;
    let mut differences = Vec::new();
    while horizon < 64_000.0 {
        horizon *= 2.0;
        let rates = out.log.throughput_estimate(horizon).rates;
        differences.push(rates.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        previous = rates;
    }
    assert!(*differences.last().unwrap() < 0.005, "{differences:?}");
    assert!(differences.last() < differences.first(), "{differences:?}");
}
