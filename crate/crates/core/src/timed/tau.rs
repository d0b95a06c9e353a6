//! Time to reach the blocking marking when the blocked transition never
//! completes.

use rayon::prelude::*;

use crate::net::{Marking, PetriNet, TransId};
use crate::routed::{check_routed_hypotheses, routed_blocking_unchecked, DEFAULT_STEP_CAP};
use crate::routing::RoutingSpec;
use crate::stream::RandomStreams;

use super::{SimConfig, Simulator, StopRule, TimedError, TimingSpec};

/// Completions allowed per replication before it counts as a cap-out.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TauSample {
    pub blocking_marking: Marking,
    /// One value per replication that settled, in replication order.
    pub values: Vec<f64>,
    /// Replications that hit the event cap.
    pub cap_outs: usize,
    /// Replications that went quiet in a marking other than the blocking one.
    pub wrong_markings: usize,
}

impl TauSample {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return f64::NAN;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NAN, f64::max)
    }
}

enum Outcome {
    Settled(f64),
    CapOut,
    Wrong,
}

/// Simulates `replications` independent runs from the initial marking with
/// `b` frozen, and records for each the first instant at which the marking
/// (free plus frozen tokens) equals the blocking marking of `b` and nothing
/// else is in progress. Replication `r` draws from stream replication `r`.
pub fn measure_tau(
    net: &PetriNet,
    routing: &RoutingSpec,
    timing: &TimingSpec,
    b: TransId,
    replications: u64,
    seed: u64,
    event_cap: u64,
) -> Result<TauSample, TimedError> {
    check_routed_hypotheses(net, routing)?;
    let streams = RandomStreams::new(seed);
    let target = routed_blocking_unchecked(net, routing, b, DEFAULT_STEP_CAP, streams)?
        .final_state
        .marking()
        .clone();
    // Fail early on invalid timing or sources.
    let base = SimConfig {
        frozen: Some(b),
        ..SimConfig::new(seed, StopRule::MaxEvents(event_cap))
    };
    Simulator::new(net, routing, timing, &base)?;

    let outcomes: Vec<Outcome> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let config = SimConfig {
                streams: streams.with_replication(r),
                ..base.clone()
            };
            let mut sim = Simulator::new(net, routing, timing, &config).expect("validated above");
            loop {
                if sim.total_marking() == target
                    && net.transitions().all(|t| t == b || sim.in_progress(t) == 0)
                {
                    return Outcome::Settled(sim.clock());
                }
                if sim.is_quiescent() {
                    return Outcome::Wrong;
                }
                if sim.events() >= event_cap {
                    return Outcome::CapOut;
                }
                sim.step();
            }
        })
        .collect();

    let mut sample = TauSample {
        blocking_marking: target,
        values: Vec::new(),
        cap_outs: 0,
        wrong_markings: 0,
    };
    for o in outcomes {
        match o {
            Outcome::Settled(x) => sample.values.push(x),
            Outcome::CapOut => sample.cap_outs += 1,
            Outcome::Wrong => sample.wrong_markings += 1,
        }
    }
    Ok(sample)
}
