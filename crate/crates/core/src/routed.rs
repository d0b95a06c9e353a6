//! The routed token game.
//!
//! Each token carries the output transition it was assigned to when it
//! entered its place. Destinations are drawn from the routing function by
//! token index (the `n`-th token entering `p` goes to `u_p(n)`, counting the
//! initial tokens first), and a transition is routed-enabled when every input
//! place holds a token assigned to it.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{
    check_live_bounded, free_choice_expansion, AnalysisError, Hypothesis, DEFAULT_NODE_CAP,
};
use crate::analysis::{dead_in_bottom_component, is_strongly_connected_graph};
use crate::net::{Marking, ParikhVector, PetriNet, PlaceId, TransId};
use crate::routing::{PlaceRouting, RoutingError, RoutingSpec};
use crate::stream::RandomStreams;

/// Default limit on firings in a single run.
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutedError {
    #[error(transparent)]
    InvalidRouting(#[from] RoutingError),
    #[error("transition `{0}` is not routed-enabled")]
    NotRoutedEnabled(String),
    #[error("no quiescent state within {0} firings")]
    StepCapExceeded(usize),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(Hypothesis),
    #[error("the routing is not equitable")]
    NotEquitable,
    #[error("routed state spaces need a periodic routing")]
    NotPeriodic,
    #[error("the routed state space exceeds the cap of {0} states")]
    Truncated(usize),
    #[error("shuffled runs reached different deadlocks: {0} and {1}")]
    DeadlockMismatch(String, String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Marking plus, per place, the destinations of the tokens it holds in
/// arrival order and the number of routing decisions drawn so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RoutedState {
    marking: Marking,
    pending: Vec<VecDeque<Option<TransId>>>,
    drawn: Vec<u64>,
}

impl RoutedState {
    pub fn marking(&self) -> &Marking {
        &self.marking
    }

    /// Destinations of the tokens of `p`, oldest first.
    pub fn pending(&self, p: PlaceId) -> &VecDeque<Option<TransId>> {
        &self.pending[p.0]
    }

    /// How many routing decisions of `p` have been used.
    pub fn drawn(&self, p: PlaceId) -> u64 {
        self.drawn[p.0]
    }

    /// Number of tokens of `p` assigned to `t`.
    pub fn assigned(&self, p: PlaceId, t: TransId) -> usize {
        self.pending[p.0].iter().filter(|&&d| d == Some(t)).count()
    }
}

/// A run of the routed token game.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedRun {
    pub word: Vec<TransId>,
    pub parikh: ParikhVector,
    pub final_state: RoutedState,
    /// False if some routed-enabled transition was disabled by the firing
    /// of another one.
    pub sticky: bool,
}

/// How a run picks among routed-enabled transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Smallest transition id first.
    Lexicographic,
    /// Uniformly at random, from a generator seeded with the value.
    Shuffled(u64),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Transition that is never fired.
    pub avoid: Option<TransId>,
    pub order: Order,
    pub step_cap: usize,
    /// Maximal number of firings of selected transitions.
    pub budgets: Vec<(TransId, u64)>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            avoid: None,
            order: Order::Lexicographic,
            step_cap: DEFAULT_STEP_CAP,
            budgets: Vec::new(),
        }
    }
}

/// A net together with a routing and the random streams behind it.
#[derive(Debug, Clone, Copy)]
pub struct RoutedNet<'a> {
    net: &'a PetriNet,
    routing: &'a RoutingSpec,
    streams: RandomStreams,
}

impl<'a> RoutedNet<'a> {
    pub fn new(
        net: &'a PetriNet,
        routing: &'a RoutingSpec,
        streams: RandomStreams,
    ) -> Result<Self, RoutedError> {
        routing.validate(net)?;
        Ok(RoutedNet {
            net,
            routing,
            streams,
        })
    }

    pub fn net(&self) -> &'a PetriNet {
        self.net
    }

    /// Initial tokens of `p` get destinations `u_p(1..=M_p)` in order.
    pub fn init(&self) -> RoutedState {
        self.init_at(self.net.initial_marking())
    }

    pub fn init_at(&self, marking: &Marking) -> RoutedState {
        let mut state = RoutedState {
            marking: Marking::zeros(self.net.place_count()),
            pending: vec![VecDeque::new(); self.net.place_count()],
            drawn: vec![0; self.net.place_count()],
        };
        for p in self.net.places() {
            for _ in 0..marking[p] {
                self.deposit(&mut state, p);
            }
        }
        state
    }

    fn deposit(&self, state: &mut RoutedState, p: PlaceId) {
        state.drawn[p.0] += 1;
        let dest = self.routing.decide(p, state.drawn[p.0], &self.streams);
        state.pending[p.0].push_back(dest);
        state.marking.set(p, state.marking[p] + 1);
    }

    pub fn is_enabled(&self, state: &RoutedState, t: TransId) -> bool {
        self.net
            .inputs(t)
            .iter()
            .all(|&p| state.pending[p.0].contains(&Some(t)))
    }

    pub fn enabled(&self, state: &RoutedState) -> Vec<TransId> {
        self.net
            .transitions()
            .filter(|&t| self.is_enabled(state, t))
            .collect()
    }

    /// Removes the oldest `t`-assigned token of every input place, then
    /// adds one freshly routed token to every output place.
    pub fn fire(&self, state: &RoutedState, t: TransId) -> Result<RoutedState, RoutedError> {
        let mut next = state.clone();
        self.fire_in_place(&mut next, t)?;
        Ok(next)
    }

    pub fn fire_in_place(&self, state: &mut RoutedState, t: TransId) -> Result<(), RoutedError> {
        if !self.is_enabled(state, t) {
            return Err(RoutedError::NotRoutedEnabled(
                self.net.transition_name(t).to_string(),
            ));
        }
        for &p in self.net.inputs(t) {
            let queue = &mut state.pending[p.0];
            let i = queue.iter().position(|&d| d == Some(t)).expect("enabled");
            queue.remove(i);
            state.marking.set(p, state.marking[p] - 1);
        }
        for &p in self.net.outputs(t) {
            self.deposit(state, p);
        }
        Ok(())
    }

    /// Fires routed-enabled transitions until none is left (apart from the
    /// avoided one and exhausted budgets).
    pub fn run(&self, start: &RoutedState, opts: &RunOptions) -> Result<RoutedRun, RoutedError> {
        self.run_observed(start, opts, |_, _| {})
    }

    /// Like [`RoutedNet::run`], calling `observe` with the state and the
    /// Parikh vector after every firing.
    pub fn run_observed(
        &self,
        start: &RoutedState,
        opts: &RunOptions,
        mut observe: impl FnMut(&RoutedState, &ParikhVector),
    ) -> Result<RoutedRun, RoutedError> {
        let mut rng = match opts.order {
            Order::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            Order::Lexicographic => None,
        };
        let mut budget: HashMap<TransId, u64> = opts.budgets.iter().copied().collect();
        let mut state = start.clone();
        let mut word = Vec::new();
        let mut parikh = ParikhVector::zeros(self.net.transition_count());
        let mut sticky = true;
        loop {
            let candidates: Vec<TransId> = self
                .enabled(&state)
                .into_iter()
                .filter(|&t| Some(t) != opts.avoid && budget.get(&t) != Some(&0))
                .collect();
            let Some(&first) = candidates.first() else {
                break;
            };
            if word.len() >= opts.step_cap {
                return Err(RoutedError::StepCapExceeded(opts.step_cap));
            }
            let t = match rng.as_mut() {
                Some(rng) => candidates[rng.random_range(0..candidates.len())],
                None => first,
            };
            let before = self.enabled(&state);
            self.fire_in_place(&mut state, t)?;
            if before.iter().any(|&u| u != t && !self.is_enabled(&state, u)) {
                sticky = false;
            }
            if let Some(left) = budget.get_mut(&t) {
                *left -= 1;
            }
            word.push(t);
            parikh.increment(t);
            observe(&state, &parikh);
        }
        Ok(RoutedRun {
            word,
            parikh,
            final_state: state,
            sticky,
        })
    }
}

/// Checks that the routing is equitable and that the Free Choice expansion
/// of the net is live and bounded.
pub fn check_routed_hypotheses(net: &PetriNet, routing: &RoutingSpec) -> Result<(), RoutedError> {
    routing.validate(net)?;
    if !routing.is_equitable(net) {
        return Err(RoutedError::NotEquitable);
    }
    let expansion = free_choice_expansion(net)?;
    check_live_bounded(&expansion.net, DEFAULT_NODE_CAP).map_err(RoutedError::HypothesisViolated)?;
    Ok(())
}

/// Runs from the initial marking, never firing `b`, until only `b` can be
/// routed-enabled. Checks the hypotheses first.
pub fn routed_blocking(
    net: &PetriNet,
    routing: &RoutingSpec,
    b: TransId,
    step_cap: usize,
    streams: RandomStreams,
) -> Result<RoutedRun, RoutedError> {
    check_routed_hypotheses(net, routing)?;
    routed_blocking_unchecked(net, routing, b, step_cap, streams)
}

/// [`routed_blocking`] without the hypothesis checks.
pub fn routed_blocking_unchecked(
    net: &PetriNet,
    routing: &RoutingSpec,
    b: TransId,
    step_cap: usize,
    streams: RandomStreams,
) -> Result<RoutedRun, RoutedError> {
    let routed = RoutedNet::new(net, routing, streams)?;
    routed.run(
        &routed.init(),
        &RunOptions {
            avoid: Some(b),
            step_cap,
            ..RunOptions::default()
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParikhReport {
    /// All runs reached the same Parikh vector and every prefix stayed
    /// below it.
    pub unique: bool,
    /// Every prefix of every run was bounded by the reference vector.
    pub monotone: bool,
    /// No run disabled a routed-enabled transition other than the fired one.
    pub sticky: bool,
    /// The lexicographic run.
    pub reference: RoutedRun,
    /// A run whose Parikh vector differs from the reference.
    pub counterexample: Option<RoutedRun>,
    pub trials: usize,
}

/// Runs `trials` randomly ordered `b`-avoiding executions to quiescence and
/// compares their Parikh vectors with the lexicographic run.
pub fn routed_parikh_unique(
    net: &PetriNet,
    routing: &RoutingSpec,
    b: TransId,
    trials: usize,
    seed: u64,
    streams: RandomStreams,
) -> Result<ParikhReport, RoutedError> {
    check_routed_hypotheses(net, routing)?;
    routed_parikh_unique_unchecked(net, routing, b, trials, seed, streams)
}

/// [`routed_parikh_unique`] without the hypothesis checks.
pub fn routed_parikh_unique_unchecked(
    net: &PetriNet,
    routing: &RoutingSpec,
    b: TransId,
    trials: usize,
    seed: u64,
    streams: RandomStreams,
) -> Result<ParikhReport, RoutedError> {
    let routed = RoutedNet::new(net, routing, streams)?;
    let start = routed.init();
    let base = RunOptions {
        avoid: Some(b),
        ..RunOptions::default()
    };
    let reference = routed.run(&start, &base)?;
    let mut monotone = true;
    let mut sticky = reference.sticky;
    let mut counterexample = None;
    for trial in 0..trials {
        let opts = RunOptions {
            order: Order::Shuffled(seed.wrapping_add(trial as u64)),
            ..base.clone()
        };
        let run = routed.run_observed(&start, &opts, |_, prefix| {
            if !prefix.le(&reference.parikh) {
                monotone = false;
            }
        })?;
        sticky &= run.sticky;
        if run.parikh != reference.parikh && counterexample.is_none() {
            counterexample = Some(run);
        }
    }
    Ok(ParikhReport {
        unique: counterexample.is_none() && monotone,
        monotone,
        sticky,
        reference,
        counterexample,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedDeadlock {
    pub marking: Marking,
    pub parikh: ParikhVector,
    pub shuffles: usize,
}

/// Runs to a deadlock of the routed net, then repeats with `shuffles`
/// random orders and requires the same marking and Parikh vector.
pub fn routed_deadlock(
    routed: &RoutedNet<'_>,
    start: &RoutedState,
    budgets: &[(TransId, u64)],
    step_cap: usize,
    shuffles: usize,
    seed: u64,
) -> Result<RoutedDeadlock, RoutedError> {
    let net = routed.net();
    let base = RunOptions {
        step_cap,
        budgets: budgets.to_vec(),
        ..RunOptions::default()
    };
    let reference = routed.run(start, &base)?;
    for i in 0..shuffles {
        let opts = RunOptions {
            order: Order::Shuffled(seed.wrapping_add(i as u64)),
            ..base.clone()
        };
        let run = routed.run(start, &opts)?;
        if run.final_state.marking != reference.final_state.marking || run.parikh != reference.parikh {
            return Err(RoutedError::DeadlockMismatch(
                net.format_marking(&reference.final_state.marking),
                net.format_marking(&run.final_state.marking),
            ));
        }
    }
    Ok(RoutedDeadlock {
        marking: reference.final_state.marking,
        parikh: reference.parikh,
        shuffles,
    })
}

/// State space of a net with periodic routing. Routing counters are kept
/// modulo their period, so bounded nets have finitely many states.
#[derive(Debug, Clone)]
pub struct RoutedGraph {
    pub states: Vec<RoutedState>,
    pub edges: Vec<(usize, TransId, usize)>,
}

impl RoutedGraph {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_strongly_connected(&self) -> bool {
        is_strongly_connected_graph(self.states.len(), &self.edges)
    }

    /// Every transition occurs in every bottom strongly connected component.
    pub fn is_live(&self, net: &PetriNet) -> bool {
        dead_in_bottom_component(self.states.len(), &self.edges, net.transition_count()).is_none()
    }
}

pub fn routed_reachability(
    net: &PetriNet,
    routing: &RoutingSpec,
    node_cap: usize,
) -> Result<RoutedGraph, RoutedError> {
    if net
        .places()
        .any(|p| matches!(routing.place(p), PlaceRouting::Bernoulli(_)))
    {
        return Err(RoutedError::NotPeriodic);
    }
    let routed = RoutedNet::new(net, routing, RandomStreams::new(0))?;
    let normalise = |mut s: RoutedState| {
        for p in net.places() {
            s.drawn[p.0] %= routing.period(p);
        }
        s
    };
    let root = normalise(routed.init());
    let mut graph = RoutedGraph {
        states: vec![root.clone()],
        edges: Vec::new(),
    };
    let mut index = HashMap::from([(root, 0usize)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let current = graph.states[i].clone();
        for t in routed.enabled(&current) {
            let next = normalise(routed.fire(&current, t)?);
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if graph.states.len() >= node_cap {
                        return Err(RoutedError::Truncated(node_cap));
                    }
                    let j = graph.states.len();
                    index.insert(next.clone(), j);
                    graph.states.push(next);
                    queue.push_back(j);
                    j
                }
            };
            graph.edges.push((i, t, j));
        }
    }
    Ok(graph)
}
