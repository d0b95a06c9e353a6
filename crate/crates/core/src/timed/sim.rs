//! Event-driven simulation.
//!
//! A transition begins a firing as soon as each of its input places holds a
//! free token assigned to it; the consumed tokens stay frozen until the
//! firing completes. Several firings of one transition may overlap. Tokens
//! are numbered per place in the order they physically arrive, and the
//! `n`-th token takes routing decision `u_p(n)`. The `n`-th firing of `t`
//! lasts `sigma_t(n)`. Events at the same instant are handled in
//! `(instant, transition, firing index)` order.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use crate::net::{Marking, PetriNet, PlaceId, TransId};
use crate::routing::RoutingSpec;
use crate::stream::RandomStreams;

use super::{TimedError, TimingSpec};

/// How a transition without input places fires.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSchedule {
    /// Infinitely many firings at instant 0: every output place holds an
    /// unlimited supply of tokens.
    Saturated,
    /// One completed firing at each listed instant.
    Instants(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Handle every event up to and including this instant.
    MaxClock(f64),
    /// Stop once the transition has completed this many firings.
    MaxFirings(TransId, u64),
    /// Stop after this many completions.
    MaxEvents(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub streams: RandomStreams,
    pub stop: StopRule,
    /// Transition whose firings never complete.
    pub frozen: Option<TransId>,
    pub sources: Vec<(TransId, SourceSchedule)>,
}

impl SimConfig {
    pub fn new(seed: u64, stop: StopRule) -> Self {
        SimConfig {
            streams: RandomStreams::new(seed),
            stop,
            frozen: None,
            sources: Vec::new(),
        }
    }
}

/// Completion instants per transition, in nondecreasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct DaterLog {
    names: Vec<String>,
    instants: Vec<Vec<f64>>,
}

impl DaterLog {
    fn new(net: &PetriNet) -> Self {
        DaterLog {
            names: net.transitions().map(|t| net.transition_name(t).to_string()).collect(),
            instants: vec![Vec::new(); net.transition_count()],
        }
    }

    /// `X_t(1), X_t(2), ...`
    pub fn daters(&self, t: TransId) -> &[f64] {
        &self.instants[t.0]
    }

    /// Number of completions of `t` up to and including `time`.
    pub fn count_until(&self, t: TransId, time: f64) -> usize {
        self.instants[t.0].partition_point(|&x| x <= time)
    }

    pub fn total(&self) -> usize {
        self.instants.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Rows `transition,n,instant`, grouped by transition in id order.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["transition", "n", "instant"]).expect("in-memory write");
        for (name, xs) in self.names.iter().zip(&self.instants) {
            for (i, x) in xs.iter().enumerate() {
                w.write_record([name.clone(), (i + 1).to_string(), x.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
    }

    /// Empirical throughputs at `horizon`.
    pub fn throughput_estimate(&self, horizon: f64) -> ThroughputEstimate {
        assert!(horizon > 0.0, "horizon must be positive");
        ThroughputEstimate {
            rates: (0..self.instants.len())
                .map(|i| self.count_until(TransId(i), horizon) as f64 / horizon)
                .collect(),
            cycle_times: self
                .instants
                .iter()
                .map(|xs| xs.last().map(|&x| x / xs.len() as f64))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputEstimate {
    /// `X_t(horizon) / horizon` per transition.
    pub rates: Vec<f64>,
    /// `X_t(n) / n` for the last completed `n`, per transition.
    pub cycle_times: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Completion {
    pub transition: TransId,
    /// Firing index of the completed firing (begin order).
    pub index: u64,
    pub instant: f64,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    instant: f64,
    transition: TransId,
    index: u64,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.instant
            .total_cmp(&other.instant)
            .then(self.transition.cmp(&other.transition))
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Rule,
    /// No event is scheduled any more.
    Quiescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub log: DaterLog,
    pub clock: f64,
    pub events: u64,
    pub begun: Vec<u64>,
    pub completed: Vec<u64>,
    /// Free tokens at the end.
    pub marking: Marking,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    net: &'a PetriNet,
    routing: &'a RoutingSpec,
    timing: &'a TimingSpec,
    streams: RandomStreams,
    frozen: Option<TransId>,
    is_source: Vec<bool>,
    infinite: Vec<bool>,
    clock: f64,
    pending: Vec<VecDeque<Option<TransId>>>,
    drawn: Vec<u64>,
    held: Vec<u32>,
    in_progress: Vec<u64>,
    begun: Vec<u64>,
    completed: Vec<u64>,
    agenda: BinaryHeap<Reverse<Event>>,
    log: DaterLog,
    events: u64,
}

impl<'a> Simulator<'a> {
    /// Starts from the initial marking of `net`, with the initial tokens of
    /// each place numbered first.
    pub fn new(
        net: &'a PetriNet,
        routing: &'a RoutingSpec,
        timing: &'a TimingSpec,
        config: &SimConfig,
    ) -> Result<Self, TimedError> {
        routing.validate(net)?;
        let invalid = |msg: String| Err(TimedError::InvalidConfig(msg));
        let is_source: Vec<bool> = net.transitions().map(|t| net.inputs(t).is_empty()).collect();
        let mut infinite = vec![false; net.place_count()];
        let mut schedules = vec![None; net.transition_count()];
        for (t, schedule) in &config.sources {
            if !is_source[t.0] {
                return invalid(format!("`{}` has input places", net.transition_name(*t)));
            }
            schedules[t.0] = Some(schedule);
        }
        for t in net.transitions() {
            if is_source[t.0] && schedules[t.0].is_none() {
                return invalid(format!("source `{}` has no schedule", net.transition_name(t)));
            }
            if !is_source[t.0] && timing.distribution(t).is_none() {
                return Err(TimedError::MissingTiming(net.transition_name(t).to_string()));
            }
        }
        match config.stop {
            StopRule::MaxClock(h) if !(h.is_finite() && h >= 0.0) => {
                return invalid(format!("horizon {h} must be finite and non-negative"));
            }
            _ => {}
        }

        let mut sim = Simulator {
            net,
            routing,
            timing,
            streams: config.streams,
            frozen: config.frozen,
            is_source,
            infinite: vec![false; net.place_count()],
            clock: 0.0,
            pending: vec![VecDeque::new(); net.place_count()],
            drawn: vec![0; net.place_count()],
            held: vec![0; net.place_count()],
            in_progress: vec![0; net.transition_count()],
            begun: vec![0; net.transition_count()],
            completed: vec![0; net.transition_count()],
            agenda: BinaryHeap::new(),
            log: DaterLog::new(net),
            events: 0,
        };
        for t in net.transitions() {
            match schedules[t.0] {
                Some(SourceSchedule::Saturated) => {
                    for &p in net.outputs(t) {
                        if net.consumers(p).len() > 1 {
                            return invalid(format!(
                                "saturated place `{}` has several output transitions",
                                net.place_name(p)
                            ));
                        }
                        infinite[p.0] = true;
                    }
                }
                Some(SourceSchedule::Instants(xs)) => {
                    for (i, &x) in xs.iter().enumerate() {
                        if !(x.is_finite() && x >= 0.0) {
                            return invalid(format!("source instant {x} must be finite and non-negative"));
                        }
                        sim.agenda.push(Reverse(Event {
                            instant: x,
                            transition: t,
                            index: i as u64 + 1,
                        }));
                    }
                }
                None => {}
            }
        }
        sim.infinite = infinite;
        for p in net.places() {
            if !sim.infinite[p.0] {
                for _ in 0..net.initial_marking()[p] {
                    sim.deposit(p);
                }
            }
        }
        sim.begin_enabled();
        Ok(sim)
    }

    fn deposit(&mut self, p: PlaceId) {
        if self.infinite[p.0] {
            return;
        }
        self.drawn[p.0] += 1;
        let dest = self.routing.decide(p, self.drawn[p.0], &self.streams);
        self.pending[p.0].push_back(dest);
    }

    fn can_begin(&self, t: TransId) -> bool {
        !self.is_source[t.0]
            && self
                .net
                .inputs(t)
                .iter()
                .all(|&p| self.infinite[p.0] || self.pending[p.0].contains(&Some(t)))
    }

    fn begin_enabled(&mut self) {
        for t in self.net.transitions() {
            while self.can_begin(t) {
                self.begin(t);
            }
        }
    }

    fn begin(&mut self, t: TransId) {
        self.begun[t.0] += 1;
        let n = self.begun[t.0];
        for &p in self.net.inputs(t) {
            if self.infinite[p.0] {
                continue;
            }
            let queue = &mut self.pending[p.0];
            let i = queue.iter().position(|&d| d == Some(t)).expect("can begin");
            queue.remove(i);
            self.held[p.0] += 1;
        }
        self.in_progress[t.0] += 1;
        if self.frozen == Some(t) {
            return;
        }
        let duration = self.timing.sample(t, n, &self.streams);
        self.agenda.push(Reverse(Event {
            instant: self.clock + duration,
            transition: t,
            index: n,
        }));
    }

    /// Handles the next event and starts every firing it enables.
    pub fn step(&mut self) -> Option<Completion> {
        let Reverse(ev) = self.agenda.pop()?;
        let t = ev.transition;
        self.clock = ev.instant;
        self.events += 1;
        self.completed[t.0] += 1;
        self.log.instants[t.0].push(ev.instant);
        if !self.is_source[t.0] {
            self.in_progress[t.0] -= 1;
            for &p in self.net.inputs(t) {
                if !self.infinite[p.0] {
                    self.held[p.0] -= 1;
                }
            }
        }
        for &p in self.net.outputs(t) {
            self.deposit(p);
        }
        self.begin_enabled();
        Some(Completion {
            transition: t,
            index: ev.index,
            instant: ev.instant,
        })
    }

    /// Instant of the next event, if any.
    pub fn next_instant(&self) -> Option<f64> {
        self.agenda.peek().map(|Reverse(ev)| ev.instant)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// No firing will ever complete again.
    pub fn is_quiescent(&self) -> bool {
        self.agenda.is_empty()
    }

    /// Free tokens (saturated places count as empty).
    pub fn free_marking(&self) -> Marking {
        Marking::from_vec(self.pending.iter().map(|q| q.len() as u32).collect())
    }

    /// Free tokens plus those frozen by firings in progress.
    pub fn total_marking(&self) -> Marking {
        Marking::from_vec(
            self.pending
                .iter()
                .zip(&self.held)
                .map(|(q, &h)| q.len() as u32 + h)
                .collect(),
        )
    }

    pub fn in_progress(&self, t: TransId) -> u64 {
        self.in_progress[t.0]
    }

    pub fn begun(&self, t: TransId) -> u64 {
        self.begun[t.0]
    }

    pub fn completed(&self, t: TransId) -> u64 {
        self.completed[t.0]
    }

    pub fn log(&self) -> &DaterLog {
        &self.log
    }

    pub fn run(mut self, stop: StopRule) -> SimOutcome {
        let reason = loop {
            match stop {
                StopRule::MaxEvents(n) if self.events >= n => break StopReason::Rule,
                StopRule::MaxFirings(t, n) if self.completed[t.0] >= n => break StopReason::Rule,
                _ => {}
            }
            let Some(next) = self.next_instant() else {
                if let StopRule::MaxClock(h) = stop {
                    self.clock = h;
                }
                break StopReason::Quiescent;
            };
            if let StopRule::MaxClock(h) = stop {
                if next > h {
                    self.clock = h;
                    break StopReason::Rule;
                }
            }
            self.step();
        };
        SimOutcome {
            marking: self.free_marking(),
            log: self.log,
            clock: self.clock,
            events: self.events,
            begun: self.begun,
            completed: self.completed,
            stop: reason,
        }
    }
}

pub fn simulate(
    net: &PetriNet,
    routing: &RoutingSpec,
    timing: &TimingSpec,
    config: &SimConfig,
) -> Result<SimOutcome, TimedError> {
    Ok(Simulator::new(net, routing, timing, config)?.run(config.stop))
}
