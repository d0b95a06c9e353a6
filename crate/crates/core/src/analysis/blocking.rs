//! Blocking markings of live and bounded free-choice nets.
//!
//! [`LiveBoundedFcn::blocking_marking`] is the polynomial construction: every
//! place outside the cluster of the blocked transition `b` is allocated one
//! output transition lying on a shortest path to `b`, and allocated
//! transitions are fired until none is enabled. [`blocking_oracle`] is the
//! exhaustive ground truth it is checked against.

use std::collections::{BTreeSet, VecDeque};

use crate::net::{Marking, Node, ParikhVector, PetriNet, TransId};

use super::cover::{is_bounded_with_cap, Boundedness};
use super::reach::{is_live, reachability, ReachabilityGraph, DEFAULT_NODE_CAP};
use super::siphon::{commoner_live, MAX_SIPHON_PLACES};
use super::{AnalysisError, Hypothesis};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockingResult {
    pub blocking_marking: Marking,
    /// Firing sequence from the initial marking; never uses a transition of
    /// the blocked cluster.
    pub witness: Vec<TransId>,
    pub parikh: ParikhVector,
    /// Transitions enabled in `blocking_marking`: `b` alone, or the whole
    /// cluster of `b` when `b` is conflicting.
    pub enabled: Vec<TransId>,
}

/// Checks liveness and boundedness, returning the bound. Liveness uses the
/// siphon–trap test when the net is free choice and small enough, and the
/// explicit state space otherwise.
pub fn check_live_bounded(net: &PetriNet, node_cap: usize) -> Result<u32, Hypothesis> {
    let bound = match is_bounded_with_cap(net, node_cap) {
        Boundedness::Bounded(k) => k,
        Boundedness::Unbounded(_) => return Err(Hypothesis::Unbounded),
        Boundedness::Inconclusive => return Err(Hypothesis::Inconclusive),
    };
    if net.classify().is_free_choice && net.place_count() <= MAX_SIPHON_PLACES {
        let report = commoner_live(net).expect("free choice and small enough");
        if !report.is_live() {
            return Err(Hypothesis::NotLive);
        }
    } else {
        match is_live(net, node_cap) {
            super::Liveness::Live => {}
            super::Liveness::NotLive { .. } => return Err(Hypothesis::NotLive),
            super::Liveness::Inconclusive => return Err(Hypothesis::Inconclusive),
        }
    }
    Ok(bound)
}

/// A net certified to be free choice, live and bounded.
#[derive(Debug, Clone, Copy)]
pub struct LiveBoundedFcn<'a> {
    net: &'a PetriNet,
    bound: u32,
}

impl<'a> LiveBoundedFcn<'a> {
    pub fn certify(net: &'a PetriNet, node_cap: usize) -> Result<Self, AnalysisError> {
        if !net.classify().is_free_choice {
            return Err(AnalysisError::HypothesisViolated(Hypothesis::NotFreeChoice));
        }
        let bound = check_live_bounded(net, node_cap).map_err(AnalysisError::HypothesisViolated)?;
        Ok(LiveBoundedFcn { net, bound })
    }

    pub fn net(&self) -> &'a PetriNet {
        self.net
    }

    pub fn bound(&self) -> u32 {
        self.bound
    }

    /// `m · T(T+1)/2` with `m` the bound and `T` the transition count.
    pub fn witness_bound(&self) -> u64 {
        let t = self.net.transition_count() as u64;
        u64::from(self.bound) * t * (t + 1) / 2
    }

    /// Shortest-path allocation `t(p)` for every place outside the cluster
    /// of `b`. Ties are broken by transition order.
    pub fn allocation(&self, b: TransId) -> Result<Vec<Option<TransId>>, AnalysisError> {
        let net = self.net;
        let cluster = net.cluster(Node::Transition(b));
        let np = net.place_count();
        // Reverse breadth-first distances to b over the node graph.
        let mut place_dist = vec![usize::MAX; np];
        let mut trans_dist = vec![usize::MAX; net.transition_count()];
        trans_dist[b.0] = 0;
        let mut queue = VecDeque::from([Node::Transition(b)]);
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Transition(t) => {
                    for &p in net.inputs(t) {
                        if place_dist[p.0] == usize::MAX {
                            place_dist[p.0] = trans_dist[t.0] + 1;
                            queue.push_back(Node::Place(p));
                        }
                    }
                }
                Node::Place(p) => {
                    for &t in net.producers(p) {
                        if trans_dist[t.0] == usize::MAX {
                            trans_dist[t.0] = place_dist[p.0] + 1;
                            queue.push_back(Node::Transition(t));
                        }
                    }
                }
            }
        }
        net.places()
            .map(|p| {
                if cluster.contains(&Node::Place(p)) {
                    return Ok(None);
                }
                let chosen = net
                    .consumers(p)
                    .iter()
                    .copied()
                    .filter(|t| trans_dist[t.0] != usize::MAX)
                    .min_by_key(|t| (trans_dist[t.0], *t));
                match chosen {
                    Some(t) if trans_dist[t.0] + 1 == place_dist[p.0] => Ok(Some(t)),
                    _ => Err(AnalysisError::BlockingFailed(format!(
                        "no path from `{}` to `{}`",
                        net.place_name(p),
                        net.transition_name(b)
                    ))),
                }
            })
            .collect()
    }

    pub fn blocking_marking(&self, b: TransId) -> Result<BlockingResult, AnalysisError> {
        let net = self.net;
        let allocation = self.allocation(b)?;
        let allocated: BTreeSet<TransId> = allocation.iter().flatten().copied().collect();

        let limit = self.witness_bound();
        let mut marking = net.initial_marking().clone();
        let mut witness = Vec::new();
        while let Some(&t) = allocated.iter().find(|&&t| net.is_enabled(&marking, t)) {
            if witness.len() as u64 >= limit.max(1) {
                return Err(AnalysisError::BlockingFailed(format!(
                    "allocated run exceeded {limit} firings"
                )));
            }
            marking = net.fire(&marking, t)?;
            witness.push(t);
        }

        let expected: Vec<TransId> = net
            .cluster(Node::Transition(b))
            .into_iter()
            .filter_map(|n| match n {
                Node::Transition(t) => Some(t),
                Node::Place(_) => None,
            })
            .collect();
        let enabled = net.enabled_transitions(&marking);
        if enabled != expected {
            return Err(AnalysisError::BlockingFailed(format!(
                "enabled transitions {:?} in {}",
                net.format_word(&enabled),
                net.format_marking(&marking)
            )));
        }
        Ok(BlockingResult {
            parikh: ParikhVector::from_word(net.transition_count(), &witness),
            blocking_marking: marking,
            witness,
            enabled,
        })
    }
}

/// Certifies the hypotheses (free choice, live, bounded) and computes the
/// blocking marking of `b`, or of its cluster when `b` is conflicting.
pub fn blocking_marking(net: &PetriNet, b: TransId) -> Result<BlockingResult, AnalysisError> {
    LiveBoundedFcn::certify(net, DEFAULT_NODE_CAP)?.blocking_marking(b)
}

/// Brute-force blocking sets over the reachability graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BlockingOracle {
    /// Reachable markings in which no transition other than `b` is enabled.
    pub blocking: BTreeSet<Marking>,
    /// The subset of `blocking` reachable without firing `b`.
    pub avoiding: BTreeSet<Marking>,
}

pub fn blocking_oracle(
    net: &PetriNet,
    b: TransId,
    node_cap: usize,
) -> Result<BlockingOracle, AnalysisError> {
    let graph = reachability(net, net.initial_marking(), node_cap);
    let oracle = oracle_on_graph(net, &graph, b);
    if graph.truncated() {
        return Err(AnalysisError::Truncated {
            cap: node_cap,
            partial: Box::new(oracle),
        });
    }
    Ok(oracle)
}

pub(crate) fn oracle_on_graph(net: &PetriNet, graph: &ReachabilityGraph, b: TransId) -> BlockingOracle {
    let avoiding_reach = graph.reachable_from_root(|t| t != b);
    let mut oracle = BlockingOracle::default();
    for (i, m) in graph.markings().iter().enumerate() {
        if net.transitions().all(|t| t == b || !net.is_enabled(m, t)) {
            oracle.blocking.insert(m.clone());
            if avoiding_reach[i] {
                oracle.avoiding.insert(m.clone());
            }
        }
    }
    oracle
}

/// True when `target` can be reached from every node of `graph` without
/// firing `b`.
pub fn is_home_state(graph: &ReachabilityGraph, target: &Marking, b: TransId) -> bool {
    match graph.index_of(target) {
        Some(i) => graph.can_reach(i, |t| t != b).into_iter().all(|r| r),
        None => false,
    }
}
