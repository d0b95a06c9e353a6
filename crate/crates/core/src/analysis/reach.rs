use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::net::{Marking, PetriNet, TransId};

/// Default limit on explored markings.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Explicit state space rooted at a marking. Node 0 is the root.
#[derive(Debug, Clone)]
pub struct ReachabilityGraph {
    markings: Vec<Marking>,
    index: HashMap<Marking, usize>,
    edges: Vec<(usize, TransId, usize)>,
    truncated: bool,
}

impl ReachabilityGraph {
    pub fn markings(&self) -> &[Marking] {
        &self.markings
    }

    pub fn edges(&self) -> &[(usize, TransId, usize)] {
        &self.edges
    }

    pub fn root(&self) -> &Marking {
        &self.markings[0]
    }

    pub fn len(&self) -> usize {
        self.markings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markings.is_empty()
    }

    /// True when the node cap was hit and the graph is incomplete.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn index_of(&self, m: &Marking) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn contains(&self, m: &Marking) -> bool {
        self.index.contains_key(m)
    }

    /// Outgoing edges per node.
    pub fn successors(&self) -> Vec<Vec<(TransId, usize)>> {
        let mut succ = vec![Vec::new(); self.markings.len()];
        for &(from, t, to) in &self.edges {
            succ[from].push((t, to));
        }
        succ
    }

    /// Nodes from which `target` can be reached using only edges accepted by
    /// `allowed`.
    pub fn can_reach(&self, target: usize, allowed: impl Fn(TransId) -> bool) -> Vec<bool> {
        let mut pred = vec![Vec::new(); self.markings.len()];
        for &(from, t, to) in &self.edges {
            if allowed(t) {
                pred[to].push(from);
            }
        }
        let mut reached = vec![false; self.markings.len()];
        reached[target] = true;
        let mut stack = vec![target];
        while let Some(n) = stack.pop() {
            for &m in &pred[n] {
                if !reached[m] {
                    reached[m] = true;
                    stack.push(m);
                }
            }
        }
        reached
    }

    /// Nodes reachable from the root using only edges accepted by `allowed`.
    pub fn reachable_from_root(&self, allowed: impl Fn(TransId) -> bool) -> Vec<bool> {
        let succ = self.successors();
        let mut reached = vec![false; self.markings.len()];
        reached[0] = true;
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            for &(t, m) in &succ[n] {
                if allowed(t) && !reached[m] {
                    reached[m] = true;
                    stack.push(m);
                }
            }
        }
        reached
    }

    /// Graphviz rendering, one node per marking and one edge per firing.
    pub fn to_dot(&self, net: &PetriNet) -> String {
        let mut out = String::from("digraph reachability {\n");
        for (i, m) in self.markings.iter().enumerate() {
            let _ = writeln!(out, "  m{i} [label=\"{}\"];", net.format_marking(m));
        }
        for &(from, t, to) in &self.edges {
            let _ = writeln!(
                out,
                "  m{from} -> m{to} [label=\"{}\"];",
                net.transition_name(t)
            );
        }
        out.push_str("}\n");
        out
    }
}

/// Breadth-first closure of `marking` under firing. Stops adding nodes once
/// `node_cap` markings are known and flags the graph as truncated.
pub fn reachability(net: &PetriNet, marking: &Marking, node_cap: usize) -> ReachabilityGraph {
    assert!(node_cap > 0, "node cap must be positive");
    let mut graph = ReachabilityGraph {
        markings: vec![marking.clone()],
        index: HashMap::from([(marking.clone(), 0)]),
        edges: Vec::new(),
        truncated: false,
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let current = graph.markings[i].clone();
        for t in net.transitions() {
            let Ok(next) = net.fire(&current, t) else {
                continue;
            };
            let j = match graph.index.get(&next) {
                Some(&j) => j,
                None => {
                    if graph.markings.len() >= node_cap {
                        graph.truncated = true;
                        continue;
                    }
                    let j = graph.markings.len();
                    graph.index.insert(next.clone(), j);
                    graph.markings.push(next);
                    queue.push_back(j);
                    j
                }
            };
            graph.edges.push((i, t, j));
        }
    }
    graph
}

/// Outcome of the explicit liveness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Liveness {
    Live,
    /// From `marking`, `transition` can never be enabled again.
    NotLive { marking: Marking, transition: TransId },
    /// The state space exceeded the cap.
    Inconclusive,
}

impl Liveness {
    pub fn is_live(&self) -> bool {
        matches!(self, Liveness::Live)
    }
}

/// Explicit liveness: every transition must label an edge inside every
/// bottom strongly connected component of the reachability graph.
pub fn is_live(net: &PetriNet, node_cap: usize) -> Liveness {
    let graph = reachability(net, net.initial_marking(), node_cap);
    if graph.truncated() {
        return Liveness::Inconclusive;
    }
    liveness_of_graph(net, &graph)
}

pub(crate) fn liveness_of_graph(net: &PetriNet, graph: &ReachabilityGraph) -> Liveness {
    match dead_in_bottom_component(graph.len(), graph.edges(), net.transition_count()) {
        None => Liveness::Live,
        Some((node, transition)) => Liveness::NotLive {
            marking: graph.markings()[node].clone(),
            transition,
        },
    }
}

/// Looks for a bottom strongly connected component of a labelled graph in
/// which some transition never occurs. Returns the lowest-indexed node of
/// such a component together with the first missing transition.
pub(crate) fn dead_in_bottom_component(
    nodes: usize,
    edges: &[(usize, TransId, usize)],
    transitions: usize,
) -> Option<(usize, TransId)> {
    let mut g: DiGraph<(), TransId> = DiGraph::with_capacity(nodes, edges.len());
    let ids: Vec<_> = (0..nodes).map(|_| g.add_node(())).collect();
    for &(from, t, to) in edges {
        g.add_edge(ids[from], ids[to], t);
    }
    let mut component = vec![0usize; nodes];
    let sccs = tarjan_scc(&g);
    for (c, scc) in sccs.iter().enumerate() {
        for n in scc {
            component[n.index()] = c;
        }
    }
    let mut bottom = vec![true; sccs.len()];
    let mut labels = vec![vec![false; transitions]; sccs.len()];
    for &(from, t, to) in edges {
        let (cf, ct) = (component[from], component[to]);
        if cf == ct {
            labels[cf][t.0] = true;
        } else {
            bottom[cf] = false;
        }
    }
    let mut witness: Option<(usize, TransId)> = None;
    for (c, scc) in sccs.iter().enumerate() {
        if !bottom[c] {
            continue;
        }
        if let Some(t) = (0..transitions).map(TransId).find(|t| !labels[c][t.0]) {
            let node = scc.iter().map(|n| n.index()).min().unwrap();
            if witness.is_none_or(|(w, _)| node < w) {
                witness = Some((node, t));
            }
        }
    }
    witness
}

/// True when the labelled graph forms a single strongly connected
/// component.
pub(crate) fn is_strongly_connected_graph(nodes: usize, edges: &[(usize, TransId, usize)]) -> bool {
    let mut g: DiGraph<(), ()> = DiGraph::with_capacity(nodes, edges.len());
    let ids: Vec<_> = (0..nodes).map(|_| g.add_node(())).collect();
    for &(from, _, to) in edges {
        g.add_edge(ids[from], ids[to], ());
    }
    tarjan_scc(&g).len() == 1
}
