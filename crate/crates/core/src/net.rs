//! Place/transition nets: structure, markings and the untimed token game.
//!
//! A [`PetriNet`] is immutable once built. Places and transitions are stored
//! in lexicographic identifier order, so every iteration over the net (and
//! every tie-break that depends on it) is reproducible.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::ops::Index;

use serde::Serialize;
use thiserror::Error;

/// Index of a place inside a [`PetriNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId(pub usize);

/// Index of a transition inside a [`PetriNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransId(pub usize);

/// A node of the bipartite net graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Place(PlaceId),
    Transition(TransId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Place,
    Transition,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Place => f.write_str("places"),
            NodeKind::Transition => f.write_str("transitions"),
        }
    }
}

/// Structural problems found in a net description, and token-game failures.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("net has no {0}")]
    EmptyNodeSet(NodeKind),
    #[error("identifier `{0}` is declared more than once")]
    DuplicateNode(String),
    #[error("arc ({from}, {to}) names undeclared node `{missing}`")]
    DanglingArc {
        from: String,
        to: String,
        missing: String,
    },
    #[error("arc ({from}, {to}) is listed more than once")]
    DuplicateArc { from: String, to: String },
    #[error("arc ({from}, {to}) does not join a place and a transition")]
    NotBipartite { from: String, to: String },
    #[error("net is not connected: `{unreachable}` cannot be reached from `{root}`")]
    DisconnectedNet { root: String, unreachable: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("transition `{0}` cannot be fired backwards into this marking")]
    NotReverseFirable(String),
    #[error("step {index} of the sequence (`{transition}`) is not enabled")]
    NotEnabledAt { index: usize, transition: String },
}

/// Unvalidated net as read from a file or assembled by hand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetDescription {
    /// Place identifiers with their initial token counts.
    pub places: Vec<(String, u32)>,
    pub transitions: Vec<String>,
    pub arcs: Vec<(String, String)>,
}

/// Checks every structural invariant of a net description and returns all
/// violations at once.
pub fn validate(desc: &NetDescription) -> Result<(), Vec<NetError>> {
    let mut errors = Vec::new();
    if desc.places.is_empty() {
        errors.push(NetError::EmptyNodeSet(NodeKind::Place));
    }
    if desc.transitions.is_empty() {
        errors.push(NetError::EmptyNodeSet(NodeKind::Transition));
    }

    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
    for (id, _) in &desc.places {
        if kinds.insert(id, NodeKind::Place).is_some() {
            errors.push(NetError::DuplicateNode(id.clone()));
        }
    }
    for id in &desc.transitions {
        if kinds.insert(id, NodeKind::Transition).is_some() {
            errors.push(NetError::DuplicateNode(id.clone()));
        }
    }

    let mut seen = HashSet::new();
    let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
    for (from, to) in &desc.arcs {
        let mut dangling = false;
        for end in [from, to] {
            if !kinds.contains_key(end.as_str()) {
                errors.push(NetError::DanglingArc {
                    from: from.clone(),
                    to: to.clone(),
                    missing: end.clone(),
                });
                dangling = true;
            }
        }
        if dangling {
            continue;
        }
        if kinds[from.as_str()] == kinds[to.as_str()] {
            errors.push(NetError::NotBipartite {
                from: from.clone(),
                to: to.clone(),
            });
            continue;
        }
        if !seen.insert((from.as_str(), to.as_str())) {
            errors.push(NetError::DuplicateArc {
                from: from.clone(),
                to: to.clone(),
            });
            continue;
        }
        adjacency.entry(from).or_default().push(to);
        adjacency.entry(to).or_default().push(from);
    }

    // Connectivity of the underlying undirected graph.
    let all: Vec<&str> = desc
        .places
        .iter()
        .map(|(id, _)| id.as_str())
        .chain(desc.transitions.iter().map(String::as_str))
        .collect();
    if let Some(&root) = all.first() {
        let mut reached: HashSet<&str> = HashSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(node) = queue.pop_front() {
            for &next in adjacency.get(node).into_iter().flatten() {
                if reached.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        if let Some(&missing) = all.iter().find(|id| !reached.contains(*id)) {
            errors.push(NetError::DisconnectedNet {
                root: root.to_string(),
                unreachable: missing.to_string(),
            });
        }
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Token count per place, indexed by [`PlaceId`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn zeros(places: usize) -> Self {
        Marking(vec![0; places])
    }

    pub fn from_vec(counts: Vec<u32>) -> Self {
        Marking(counts)
    }

    pub fn get(&self, p: PlaceId) -> u32 {
        self.0[p.0]
    }

    pub fn set(&mut self, p: PlaceId, value: u32) {
        self.0[p.0] = value;
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn max_count(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Coordinate-wise `self >= other`.
    pub fn covers(&self, other: &Marking) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

impl Index<PlaceId> for Marking {
    type Output = u32;

    fn index(&self, p: PlaceId) -> &u32 {
        &self.0[p.0]
    }
}

/// Occurrence count per transition. Negative entries only arise when
/// reverse firings are accounted for.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParikhVector(Vec<i64>);

impl ParikhVector {
    pub fn zeros(transitions: usize) -> Self {
        ParikhVector(vec![0; transitions])
    }

    pub fn from_word(transitions: usize, word: &[TransId]) -> Self {
        let mut v = Self::zeros(transitions);
        for &t in word {
            v.0[t.0] += 1;
        }
        v
    }

    pub fn get(&self, t: TransId) -> i64 {
        self.0[t.0]
    }

    pub fn increment(&mut self, t: TransId) {
        self.0[t.0] += 1;
    }

    pub fn decrement(&mut self, t: TransId) {
        self.0[t.0] -= 1;
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> i64 {
        self.0.iter().sum()
    }

    /// Coordinate-wise `self <= other`.
    pub fn le(&self, other: &ParikhVector) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

/// Incidence matrix with entries in {-1, 0, +1}; self-loops map to 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    places: usize,
    transitions: usize,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn get(&self, p: PlaceId, t: TransId) -> i8 {
        self.entries[p.0 * self.transitions + t.0]
    }

    pub fn places(&self) -> usize {
        self.places
    }

    pub fn transitions(&self) -> usize {
        self.transitions
    }

    /// `N · v` for an integer transition vector.
    pub fn apply(&self, v: &[i64]) -> Vec<i64> {
        (0..self.places)
            .map(|p| {
                (0..self.transitions)
                    .map(|t| i64::from(self.entries[p * self.transitions + t]) * v[t])
                    .sum()
            })
            .collect()
    }

    /// `N · v` for a real transition vector.
    pub fn apply_f64(&self, v: &[f64]) -> Vec<f64> {
        (0..self.places)
            .map(|p| {
                (0..self.transitions)
                    .map(|t| f64::from(self.entries[p * self.transitions + t]) * v[t])
                    .sum()
            })
            .collect()
    }
}

/// Structural class flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NetClass {
    pub is_t_net: bool,
    pub is_s_net: bool,
    pub is_free_choice: bool,
    pub is_extended_free_choice: bool,
}

/// A validated, connected place/transition net with its initial marking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PetriNet {
    place_names: Vec<String>,
    trans_names: Vec<String>,
    place_index: HashMap<String, PlaceId>,
    trans_index: HashMap<String, TransId>,
    t_pre: Vec<Vec<PlaceId>>,
    t_post: Vec<Vec<PlaceId>>,
    p_pre: Vec<Vec<TransId>>,
    p_post: Vec<Vec<TransId>>,
    initial: Marking,
}

impl PetriNet {
    pub fn from_description(desc: &NetDescription) -> Result<Self, Vec<NetError>> {
        validate(desc)?;

        let mut places: Vec<(String, u32)> = desc.places.clone();
        places.sort();
        let mut transitions = desc.transitions.clone();
        transitions.sort();

        let place_index: HashMap<String, PlaceId> = places
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.clone(), PlaceId(i)))
            .collect();
        let trans_index: HashMap<String, TransId> = transitions
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), TransId(i)))
            .collect();

        let mut t_pre = vec![Vec::new(); transitions.len()];
        let mut t_post = vec![Vec::new(); transitions.len()];
        let mut p_pre = vec![Vec::new(); places.len()];
        let mut p_post = vec![Vec::new(); places.len()];
        for (from, to) in &desc.arcs {
            if let (Some(&p), Some(&t)) = (place_index.get(from), trans_index.get(to)) {
                t_pre[t.0].push(p);
                p_post[p.0].push(t);
            } else {
                let t = trans_index[from];
                let p = place_index[to];
                t_post[t.0].push(p);
                p_pre[p.0].push(t);
            }
        }
        for list in t_pre.iter_mut().chain(t_post.iter_mut()) {
            list.sort();
        }
        for list in p_pre.iter_mut().chain(p_post.iter_mut()) {
            list.sort();
        }

        Ok(PetriNet {
            initial: Marking(places.iter().map(|(_, m)| *m).collect()),
            place_names: places.into_iter().map(|(id, _)| id).collect(),
            trans_names: transitions,
            place_index,
            trans_index,
            t_pre,
            t_post,
            p_pre,
            p_post,
        })
    }

    /// Convenience constructor from string slices.
    pub fn build(
        places: &[(&str, u32)],
        transitions: &[&str],
        arcs: &[(&str, &str)],
    ) -> Result<Self, Vec<NetError>> {
        Self::from_description(&NetDescription {
            places: places.iter().map(|(p, m)| (p.to_string(), *m)).collect(),
            transitions: transitions.iter().map(|t| t.to_string()).collect(),
            arcs: arcs
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        })
    }

    pub fn to_description(&self) -> NetDescription {
        NetDescription {
            places: self
                .place_names
                .iter()
                .zip(self.initial.as_slice())
                .map(|(id, &m)| (id.clone(), m))
                .collect(),
            transitions: self.trans_names.clone(),
            arcs: self
                .arcs()
                .into_iter()
                .map(|(a, b)| (self.node_name(a).to_string(), self.node_name(b).to_string()))
                .collect(),
        }
    }

    pub fn place_count(&self) -> usize {
        self.place_names.len()
    }

    pub fn transition_count(&self) -> usize {
        self.trans_names.len()
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> + '_ {
        (0..self.place_names.len()).map(PlaceId)
    }

    pub fn transitions(&self) -> impl Iterator<Item = TransId> + '_ {
        (0..self.trans_names.len()).map(TransId)
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.place_names[p.0]
    }

    pub fn transition_name(&self, t: TransId) -> &str {
        &self.trans_names[t.0]
    }

    pub fn node_name(&self, node: Node) -> &str {
        match node {
            Node::Place(p) => self.place_name(p),
            Node::Transition(t) => self.transition_name(t),
        }
    }

    pub fn place(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition(&self, name: &str) -> Option<TransId> {
        self.trans_index.get(name).copied()
    }

    pub fn place_or_err(&self, name: &str) -> Result<PlaceId, NetError> {
        self.place(name)
            .ok_or_else(|| NetError::UnknownNode(name.to_string()))
    }

    pub fn transition_or_err(&self, name: &str) -> Result<TransId, NetError> {
        self.transition(name)
            .ok_or_else(|| NetError::UnknownNode(name.to_string()))
    }

    pub fn node(&self, name: &str) -> Result<Node, NetError> {
        self.place(name)
            .map(Node::Place)
            .or_else(|| self.transition(name).map(Node::Transition))
            .ok_or_else(|| NetError::UnknownNode(name.to_string()))
    }

    /// Input places of a transition.
    pub fn inputs(&self, t: TransId) -> &[PlaceId] {
        &self.t_pre[t.0]
    }

    /// Output places of a transition.
    pub fn outputs(&self, t: TransId) -> &[PlaceId] {
        &self.t_post[t.0]
    }

    /// Input transitions of a place.
    pub fn producers(&self, p: PlaceId) -> &[TransId] {
        &self.p_pre[p.0]
    }

    /// Output transitions of a place.
    pub fn consumers(&self, p: PlaceId) -> &[TransId] {
        &self.p_post[p.0]
    }

    pub fn preset(&self, node: Node) -> Vec<Node> {
        match node {
            Node::Place(p) => self.producers(p).iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.inputs(t).iter().map(|&p| Node::Place(p)).collect(),
        }
    }

    pub fn postset(&self, node: Node) -> Vec<Node> {
        match node {
            Node::Place(p) => self.consumers(p).iter().map(|&t| Node::Transition(t)).collect(),
            Node::Transition(t) => self.outputs(t).iter().map(|&p| Node::Place(p)).collect(),
        }
    }

    pub fn has_arc(&self, from: Node, to: Node) -> bool {
        match (from, to) {
            (Node::Place(p), Node::Transition(t)) => self.t_pre[t.0].binary_search(&p).is_ok(),
            (Node::Transition(t), Node::Place(p)) => self.t_post[t.0].binary_search(&p).is_ok(),
            _ => false,
        }
    }

    /// All arcs, place-to-transition arcs first, each group in index order.
    pub fn arcs(&self) -> Vec<(Node, Node)> {
        let mut arcs = Vec::new();
        for p in self.places() {
            for &t in self.consumers(p) {
                arcs.push((Node::Place(p), Node::Transition(t)));
            }
        }
        for t in self.transitions() {
            for &p in self.outputs(t) {
                arcs.push((Node::Transition(t), Node::Place(p)));
            }
        }
        arcs
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn with_initial_marking(&self, marking: Marking) -> PetriNet {
        assert_eq!(marking.len(), self.place_count(), "marking size mismatch");
        PetriNet {
            initial: marking,
            ..self.clone()
        }
    }

    /// Builds a marking from `(place, count)` pairs; unnamed places get 0.
    pub fn marking(&self, counts: &[(&str, u32)]) -> Result<Marking, NetError> {
        let mut m = Marking::zeros(self.place_count());
        for &(name, c) in counts {
            m.set(self.place_or_err(name)?, c);
        }
        Ok(m)
    }

    /// Renders the non-zero entries, e.g. `(p1:1,p3:2)`.
    pub fn format_marking(&self, m: &Marking) -> String {
        let body: Vec<String> = self
            .places()
            .filter(|&p| m[p] > 0)
            .map(|p| format!("{}:{}", self.place_name(p), m[p]))
            .collect();
        format!("({})", body.join(","))
    }

    pub fn format_word(&self, word: &[TransId]) -> Vec<String> {
        word.iter()
            .map(|&t| self.transition_name(t).to_string())
            .collect()
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let (np, nt) = (self.place_count(), self.transition_count());
        let mut entries = vec![0i8; np * nt];
        for t in self.transitions() {
            for &p in self.outputs(t) {
                entries[p.0 * nt + t.0] += 1;
            }
            for &p in self.inputs(t) {
                entries[p.0 * nt + t.0] -= 1;
            }
        }
        IncidenceMatrix {
            places: np,
            transitions: nt,
            entries,
        }
    }

    pub fn is_enabled(&self, m: &Marking, t: TransId) -> bool {
        self.inputs(t).iter().all(|&p| m[p] > 0)
    }

    pub fn enabled_transitions(&self, m: &Marking) -> Vec<TransId> {
        self.transitions().filter(|&t| self.is_enabled(m, t)).collect()
    }

    pub fn fire(&self, m: &Marking, t: TransId) -> Result<Marking, NetError> {
        if !self.is_enabled(m, t) {
            return Err(NetError::NotEnabled(self.transition_name(t).to_string()));
        }
        let mut next = m.clone();
        for &p in self.inputs(t) {
            next.0[p.0] -= 1;
        }
        for &p in self.outputs(t) {
            next.0[p.0] += 1;
        }
        Ok(next)
    }

    /// Returns the unique `M1` with `M1 --t--> m`, if there is one.
    pub fn reverse_fire(&self, m: &Marking, t: TransId) -> Result<Marking, NetError> {
        let mut prev = m.clone();
        for &p in self.outputs(t) {
            if prev.0[p.0] == 0 {
                return Err(NetError::NotReverseFirable(
                    self.transition_name(t).to_string(),
                ));
            }
            prev.0[p.0] -= 1;
        }
        for &p in self.inputs(t) {
            prev.0[p.0] += 1;
        }
        Ok(prev)
    }

    /// Fires `word` step by step, reporting the first step that is not enabled.
    pub fn fire_sequence(
        &self,
        m: &Marking,
        word: &[TransId],
    ) -> Result<(Marking, ParikhVector), NetError> {
        let mut current = m.clone();
        let mut parikh = ParikhVector::zeros(self.transition_count());
        for (index, &t) in word.iter().enumerate() {
            current = self.fire(&current, t).map_err(|_| NetError::NotEnabledAt {
                index,
                transition: self.transition_name(t).to_string(),
            })?;
            parikh.increment(t);
        }
        Ok((current, parikh))
    }

    pub fn classify(&self) -> NetClass {
        let is_t_net = self
            .places()
            .all(|p| self.producers(p).len() == 1 && self.consumers(p).len() == 1);
        let is_s_net = self
            .transitions()
            .all(|t| self.inputs(t).len() == 1 && self.outputs(t).len() == 1);
        let is_free_choice = self.places().all(|p| {
            self.consumers(p)
                .iter()
                .all(|&q| self.consumers(p).len() == 1 || self.inputs(q) == [p])
        });
        let is_extended_free_choice = self.places().all(|p| {
            let consumers = self.consumers(p);
            consumers
                .iter()
                .all(|&q| self.inputs(q) == self.inputs(consumers[0]))
        });
        NetClass {
            is_t_net,
            is_s_net,
            is_free_choice,
            is_extended_free_choice,
        }
    }

    /// Least node set containing `node`, closed under "a place pulls in its
    /// output transitions" and "a transition pulls in its input places".
    pub fn cluster(&self, node: Node) -> BTreeSet<Node> {
        let mut cluster = BTreeSet::from([node]);
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            let pulled: Vec<Node> = match x {
                Node::Place(p) => self.consumers(p).iter().map(|&t| Node::Transition(t)).collect(),
                Node::Transition(t) => self.inputs(t).iter().map(|&p| Node::Place(p)).collect(),
            };
            for y in pulled {
                if cluster.insert(y) {
                    stack.push(y);
                }
            }
        }
        cluster
    }

    /// A transition is non-conflicting when it is the only consumer of each
    /// of its input places.
    pub fn is_non_conflicting(&self, t: TransId) -> bool {
        self.inputs(t).iter().all(|&p| self.consumers(p).len() == 1)
    }

    /// Directed reachability between all nodes, checked by one forward and
    /// one backward search.
    pub fn is_strongly_connected(&self) -> bool {
        let np = self.place_count();
        let total = np + self.transition_count();
        let forward = |i: usize| -> Vec<usize> {
            if i < np {
                self.consumers(PlaceId(i)).iter().map(|t| np + t.0).collect()
            } else {
                self.outputs(TransId(i - np)).iter().map(|p| p.0).collect()
            }
        };
        let backward = |i: usize| -> Vec<usize> {
            if i < np {
                self.producers(PlaceId(i)).iter().map(|t| np + t.0).collect()
            } else {
                self.inputs(TransId(i - np)).iter().map(|p| p.0).collect()
            }
        };
        let covers_all = |step: &dyn Fn(usize) -> Vec<usize>| {
            let mut seen = vec![false; total];
            seen[0] = true;
            let mut stack = vec![0];
            let mut count = 1;
            while let Some(i) = stack.pop() {
                for j in step(i) {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
            count == total
        };
        covers_all(&forward) && covers_all(&backward)
    }
}
