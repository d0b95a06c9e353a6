//! Boundedness by Karp–Miller style search.
//!
//! The search expands concrete reachable markings breadth-first and compares
//! every new marking with its ancestors on the search tree. The first strict
//! domination `M1 < M2` with `M1` an ancestor of `M2` proves unboundedness
//! (the path between them can be pumped). If the net is bounded no such pair
//! exists and the search ends with the full reachability set.

use std::collections::{HashSet, VecDeque};

use crate::net::{Marking, PetriNet, PlaceId, TransId};

use super::reach::DEFAULT_NODE_CAP;

/// A pumpable sequence: `prefix` leads from the initial marking to
/// `smaller`, and `pump` leads from `smaller` to `larger > smaller`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundedWitness {
    pub smaller: Marking,
    pub larger: Marking,
    pub prefix: Vec<TransId>,
    pub pump: Vec<TransId>,
    /// Places whose count strictly increases along `pump`.
    pub growing: Vec<PlaceId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundedness {
    /// Maximal token count over all reachable markings and places.
    Bounded(u32),
    Unbounded(Box<UnboundedWitness>),
    /// More than the allowed number of markings were explored.
    Inconclusive,
}

impl Boundedness {
    pub fn bound(&self) -> Option<u32> {
        match self {
            Boundedness::Bounded(k) => Some(*k),
            _ => None,
        }
    }
}

pub fn is_bounded(net: &PetriNet) -> Boundedness {
    is_bounded_with_cap(net, DEFAULT_NODE_CAP)
}

pub fn is_bounded_with_cap(net: &PetriNet, node_cap: usize) -> Boundedness {
    struct TreeNode {
        marking: Marking,
        parent: Option<(usize, TransId)>,
    }
    let root = net.initial_marking().clone();
    let mut bound = root.max_count();
    let mut seen: HashSet<Marking> = HashSet::from([root.clone()]);
    let mut tree = vec![TreeNode {
        marking: root,
        parent: None,
    }];
    let mut queue = VecDeque::from([0usize]);

    let path_to = |tree: &[TreeNode], mut i: usize, stop: usize| {
        let mut word = Vec::new();
        while i != stop {
            let (parent, t) = tree[i].parent.expect("stop is an ancestor");
            word.push(t);
            i = parent;
        }
        word.reverse();
        word
    };

    while let Some(i) = queue.pop_front() {
        let current = tree[i].marking.clone();
        for t in net.transitions() {
            let Ok(next) = net.fire(&current, t) else {
                continue;
            };
            if seen.contains(&next) {
                continue;
            }
            // Ancestors of the new node: i, parent(i), ...
            let mut anc = Some(i);
            while let Some(a) = anc {
                let old = &tree[a].marking;
                if next.covers(old) {
                    // `next` is new, hence different from every ancestor.
                    let growing = net.places().filter(|&p| next[p] > old[p]).collect();
                    let mut pump = path_to(&tree, i, a);
                    pump.push(t);
                    return Boundedness::Unbounded(Box::new(UnboundedWitness {
                        smaller: old.clone(),
                        larger: next,
                        prefix: path_to(&tree, a, 0),
                        pump,
                        growing,
                    }));
                }
                anc = tree[a].parent.map(|(p, _)| p);
            }
            if tree.len() >= node_cap {
                return Boundedness::Inconclusive;
            }
            bound = bound.max(next.max_count());
            seen.insert(next.clone());
            tree.push(TreeNode {
                marking: next,
                parent: Some((i, t)),
            });
            queue.push_back(tree.len() - 1);
        }
    }
    Boundedness::Bounded(bound)
}
