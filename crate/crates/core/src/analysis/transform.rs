//! Net rewrites: the cluster-block transform, EFCN to FCN, and the Free
//! Choice expansion.
//!
//! Every generated node id starts with [`EXPANSION_PREFIX`] or
//! [`BLOCK_PREFIX`]. Node ids change between a net and its rewrite (ids are
//! positions in the sorted name list), so the result types carry explicit
//! maps back to the original net.

use std::collections::BTreeMap;

use crate::net::{Marking, NetDescription, Node, PetriNet, PlaceId, TransId};

use super::blocking::{blocking_oracle, BlockingOracle, BlockingResult, LiveBoundedFcn};
use super::AnalysisError;

pub const EXPANSION_PREFIX: &str = "__exp_";
pub const BLOCK_PREFIX: &str = "__blk_";

fn assemble(desc: NetDescription) -> Result<PetriNet, AnalysisError> {
    PetriNet::from_description(&desc).map_err(AnalysisError::InvalidTransform)
}

fn place_image(from: &PetriNet, to: &PetriNet) -> Vec<PlaceId> {
    from.places()
        .map(|p| to.place(from.place_name(p)).expect("place kept by the rewrite"))
        .collect()
}

/// Net with a fresh place `alpha` and non-conflicting transition `beta`
/// inserted in front of the single place of a conflicting cluster.
#[derive(Debug, Clone)]
pub struct ClusterBlock {
    pub net: PetriNet,
    pub alpha: PlaceId,
    pub beta: TransId,
    /// The cluster place, as an id of `net`.
    pub cluster_place: PlaceId,
    /// For each place of `net`, the place of the original net it counts
    /// towards.
    place_origin: Vec<PlaceId>,
    trans_origin: Vec<Option<TransId>>,
    original_places: usize,
}

impl ClusterBlock {
    /// The surjection back to the original net: `alpha` and the cluster
    /// place are summed, every other place is copied.
    pub fn project(&self, m: &Marking) -> Marking {
        let mut out = Marking::zeros(self.original_places);
        for p in self.net.places() {
            let q = self.place_origin[p.0];
            out.set(q, out[q] + m[p]);
        }
        out
    }

    /// Drops every occurrence of `beta` and renames the rest.
    pub fn project_word(&self, word: &[TransId]) -> Vec<TransId> {
        word.iter().filter_map(|t| self.trans_origin[t.0]).collect()
    }

    /// Blocking marking of `beta`, mapped back: the marking of the original
    /// net in which exactly the transitions of the cluster are enabled.
    pub fn blocking_marking(
        &self,
        original: &PetriNet,
        node_cap: usize,
    ) -> Result<BlockingResult, AnalysisError> {
        let inner = LiveBoundedFcn::certify(&self.net, node_cap)?.blocking_marking(self.beta)?;
        let marking = self.project(&inner.blocking_marking);
        let witness = self.project_word(&inner.witness);
        Ok(BlockingResult {
            parikh: crate::net::ParikhVector::from_word(original.transition_count(), &witness),
            enabled: original.enabled_transitions(&marking),
            blocking_marking: marking,
            witness,
        })
    }

    /// Brute-force blocking sets of `beta`, mapped back to the original net.
    pub fn oracle(&self, node_cap: usize) -> Result<BlockingOracle, AnalysisError> {
        let inner = blocking_oracle(&self.net, self.beta, node_cap)?;
        Ok(BlockingOracle {
            blocking: inner.blocking.iter().map(|m| self.project(m)).collect(),
            avoiding: inner.avoiding.iter().map(|m| self.project(m)).collect(),
        })
    }
}

pub fn cluster_block_transform(net: &PetriNet, b: TransId) -> Result<ClusterBlock, AnalysisError> {
    let b_name = net.transition_name(b).to_string();
    if net.is_non_conflicting(b) {
        return Err(AnalysisError::NotConflicting(b_name));
    }
    let places: Vec<PlaceId> = net
        .cluster(Node::Transition(b))
        .into_iter()
        .filter_map(|n| match n {
            Node::Place(p) => Some(p),
            Node::Transition(_) => None,
        })
        .collect();
    let [p_b] = places[..] else {
        return Err(AnalysisError::MultiPlaceCluster(b_name));
    };
    let p_name = net.place_name(p_b).to_string();
    let alpha = format!("{BLOCK_PREFIX}alpha");
    let beta = format!("{BLOCK_PREFIX}beta");

    let mut desc = net.to_description();
    for (id, m) in desc.places.iter_mut() {
        if *id == p_name {
            *m = 0;
        }
    }
    desc.places.push((alpha.clone(), net.initial_marking()[p_b]));
    desc.transitions.push(beta.clone());
    for (_, to) in desc.arcs.iter_mut() {
        if *to == p_name {
            *to = alpha.clone();
        }
    }
    desc.arcs.push((alpha.clone(), beta.clone()));
    desc.arcs.push((beta.clone(), p_name.clone()));
    let blocked = assemble(desc)?;

    let alpha_id = blocked.place(&alpha).expect("alpha was added");
    let place_origin = blocked
        .places()
        .map(|p| {
            if p == alpha_id {
                p_b
            } else {
                net.place(blocked.place_name(p)).expect("original place")
            }
        })
        .collect();
    let trans_origin = blocked
        .transitions()
        .map(|t| net.transition(blocked.transition_name(t)))
        .collect();
    Ok(ClusterBlock {
        alpha: alpha_id,
        beta: blocked.transition(&beta).expect("beta was added"),
        cluster_place: blocked.place(&p_name).expect("cluster place kept"),
        place_origin,
        trans_origin,
        original_places: net.place_count(),
        net: blocked,
    })
}

/// Rewrites every choice shared by transitions with a common multi-place
/// preset `P`: a new transition consumes `P` and feeds a new place, which
/// becomes the only input of each transition of the group.
pub fn efcn_to_fcn(net: &PetriNet) -> Result<PetriNet, AnalysisError> {
    let class = net.classify();
    if !class.is_extended_free_choice {
        return Err(AnalysisError::NotEfcn);
    }
    if class.is_free_choice {
        return Ok(net.clone());
    }
    // Groups keyed by their shared preset; BTreeMap keeps the output stable.
    let mut groups: BTreeMap<Vec<PlaceId>, Vec<TransId>> = BTreeMap::new();
    for t in net.transitions() {
        let preset = net.inputs(t);
        if preset.len() >= 2 && net.consumers(preset[0]).len() >= 2 {
            groups.entry(preset.to_vec()).or_default().push(t);
        }
    }
    let mut desc = net.to_description();
    let rewired: Vec<(String, String)> = groups
        .iter()
        .flat_map(|(preset, group)| {
            preset.iter().flat_map(move |&p| {
                group.iter().map(move |&t| {
                    (net.place_name(p).to_string(), net.transition_name(t).to_string())
                })
            })
        })
        .collect();
    desc.arcs.retain(|arc| !rewired.contains(arc));
    for (preset, group) in &groups {
        let head = net.transition_name(group[0]);
        let tau = format!("{EXPANSION_PREFIX}efc_t({head})");
        let s = format!("{EXPANSION_PREFIX}efc_s({head})");
        for &p in preset {
            desc.arcs.push((net.place_name(p).to_string(), tau.clone()));
        }
        desc.arcs.push((tau.clone(), s.clone()));
        for &t in group {
            desc.arcs.push((s.clone(), net.transition_name(t).to_string()));
        }
        desc.places.push((s, 0));
        desc.transitions.push(tau);
    }
    assemble(desc)
}

/// The Free Choice expansion: each arc `(p, q)` is replaced by the chain
/// `p -> t_pq -> s_pq -> q`.
#[derive(Debug, Clone)]
pub struct FcExpansion {
    pub net: PetriNet,
    place_image: Vec<PlaceId>,
    trans_image: Vec<TransId>,
    /// Keyed by original `(p, q)`: the inserted transition and place.
    arcs: BTreeMap<(PlaceId, TransId), (TransId, PlaceId)>,
    place_origin: Vec<PlaceId>,
    trans_origin: Vec<Option<TransId>>,
    original_places: usize,
}

impl FcExpansion {
    pub fn place(&self, p: PlaceId) -> PlaceId {
        self.place_image[p.0]
    }

    pub fn transition(&self, t: TransId) -> TransId {
        self.trans_image[t.0]
    }

    /// The inserted transition `t_pq` and place `s_pq` of arc `(p, q)`.
    pub fn arc_nodes(&self, p: PlaceId, q: TransId) -> Option<(TransId, PlaceId)> {
        self.arcs.get(&(p, q)).copied()
    }

    /// The original transition behind an expanded one, `None` for `t_pq`.
    pub fn original_transition(&self, t: TransId) -> Option<TransId> {
        self.trans_origin[t.0]
    }

    /// Marking on the original places, zero on the inserted ones.
    pub fn lift(&self, m: &Marking) -> Marking {
        let mut out = Marking::zeros(self.net.place_count());
        for (i, &q) in self.place_image.iter().enumerate() {
            out.set(q, m[PlaceId(i)]);
        }
        out
    }

    /// A token in `s_pq` is counted in `p`.
    pub fn project(&self, m: &Marking) -> Marking {
        let mut out = Marking::zeros(self.original_places);
        for p in self.net.places() {
            let q = self.place_origin[p.0];
            out.set(q, out[q] + m[p]);
        }
        out
    }

    /// Drops the inserted transitions and renames the rest.
    pub fn project_word(&self, word: &[TransId]) -> Vec<TransId> {
        word.iter().filter_map(|t| self.trans_origin[t.0]).collect()
    }
}

pub fn free_choice_expansion(net: &PetriNet) -> Result<FcExpansion, AnalysisError> {
    let mut desc = net.to_description();
    let mut inserted = Vec::new();
    for p in net.places() {
        for &q in net.consumers(p) {
            let (pn, qn) = (net.place_name(p), net.transition_name(q));
            let t = format!("{EXPANSION_PREFIX}t({pn},{qn})");
            let s = format!("{EXPANSION_PREFIX}s({pn},{qn})");
            desc.arcs.retain(|(a, b)| !(a == pn && b == qn));
            desc.arcs.push((pn.to_string(), t.clone()));
            desc.arcs.push((t.clone(), s.clone()));
            desc.arcs.push((s.clone(), qn.to_string()));
            desc.transitions.push(t.clone());
            desc.places.push((s.clone(), 0));
            inserted.push(((p, q), (t, s)));
        }
    }
    let expanded = assemble(desc)?;

    let place_image = place_image(net, &expanded);
    let trans_image: Vec<TransId> = net
        .transitions()
        .map(|t| expanded.transition(net.transition_name(t)).expect("kept"))
        .collect();
    let mut place_origin: Vec<Option<PlaceId>> = vec![None; expanded.place_count()];
    for (i, &q) in place_image.iter().enumerate() {
        place_origin[q.0] = Some(PlaceId(i));
    }
    let mut arcs = BTreeMap::new();
    for ((p, q), (t, s)) in inserted {
        let t = expanded.transition(&t).expect("inserted");
        let s = expanded.place(&s).expect("inserted");
        place_origin[s.0] = Some(p);
        arcs.insert((p, q), (t, s));
    }
    let trans_origin = expanded
        .transitions()
        .map(|t| net.transition(expanded.transition_name(t)))
        .collect();
    Ok(FcExpansion {
        place_image,
        trans_image,
        arcs,
        place_origin: place_origin
            .into_iter()
            .map(|p| p.expect("every place has an origin"))
            .collect(),
        trans_origin,
        original_places: net.place_count(),
        net: expanded,
    })
}
