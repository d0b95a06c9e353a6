//! The open expansion of a net at a blocked transition `b`.
//!
//! `b` is split into `b_o` (zero duration, consumes the input places of `b`
//! and feeds a new place `p_b`) and `b_i` (takes the firing times of `b`,
//! consumes `p_b` and a token of the new source place `p_I`, and produces
//! the outputs of `b`). The source transition `I` feeds `p_I`. Input places
//! that are also output places of `b` stay attached to `b_i` on both sides.

use crate::analysis::EXPANSION_PREFIX;
use crate::net::{Marking, NetDescription, PetriNet, PlaceId, TransId};
use crate::routing::{PlaceRouting, RoutingSpec};

use super::{Distribution, TimedError, TimingSpec};

/// `max { k : b can fire k times in a row from marking }`.
pub fn enabling_degree(net: &PetriNet, marking: &Marking, b: TransId) -> Result<u32, TimedError> {
    if !net.is_enabled(marking, b) {
        return Err(TimedError::NotEnabled(net.transition_name(b).to_string()));
    }
    net.inputs(b)
        .iter()
        .filter(|p| !net.outputs(b).contains(p))
        .map(|&p| marking[p])
        .min()
        .ok_or_else(|| TimedError::InfiniteDegree(net.transition_name(b).to_string()))
}

#[derive(Debug, Clone)]
pub struct OpenExpansion {
    pub net: PetriNet,
    /// Enabling degree of `b` in the blocking marking.
    pub degree: u32,
    pub input: TransId,
    pub input_place: PlaceId,
    pub blocked_place: PlaceId,
    pub b_in: TransId,
    pub b_out: TransId,
    place_image: Vec<PlaceId>,
    trans_image: Vec<Option<TransId>>,
    b: TransId,
}

impl OpenExpansion {
    pub fn place(&self, p: PlaceId) -> PlaceId {
        self.place_image[p.0]
    }

    /// Image of an original transition; `None` for `b` itself.
    pub fn transition(&self, t: TransId) -> Option<TransId> {
        self.trans_image[t.0]
    }

    /// The expanded marking, which is also the initial marking of `net`.
    pub fn marking(&self) -> &Marking {
        self.net.initial_marking()
    }

    /// Same routing, with `b` replaced by `b_o` (or by `b_i` at places that
    /// `b` both consumes from and produces into). Places keep their random
    /// streams.
    pub fn routing(&self, original: &PetriNet, routing: &RoutingSpec) -> RoutingSpec {
        let mut choices = Vec::new();
        for p in original.places() {
            let self_loop = original.outputs(self.b).contains(&p);
            let map = |t: TransId| match self.trans_image[t.0] {
                Some(u) => u,
                None if self_loop => self.b_in,
                None => self.b_out,
            };
            let translated = match routing.place(p) {
                PlaceRouting::Trivial(_) => continue,
                PlaceRouting::Periodic(seq) => PlaceRouting::Periodic(seq.iter().map(|&t| map(t)).collect()),
                PlaceRouting::Bernoulli(probs) => {
                    let mut list: Vec<_> = probs.iter().map(|&(t, q)| (map(t), q)).collect();
                    list.sort_by_key(|&(t, _)| t);
                    PlaceRouting::Bernoulli(list)
                }
            };
            choices.push((self.place(p), translated));
        }
        let mut spec = RoutingSpec::new(&self.net, choices).expect("translated routing is valid");
        for p in original.places() {
            spec.set_label(self.place(p), routing.label(p).to_string());
        }
        spec
    }

    /// Same timings and streams; `b_i` takes over the distribution and stream
    /// of `b`, and `b_o` is immediate.
    pub fn timing(&self, original: &PetriNet, timing: &TimingSpec) -> TimingSpec {
        let mut dists = Vec::new();
        for t in original.transitions() {
            let image = self.trans_image[t.0].unwrap_or(self.b_in);
            if let Some(d) = timing.distribution(t) {
                dists.push((image, d));
            }
        }
        dists.push((self.b_out, Distribution::Deterministic { value: 0.0 }));
        let mut spec = TimingSpec::new(&self.net, dists).expect("translated timing is valid");
        for t in original.transitions() {
            let image = self.trans_image[t.0].unwrap_or(self.b_in);
            spec.set_label(image, timing.label(t).to_string());
        }
        spec
    }
}

pub fn open_expansion(net: &PetriNet, b: TransId, m_b: &Marking) -> Result<OpenExpansion, TimedError> {
    let k = enabling_degree(net, m_b, b)?;
    let name = |s: &str| format!("{EXPANSION_PREFIX}{s}");
    let (input, p_input, p_b, b_in, b_out) = (name("I"), name("p_I"), name("p_b"), name("b_i"), name("b_o"));
    let b_name = net.transition_name(b);
    let pre = net.inputs(b);
    let post = net.outputs(b);

    let mut places: Vec<(String, u32)> = net
        .places()
        .map(|p| {
            let m = m_b[p];
            let m = match (pre.contains(&p), post.contains(&p)) {
                (true, false) => m - k,
                _ => m,
            };
            (net.place_name(p).to_string(), m)
        })
        .collect();
    places.push((p_b.clone(), k));
    places.push((p_input.clone(), 0));
    let mut transitions: Vec<String> = net
        .transitions()
        .filter(|&t| t != b)
        .map(|t| net.transition_name(t).to_string())
        .collect();
    transitions.extend([input.clone(), b_in.clone(), b_out.clone()]);

    let mut arcs: Vec<(String, String)> = net
        .to_description()
        .arcs
        .into_iter()
        .filter(|(x, y)| x != b_name && y != b_name)
        .collect();
    for &p in pre {
        let pn = net.place_name(p).to_string();
        if post.contains(&p) {
            arcs.push((b_in.clone(), pn.clone()));
            arcs.push((pn, b_in.clone()));
        } else {
            arcs.push((pn, b_out.clone()));
        }
    }
    for &p in post {
        if !pre.contains(&p) {
            arcs.push((b_in.clone(), net.place_name(p).to_string()));
        }
    }
    arcs.extend([
        (input.clone(), p_input.clone()),
        (p_input.clone(), b_in.clone()),
        (b_out.clone(), p_b.clone()),
        (p_b.clone(), b_in.clone()),
    ]);
    let expanded = PetriNet::from_description(&NetDescription {
        places,
        transitions,
        arcs,
    })
    .map_err(|errs| TimedError::InvalidConfig(format!("expanded net is invalid: {errs:?}")))?;

    let input_id = expanded.transition(&input).expect("added");
    if let Some(t) = expanded
        .enabled_transitions(expanded.initial_marking())
        .into_iter()
        .find(|&t| t != input_id)
    {
        return Err(TimedError::NotADeadlock(expanded.transition_name(t).to_string()));
    }
    Ok(OpenExpansion {
        degree: k,
        input: input_id,
        input_place: expanded.place(&p_input).expect("added"),
        blocked_place: expanded.place(&p_b).expect("added"),
        b_in: expanded.transition(&b_in).expect("added"),
        b_out: expanded.transition(&b_out).expect("added"),
        place_image: net
            .places()
            .map(|p| expanded.place(net.place_name(p)).expect("kept"))
            .collect(),
        trans_image: net
            .transitions()
            .map(|t| if t == b { None } else { expanded.transition(net.transition_name(t)) })
            .collect(),
        b,
        net: expanded,
    })
}
