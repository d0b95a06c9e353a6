//! Seeded random nets for property checks.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::analysis::{is_bounded_with_cap, is_live, Boundedness, Liveness};
use crate::net::{NetDescription, PetriNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub max_places: usize,
    pub max_transitions: usize,
    /// Largest token count allowed in any reachable marking.
    pub max_bound: u32,
    pub require_live: bool,
    /// Markings explored per boundedness or liveness check.
    pub node_cap: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_places: 8,
            max_transitions: 8,
            max_bound: 3,
            require_live: true,
            node_cap: 100_000,
        }
    }
}

/// Builds a random free choice net from clusters: each cluster is either one
/// place feeding one or more transitions, or several places synchronized by
/// one transition. Output arcs are random. The net may fail any behavioural
/// property.
pub fn random_free_choice<R: Rng>(rng: &mut R, max_places: usize, max_transitions: usize) -> Option<PetriNet> {
    let np = rng.random_range(2..=max_places.max(2));
    let nt = rng.random_range(2..=max_transitions.max(2));
    let places: Vec<String> = (0..np).map(|i| format!("p{i}")).collect();
    let transitions: Vec<String> = (0..nt).map(|i| format!("t{i}")).collect();

    // Hand out places and transitions cluster by cluster.
    let mut arcs = Vec::new();
    let (mut pi, mut ti) = (0, 0);
    while pi < np && ti < nt {
        let (places_left, trans_left) = (np - pi, nt - ti);
        if places_left >= 2 && rng.random_bool(0.3) {
            let k = rng.random_range(2..=places_left.min(3));
            for p in &places[pi..pi + k] {
                arcs.push((p.clone(), transitions[ti].clone()));
            }
            pi += k;
            ti += 1;
        } else {
            let k = rng.random_range(1..=trans_left.min(3));
            for t in &transitions[ti..ti + k] {
                arcs.push((places[pi].clone(), t.clone()));
            }
            pi += 1;
            ti += k;
        }
    }
    if pi < np || ti < nt {
        return None;
    }
    for t in &transitions {
        let k = rng.random_range(1..=2.min(np));
        for p in places.choose_multiple(rng, k) {
            arcs.push((t.clone(), p.clone()));
        }
    }
    let mut marking: Vec<u32> = (0..np).map(|_| u32::from(rng.random_bool(0.4))).collect();
    if marking.iter().all(|&m| m == 0) {
        marking[rng.random_range(0..np)] = 1;
    }
    PetriNet::from_description(&NetDescription {
        places: places.into_iter().zip(marking).collect(),
        transitions,
        arcs,
    })
    .ok()
}

/// Builds a random net with no structural restriction beyond validity.
pub fn random_net<R: Rng>(rng: &mut R, max_places: usize, max_transitions: usize) -> Option<PetriNet> {
    let np = rng.random_range(2..=max_places.max(2));
    let nt = rng.random_range(2..=max_transitions.max(2));
    let places: Vec<String> = (0..np).map(|i| format!("p{i}")).collect();
    let transitions: Vec<String> = (0..nt).map(|i| format!("t{i}")).collect();
    let mut arcs = Vec::new();
    for t in &transitions {
        let mut shuffled = places.clone();
        shuffled.shuffle(rng);
        let inputs = rng.random_range(1..=2.min(np));
        for p in &shuffled[..inputs] {
            arcs.push((p.clone(), t.clone()));
        }
        shuffled.shuffle(rng);
        let outputs = rng.random_range(1..=2.min(np));
        for p in &shuffled[..outputs] {
            arcs.push((t.clone(), p.clone()));
        }
    }
    let mut marking: Vec<u32> = (0..np).map(|_| u32::from(rng.random_bool(0.4))).collect();
    if marking.iter().all(|&m| m == 0) {
        marking[rng.random_range(0..np)] = 1;
    }
    PetriNet::from_description(&NetDescription {
        places: places.into_iter().zip(marking).collect(),
        transitions,
        arcs,
    })
    .ok()
}

/// Draws a live bounded free choice net: a small base found by rejection is
/// grown with refinements that keep the net free choice (series insertion on
/// an arc, a parallel copy of a transition or place, a detour loop at a
/// place), and the initial marking is replaced by a random reachable one.
/// Every returned net is checked on the explicit state space against
/// `config`. Returns the net and its bound.
pub fn random_fcn<R: Rng>(rng: &mut R, config: &GeneratorConfig) -> (PetriNet, u32) {
    loop {
        let (base, _) = sample_fcn(rng, &GeneratorConfig { max_places: 3, max_transitions: 3, ..*config });
        let target_places = rng.random_range(base.place_count()..=config.max_places.max(base.place_count()));
        let target_transitions =
            rng.random_range(base.transition_count()..=config.max_transitions.max(base.transition_count()));
        let mut net = base;
        for _ in 0..20 {
            if net.place_count() >= target_places && net.transition_count() >= target_transitions {
                break;
            }
            if let Some(next) = refine(rng, &net, config.max_places, config.max_transitions) {
                net = next;
            }
        }
        let mut marking = net.initial_marking().clone();
        for _ in 0..rng.random_range(0..16) {
            let enabled = net.enabled_transitions(&marking);
            let Some(&t) = enabled.choose(rng) else { break };
            marking = net.fire(&marking, t).expect("enabled");
        }
        let net = net.with_initial_marking(marking);
        if let Some(bound) = accept(&net, config) {
            return (net, bound);
        }
    }
}

/// Rejection sampling over [`random_free_choice`]. Only practical for very
/// small nets.
pub fn sample_fcn<R: Rng>(rng: &mut R, config: &GeneratorConfig) -> (PetriNet, u32) {
    loop {
        if let Some(net) = random_free_choice(rng, config.max_places, config.max_transitions) {
            if let Some(bound) = accept(&net, config) {
                return (net, bound);
            }
        }
    }
}

fn accept(net: &PetriNet, config: &GeneratorConfig) -> Option<u32> {
    let Boundedness::Bounded(bound) = is_bounded_with_cap(net, config.node_cap) else {
        return None;
    };
    if bound > config.max_bound || (config.require_live && is_live(net, config.node_cap) != Liveness::Live) {
        return None;
    }
    Some(bound)
}

fn refine<R: Rng>(rng: &mut R, net: &PetriNet, max_places: usize, max_transitions: usize) -> Option<PetriNet> {
    let mut desc = net.to_description();
    let fresh_place = format!("p{}", net.place_count());
    let fresh_transition = |k: usize| format!("t{}", net.transition_count() + k);
    let (room_p, room_t) = (net.place_count() < max_places, net.transition_count() < max_transitions);
    match rng.random_range(0..4) {
        0 if room_p && room_t => {
            // t -> p becomes t -> p' -> t' -> p.
            let outs: Vec<_> = desc.arcs.iter().enumerate().filter(|(_, (x, _))| net.transition(x).is_some()).collect();
            let (i, (t, p)) = outs.choose(rng).map(|&(i, a)| (i, a.clone()))?;
            let u = fresh_transition(0);
            desc.arcs.remove(i);
            desc.arcs.extend([(t, fresh_place.clone()), (fresh_place.clone(), u.clone()), (u.clone(), p)]);
            desc.places.push((fresh_place, 0));
            desc.transitions.push(u);
        }
        1 if room_t => {
            let single: Vec<_> = net.transitions().filter(|&t| net.inputs(t).len() == 1).collect();
            let t = *single.choose(rng)?;
            let u = fresh_transition(0);
            let name = net.transition_name(t);
            let copies: Vec<_> = desc
                .arcs
                .iter()
                .filter_map(|(x, y)| {
                    (x == name).then(|| (u.clone(), y.clone())).or_else(|| (y == name).then(|| (x.clone(), u.clone())))
                })
                .collect();
            desc.arcs.extend(copies);
            desc.transitions.push(u);
        }
        2 if room_p => {
            let single: Vec<_> = net.places().filter(|&p| net.consumers(p).len() == 1).collect();
            let p = *single.choose(rng)?;
            let name = net.place_name(p);
            let copies: Vec<_> = desc
                .arcs
                .iter()
                .filter_map(|(x, y)| {
                    (x == name)
                        .then(|| (fresh_place.clone(), y.clone()))
                        .or_else(|| (y == name).then(|| (x.clone(), fresh_place.clone())))
                })
                .collect();
            desc.arcs.extend(copies);
            desc.places.push((fresh_place, net.initial_marking()[p]));
        }
        3 if room_p && net.transition_count() + 2 <= max_transitions => {
            // p -> u -> q -> v -> p, where every output of p has p as its only input.
            let free: Vec<_> = net
                .places()
                .filter(|&p| net.consumers(p).iter().all(|&t| net.inputs(t).len() == 1))
                .collect();
            let p = net.place_name(*free.choose(rng)?).to_string();
            let (u, v) = (fresh_transition(0), fresh_transition(1));
            desc.arcs.extend([
                (p.clone(), u.clone()),
                (u.clone(), fresh_place.clone()),
                (fresh_place.clone(), v.clone()),
                (v.clone(), p),
            ]);
            desc.places.push((fresh_place, 0));
            desc.transitions.extend([u, v]);
        }
        _ => return None,
    }
    PetriNet::from_description(&desc).ok()
}
