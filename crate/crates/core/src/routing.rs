//! Routing functions of choice places.
//!
//! Every place `p` has a function `u_p` from token indices `1, 2, ...` to
//! its output transitions. Places with at most one output transition route
//! trivially; choice places carry a periodic sequence or independent
//! Bernoulli draws.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::net::{PetriNet, PlaceId, TransId};
use crate::stream::RandomStreams;

/// Sums of Bernoulli probabilities may differ from 1 by at most this much.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("routing names unknown place `{0}`")]
    UnknownPlace(String),
    #[error("routing of `{place}` names unknown transition `{transition}`")]
    UnknownTransition { place: String, transition: String },
    #[error("`{transition}` is not an output transition of `{place}`")]
    NotAnOutput { place: String, transition: String },
    #[error("periodic routing of `{0}` has an empty sequence")]
    EmptySequence(String),
    #[error("probability of `{transition}` at `{place}` is not in [0, 1]")]
    BadProbability { place: String, transition: String },
    #[error("probabilities at `{place}` sum to {sum}")]
    ProbabilitySum { place: String, sum: f64 },
    #[error("choice place `{0}` has no routing")]
    MissingRouting(String),
    #[error("no probability for `{transition}` at `{place}`")]
    MissingRoutingProb { place: String, transition: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlaceRouting {
    /// Zero or one output transition: every token goes there.
    Trivial(Option<TransId>),
    /// `u_p(n) = sequence[(n - 1) mod len]`.
    Periodic(Vec<TransId>),
    /// Independent draws, one probability per output transition in id order.
    Bernoulli(Vec<(TransId, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSpec {
    places: Vec<PlaceRouting>,
    labels: Vec<String>,
}

impl RoutingSpec {
    /// Trivial routing everywhere. Only valid for nets without choices.
    pub fn trivial(net: &PetriNet) -> Self {
        RoutingSpec {
            places: net
                .places()
                .map(|p| PlaceRouting::Trivial(net.consumers(p).first().copied()))
                .collect(),
            labels: net.places().map(|p| default_label(net, p)).collect(),
        }
    }

    /// Builds and validates a routing. Places missing from `choices` route
    /// trivially, which is an error for choice places.
    pub fn new(
        net: &PetriNet,
        choices: impl IntoIterator<Item = (PlaceId, PlaceRouting)>,
    ) -> Result<Self, RoutingError> {
        let mut spec = Self::trivial(net);
        for (p, routing) in choices {
            spec.places[p.0] = routing;
        }
        spec.validate(net)?;
        Ok(spec)
    }

    /// Periodic routing from place and transition names.
    pub fn periodic(net: &PetriNet, sequences: &[(&str, &[&str])]) -> Result<Self, RoutingError> {
        let mut choices = Vec::new();
        for &(place, seq) in sequences {
            let p = lookup_place(net, place)?;
            let seq = seq
                .iter()
                .map(|t| lookup_transition(net, place, t))
                .collect::<Result<_, _>>()?;
            choices.push((p, PlaceRouting::Periodic(seq)));
        }
        Self::new(net, choices)
    }

    /// Bernoulli routing from place and transition names.
    pub fn bernoulli(net: &PetriNet, probs: &[(&str, &[(&str, f64)])]) -> Result<Self, RoutingError> {
        let mut choices = Vec::new();
        for &(place, entries) in probs {
            let p = lookup_place(net, place)?;
            let mut list = entries
                .iter()
                .map(|&(t, q)| Ok((lookup_transition(net, place, t)?, q)))
                .collect::<Result<Vec<_>, RoutingError>>()?;
            list.sort_by_key(|&(t, _)| t);
            choices.push((p, PlaceRouting::Bernoulli(list)));
        }
        Self::new(net, choices)
    }

    pub fn validate(&self, net: &PetriNet) -> Result<(), RoutingError> {
        for p in net.places() {
            let name = net.place_name(p);
            let outputs = net.consumers(p);
            let not_output = |t: TransId| RoutingError::NotAnOutput {
                place: name.to_string(),
                transition: net.transition_name(t).to_string(),
            };
            match &self.places[p.0] {
                PlaceRouting::Trivial(target) => {
                    if outputs.len() > 1 {
                        return Err(RoutingError::MissingRouting(name.to_string()));
                    }
                    if *target != outputs.first().copied() {
                        return Err(RoutingError::MissingRouting(name.to_string()));
                    }
                }
                PlaceRouting::Periodic(seq) => {
                    if seq.is_empty() {
                        return Err(RoutingError::EmptySequence(name.to_string()));
                    }
                    if let Some(&t) = seq.iter().find(|t| !outputs.contains(t)) {
                        return Err(not_output(t));
                    }
                }
                PlaceRouting::Bernoulli(probs) => {
                    if let Some(&(t, _)) = probs.iter().find(|(t, _)| !outputs.contains(t)) {
                        return Err(not_output(t));
                    }
                    if let Some(&t) = outputs.iter().find(|t| !probs.iter().any(|(u, _)| u == *t)) {
                        return Err(RoutingError::MissingRoutingProb {
                            place: name.to_string(),
                            transition: net.transition_name(t).to_string(),
                        });
                    }
                    if let Some(&(t, _)) = probs.iter().find(|(_, q)| !(0.0..=1.0).contains(q)) {
                        return Err(RoutingError::BadProbability {
                            place: name.to_string(),
                            transition: net.transition_name(t).to_string(),
                        });
                    }
                    let sum: f64 = probs.iter().map(|(_, q)| q).sum();
                    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                        return Err(RoutingError::ProbabilitySum {
                            place: name.to_string(),
                            sum,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn place(&self, p: PlaceId) -> &PlaceRouting {
        &self.places[p.0]
    }

    /// Stream label of the random draws of `p`.
    pub fn label(&self, p: PlaceId) -> &str {
        &self.labels[p.0]
    }

    /// Makes `p` draw from another stream, so that a rewritten net can
    /// reproduce the draws of the original.
    pub fn set_label(&mut self, p: PlaceId, label: String) {
        self.labels[p.0] = label;
    }

    /// `u_p(n)`, with `n` starting at 1. `None` only for places without
    /// output transitions.
    pub fn decide(&self, p: PlaceId, n: u64, streams: &RandomStreams) -> Option<TransId> {
        match &self.places[p.0] {
            PlaceRouting::Trivial(t) => *t,
            PlaceRouting::Periodic(seq) => Some(seq[((n - 1) % seq.len() as u64) as usize]),
            PlaceRouting::Bernoulli(probs) => {
                let u = streams.uniform(&self.labels[p.0], n);
                let mut acc = 0.0;
                for &(t, q) in probs {
                    acc += q;
                    if u < acc {
                        return Some(t);
                    }
                }
                // Rounding left `u` above the total: take the last possible.
                probs.iter().rev().find(|(_, q)| *q > 0.0).map(|&(t, _)| t)
            }
        }
    }

    /// Probability that a token entering `p` is routed to `t`.
    pub fn probability(&self, p: PlaceId, t: TransId) -> f64 {
        match &self.places[p.0] {
            PlaceRouting::Trivial(u) => f64::from(u8::from(*u == Some(t))),
            PlaceRouting::Periodic(seq) => {
                seq.iter().filter(|&&u| u == t).count() as f64 / seq.len() as f64
            }
            PlaceRouting::Bernoulli(probs) => probs
                .iter()
                .find(|(u, _)| *u == t)
                .map_or(0.0, |&(_, q)| q),
        }
    }

    /// Every output transition of every place receives tokens infinitely
    /// often: it appears in the period, or has positive probability.
    pub fn is_equitable(&self, net: &PetriNet) -> bool {
        net.places().all(|p| {
            net.consumers(p)
                .iter()
                .all(|&t| self.probability(p, t) > 0.0)
        })
    }

    /// True when no place uses Bernoulli draws.
    pub fn is_deterministic(&self) -> bool {
        !self
            .places
            .iter()
            .any(|r| matches!(r, PlaceRouting::Bernoulli(_)))
    }

    /// Period of the routing of `p` (1 for trivial and Bernoulli places).
    pub fn period(&self, p: PlaceId) -> u64 {
        match &self.places[p.0] {
            PlaceRouting::Periodic(seq) => seq.len() as u64,
            _ => 1,
        }
    }

    /// Name-keyed form, as stored in net files.
    pub fn to_named(&self, net: &PetriNet) -> BTreeMap<String, NamedRouting> {
        net.places()
            .filter_map(|p| {
                let name = |t: &TransId| net.transition_name(*t).to_string();
                let entry = match &self.places[p.0] {
                    PlaceRouting::Trivial(_) => return None,
                    PlaceRouting::Periodic(seq) => NamedRouting::Periodic(seq.iter().map(name).collect()),
                    PlaceRouting::Bernoulli(probs) => {
                        NamedRouting::Bernoulli(probs.iter().map(|(t, q)| (name(t), *q)).collect())
                    }
                };
                Some((net.place_name(p).to_string(), entry))
            })
            .collect()
    }

    /// Inverse of [`RoutingSpec::to_named`].
    pub fn from_named(
        net: &PetriNet,
        named: &BTreeMap<String, NamedRouting>,
    ) -> Result<Self, RoutingError> {
        let mut choices = Vec::new();
        for (place, entry) in named {
            let p = lookup_place(net, place)?;
            let routing = match entry {
                NamedRouting::Periodic(seq) => PlaceRouting::Periodic(
                    seq.iter()
                        .map(|t| lookup_transition(net, place, t))
                        .collect::<Result<_, _>>()?,
                ),
                NamedRouting::Bernoulli(probs) => {
                    let mut list = probs
                        .iter()
                        .map(|(t, &q)| Ok((lookup_transition(net, place, t)?, q)))
                        .collect::<Result<Vec<_>, RoutingError>>()?;
                    list.sort_by_key(|&(t, _)| t);
                    PlaceRouting::Bernoulli(list)
                }
            };
            choices.push((p, routing));
        }
        Self::new(net, choices)
    }
}

/// Routing of one place with transitions given by name.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedRouting {
    Periodic(Vec<String>),
    Bernoulli(BTreeMap<String, f64>),
}

fn default_label(net: &PetriNet, p: PlaceId) -> String {
    format!("route:{}", net.place_name(p))
}

fn lookup_place(net: &PetriNet, name: &str) -> Result<PlaceId, RoutingError> {
    net.place(name)
        .ok_or_else(|| RoutingError::UnknownPlace(name.to_string()))
}

fn lookup_transition(net: &PetriNet, place: &str, name: &str) -> Result<TransId, RoutingError> {
    net.transition(name)
        .ok_or_else(|| RoutingError::UnknownTransition {
            place: place.to_string(),
            transition: name.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::samples::{net_a, net_b};

    #[test]
    fn equitability() {
        let b = net_b();
        assert!(RoutingSpec::periodic(&b, &[("p0", &["a", "b"])]).unwrap().is_equitable(&b));
        assert!(!RoutingSpec::periodic(&b, &[("p0", &["a"])]).unwrap().is_equitable(&b));
        let skewed = RoutingSpec::bernoulli(&b, &[("p0", &[("a", 1.0), ("b", 0.0)])]).unwrap();
        assert!(!skewed.is_equitable(&b));
        assert!(RoutingSpec::trivial(&net_a()).is_equitable(&net_a()));
    }

    #[test]
    fn validation_errors() {
        let b = net_b();
        assert_eq!(
            RoutingSpec::new(&b, []),
            Err(RoutingError::MissingRouting("p0".into()))
        );
        assert_eq!(
            RoutingSpec::periodic(&b, &[("p0", &[])]),
            Err(RoutingError::EmptySequence("p0".into()))
        );
        assert!(matches!(
            RoutingSpec::periodic(&b, &[("p0", &["c"])]),
            Err(RoutingError::NotAnOutput { .. })
        ));
        assert!(matches!(
            RoutingSpec::bernoulli(&b, &[("p0", &[("a", 0.5), ("b", 0.4)])]),
            Err(RoutingError::ProbabilitySum { .. })
        ));
        assert!(matches!(
            RoutingSpec::bernoulli(&b, &[("p0", &[("a", 1.0)])]),
            Err(RoutingError::MissingRoutingProb { .. })
        ));
        assert!(matches!(
            RoutingSpec::periodic(&b, &[("zz", &["a"])]),
            Err(RoutingError::UnknownPlace(_))
        ));
    }

    #[test]
    fn periodic_decisions_cycle() {
        let b = net_b();
        let r = RoutingSpec::periodic(&b, &[("p0", &["a", "b", "b"])]).unwrap();
        let s = RandomStreams::new(0);
        let p0 = b.place("p0").unwrap();
        let got: Vec<_> = (1..=6).map(|n| b.transition_name(r.decide(p0, n, &s).unwrap())).collect();
        assert_eq!(got, ["a", "b", "b", "a", "b", "b"]);
        assert_eq!(r.decide(b.place("p1").unwrap(), 1, &s), b.transition("c"));
    }

    #[test]
    fn bernoulli_frequencies() {
        let b = net_b();
        let r = RoutingSpec::bernoulli(&b, &[("p0", &[("a", 0.3), ("b", 0.7)])]).unwrap();
        let s = RandomStreams::new(11);
        let p0 = b.place("p0").unwrap();
        let a = b.transition("a").unwrap();
        let n = 20_000;
        let hits = (1..=n).filter(|&i| r.decide(p0, i, &s) == Some(a)).count();
        let freq = hits as f64 / n as f64;
        // Standard error is about 0.0032.
        assert!((freq - 0.3).abs() < 0.015, "frequency {freq}");
    }

    #[test]
    fn named_round_trip() {
        let b = net_b();
        let r = RoutingSpec::bernoulli(&b, &[("p0", &[("b", 0.7), ("a", 0.3)])]).unwrap();
        assert_eq!(RoutingSpec::from_named(&b, &r.to_named(&b)).unwrap(), r);
        let r = RoutingSpec::periodic(&b, &[("p0", &["b", "a"])]).unwrap();
        assert_eq!(RoutingSpec::from_named(&b, &r.to_named(&b)).unwrap(), r);
    }
}
