//! Firing-time distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::net::{PetriNet, TransId};
use crate::stream::RandomStreams;

use super::TimedError;

/// Distribution of the i.i.d. firing times of one transition. All three
/// have a finite mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", deny_unknown_fields)]
pub enum Distribution {
    #[serde(rename = "det")]
    Deterministic { value: f64 },
    #[serde(rename = "exp")]
    Exponential { rate: f64 },
    #[serde(rename = "uniform")]
    Uniform { lo: f64, hi: f64 },
}

impl Distribution {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Distribution::Deterministic { value } if !(value.is_finite() && value >= 0.0) => {
                Err(format!("deterministic value {value} must be finite and non-negative"))
            }
            Distribution::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => {
                Err(format!("exponential rate {rate} must be finite and positive"))
            }
            Distribution::Uniform { lo, hi }
                if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) =>
            {
                Err(format!("uniform bounds [{lo}, {hi}] must satisfy 0 <= lo <= hi"))
            }
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Deterministic { value } => value,
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Uniform { lo, hi } => (lo + hi) / 2.0,
        }
    }

    /// Inverse distribution function at `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Distribution::Deterministic { value } => value,
            Distribution::Exponential { rate } => -(1.0 - u).ln() / rate,
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * u,
        }
    }
}

/// Firing-time distribution and random stream of every transition.
/// Transitions without input places need no distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingSpec {
    dists: Vec<Option<Distribution>>,
    labels: Vec<String>,
}

impl TimingSpec {
    pub fn new(
        net: &PetriNet,
        dists: impl IntoIterator<Item = (TransId, Distribution)>,
    ) -> Result<Self, TimedError> {
        let mut spec = TimingSpec {
            dists: vec![None; net.transition_count()],
            labels: net
                .transitions()
                .map(|t| format!("time:{}", net.transition_name(t)))
                .collect(),
        };
        for (t, d) in dists {
            d.validate().map_err(|reason| TimedError::InvalidTiming {
                transition: net.transition_name(t).to_string(),
                reason,
            })?;
            spec.dists[t.0] = Some(d);
        }
        for t in net.transitions() {
            if spec.dists[t.0].is_none() && !net.inputs(t).is_empty() {
                return Err(TimedError::MissingTiming(net.transition_name(t).to_string()));
            }
        }
        Ok(spec)
    }

    /// The same distribution for every transition.
    pub fn uniform_all(net: &PetriNet, d: Distribution) -> Result<Self, TimedError> {
        Self::new(net, net.transitions().map(|t| (t, d)))
    }

    /// From `(transition name, distribution)` pairs.
    pub fn named(net: &PetriNet, dists: &[(&str, Distribution)]) -> Result<Self, TimedError> {
        let mut list = Vec::new();
        for &(name, d) in dists {
            let t = net
                .transition(name)
                .ok_or_else(|| TimedError::UnknownTransition(name.to_string()))?;
            list.push((t, d));
        }
        Self::new(net, list)
    }

    pub fn from_map(net: &PetriNet, map: &BTreeMap<String, Distribution>) -> Result<Self, TimedError> {
        let pairs: Vec<(&str, Distribution)> = map.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        Self::named(net, &pairs)
    }

    pub fn to_map(&self, net: &PetriNet) -> BTreeMap<String, Distribution> {
        net.transitions()
            .filter_map(|t| self.dists[t.0].map(|d| (net.transition_name(t).to_string(), d)))
            .collect()
    }

    pub fn distribution(&self, t: TransId) -> Option<Distribution> {
        self.dists[t.0]
    }

    pub fn label(&self, t: TransId) -> &str {
        &self.labels[t.0]
    }

    /// Makes `t` draw from another stream.
    pub fn set_label(&mut self, t: TransId, label: String) {
        self.labels[t.0] = label;
    }

    /// `sigma_t(n)`, the duration of the `n`-th firing of `t`.
    pub fn sample(&self, t: TransId, n: u64, streams: &RandomStreams) -> f64 {
        let d = self.dists[t.0].expect("timed transition");
        match d {
            Distribution::Deterministic { value } => value,
            _ => d.quantile(streams.uniform(&self.labels[t.0], n)),
        }
    }
}
