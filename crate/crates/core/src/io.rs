//! JSON net files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{BLOCK_PREFIX, EXPANSION_PREFIX};
use crate::net::{NetDescription, NetError, PetriNet};
use crate::routing::{NamedRouting, RoutingError, RoutingSpec};
use crate::timed::{Distribution, TimedError, TimingSpec};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed net file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid net: {}", join(.0))]
    Invalid(Vec<NetError>),
    #[error("identifier `{0}` uses a reserved prefix")]
    ReservedName(String),
    #[error("invalid routing section: {0}")]
    Routing(#[from] RoutingError),
    #[error("invalid timing section: {0}")]
    Timing(#[from] TimedError),
}

fn join(errors: &[NetError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetFile {
    pub places: Vec<PlaceEntry>,
    pub transitions: Vec<TransitionEntry>,
    pub arcs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<BTreeMap<String, RoutingEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, Distribution>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceEntry {
    pub id: String,
    #[serde(default)]
    pub marking: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RoutingEntry {
    Periodic { sequence: Vec<String> },
    Bernoulli { probs: BTreeMap<String, f64> },
}

impl From<RoutingEntry> for NamedRouting {
    fn from(e: RoutingEntry) -> Self {
        match e {
            RoutingEntry::Periodic { sequence } => NamedRouting::Periodic(sequence),
            RoutingEntry::Bernoulli { probs } => NamedRouting::Bernoulli(probs),
        }
    }
}

impl From<NamedRouting> for RoutingEntry {
    fn from(n: NamedRouting) -> Self {
        match n {
            NamedRouting::Periodic(sequence) => RoutingEntry::Periodic { sequence },
            NamedRouting::Bernoulli(probs) => RoutingEntry::Bernoulli { probs },
        }
    }
}

/// A parsed net with its optional routing and timing sections.
#[derive(Debug, Clone)]
pub struct LoadedNet {
    pub net: PetriNet,
    pub routing: Option<RoutingSpec>,
    pub timing: Option<TimingSpec>,
}

impl LoadedNet {
    /// The routing section, or the trivial routing when there is none.
    pub fn routing_or_trivial(&self) -> Result<RoutingSpec, RoutingError> {
        match &self.routing {
            Some(r) => Ok(r.clone()),
            None => {
                let r = RoutingSpec::trivial(&self.net);
                r.validate(&self.net)?;
                Ok(r)
            }
        }
    }
}

/// Parses a net file. Identifiers starting with a prefix reserved for
/// generated nodes are rejected unless `allow_generated` is set.
pub fn parse_net(text: &str, allow_generated: bool) -> Result<LoadedNet, IoError> {
    let file: NetFile = serde_json::from_str(text)?;
    if !allow_generated {
        let ids = file.places.iter().map(|p| &p.id).chain(file.transitions.iter().map(|t| &t.id));
        for id in ids {
            if id.starts_with(EXPANSION_PREFIX) || id.starts_with(BLOCK_PREFIX) {
                return Err(IoError::ReservedName(id.clone()));
            }
        }
    }
    let desc = NetDescription {
        places: file.places.iter().map(|p| (p.id.clone(), p.marking)).collect(),
        transitions: file.transitions.iter().map(|t| t.id.clone()).collect(),
        arcs: file.arcs.clone(),
    };
    let net = PetriNet::from_description(&desc).map_err(IoError::Invalid)?;
    let routing = match file.routing {
        Some(entries) => {
            let named = entries.into_iter().map(|(p, e)| (p, e.into())).collect();
            Some(RoutingSpec::from_named(&net, &named)?)
        }
        None => None,
    };
    let timing = match &file.timing {
        Some(map) => Some(TimingSpec::from_map(&net, map)?),
        None => None,
    };
    Ok(LoadedNet { net, routing, timing })
}

pub fn load_net(path: &Path, allow_generated: bool) -> Result<LoadedNet, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_net(&text, allow_generated)
}

pub fn net_file(net: &PetriNet, routing: Option<&RoutingSpec>, timing: Option<&TimingSpec>) -> NetFile {
    let desc = net.to_description();
    let routing = routing
        .map(|r| r.to_named(net).into_iter().map(|(p, n)| (p, n.into())).collect::<BTreeMap<_, _>>())
        .filter(|m| !m.is_empty());
    NetFile {
        places: desc.places.into_iter().map(|(id, marking)| PlaceEntry { id, marking }).collect(),
        transitions: desc.transitions.into_iter().map(|id| TransitionEntry { id }).collect(),
        arcs: desc.arcs,
        routing,
        timing: timing.map(|t| t.to_map(net)),
    }
}

/// Pretty-printed JSON, with a trailing newline.
pub fn to_json(net: &PetriNet, routing: Option<&RoutingSpec>, timing: Option<&TimingSpec>) -> String {
    let mut s = serde_json::to_string_pretty(&net_file(net, routing, timing)).expect("net files serialize");
    s.push('\n');
    s
}
