//! Structural and state-space analysis of nets.

mod blocking;
mod cover;
mod reach;
mod siphon;
mod transform;

use thiserror::Error;

use crate::net::NetError;

pub use blocking::{
    blocking_marking, blocking_oracle, check_live_bounded, is_home_state, BlockingOracle,
    BlockingResult, LiveBoundedFcn,
};
pub use cover::{is_bounded, is_bounded_with_cap, Boundedness, UnboundedWitness};
pub(crate) use reach::{dead_in_bottom_component, is_strongly_connected_graph};
pub use reach::{is_live, reachability, Liveness, ReachabilityGraph, DEFAULT_NODE_CAP};
pub use siphon::{
    commoner_live, is_siphon, is_trap, mask_of, maximal_trap_within, minimal_siphons, to_places,
    SiphonTrapReport, MAX_SIPHON_PLACES,
};
pub use transform::{
    cluster_block_transform, efcn_to_fcn, free_choice_expansion, ClusterBlock, FcExpansion,
    BLOCK_PREFIX, EXPANSION_PREFIX,
};

/// A precondition of the blocking marking computation that a net fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Hypothesis {
    #[error("the net is not free choice")]
    NotFreeChoice,
    #[error("the net is not live")]
    NotLive,
    #[error("the net is unbounded")]
    Unbounded,
    #[error("the state space exceeds the exploration cap")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("the net is not free choice")]
    NotFreeChoice,
    #[error("the net is not extended free choice")]
    NotEfcn,
    #[error("siphon enumeration supports at most {max} places, the net has {places}")]
    TooLarge { places: usize, max: usize },
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(Hypothesis),
    #[error("transition `{0}` is non-conflicting")]
    NotConflicting(String),
    #[error("the cluster of `{0}` has more than one place")]
    MultiPlaceCluster(String),
    #[error("the state space exceeds the cap of {cap} markings")]
    Truncated {
        cap: usize,
        partial: Box<BlockingOracle>,
    },
    #[error("blocking run did not settle on the expected marking ({0})")]
    BlockingFailed(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("generated net is invalid: {0:?}")]
    InvalidTransform(Vec<NetError>),
}
