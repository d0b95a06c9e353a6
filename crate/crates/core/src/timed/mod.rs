//! Stochastic routed timed nets under as-soon-as-possible semantics.

mod open;
mod sim;
mod tau;
mod timing;

use thiserror::Error;

use crate::analysis::{AnalysisError, Hypothesis};
use crate::net::NetError;
use crate::routed::RoutedError;
use crate::routing::RoutingError;

pub use open::{enabling_degree, open_expansion, OpenExpansion};
pub use sim::{
    simulate, Completion, DaterLog, SimConfig, SimOutcome, Simulator, SourceSchedule, StopReason,
    StopRule, ThroughputEstimate,
};
pub use tau::{measure_tau, TauSample, DEFAULT_EVENT_CAP};
pub use timing::{Distribution, TimingSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimedError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("invalid timing for `{transition}`: {reason}")]
    InvalidTiming { transition: String, reason: String },
    #[error("no firing-time distribution for `{0}`")]
    MissingTiming(String),
    #[error("timing names unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("every input place of `{0}` is also an output place: unbounded enabling degree")]
    InfiniteDegree(String),
    #[error("the expanded marking is not a deadlock: `{0}` is enabled")]
    NotADeadlock(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(Hypothesis),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Routed(#[from] RoutedError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Net(#[from] NetError),
}
