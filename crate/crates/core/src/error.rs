use thiserror::Error;

use crate::graph::GraphError;
use crate::io::ParseErrors;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error("{0}")]
    Parse(#[from] ParseErrors),

    #[error("node `{0}` is not marked intervenable in this model")]
    NotIntervenable(String),

    #[error("node `{0}` has parents; priors can only be set on root nodes")]
    NotRoot(String),

    #[error("prior for `{node}` sums to {sum:.9}, not 1")]
    NotNormalized { node: String, sum: f64 },

    #[error("node `{0}` is not observable and cannot be used as evidence")]
    NonObservableEvidence(String),

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("folk and world observables are incompatible: {0}")]
    ObservableMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),

    #[error("invalid survey targets: {0}")]
    InvalidTargets(String),

    #[error("calibration needs at least one free parameter")]
    NoFreeParameters,

    #[error("invalid calibration settings: {0}")]
    InvalidSettings(String),

    #[error("table for `{0}` is not a noisy-OR over binary nodes")]
    NotNoisyOr(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
