//! Discrete Bayesian networks: specs, validation, factor algebra and exact
//! inference.

mod error;
mod factor;
mod inference;
mod network;
mod spec;

pub use error::GraphError;
pub use factor::Factor;
pub(crate) use inference::posterior_indices;
pub use inference::{min_degree_order, network_factors, posterior, posterior_with_order};
pub use network::{Assignment, Distribution, Network};
pub(crate) use spec::decode_mixed_radix as decode_digits;
pub use spec::{natural_cmp, BuildOptions, CptDef, EdgeDef, NetworkSpec, NodeDef, Visibility, ROW_SUM_TOLERANCE};

/// Validation report for a spec; empty when the spec builds.
pub fn validate(spec: &NetworkSpec) -> Vec<GraphError> {
    spec.validate()
}
