use thiserror::Error;

/// A structural or numeric problem with a network or one of its tables.
///
/// Doubles as a validation finding: [`NetworkSpec::validate`](super::NetworkSpec::validate)
/// returns every violation it sees as a list of these.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("node `{node}` has duplicate state `{state}`")]
    DuplicateState { node: String, state: String },

    #[error("node `{node}` declares {count} state(s); at least 2 are required")]
    TooFewStates { node: String, count: usize },

    #[error("edge `{edge}` references unknown node `{node}`")]
    DanglingEdge { edge: String, node: String },

    #[error("graph contains a cycle through edges {}", .edges.join(", "))]
    Cyclic { edges: Vec<String> },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("node `{node}` has no state `{state}`")]
    UnknownState { node: String, state: String },

    #[error("node `{0}` has no conditional probability table")]
    MissingCpt(String),

    #[error("node `{0}` has more than one conditional probability table")]
    DuplicateCpt(String),

    #[error("table for `{node}` lists parents [{}] but incoming edges come from [{}]", .got.join(", "), .expected.join(", "))]
    ParentSetMismatch { node: String, expected: Vec<String>, got: Vec<String> },

    #[error("table for `{node}` has {got} row(s), expected {expected}")]
    CptShapeMismatch { node: String, expected: usize, got: usize },

    #[error("table for `{node}` row {row} has {got} entries, expected {expected}")]
    RowLengthMismatch { node: String, row: usize, expected: usize, got: usize },

    #[error("table for `{node}` row {row} sums to {sum:.9}, not 1")]
    RowNotNormalized { node: String, row: usize, sum: f64 },

    #[error("table for `{node}` row {row} has entry {value} outside [0, 1]")]
    ProbabilityOutOfRange { node: String, row: usize, value: f64 },

    #[error("assignment is missing node(s) {}", .0.join(", "))]
    IncompleteAssignment(Vec<String>),

    #[error("evidence has probability zero")]
    ImpossibleEvidence,

    #[error("factor variable {var} has cardinality {left} on one side and {right} on the other")]
    CardinalityMismatch { var: usize, left: usize, right: usize },

    #[error("variable {0} is not in the factor scope")]
    VarNotInScope(usize),

    #[error("elimination order is invalid: {0}")]
    BadOrdering(String),
}
