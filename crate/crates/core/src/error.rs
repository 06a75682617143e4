use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes of the supplied pieces disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A model constraint cannot be honoured by the requested configuration.
    #[error("constraint violation: {0}")]
    Constraint(String),

    /// A value lies outside the domain of the operation (e.g. non-positive variance).
    #[error("domain error: {0}")]
    Domain(String),

    /// Non-finite input data or intermediate result.
    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    /// A mixture component lost (almost) all of its weight.
    #[error("component {component} degenerate at iteration {iteration} (weight {weight:.3e})")]
    DegenerateComponent {
        component: usize,
        iteration: usize,
        weight: f64,
    },

    /// Column clusters could not be kept non-empty.
    #[error("empty column cluster {cluster} cannot be repaired (p={p}, q={q})")]
    EmptyColumnCluster { cluster: usize, p: usize, q: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// Every candidate of a model search failed.
    #[error("all {} candidates failed", .0.len())]
    SearchFailed(Vec<(String, String)>),
}
