//! Error taxonomy shared across the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Jet arithmetic hit a domain violation (division by a zero-valued jet,
    /// sqrt of a non-positive value, acos outside (-1,1), ...).
    #[error("degenerate evaluation: {what} (offending value {value})")]
    DegenerateEvaluation { what: String, value: f64 },

    /// A radius fell outside the ambient interval.
    #[error("radius {value} outside ambient interval [{lo}, {hi}]")]
    RadiusRange { value: f64, lo: f64, hi: f64 },

    /// The ambient construction was rejected (warp sign, horizon margin, ...).
    #[error("invalid ambient space: {0}")]
    InvalidAmbient(String),

    /// A surface or grid input violated its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The immersion degenerated at a node (det g <= 0, pole proximity, ...).
    #[error("degenerate geometry at node (theta={theta}, phi={phi}): {detail}")]
    DegenerateGeometry {
        theta: f64,
        phi: f64,
        detail: String,
    },

    /// The ODE integrator could not proceed.
    #[error("weight solver failure near r = {location}: {detail}")]
    SolverFailure { location: f64, detail: String },

    /// A theorem-mode hypothesis failed (non-convex surface, mixed Phi sign, ...).
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    /// Configuration schema violations; every violation is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("report serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    pub fn degenerate(what: &str, value: f64) -> Self {
        Error::DegenerateEvaluation {
            what: what.to_string(),
            value,
        }
    }

    /// CLI exit code: 2 for configuration errors, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            _ => 3,
        }
    }
}
