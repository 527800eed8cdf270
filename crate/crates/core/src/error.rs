use thiserror::Error;

/// Errors raised anywhere in the sampling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem definition: {0}")]
    InvalidProblem(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("stiffness matrix is singular (pivot {pivot} at reduced dof {dof}); check supports")]
    SingularSystem { dof: usize, pivot: f64 },

    #[error("volume constraint infeasible: target {target}, attainable range [{lo}, {hi}]")]
    InfeasibleVolume { target: f64, lo: f64, hi: f64 },

    #[error("non-finite force at site {site} after {step} steps")]
    NonFiniteForce { site: usize, step: u64 },

    #[error("bound handling did not settle within {iterations} passes; reduce the time step")]
    StepSize { iterations: usize },

    #[error("mesh mismatch: expected {expected} sites, got {actual}")]
    MeshMismatch { expected: usize, actual: usize },

    #[error("missing reference minimum compliance")]
    MissingReference,

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
