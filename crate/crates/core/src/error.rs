//! Error type shared by all modules of the toolkit.

use thiserror::Error;

/// Everything that can go wrong while building geometry, solving the
/// Neumann problem or running a verification check.
#[derive(Debug, Error)]
pub enum Error {
    #[error("signature mismatch: {0} vs {1}")]
    SignatureMismatch(String, String),

    #[error("subspace or tangent plane is not spacelike ({0})")]
    NotSpacelike(String),

    #[error("basis is ill-conditioned: smallest Gram eigenvalue {min_eig:.3e} < {tol:.3e} * largest")]
    IllConditioned { min_eig: f64, tol: f64 },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("degenerate mesh cell: {0}")]
    MeshDegenerate(String),

    #[error("mesh is not connected")]
    NotConnected,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("curvature unavailable at boundary vertex {0}")]
    BoundaryCurvatureUnavailable(usize),

    #[error("mean curvature is not timelike: <H,H> = {h_sq:.3e} > {tol:.3e} at sample {location}")]
    TimelikeHViolation {
        h_sq: f64,
        tol: f64,
        location: String,
    },

    #[error("slope tau = {tau:.3e} exceeds cap {cap:.3e} at sample {location}")]
    SlopeCapExceeded {
        tau: f64,
        cap: f64,
        location: String,
    },

    #[error("surjectivity check failed for xi = {xi:?}: {reason}")]
    SurjectivityViolation { xi: Vec<f64>, reason: String },

    #[error("bound violated at {location}: lhs {lhs:.6e} > rhs {rhs:.6e} + tol")]
    BoundViolation {
        location: String,
        lhs: f64,
        rhs: f64,
    },

    #[error("measure estimate inconclusive: {0}")]
    EstimateInconclusive(String),

    #[error("Fiala-Huber bound inapplicable: 2*total curvature = {total_k2:.6e} >= 4*pi")]
    FhInapplicable { total_k2: f64 },

    #[error("geodesic ball of radius {radius} touches the boundary")]
    RadiusTooLarge { radius: f64 },

    #[error("bad input: {0}")]
    BadInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
