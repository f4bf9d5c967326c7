//! Error types, one enum per subsystem.

use thiserror::Error;

/// Errors from map construction, evaluation and branch enumeration.
#[derive(Debug, Error)]
pub enum MapError {
    #[error("map is not a local diffeomorphism: {0}")]
    NotLocalDiffeo(String),
    #[error("constraint violation while building map: {0}")]
    ConstraintViolation(String),
    #[error("Newton iteration failed to converge from seed {seed:?} after {iters} iterations (residual {residual:.3e})")]
    NewtonDivergence {
        seed: Vec<f64>,
        iters: usize,
        residual: f64,
    },
    #[error("two inverse branches collided within {separation:.3e} near {point:?}")]
    BranchCollision { point: Vec<f64>, separation: f64 },
    #[error("branch enumeration produced {found} points, expected degree {expected}")]
    BranchEnumeration { found: usize, expected: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Errors from orbit analysis.
#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("pre-orbit tree to depth {requested} needs {needed} nodes, budget is {budget}; largest feasible depth is {feasible}")]
    BudgetExceeded {
        requested: usize,
        needed: u128,
        budget: usize,
        feasible: usize,
    },
    #[error("forward orbit enters the excluded region U0 at step {step}")]
    OrbitEntersU0 { step: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Errors from the zooming engine.
#[derive(Debug, Error)]
pub enum ZoomingError {
    #[error("zooming axiom violated: {axiom} at witness {witness}")]
    AxiomViolation { axiom: String, witness: String },
    #[error("point is not a periodic source (classification {0})")]
    NotASource(String),
    #[error("no admissible zooming radius found above floor {floor:.3e}")]
    DeltaNotFound { floor: f64 },
    #[error("inverse branch undefined at backward step {step}: {reason}")]
    BranchUndefined { step: usize, reason: String },
    #[error(
        "contraction inequality failed at step {step}: dist {dist:.6e} > bound {bound:.6e}"
    )]
    ContractionFailed { step: usize, dist: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Errors from induced Markov map construction and certification.
#[derive(Debug, Error)]
pub enum InducedError {
    #[error("base radius {r:.6e} must be smaller than delta/4 = {limit:.6e}")]
    RadiusTooLarge { r: f64, limit: f64 },
    #[error("no first-return cells found up to max_R {max_r} (delta/r miscalibration?)")]
    NoCellsFound { max_r: usize },
    #[error("cell budget {budget} exhausted at return time {at_return}")]
    BudgetExceeded { budget: usize, at_return: usize },
    #[error("Markov property violated on cell {cell}: {reason}")]
    MarkovViolation { cell: usize, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Zooming(#[from] ZoomingError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// Errors from weight families and tower measures.
#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("induced map has no cells; cannot attach weights")]
    EmptyPartition,
    #[error("bad weight parameter: {0}")]
    BadParam(String),
    #[error("unknown cell id {0}")]
    UnknownCell(usize),
}

/// Errors from statistics operations.
#[derive(Debug, Error)]
pub enum StatsError {
    #[error("only {usable} lags above the noise floor; need at least {needed} for a fit")]
    SignalBelowNoise { usable: usize, needed: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Errors from torus geometry inputs.
#[derive(Debug, Error)]
pub enum GeomError {
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("point set must be non-empty")]
    EmptySet,
    #[error("ball radius must lie in (0, 1/2), got {0}")]
    BadRadius(f64),
}
