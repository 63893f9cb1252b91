use thiserror::Error;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorFamily {
    /// Bad parameters or inconsistent inputs.
    Config,
    /// Radius validation or ladder depth problems.
    Ladder,
    /// Backward refinement ran out of subdivision levels.
    Refinement,
    /// A numerical analysis step could not produce an answer at this resolution.
    Analysis,
    /// Malformed serialized data.
    Format,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("modulus overflow: |f(z)| exceeds the representable range")]
    Overflow,

    #[error("radius check failed: M({witness}) = {modulus} is not greater than {witness}")]
    RadiusCheckFailed { witness: f64, modulus: f64 },

    #[error("growth heuristic failed: M(r)/r is not increasing at r = {r_max}")]
    GrowthHeuristicFailed { r_max: f64 },

    #[error("radius certificate for R = {0} did not pass")]
    InvalidRadius(f64),

    #[error("ladder too short: rung {needed} requested, ladder depth is {available}")]
    LadderTooShort { needed: i64, available: usize },

    #[error("level {level} is below the ladder's lowest usable level -{depth}")]
    LevelTooLow { level: i32, depth: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("origin cell is not in the complement; grid and ladder are inconsistent")]
    OriginNotInComplement,

    #[error("hole {index} touches the grid boundary")]
    UnboundedHole { index: usize },

    #[error("loop {index} is not available")]
    MissingLoop { index: usize },

    #[error("need at least {needed} loops at this stride, have {available}")]
    InsufficientLoops { needed: usize, available: usize },

    #[error("stride {stride} is below the verified disjointness stride {required}")]
    StrideTooSmall { stride: usize, required: usize },

    #[error("no disjointness stride found among {loops} stored loops")]
    DisjointnessNotFound { loops: usize },

    #[error("expanding-index set too small: {0}")]
    MsetInsufficient(String),

    #[error("escape schedule only determines {determinable} symbols, {requested} requested")]
    ScheduleExhausted { determinable: usize, requested: usize },

    #[error("refinement exhausted: no surviving chain at step {step}")]
    RefinementExhausted { step: usize },

    #[error("no branch available at step {step}: the transition is forced")]
    NoBranchAvailable { step: usize },

    #[error("base point lies on the image curve")]
    BasePointOnCurve,

    #[error("image curve could not be closed at the sampling limit")]
    NonClosedImage,

    #[error("malformed raster: {0}")]
    Format(String),
}

impl CoreError {
    pub fn family(&self) -> ErrorFamily {
        use CoreError::*;
        match self {
            InvalidParameter(_) | InvalidGrid(_) | StrideTooSmall { .. } => ErrorFamily::Config,
            RadiusCheckFailed { .. }
            | GrowthHeuristicFailed { .. }
            | InvalidRadius(_)
            | LadderTooShort { .. }
            | LevelTooLow { .. } => ErrorFamily::Ladder,
            RefinementExhausted { .. } => ErrorFamily::Refinement,
            Format(_) => ErrorFamily::Format,
            Overflow
            | OriginNotInComplement
            | UnboundedHole { .. }
            | MissingLoop { .. }
            | InsufficientLoops { .. }
            | DisjointnessNotFound { .. }
            | MsetInsufficient(_)
            | ScheduleExhausted { .. }
            | NoBranchAvailable { .. }
            | BasePointOnCurve
            | NonClosedImage => ErrorFamily::Analysis,
        }
    }
}
