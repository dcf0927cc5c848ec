use thiserror::Error;

use crate::ring::AlgInt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unrecognized field descriptor {0:?}; expected \"Q\" or \"Qsqrt:D\"")]
    BadFieldDescriptor(String),

    #[error("D = {d} is not a squarefree integer >= 2 (square factor {square_factor})")]
    BadRadicand { d: u64, square_factor: u64 },

    #[error("D = {0} exceeds the supported range")]
    RadicandTooLarge(u64),

    #[error("fundamental-unit search exhausted its iteration budget")]
    UnitSearchExhausted,

    #[error("division by the zero element")]
    ZeroDivisor,

    #[error("element {0} is not totally positive")]
    NotTotallyPositive(AlgInt),

    #[error("operation requires a real quadratic field, not the rational field")]
    RationalFieldOnly,

    #[error("forms live over different fields")]
    FieldMismatch,

    #[error("Gram matrix is not symmetric at entry ({0}, {1})")]
    AsymmetricGram(usize, usize),

    #[error("Gram matrix rows have inconsistent lengths")]
    RaggedGram,

    #[error("form is not totally positive definite: leading principal minor {minor} fails at embedding {embedding}")]
    NotPositiveDefinite { embedding: usize, minor: usize },

    #[error("diagonal coefficient {0} is not totally positive")]
    BadDiagonalCoefficient(AlgInt),

    #[error("target must be totally positive or zero, got {0}")]
    BadTarget(AlgInt),

    #[error("lift source must be a form over the rational field")]
    LiftSourceNotRational,

    #[error("scaling multiplier {0} is not totally positive")]
    BadScaleMultiplier(AlgInt),

    #[error("class {0} does not lie in the requested set S")]
    NotInS(String),

    #[error("{0} is not a truant of the starting form at the stated bound")]
    NotATruant(String),

    #[error("escalation exhausted max_steps = {max_steps}; partial trail has {steps_taken} steps")]
    MaxStepsExhausted { max_steps: usize, steps_taken: usize },

    #[error("element {0} is decomposable; a squarefree indecomposable class is required")]
    Decomposable(AlgInt),

    #[error("element {0} is not squarefree (witness {1})")]
    NotSquarefree(AlgInt, AlgInt),

    #[error("rank {0} exceeds the supported bound {1} for this operation")]
    RankTooLarge(usize, usize),

    #[error("escalation tree for X = {0} is capped at max_rank {1}")]
    TreeRankCap(String, usize),

    #[error("empty candidate set")]
    EmptyCandidate,

    #[error("invalid bounds: {0}")]
    BadBounds(String),

    #[error("malformed wire payload: {0}")]
    Wire(String),
}
