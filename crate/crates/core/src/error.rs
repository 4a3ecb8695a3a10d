use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("length mismatch: expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("exponent below 1 at cell {cell} (value {value})")]
    ExponentBelowOne { cell: usize, value: f64 },

    #[error("exponent equals 1 at cell {cell}; conjugate exponent undefined")]
    ExponentIsOne { cell: usize },

    #[error("density not strictly positive at cell {cell} (value {value})")]
    NonPositiveDensity { cell: usize, value: f64 },

    #[error("evaluator returned non-finite value {value} at t = {t}")]
    NonFiniteSample { t: f64, value: f64 },

    #[error("initial-value ladder did not converge after {steps} steps (last gap {gap:e})")]
    NotConverged { steps: usize, gap: f64 },

    #[error("supports of items {first} and {second} overlap")]
    OverlappingSupports { first: usize, second: usize },

    #[error("norm {norm} exceeds e * sup|f| = {bound}")]
    SupBoundViolated { norm: f64, bound: f64 },

    #[error("no bracket for the modular equation after {doublings} doublings")]
    BracketFailure { doublings: usize },

    #[error("t = {0} is outside [0, 1)")]
    OutsideDomain(f64),

    #[error("found {found} of {requested} monotone pieces within the scan budget")]
    InsufficientPieces { found: usize, requested: usize },

    #[error("no target piece covers source piece {piece} with range [{lo}, {hi}]")]
    NoCoveringPiece { piece: usize, lo: f64, hi: f64 },

    #[error("exponent is not strictly monotone on a proper interval near t = {0}")]
    NotPiecewiseMonotone(f64),

    #[error("maximizer did not converge; best value {best}")]
    MaximizerNotConverged { best: f64 },

    #[error("{0}")]
    InvalidArgument(String),
}
