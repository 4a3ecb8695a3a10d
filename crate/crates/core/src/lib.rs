//! Norms on variable-exponent Lebesgue spaces `L^{p(·)}[0, 1]` defined by a
//! norm-accumulation ODE, together with the sequence-space calculus, duality,
//! Nakano comparison, weighted spaces and the universal-exponent embedding.

// `!(x >= 1.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod duality;
pub mod error;
pub mod function_model;
pub mod nakano;
pub mod phi_solver;
pub mod sequence_space;
pub mod verify;
pub mod weighted_embedding;

pub use duality::{
    conjugate, duality_map, extended_norm, holder_check, norming_pairing, norming_witness, special_variation,
    truncation_projection, witness_pairing, ConjugatePair, ExtendedNorm, HolderReport, PairingReport, VariationReport,
};
pub use error::{Error, Result};
pub use function_model::{
    refine_all, refine_common, sample_to_step, validate_exponent, Density, Exponent, Partition, StepFunction,
};
pub use nakano::{equivalence_ratio, modular, nakano_norm, ModularKind, NakanoNorm, NAKANO_TOL};
pub use phi_solver::{
    disjoint_estimates_check, norm, norm_general, phi_ladder, phi_stabilized, phi_step_exact, sup_bound_check,
    EstimateReport, GeneralNorm, LadderTrace, NormCurve, SolveConfig, Stabilized,
};
pub use sequence_space::{
    boxplus, disjoint_matrix_sum_check, lp_sum, mixed_norm, nesting_inequality_check, seq_norm, seq_norm_left,
    transpose_contraction_check, NonnegMatrix, VarExpSequence,
};
pub use weighted_embedding::{
    build_embedding, embed_isometry_check, find_monotone_pieces, p0_derivative, p0_eval, weight_isometry_check,
    weight_transform, weighted_norm, Direction, EmbedReport, EmbeddingMap, IsometryReport, MonotonePiece,
    SmoothExponent, WeightedSpec,
};
