//! Secure distributed linearly separable computation schemes.
//!
//! A user wants the sum W_1 + ... + W_K of per-dataset messages, computed by
//! N servers of which only N_r respond, and must learn nothing about the
//! messages beyond that sum even when all N answers arrive. This crate
//! constructs such schemes over a prime field (cyclic, fractional
//! repetition, and a recursive combined construction that minimizes the
//! shared-randomness size), verifies them exactly by finite-field rank
//! arguments, and computes the matching combinatorial lower bounds.
//!
//! Modules:
//! - [`field`]: dense exact linear algebra over F_q.
//! - [`assignment`]: dataset placements, chain converse search, tiny-instance
//!   min-max enumeration.
//! - [`scheme`]: scheme builders and the randomness-count recursion.
//! - [`verify`]: decodability / security / cost verification.

pub mod assignment;
pub mod field;
pub mod scheme;
pub mod verify;

pub use assignment::{
    converse_min_max, cyclic_assignment, enumerate_assignments, find_longest_chain,
    fractional_repetition_assignment, Assignment, ChainCertificate, ChainMode, ProblemParams,
};
pub use field::{sample_matrix, CellExclusions, FieldMatrix, FieldModulus};
pub use scheme::{
    build_combined_scheme, build_cyclic_scheme, build_fractional_repetition_scheme,
    group_and_merge, h_value, securify, Grouping, HRecursionTrace, HRule, HStep, SchemeSpec,
};
pub use verify::{
    check_chain_consistency, check_decodability, check_security, check_zero_structure,
    measure_costs, verify_scheme, DecodeMode, VerificationReport,
};

/// Errors across the crate. The CLI maps these onto its exit-code contract
/// (usage/parameter errors exit 2, construction failures exit 3).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} out of supported range [2, 2^31 - 1]")]
    ModulusRange(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("exclusion set of size {excluded} covers the whole field of order {q}")]
    ExclusionTooLarge { excluded: usize, q: u64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("unsupported parameters: {0}")]
    UnsupportedParameters(String),
    #[error("search limits exceeded: {0}")]
    LimitsExceeded(String),
    #[error("construction failed after {attempts} attempts: {reason} (a larger field may help)")]
    ConstructionFailed { attempts: usize, reason: String },
    #[error("scheme integrity: {0}")]
    Integrity(String),
}
