use num_bigint::BigUint;
use thiserror::Error;

use crate::codec::to_hex;

/// Errors shared by every module of the workbench.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid modulus 0x{}", to_hex(.0))]
    InvalidModulus(BigUint),

    #[error("gcd(0, 0) is undefined")]
    UndefinedGcd,

    #[error("value is not invertible (gcd = 0x{})", to_hex(.gcd))]
    NotInvertible { gcd: BigUint },

    #[error("wrong solver branch: {0}")]
    WrongBranch(&'static str),

    #[error("root is not simple modulo p; use the degenerate solver")]
    NonSimpleRoot,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("fault at byte 0 would change the parity of the modulus")]
    ParityViolation,

    #[error("square roots modulo powers of 2 are not supported")]
    EvenPrime,

    #[error("root set of size {count} exceeds the enumeration cap {cap}")]
    RootOverflow { count: BigUint, cap: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("rejected: {0}")]
    Reject(String),

    #[error("{0} roots match the challenge")]
    Ambiguous(usize),

    #[error("expected a {expected} ciphertext, got {found}")]
    SchemeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("generation failed: {0}")]
    GenerationFailed(String),

    #[error("empty input")]
    EmptyInput,

    #[error("bad hex: {0}")]
    Hex(String),
}

pub type Result<T> = std::result::Result<T, Error>;
