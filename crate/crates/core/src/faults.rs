//! Fault models on the public modulus and the attacker's candidate list.
//!
//! Byte indices are little-endian: byte `i` multiplies `2^(8i)`.

use std::ops::RangeInclusive;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rabin::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultModel {
    ByteCrash,
    InstructionSkip,
}

/// A fault as injected (with `pattern`) or as the attacker sees it (without).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub model: FaultModel,
    #[serde(default)]
    pub byte_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<u8>,
}

impl FaultSpec {
    pub fn byte_crash(byte_index: usize, pattern: u8) -> Self {
        Self {
            model: FaultModel::ByteCrash,
            byte_index,
            pattern: Some(pattern),
        }
    }

    pub fn instruction_skip() -> Self {
        Self {
            model: FaultModel::InstructionSkip,
            byte_index: 0,
            pattern: None,
        }
    }

    /// The same fault with the pattern hidden.
    pub fn attacker_view(&self) -> Self {
        Self {
            pattern: None,
            ..*self
        }
    }

    /// Applies the fault to `n`. ByteCrash needs the pattern.
    pub fn apply(&self, n: &BigUint) -> Result<BigUint> {
        match self.model {
            FaultModel::ByteCrash => {
                let k = self
                    .pattern
                    .ok_or_else(|| Error::Precondition("ByteCrash fault without a pattern".into()))?;
                crash_byte(n, self.byte_index, k)
            }
            FaultModel::InstructionSkip => skip_last_byte(n),
        }
    }
}

/// Little-endian byte view of an odd modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulusBytes {
    bytes: Vec<u8>,
}

impl ModulusBytes {
    pub fn new(n: &BigUint) -> Result<Self> {
        if n.bits() == 0 || !n.bit(0) {
            return Err(Error::InvalidModulus(n.clone()));
        }
        Ok(Self {
            bytes: n.to_bytes_le(),
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn to_natural(&self) -> BigUint {
        BigUint::from_bytes_le(&self.bytes)
    }
}

pub fn byte_len(n: &BigUint) -> usize {
    n.bits().div_ceil(8) as usize
}

/// `N xor (pattern << 8i)`.
pub fn crash_byte(n: &BigUint, i: usize, pattern: u8) -> Result<BigUint> {
    if i == 0 {
        return Err(Error::ParityViolation);
    }
    let len = byte_len(n);
    if i >= len {
        return Err(Error::Range(format!("byte index {i} outside a {len}-byte modulus")));
    }
    if pattern == 0 {
        return Err(Error::Range("fault pattern must be nonzero".into()));
    }
    Ok(n ^ (BigUint::from(pattern) << (8 * i)))
}

/// Drops the most significant byte.
pub fn skip_last_byte(n: &BigUint) -> Result<BigUint> {
    let len = byte_len(n);
    if len < 2 {
        return Err(Error::Range("cannot drop the only byte".into()));
    }
    let mask = (BigUint::from(1u32) << (8 * (len - 1))) - 1u32;
    Ok(n & mask)
}

/// Enumerates candidate perturbed moduli for an attacker-view fault.
pub trait CandidateGenerator {
    /// `(label, candidate)` pairs in processing order; the label is the
    /// pattern for byte crashes.
    fn candidates(&self, n: &BigUint) -> Result<Vec<(u8, BigUint)>>;
}

impl CandidateGenerator for FaultSpec {
    fn candidates(&self, n: &BigUint) -> Result<Vec<(u8, BigUint)>> {
        match self.model {
            FaultModel::ByteCrash => (1..=255u8)
                .map(|k| crash_byte(n, self.byte_index, k).map(|c| (k, c)))
                .collect(),
            FaultModel::InstructionSkip => Ok(vec![(0, skip_last_byte(n)?)]),
        }
    }
}

/// ByteCrash: 255 candidates in ascending pattern; InstructionSkip: one.
pub fn candidate_moduli(n: &BigUint, spec: &FaultSpec) -> Result<Vec<BigUint>> {
    Ok(spec.candidates(n)?.into_iter().map(|(_, c)| c).collect())
}

/// Bytes worth attacking: the lower half (bar byte 0) for WIPR, the upper
/// half for RAMON, whose lower half is fixed by `N = 1 mod 2^(n/2)`.
pub fn target_byte_range(scheme: Scheme, n_bytes: usize) -> RangeInclusive<usize> {
    match scheme {
        Scheme::Ramon => (n_bytes / 2).max(1)..=n_bytes.saturating_sub(1),
        _ => 1..=(n_bytes / 2).saturating_sub(1),
    }
}
