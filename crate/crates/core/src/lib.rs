//! Crashing-modulus fault attack workbench for Rabin-based RFID protocols.
//!
//! The pipeline: simulate a WIPR or RAMON tag, perturb its public modulus
//! with a modelled fault, factor each candidate perturbed modulus under a
//! time budget, enumerate every square root of the ciphertext (including
//! the degenerate cases where the ciphertext shares a factor with the
//! modulus) and pick out the well-formed message.

pub mod attack;
pub mod campaign;
pub mod cli;
pub mod codec;
pub mod error;
pub mod factor;
pub mod faults;
pub mod ntheory;
pub mod protocols;
pub mod rabin;
pub mod sqroots;

pub use error::{Error, Result};
