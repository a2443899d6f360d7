//! The crashing-modulus attack: given a ciphertext produced under an unknown
//! perturbed modulus, try every candidate modulus the fault model allows,
//! factor it, take all square roots and keep the one that parses as a
//! well-formed message answering the issued challenge.

use std::time::{Duration, Instant};

use log::{debug, warn};
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{serde_bytes_hex, serde_hex};
use crate::error::{Error, Result};
use crate::factor::{duration_ms, factorize_seeded, is_square_free, FactorBudget, FactorStatus, DEFAULT_RHO_SEED};
use crate::faults::{CandidateGenerator, FaultSpec};
use crate::protocols::{Ciphertext, FormattedMessage, SchemeParams};
use crate::rabin::Scheme;
use crate::sqroots::{count_roots, RootSolver, DEFAULT_ROOT_CAP};

fn default_seed() -> u64 {
    DEFAULT_RHO_SEED
}

fn default_cap() -> usize {
    DEFAULT_ROOT_CAP
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackInput {
    pub scheme: Scheme,
    pub ciphertext: Ciphertext,
    /// The genuine public modulus.
    #[serde(rename = "N", with = "serde_hex")]
    pub n: BigUint,
    /// Attacker view: the pattern is ignored.
    pub fault: FaultSpec,
    #[serde(with = "serde_bytes_hex")]
    pub challenge: Vec<u8>,
    #[serde(default)]
    pub budget: FactorBudget,
    pub params: SchemeParams,
    #[serde(default = "default_seed")]
    pub rho_seed: u64,
    #[serde(default = "default_cap")]
    pub root_cap: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl AttackInput {
    pub fn new(
        ciphertext: Ciphertext,
        n: BigUint,
        fault: FaultSpec,
        challenge: Vec<u8>,
        budget: FactorBudget,
        params: SchemeParams,
    ) -> Self {
        Self {
            scheme: ciphertext.scheme,
            ciphertext,
            n,
            fault: fault.attacker_view(),
            challenge,
            budget,
            params,
            rho_seed: DEFAULT_RHO_SEED,
            root_cap: DEFAULT_ROOT_CAP,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackStatus {
    Recovered,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateResult {
    /// Factorisation did not finish within the budget.
    Skipped,
    /// Roots were enumerated but none parsed as an answer.
    NoMatch,
    Matched,
    /// Even modulus, root-set overflow or similar.
    Rejected,
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub pattern: u8,
    pub factor_status: Option<FactorStatus>,
    pub omega: Option<usize>,
    pub square_free: Option<bool>,
    /// Root count predicted from the factorisation, as hex.
    pub eta: Option<String>,
    pub roots_tried: usize,
    pub result: CandidateResult,
    pub factor_ops: u64,
    #[serde(with = "duration_ms")]
    pub factor_time: Duration,
    #[serde(with = "duration_ms")]
    pub solve_time: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub status: AttackStatus,
    pub message: Option<FormattedMessage>,
    pub matched_pattern: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    pub matched_modulus: Option<BigUint>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_hex")]
    pub recovered_value: Option<BigUint>,
    /// Completed factorisations among the processed candidates.
    pub factor_successes: usize,
    #[serde(with = "duration_ms")]
    pub elapsed: Duration,
    pub transcript: Vec<CandidateLog>,
}

impl AttackOutcome {
    pub fn is_recovered(&self) -> bool {
        self.status == AttackStatus::Recovered
    }
}

mod opt_hex {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BigUint>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(n) => s.serialize_str(&crate::codec::to_hex(n)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigUint>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| crate::codec::from_hex(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

/// `C mod N^` for WIPR and RAW, `C* 2^r_bits mod N^` for RAMON where
/// `r_bits` is the width of the tag's Montgomery register (the bit length
/// of the genuine modulus).
pub fn reduce_ciphertext(ct: &Ciphertext, n_hat: &BigUint, r_bits: u64) -> Result<BigUint> {
    if n_hat.bits() < 2 || !n_hat.bit(0) {
        return Err(Error::InvalidModulus(n_hat.clone()));
    }
    Ok(match ct.scheme {
        Scheme::Ramon => (&ct.value << r_bits) % n_hat,
        Scheme::Wipr | Scheme::Raw => &ct.value % n_hat,
    })
}

/// Every `M0 + k N^ < N`, `k >= 0`.
pub fn lift_root_to_message(m0: &BigUint, n_hat: &BigUint, n: &BigUint) -> Vec<BigUint> {
    let mut out = Vec::new();
    let mut m = m0.clone();
    while &m < n {
        out.push(m.clone());
        m += n_hat;
    }
    out
}

struct Hit {
    message: FormattedMessage,
    value: BigUint,
}

fn process_candidate(input: &AttackInput, pattern: u8, n_hat: &BigUint) -> (CandidateLog, Option<Hit>) {
    let mut log = CandidateLog {
        pattern,
        factor_status: None,
        omega: None,
        square_free: None,
        eta: None,
        roots_tried: 0,
        result: CandidateResult::Rejected,
        factor_ops: 0,
        factor_time: Duration::ZERO,
        solve_time: Duration::ZERO,
        note: None,
    };
    if n_hat.bits() < 2 || !n_hat.bit(0) {
        log.note = Some("even candidate modulus".into());
        return (log, None);
    }
    let outcome = match factorize_seeded(n_hat, &input.budget, input.rho_seed) {
        Ok(o) => o,
        Err(e) => {
            log.note = Some(e.to_string());
            return (log, None);
        }
    };
    log.factor_status = Some(outcome.status);
    log.factor_time = outcome.elapsed;
    log.factor_ops = outcome.ops;
    let Some(fact) = outcome.factorization else {
        log.result = CandidateResult::Skipped;
        return (log, None);
    };
    log.omega = Some(fact.omega());
    log.square_free = Some(is_square_free(&fact));
    let started = Instant::now();
    let result = solve_candidate(input, n_hat, &fact, &mut log);
    log.solve_time = started.elapsed();
    match result {
        Ok(hit) => {
            log.result = if hit.is_some() {
                CandidateResult::Matched
            } else {
                CandidateResult::NoMatch
            };
            (log, hit)
        }
        Err(e) => {
            warn!("candidate {pattern} rejected: {e}");
            log.note = Some(e.to_string());
            log.result = CandidateResult::Rejected;
            (log, None)
        }
    }
}

fn solve_candidate(
    input: &AttackInput,
    n_hat: &BigUint,
    fact: &crate::sqroots::PrimePowerFactorization,
    log: &mut CandidateLog,
) -> Result<Option<Hit>> {
    let c_hat = reduce_ciphertext(&input.ciphertext, n_hat, input.n.bits())?;
    log.eta = Some(crate::codec::to_hex(&count_roots(&c_hat, fact)?));
    let solver = RootSolver::with_cap(fact, input.root_cap)?;
    let roots = solver.solve(&c_hat)?;
    for m0 in roots.roots() {
        for m in lift_root_to_message(m0, n_hat, &input.n) {
            log.roots_tried += 1;
            if let Some(message) = input.params.decode(&m) {
                if message.challenge == input.challenge {
                    debug_assert_eq!((&m * &m) % n_hat, c_hat);
                    return Ok(Some(Hit { message, value: m }));
                }
            }
        }
    }
    Ok(None)
}

/// Runs the attack over the candidates in ascending pattern order and stops
/// at the first format-valid, challenge-matching message. With
/// `parallelism > 1` candidates are evaluated in chunks of that size; the
/// result is the same as the sequential run.
pub fn run_attack(input: &AttackInput) -> Result<AttackOutcome> {
    let started = Instant::now();
    if input.ciphertext.scheme != input.params.scheme() {
        return Err(Error::SchemeMismatch {
            expected: input.params.scheme().name(),
            found: input.ciphertext.scheme.name(),
        });
    }
    let candidates = input.fault.attacker_view().candidates(&input.n)?;
    let chunk = input.parallelism.max(1);
    let mut transcript = Vec::new();
    let mut factor_successes = 0;
    for group in candidates.chunks(chunk) {
        let results: Vec<(CandidateLog, Option<Hit>)> = if chunk == 1 {
            group.iter().map(|(k, c)| process_candidate(input, *k, c)).collect()
        } else {
            group.par_iter().map(|(k, c)| process_candidate(input, *k, c)).collect()
        };
        for ((pattern, n_hat), (log, hit)) in group.iter().zip(results) {
            debug!(
                "candidate {pattern}: {:?} omega={:?} eta={:?} roots={}",
                log.factor_status, log.omega, log.eta, log.roots_tried
            );
            if log.factor_status == Some(FactorStatus::Complete) {
                factor_successes += 1;
            }
            transcript.push(log);
            if let Some(hit) = hit {
                return Ok(AttackOutcome {
                    status: AttackStatus::Recovered,
                    message: Some(hit.message),
                    matched_pattern: Some(*pattern),
                    matched_modulus: Some(n_hat.clone()),
                    recovered_value: Some(hit.value),
                    factor_successes,
                    elapsed: started.elapsed(),
                    transcript,
                });
            }
        }
    }
    Ok(AttackOutcome {
        status: AttackStatus::Exhausted,
        message: None,
        matched_pattern: None,
        matched_modulus: None,
        recovered_value: None,
        factor_successes,
        elapsed: started.elapsed(),
        transcript,
    })
}
