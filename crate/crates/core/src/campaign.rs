//! Monte-Carlo fault campaign: repeated injections against one tag,
//! budgeted attacks, success bookkeeping and the number-theoretic
//! statistics of the perturbed moduli.
//!
//! Every trial draws from its own ChaCha stream (`master_seed`, stream
//! `trial_id + 1`; stream 0 generates the key), so results do not depend on
//! scheduling. Outcomes are only reproducible when the budget is unlimited
//! or expressed in operations; wall-clock budgets make them depend on the
//! machine.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use num_bigint::BigUint;
use num_integer::{Integer, Roots};
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{run_attack, AttackInput, CandidateLog};
use crate::error::{Error, Result};
use crate::factor::{is_square_free, FactorBudget, DEFAULT_RHO_SEED};
use crate::faults::{byte_len, FaultModel, FaultSpec};
use crate::ntheory::{small_primes, SeededRng};
use crate::protocols::{
    ramon_encrypt_with_width, scheme_keygen, wipr_encrypt, FormattedMessage, SchemeParams,
};
use crate::rabin::{RabinKeyPair, Scheme};
use crate::sqroots::{PrimePowerFactorization, DEFAULT_ROOT_CAP};

fn default_fault_model() -> FaultModel {
    FaultModel::ByteCrash
}

fn default_parallelism() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_ROOT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n_bits: u64,
    pub trials: usize,
    #[serde(default = "default_fault_model")]
    pub fault_model: FaultModel,
    #[serde(default)]
    pub budget: FactorBudget,
    pub scheme: Scheme,
    pub master_seed: u64,
    /// Trials run concurrently.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Every n-th trial (by id) plants a message sharing a small prime with
    /// the perturbed modulus.
    #[serde(default)]
    pub forced_degenerate_every: Option<usize>,
    /// Fresh key per trial instead of one key for the whole campaign.
    #[serde(default)]
    pub key_per_trial: bool,
    #[serde(default = "default_cap")]
    pub root_cap: usize,
}

impl CampaignConfig {
    pub fn new(scheme: Scheme, n_bits: u64, trials: usize, budget: FactorBudget, master_seed: u64) -> Self {
        Self {
            n_bits,
            trials,
            fault_model: FaultModel::ByteCrash,
            budget,
            scheme,
            master_seed,
            parallelism: 1,
            forced_degenerate_every: None,
            key_per_trial: false,
            root_cap: DEFAULT_ROOT_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Precondition("a campaign needs at least one trial".into()));
        }
        if self.scheme == Scheme::Raw {
            return Err(Error::Precondition("campaigns simulate WIPR or RAMON".into()));
        }
        if self.n_bits < 64 || self.n_bits % 8 != 0 {
            return Err(Error::Range(format!(
                "campaign modulus size {} must be a multiple of 8 and >= 64",
                self.n_bits
            )));
        }
        SchemeParams::scaled(self.scheme, self.n_bits)?;
        Ok(())
    }

    pub fn params(&self) -> Result<SchemeParams> {
        SchemeParams::scaled(self.scheme, self.n_bits)
    }
}

/// One injected fault and the attack that followed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub j: usize,
    pub k0: u8,
    pub success: bool,
    /// Candidate budgets consumed: per candidate, the fraction of the op or
    /// wall limit used (capped at 1); one per candidate when unlimited.
    pub t_units: f64,
    pub t_wall_ms: f64,
    /// Completed factorisations.
    pub c: usize,
    pub t_factor_ms: f64,
    /// Mean root-solving and matching time over completed candidates.
    pub t3_ms: f64,
    /// `T_factor + c * T3`.
    pub t_composite_ms: f64,
    pub degenerate: bool,
    pub forced: bool,
    pub matched_pattern: Option<u8>,
    pub candidates: usize,
    #[serde(skip)]
    pub factored: Vec<FactoredSample>,
}

/// ω and square-freeness of one completely factored candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactoredSample {
    pub omega: usize,
    pub square_free: bool,
}

pub(crate) fn stream_rng(master_seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// The campaign key, from stream 0.
pub fn campaign_key(config: &CampaignConfig) -> Result<RabinKeyPair> {
    scheme_keygen(config.scheme, config.n_bits, &mut stream_rng(config.master_seed, 0))
}

fn random_bytes<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<u8> {
    let mut v = vec![0u8; len];
    rng.fill_bytes(&mut v);
    v
}

fn uid_len(params: &SchemeParams) -> usize {
    match params {
        SchemeParams::Wipr(p) => p.uid_len(),
        SchemeParams::Ramon(p) => p.uid_capacity().unwrap_or(0).min(8),
    }
}

fn random_message<R: Rng + ?Sized>(params: &SchemeParams, uid: &[u8], rng: &mut R) -> FormattedMessage {
    let (challenge_len, random_len) = match params {
        SchemeParams::Wipr(p) => (p.challenge_len(), p.tag_random_len()),
        SchemeParams::Ramon(p) => (p.challenge_len, p.random_len),
    };
    FormattedMessage {
        challenge: random_bytes(challenge_len, rng),
        tag_random: random_bytes(random_len, rng),
        uid: uid.to_vec(),
        layout: params.scheme(),
    }
}

fn small_odd_factor(n: &BigUint) -> Option<u32> {
    small_primes()
        .iter()
        .skip(1)
        .take_while(|&&p| p < 1 << 16)
        .copied()
        .find(|&p| (n % p).to_u32() == Some(0))
}

/// Runs one trial against `key` (ignored when `key_per_trial`).
pub fn run_trial(config: &CampaignConfig, key: &RabinKeyPair, trial_id: u64) -> Result<TrialRecord> {
    let mut rng = stream_rng(config.master_seed, trial_id + 1);
    let own_key;
    let key = if config.key_per_trial {
        own_key = scheme_keygen(config.scheme, config.n_bits, &mut rng)?;
        &own_key
    } else {
        key
    };
    let n = key.modulus();
    let len = byte_len(n);
    let params = config.params()?;
    let forced = matches!(config.forced_degenerate_every, Some(e) if e > 0 && trial_id % e as u64 == 0);

    let (spec, mut n_hat) = match config.fault_model {
        FaultModel::ByteCrash => {
            let lo = if config.scheme == Scheme::Ramon { len / 2 } else { 1 };
            let j = rng.gen_range(lo..=len - 2);
            let k0: u8 = rng.gen_range(1..=255);
            let spec = FaultSpec::byte_crash(j, k0);
            (spec, spec.apply(n)?)
        }
        FaultModel::InstructionSkip => {
            let spec = FaultSpec::instruction_skip();
            (spec, spec.apply(n)?)
        }
    };
    let mut spec = spec;

    let mut shared_prime = None;
    if forced && config.fault_model == FaultModel::ByteCrash {
        for _ in 0..1024 {
            if let Some(p) = small_odd_factor(&n_hat) {
                shared_prime = Some(p);
                break;
            }
            spec.pattern = Some(rng.gen_range(1..=255));
            n_hat = spec.apply(n)?;
        }
    }

    let uid = random_bytes(uid_len(&params), &mut rng);
    let mut msg = random_message(&params, &uid, &mut rng);
    let mut m = params.encode(&msg)?;
    if let Some(p) = shared_prime {
        let mut tries = 0u32;
        while (&m % p).to_u32() != Some(0) {
            tries += 1;
            if tries > 1 << 22 {
                return Err(Error::GenerationFailed(format!("no message divisible by {p}")));
            }
            msg = random_message(&params, &uid, &mut rng);
            m = params.encode(&msg)?;
        }
    }
    let degenerate = !m.gcd(&n_hat).is_one();

    let ct = match &params {
        SchemeParams::Wipr(p) => wipr_encrypt(&msg, &n_hat, p, &mut rng)?,
        SchemeParams::Ramon(_) => ramon_encrypt_with_width(&m, &n_hat, n.bits())?,
    };
    let mut input = AttackInput::new(ct, n.clone(), spec, msg.challenge.clone(), config.budget, params);
    input.rho_seed = DEFAULT_RHO_SEED;
    input.root_cap = config.root_cap;
    let outcome = run_attack(&input)?;

    let k0 = spec.pattern.unwrap_or(0);
    let success = outcome.is_recovered()
        && outcome.matched_pattern == Some(k0)
        && outcome.message.as_ref() == Some(&msg);

    let t_units = outcome.transcript.iter().map(|l| budget_units(&config.budget, l)).sum();
    let t_factor: Duration = outcome.transcript.iter().map(|l| l.factor_time).sum();
    let t_solve: Duration = outcome.transcript.iter().map(|l| l.solve_time).sum();
    let c = outcome.factor_successes;
    let t3_ms = if c > 0 { ms(t_solve) / c as f64 } else { 0.0 };
    let factored = outcome
        .transcript
        .iter()
        .filter_map(|l| {
            Some(FactoredSample {
                omega: l.omega?,
                square_free: l.square_free?,
            })
        })
        .collect();

    Ok(TrialRecord {
        trial_id,
        j: spec.byte_index,
        k0,
        success,
        t_units,
        t_wall_ms: ms(outcome.elapsed),
        c,
        t_factor_ms: ms(t_factor),
        t3_ms,
        t_composite_ms: ms(t_factor) + c as f64 * t3_ms,
        degenerate,
        forced,
        matched_pattern: outcome.matched_pattern,
        candidates: outcome.transcript.len(),
        factored,
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn budget_units(budget: &FactorBudget, log: &CandidateLog) -> f64 {
    if let Some(limit) = budget.op_limit {
        return if limit == 0 {
            1.0
        } else {
            (log.factor_ops as f64 / limit as f64).min(1.0)
        };
    }
    match budget.wall_limit {
        Some(l) if l.is_zero() => 1.0,
        Some(l) => (log.factor_time.as_secs_f64() / l.as_secs_f64()).min(1.0),
        None => 1.0,
    }
}

fn in_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if parallelism <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn run_ids(config: &CampaignConfig, key: &RabinKeyPair, ids: Vec<u64>) -> Result<Vec<TrialRecord>> {
    let results: Vec<Result<TrialRecord>> = in_pool(config.parallelism, || {
        if config.parallelism <= 1 {
            ids.iter().map(|&id| run_trial(config, key, id)).collect()
        } else {
            ids.par_iter().map(|&id| run_trial(config, key, id)).collect()
        }
    })?;
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub config: CampaignConfig,
    pub key: RabinKeyPair,
    pub records: Vec<TrialRecord>,
    pub stats: CampaignStats,
}

/// Trials `0..config.trials`, aggregated in trial order.
pub fn run_campaign(config: &CampaignConfig) -> Result<CampaignReport> {
    config.validate()?;
    let key = campaign_key(config)?;
    let records = run_ids(config, &key, (0..config.trials as u64).collect())?;
    let stats = aggregate(&records)?;
    Ok(CampaignReport {
        config: config.clone(),
        key,
        records,
        stats,
    })
}

/// `sessions` attack sessions of `faults` independent faults each, against
/// the campaign key. A session succeeds if any of its faults does. Trial
/// ids start at `id_offset` so they can be kept apart from a single-fault
/// run with the same seed.
pub fn run_sessions(config: &CampaignConfig, sessions: usize, faults: usize, id_offset: u64) -> Result<Vec<bool>> {
    config.validate()?;
    let key = campaign_key(config)?;
    let ids = (0..(sessions * faults) as u64).map(|i| id_offset + i).collect();
    let records = run_ids(config, &key, ids)?;
    Ok(records
        .chunks(faults.max(1))
        .map(|s| s.iter().any(|r| r.success))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub stddev: f64,
}

impl Summary {
    /// Sample standard deviation; 0 for a single value.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self {
            count: n,
            mean,
            median,
            stddev: var.sqrt(),
        })
    }
}

/// Summaries over all trials and split by outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub all: Option<Summary>,
    pub success: Option<Summary>,
    pub failure: Option<Summary>,
}

impl Split {
    fn of(records: &[TrialRecord], f: impl Fn(&TrialRecord) -> f64) -> Self {
        let pick = |want: Option<bool>| -> Vec<f64> {
            records
                .iter()
                .filter(|r| want.is_none_or(|w| r.success == w))
                .map(&f)
                .collect()
        };
        Self {
            all: Summary::of(&pick(None)),
            success: Summary::of(&pick(Some(true))),
            failure: Summary::of(&pick(Some(false))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// `(omega, count)`, ascending.
    pub histogram: Vec<(usize, usize)>,
}

/// Everything that is a function of the trial outcomes alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStats {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub degenerate_trials: usize,
    pub forced_trials: usize,
    pub c: Split,
    pub c_histogram: Vec<(usize, usize)>,
    pub t_units: Split,
    /// Unit-width bins of `T_units`.
    pub t_units_histogram: Vec<(usize, usize)>,
    pub factored_candidates: usize,
    pub squarefree_fraction: Option<f64>,
    pub omega: Option<OmegaStats>,
}

/// Wall-clock measurements; machine dependent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub t_wall_ms: Split,
    pub t_composite_ms: Split,
    pub t3_ms_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub outcome: OutcomeStats,
    pub timing: TimingStats,
}

fn histogram(values: impl Iterator<Item = usize>) -> Vec<(usize, usize)> {
    let mut map = std::collections::BTreeMap::new();
    for v in values {
        *map.entry(v).or_insert(0) += 1;
    }
    map.into_iter().collect()
}

fn omega_from_counts(omegas: &[usize]) -> Option<OmegaStats> {
    if omegas.is_empty() {
        return None;
    }
    let n = omegas.len() as f64;
    let mean = omegas.iter().sum::<usize>() as f64 / n;
    let variance = omegas.iter().map(|&w| (w as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(OmegaStats {
        count: omegas.len(),
        mean,
        variance,
        histogram: histogram(omegas.iter().copied()),
    })
}

pub fn aggregate(records: &[TrialRecord]) -> Result<CampaignStats> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let trials = records.len();
    let successes = records.iter().filter(|r| r.success).count();
    let samples: Vec<FactoredSample> = records.iter().flat_map(|r| r.factored.iter().copied()).collect();
    let omegas: Vec<usize> = samples.iter().map(|s| s.omega).collect();
    let squarefree_fraction = if samples.is_empty() {
        None
    } else {
        Some(samples.iter().filter(|s| s.square_free).count() as f64 / samples.len() as f64)
    };
    let t3: Vec<f64> = records.iter().filter(|r| r.c > 0).map(|r| r.t3_ms).collect();
    Ok(CampaignStats {
        outcome: OutcomeStats {
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
            degenerate_trials: records.iter().filter(|r| r.degenerate).count(),
            forced_trials: records.iter().filter(|r| r.forced).count(),
            c: Split::of(records, |r| r.c as f64),
            c_histogram: histogram(records.iter().map(|r| r.c)),
            t_units: Split::of(records, |r| r.t_units),
            t_units_histogram: histogram(records.iter().map(|r| r.t_units.floor() as usize)),
            factored_candidates: samples.len(),
            squarefree_fraction,
            omega: omega_from_counts(&omegas),
        },
        timing: TimingStats {
            t_wall_ms: Split::of(records, |r| r.t_wall_ms),
            t_composite_ms: Split::of(records, |r| r.t_composite_ms),
            t3_ms_mean: Summary::of(&t3).map_or(0.0, |s| s.mean),
        },
    })
}

/// Probability that at least one of `x` independent faults succeeds.
pub fn success_curve(per_fault_rate: f64, x: u32) -> f64 {
    1.0 - (1.0 - per_fault_rate).powi(x as i32)
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Möbius function for `0..=limit` by a linear sieve.
fn mobius_table(limit: usize) -> Vec<i8> {
    let mut mu = vec![1i8; limit + 1];
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    if limit >= 1 {
        mu[0] = 0;
    }
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let ip = i * p;
            if ip > limit {
                break;
            }
            composite[ip] = true;
            if i % p == 0 {
                mu[ip] = 0;
                break;
            }
            mu[ip] = -mu[i];
        }
    }
    mu
}

/// Square-free integers in `[1, x]`: `sum_{d <= sqrt x} mu(d) floor(x / d^2)`.
pub fn squarefree_count(x: u64) -> u64 {
    let root = Roots::sqrt(&x) as usize;
    let mu = mobius_table(root);
    let mut total: i64 = 0;
    for d in 1..=root {
        if mu[d] != 0 {
            total += mu[d] as i64 * (x / (d as u64 * d as u64)) as i64;
        }
    }
    total as u64
}

pub fn squarefree_density(limit: u64) -> Result<f64> {
    if limit == 0 {
        return Err(Error::Range("limit must be >= 1".into()));
    }
    Ok(squarefree_count(limit) as f64 / limit as f64)
}

pub fn squarefree_fraction(sample: &[PrimePowerFactorization]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(sample.iter().filter(|f| is_square_free(f)).count() as f64 / sample.len() as f64)
}

/// Empirical ω statistics plus the mean of `ln ln n` for comparison.
pub fn omega_stats(sample: &[PrimePowerFactorization]) -> Result<(OmegaStats, f64)> {
    let omegas: Vec<usize> = sample.iter().map(|f| f.omega()).collect();
    let stats = omega_from_counts(&omegas).ok_or(Error::EmptyInput)?;
    let lnln = sample
        .iter()
        .map(|f| (f.value().bits() as f64 * std::f64::consts::LN_2).ln())
        .sum::<f64>()
        / sample.len() as f64;
    Ok((stats, lnln))
}

#[derive(Serialize)]
struct CsvTrial {
    trial_id: u64,
    j: usize,
    k0: u8,
    success: bool,
    #[serde(rename = "T_units")]
    t_units: f64,
    #[serde(rename = "T_wall_ms")]
    t_wall_ms: f64,
    c: usize,
}

pub fn write_trials_csv<W: Write>(out: W, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvTrial {
            trial_id: r.trial_id,
            j: r.j,
            k0: r.k0,
            success: r.success,
            t_units: r.t_units,
            t_wall_ms: r.t_wall_ms,
            c: r.c,
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_histogram_csv<W: Write>(out: W, bins: &[(usize, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin", "count"]).map_err(|e| Error::Format(e.to_string()))?;
    for (bin, count) in bins {
        w.write_record([bin.to_string(), count.to_string()])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// `stats.json`, `trials.csv`, `hist_c.csv`, `hist_t_units.csv` and
/// `hist_omega.csv` under `dir`.
pub fn write_outputs(dir: &Path, report: &CampaignReport) -> Result<()> {
    let io = |e: std::io::Error| Error::Format(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let stats = serde_json::to_string_pretty(&report.stats).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(dir.join("stats.json"), stats + "\n").map_err(io)?;
    write_trials_csv(File::create(dir.join("trials.csv")).map_err(io)?, &report.records)?;
    let o = &report.stats.outcome;
    write_histogram_csv(File::create(dir.join("hist_c.csv")).map_err(io)?, &o.c_histogram)?;
    write_histogram_csv(File::create(dir.join("hist_t_units.csv")).map_err(io)?, &o.t_units_histogram)?;
    let omega = o.omega.as_ref().map(|w| w.histogram.clone()).unwrap_or_default();
    write_histogram_csv(File::create(dir.join("hist_omega.csv")).map_err(io)?, &omega)?;
    Ok(())
}
