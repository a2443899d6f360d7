//! Integer factorisation under a wall-clock budget.
//!
//! Trial division by the primes below 10^6, perfect-power detection, then
//! alternating rounds of Brent's rho and Pollard's p-1 with growing effort.
//! The deadline is checked cooperatively every `check_interval` group
//! operations, so a call can overshoot by at most that much work.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntheory::{is_prime, pow_mod, seeded_rng, small_primes, SeededRng};
use crate::sqroots::{PrimePower, PrimePowerFactorization};

pub const DEFAULT_CHECK_INTERVAL: u64 = 1 << 14;
pub const DEFAULT_RHO_SEED: u64 = 0x5eed;

const RHO_BATCH: u64 = 128;
const RHO_FIRST_ROUND: u64 = 1 << 12;
const PM1_FIRST_BOUND: u32 = 2_000;

/// Time allowance for one factorisation. `wall_limit = None` is unlimited,
/// `Some(0)` times out before doing any work. `op_limit` caps the number of
/// group operations instead, which makes constrained runs reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "BudgetRepr", into = "BudgetRepr")]
pub struct FactorBudget {
    pub wall_limit: Option<Duration>,
    pub check_interval: u64,
    pub op_limit: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct BudgetRepr {
    #[serde(default)]
    wall_limit_ms: Option<f64>,
    #[serde(default = "default_interval")]
    check_interval: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    op_limit: Option<u64>,
}

fn default_interval() -> u64 {
    DEFAULT_CHECK_INTERVAL
}

impl From<BudgetRepr> for FactorBudget {
    fn from(r: BudgetRepr) -> Self {
        Self {
            wall_limit: r.wall_limit_ms.map(|ms| Duration::from_secs_f64(ms.max(0.0) / 1000.0)),
            check_interval: r.check_interval.max(1),
            op_limit: r.op_limit,
        }
    }
}

impl From<FactorBudget> for BudgetRepr {
    fn from(b: FactorBudget) -> Self {
        Self {
            wall_limit_ms: b.wall_limit.map(|d| d.as_secs_f64() * 1000.0),
            check_interval: b.check_interval,
            op_limit: b.op_limit,
        }
    }
}

impl FactorBudget {
    pub fn new(wall_limit: Duration, check_interval: u64) -> Self {
        Self {
            wall_limit: Some(wall_limit),
            check_interval: check_interval.max(1),
            op_limit: None,
        }
    }

    pub fn from_millis(ms: u64) -> Self {
        Self::new(Duration::from_millis(ms), DEFAULT_CHECK_INTERVAL)
    }

    pub fn unlimited() -> Self {
        Self {
            wall_limit: None,
            check_interval: DEFAULT_CHECK_INTERVAL,
            op_limit: None,
        }
    }

    /// No wall-clock limit, at most `ops` group operations.
    pub fn ops(ops: u64) -> Self {
        Self {
            op_limit: Some(ops),
            ..Self::unlimited()
        }
    }

    pub fn is_unlimited(&self) -> bool {
        self.wall_limit.is_none() && self.op_limit.is_none()
    }

    pub fn is_zero(&self) -> bool {
        self.wall_limit == Some(Duration::ZERO) || self.op_limit == Some(0)
    }
}

impl Default for FactorBudget {
    fn default() -> Self {
        Self::unlimited()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FactorStatus {
    Complete,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorOutcome {
    pub status: FactorStatus,
    pub factorization: Option<PrimePowerFactorization>,
    #[serde(with = "duration_ms")]
    pub elapsed: Duration,
    /// Group operations performed (modular multiplications, trial divisions).
    pub ops: u64,
}

impl FactorOutcome {
    pub fn is_complete(&self) -> bool {
        self.status == FactorStatus::Complete
    }
}

pub(crate) mod duration_ms {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64() * 1000.0)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let ms = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(ms.max(0.0) / 1000.0))
    }
}

struct TimedOut;

struct Clock {
    start: Instant,
    deadline: Option<Instant>,
    interval: u64,
    pending: u64,
    ops: u64,
    op_limit: u64,
}

impl Clock {
    fn new(budget: &FactorBudget) -> Self {
        let start = Instant::now();
        Self {
            start,
            deadline: budget.wall_limit.and_then(|d| start.checked_add(d)),
            interval: budget.check_interval,
            pending: 0,
            ops: 0,
            op_limit: budget.op_limit.unwrap_or(u64::MAX),
        }
    }

    #[inline]
    fn tick(&mut self, n: u64) -> std::result::Result<(), TimedOut> {
        self.ops += n;
        if self.ops > self.op_limit {
            return Err(TimedOut);
        }
        self.pending += n;
        if self.pending >= self.interval {
            self.pending = 0;
            self.check()?;
        }
        Ok(())
    }

    fn check(&self) -> std::result::Result<(), TimedOut> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(TimedOut),
            _ => Ok(()),
        }
    }
}

pub fn factorize(n: &BigUint, budget: &FactorBudget) -> Result<FactorOutcome> {
    factorize_seeded(n, budget, DEFAULT_RHO_SEED)
}

/// As [`factorize`] with an explicit seed for the rho / p-1 parameters.
pub fn factorize_seeded(n: &BigUint, budget: &FactorBudget, seed: u64) -> Result<FactorOutcome> {
    if n < &BigUint::from(2u32) {
        return Err(Error::Range(format!("cannot factor {n}")));
    }
    let mut clock = Clock::new(budget);
    let mut rng = seeded_rng(seed);
    let result = if budget.is_zero() {
        Err(TimedOut)
    } else {
        run(n, &mut clock, &mut rng)
    };
    let elapsed = clock.start.elapsed();
    Ok(match result {
        Ok(factors) => {
            let fact = PrimePowerFactorization::new(
                factors
                    .into_iter()
                    .map(|(p, e)| PrimePower::new_unchecked(p, e))
                    .collect(),
            )?;
            FactorOutcome {
                status: FactorStatus::Complete,
                factorization: Some(fact),
                elapsed,
                ops: clock.ops,
            }
        }
        Err(TimedOut) => FactorOutcome {
            status: FactorStatus::TimedOut,
            factorization: None,
            elapsed,
            ops: clock.ops,
        },
    })
}

pub fn is_square_free(fact: &PrimePowerFactorization) -> bool {
    fact.factors().iter().all(|pp| pp.exponent() == 1)
}

type Factors = BTreeMap<BigUint, u32>;

fn run(n: &BigUint, clock: &mut Clock, rng: &mut SeededRng) -> std::result::Result<Factors, TimedOut> {
    let mut found = Factors::new();
    let rest = trial_divide(n, &mut found, clock)?;
    // (composite or unknown, multiplicity)
    let mut stack = Vec::new();
    if !rest.is_one() {
        stack.push((rest, 1u32));
    }
    while let Some((m, mult)) = stack.pop() {
        clock.tick(1)?;
        if is_prime(&m) {
            *found.entry(m).or_insert(0) += mult;
            continue;
        }
        if let Some((root, k)) = perfect_power(&m) {
            stack.push((root, mult * k));
            continue;
        }
        let d = split(&m, clock, rng)?;
        let other = &m / &d;
        stack.push((d, mult));
        stack.push((other, mult));
    }
    Ok(found)
}

fn trial_divide(n: &BigUint, found: &mut Factors, clock: &mut Clock) -> std::result::Result<BigUint, TimedOut> {
    if let Some(mut m) = n.to_u64() {
        for &p in small_primes() {
            let p = p as u64;
            if p * p > m {
                break;
            }
            clock.tick(1)?;
            if m % p == 0 {
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                found.insert(BigUint::from(p), e);
            }
        }
        if m > 1 && m < (crate::ntheory::SMALL_PRIME_LIMIT as u64).pow(2) {
            // everything below 10^12 without a factor < 10^6 is prime
            found.insert(BigUint::from(m), 1);
            m = 1;
        }
        return Ok(BigUint::from(m));
    }
    let mut m = n.clone();
    for &p in small_primes() {
        clock.tick(1)?;
        if (&m % p).is_zero() {
            let mut e = 0;
            while (&m % p).is_zero() {
                m /= p;
                e += 1;
            }
            found.insert(BigUint::from(p), e);
            if let Some(small) = m.to_u64() {
                if small == 1 || small / (p as u64) < p as u64 {
                    break;
                }
            }
        }
    }
    if m > BigUint::one() && m.bits() <= 39 {
        // 2^39 < 10^12: no factor below 10^6 means prime
        found.insert(m, 1);
        return Ok(BigUint::one());
    }
    Ok(m)
}

/// `Some((r, k))` with `r^k = n`, `k >= 2` maximal over primes tried.
fn perfect_power(n: &BigUint) -> Option<(BigUint, u32)> {
    let bits = n.bits();
    // after trial division every prime factor exceeds 2^19
    let max_k = (bits / 19).max(2) as u32;
    for k in 2..=max_k {
        let r = n.nth_root(k);
        if r.pow(k) == *n {
            return Some((r, k));
        }
    }
    None
}

/// Finds a nontrivial divisor of the odd composite `n` (not a perfect power).
fn split(n: &BigUint, clock: &mut Clock, rng: &mut SeededRng) -> std::result::Result<BigUint, TimedOut> {
    if n.is_even() {
        return Ok(BigUint::from(2u32));
    }
    let mut rho_limit = RHO_FIRST_ROUND;
    let mut pm1 = PMinusOne::new(n, rng);
    loop {
        if let Some(small) = n.to_u64() {
            let mont = Mont64::new(small);
            let c = rng.gen_range(1..small - 1);
            let y = rng.gen_range(0..small);
            if let Some(d) = brent_word(&mont, c, y, rho_limit, clock)? {
                return Ok(BigUint::from(d));
            }
        } else if let Some(mid) = n.to_u128() {
            let mont = Mont128::new(mid);
            let c = rng.gen_range(1..mid - 1);
            let y = rng.gen_range(0..mid);
            if let Some(d) = brent_word(&mont, c, y, rho_limit, clock)? {
                return Ok(BigUint::from(d));
            }
        } else {
            let c = rng.gen_biguint_range(&BigUint::one(), &(n - 1u32));
            let y = rng.gen_biguint_below(n);
            if let Some(d) = brent_big(n, &c, &y, rho_limit, clock)? {
                return Ok(d);
            }
        }
        if let Some(d) = pm1.extend(clock)? {
            return Ok(d);
        }
        rho_limit = rho_limit.saturating_mul(2);
    }
}

/// Brent's cycle finding on `y -> y^2 + c` with gcds batched over
/// `RHO_BATCH` differences. `None` when `limit` iterations pass or the
/// batch collapses to `n` (caller retries with a fresh `c`).
fn brent_big(
    n: &BigUint,
    c: &BigUint,
    y0: &BigUint,
    limit: u64,
    clock: &mut Clock,
) -> std::result::Result<Option<BigUint>, TimedOut> {
    let f = |y: &BigUint| (y * y + c) % n;
    let one = BigUint::one();
    let mut y = y0.clone();
    let mut x = y.clone();
    let mut ys = y.clone();
    let mut q = one.clone();
    let mut g = one.clone();
    let mut r: u64 = 1;
    let mut iters: u64 = 0;
    while g.is_one() {
        x = y.clone();
        for _ in 0..r {
            y = f(&y);
        }
        clock.tick(r)?;
        let mut k = 0;
        while k < r && g.is_one() {
            ys = y.clone();
            let steps = RHO_BATCH.min(r - k);
            for _ in 0..steps {
                y = f(&y);
                let diff = if x > y { &x - &y } else { &y - &x };
                q = (q * diff) % n;
            }
            clock.tick(2 * steps)?;
            g = q.gcd(n);
            k += steps;
        }
        iters += 2 * r;
        r *= 2;
        if g.is_one() && iters > limit {
            return Ok(None);
        }
    }
    if &g == n {
        loop {
            ys = f(&ys);
            clock.tick(1)?;
            let diff = if x > ys { &x - &ys } else { &ys - &x };
            g = diff.gcd(n);
            if !g.is_one() {
                break;
            }
        }
    }
    Ok(if &g == n { None } else { Some(g) })
}

/// Montgomery arithmetic on machine words, used by rho for small `n`.
trait MontWord {
    type W: Copy + Ord + Integer;
    fn modulus(&self) -> Self::W;
    fn mul(&self, a: Self::W, b: Self::W) -> Self::W;
    fn add(&self, a: Self::W, b: Self::W) -> Self::W;
}

fn word_inverse_u64(n: u64) -> u64 {
    let mut inv = n;
    for _ in 0..5 {
        inv = inv.wrapping_mul(2u64.wrapping_sub(n.wrapping_mul(inv)));
    }
    inv
}

/// Odd `n < 2^64`.
struct Mont64 {
    n: u64,
    n_neg_inv: u64,
}

impl Mont64 {
    fn new(n: u64) -> Self {
        Self {
            n,
            n_neg_inv: word_inverse_u64(n).wrapping_neg(),
        }
    }
}

impl MontWord for Mont64 {
    type W = u64;

    fn modulus(&self) -> u64 {
        self.n
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        let t = a as u128 * b as u128;
        let lo = t as u64;
        let hi = (t >> 64) as u64;
        let m = lo.wrapping_mul(self.n_neg_inv);
        let mn = m as u128 * self.n as u128;
        let (_, carry) = lo.overflowing_add(mn as u64);
        let res = hi as u128 + (mn >> 64) + carry as u128;
        if res >= self.n as u128 {
            (res - self.n as u128) as u64
        } else {
            res as u64
        }
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let (s, over) = a.overflowing_add(b);
        if over || s >= self.n {
            s.wrapping_sub(self.n)
        } else {
            s
        }
    }
}

/// Odd `n < 2^128`.
struct Mont128 {
    n: u128,
    n_neg_inv: u128,
}

#[inline]
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let (a0, a1) = (a as u64 as u128, a >> 64);
    let (b0, b1) = (b as u64 as u128, b >> 64);
    let ll = a0 * b0;
    let lh = a0 * b1;
    let hl = a1 * b0;
    let hh = a1 * b1;
    let mid = (ll >> 64) + (lh as u64 as u128) + (hl as u64 as u128);
    let lo = (ll as u64 as u128) | (mid << 64);
    let hi = hh + (lh >> 64) + (hl >> 64) + (mid >> 64);
    (lo, hi)
}

impl Mont128 {
    fn new(n: u128) -> Self {
        let mut inv = word_inverse_u64(n as u64) as u128;
        inv = inv.wrapping_mul(2u128.wrapping_sub(n.wrapping_mul(inv)));
        Self {
            n,
            n_neg_inv: inv.wrapping_neg(),
        }
    }
}

impl MontWord for Mont128 {
    type W = u128;

    fn modulus(&self) -> u128 {
        self.n
    }

    #[inline]
    fn mul(&self, a: u128, b: u128) -> u128 {
        let (lo, hi) = mul_wide(a, b);
        let m = lo.wrapping_mul(self.n_neg_inv);
        let (mn_lo, mn_hi) = mul_wide(m, self.n);
        let (_, c) = lo.overflowing_add(mn_lo);
        let (s, o1) = hi.overflowing_add(mn_hi);
        let (s, o2) = s.overflowing_add(c as u128);
        if o1 || o2 || s >= self.n {
            s.wrapping_sub(self.n)
        } else {
            s
        }
    }

    #[inline]
    fn add(&self, a: u128, b: u128) -> u128 {
        let (s, over) = a.overflowing_add(b);
        if over || s >= self.n {
            s.wrapping_sub(self.n)
        } else {
            s
        }
    }
}

fn brent_word<M: MontWord>(
    mont: &M,
    c: M::W,
    y0: M::W,
    limit: u64,
    clock: &mut Clock,
) -> std::result::Result<Option<M::W>, TimedOut> {
    let n = mont.modulus();
    let one = M::W::one();
    // the map runs in the Montgomery domain; gcds are unaffected by R
    let f = |y: M::W| mont.add(mont.mul(y, y), c);
    let diff = |a: M::W, b: M::W| if a > b { a - b } else { b - a };
    let mut y = y0;
    let mut x = y;
    let mut ys = y;
    let mut q = one;
    let mut g = one;
    let mut r: u64 = 1;
    let mut iters: u64 = 0;
    while g == one {
        x = y;
        for _ in 0..r {
            y = f(y);
        }
        clock.tick(r)?;
        let mut k = 0;
        while k < r && g == one {
            ys = y;
            let steps = RHO_BATCH.min(r - k);
            for _ in 0..steps {
                y = f(y);
                q = mont.mul(q, diff(x, y));
            }
            clock.tick(2 * steps)?;
            g = q.gcd(&n);
            k += steps;
        }
        iters += 2 * r;
        r *= 2;
        if g == one && iters > limit {
            return Ok(None);
        }
    }
    if g == n {
        loop {
            ys = f(ys);
            clock.tick(1)?;
            g = diff(x, ys).gcd(&n);
            if g != one {
                break;
            }
        }
    }
    Ok(if g == n { None } else { Some(g) })
}

/// Pollard p-1 whose smoothness bound doubles on every call.
struct PMinusOne {
    n: BigUint,
    a: BigUint,
    next_prime: usize,
    bound: u32,
    done: bool,
}

impl PMinusOne {
    fn new(n: &BigUint, rng: &mut SeededRng) -> Self {
        let a = rng.gen_biguint_range(&BigUint::from(2u32), &(n - 1u32));
        Self {
            n: n.clone(),
            a,
            next_prime: 0,
            bound: PM1_FIRST_BOUND,
            done: false,
        }
    }

    fn extend(&mut self, clock: &mut Clock) -> std::result::Result<Option<BigUint>, TimedOut> {
        if self.done {
            return Ok(None);
        }
        let primes = small_primes();
        let bound = self.bound;
        let mut since_gcd = 0;
        while self.next_prime < primes.len() && primes[self.next_prime] <= bound {
            let p = primes[self.next_prime] as u64;
            let mut pk = p;
            while pk * p <= bound as u64 {
                pk *= p;
            }
            self.a = pow_mod(&self.a, &BigUint::from(pk), &self.n);
            clock.tick(64 - pk.leading_zeros() as u64)?;
            self.next_prime += 1;
            since_gcd += 1;
            if since_gcd == 256 {
                since_gcd = 0;
                if let Some(d) = self.check()? {
                    return Ok(Some(d));
                }
            }
        }
        let found = self.check()?;
        if self.next_prime >= primes.len() {
            self.done = true;
        }
        self.bound = self.bound.saturating_mul(2);
        Ok(found)
    }

    fn check(&mut self) -> std::result::Result<Option<BigUint>, TimedOut> {
        if self.a.is_zero() {
            self.done = true;
            return Ok(None);
        }
        let g = (&self.a + &self.n - 1u32).gcd(&self.n);
        if g.is_one() || g == self.n {
            if g == self.n {
                self.done = true;
            }
            return Ok(None);
        }
        Ok(Some(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::{gen_blum_prime, primes_below};

    fn n(x: u64) -> BigUint {
        BigUint::from(x)
    }

    fn pairs(o: &FactorOutcome) -> Vec<(u64, u32)> {
        o.factorization
            .as_ref()
            .unwrap()
            .factors()
            .iter()
            .map(|pp| (pp.prime().to_u64().unwrap(), pp.exponent()))
            .collect()
    }

    #[test]
    fn small_examples() {
        let o = factorize(&n(45), &FactorBudget::unlimited()).unwrap();
        assert!(o.is_complete());
        assert_eq!(pairs(&o), vec![(3, 2), (5, 1)]);
        let p = n(1_000_003);
        let o = factorize(&p, &FactorBudget::unlimited()).unwrap();
        assert_eq!(pairs(&o), vec![(1_000_003, 1)]);
        assert!(matches!(factorize(&n(1), &FactorBudget::unlimited()), Err(Error::Range(_))));
        assert!(matches!(factorize(&n(0), &FactorBudget::unlimited()), Err(Error::Range(_))));
    }

    #[test]
    fn sound_for_every_n_up_to_a_million() {
        // smallest-prime-factor sieve as the oracle
        const LIMIT: usize = 1_000_000;
        let mut spf = vec![0u32; LIMIT + 1];
        for i in 2..=LIMIT {
            if spf[i] == 0 {
                let mut j = i;
                while j <= LIMIT {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        let budget = FactorBudget::unlimited();
        for v in 2..=LIMIT {
            let mut expect: Vec<(u64, u32)> = Vec::new();
            let mut m = v;
            while m > 1 {
                let p = spf[m] as u64;
                m /= p as usize;
                match expect.last_mut() {
                    Some((q, e)) if *q == p => *e += 1,
                    _ => expect.push((p, 1)),
                }
            }
            let o = factorize(&n(v as u64), &budget).unwrap();
            assert_eq!(pairs(&o), expect, "n = {v}");
        }
    }

    #[test]
    fn splits_products_of_large_primes() {
        let mut rng = seeded_rng(4);
        for bits in [24u64, 30, 36] {
            for _ in 0..5 {
                let p = gen_blum_prime(bits, &mut rng).unwrap();
                let q = gen_blum_prime(bits + 3, &mut rng).unwrap();
                let m = &p * &p * &q;
                let o = factorize(&m, &FactorBudget::unlimited()).unwrap();
                let f = o.factorization.unwrap();
                assert_eq!(f.value(), m);
                assert!(f.factors().iter().all(|pp| is_prime(pp.prime())));
                assert!(!is_square_free(&f));
            }
        }
    }

    #[test]
    fn perfect_powers_of_big_primes() {
        let p = gen_blum_prime(70, &mut seeded_rng(8)).unwrap();
        let m = p.pow(3u32);
        let o = factorize(&m, &FactorBudget::unlimited()).unwrap();
        let f = o.factorization.unwrap();
        assert_eq!(f.factors().len(), 1);
        assert_eq!(f.factors()[0].exponent(), 3);
        let q = gen_blum_prime(24, &mut seeded_rng(9)).unwrap();
        let m = p.pow(2u32) * q.pow(2u32);
        let f = factorize(&m, &FactorBudget::unlimited()).unwrap().factorization.unwrap();
        assert_eq!(f.value(), m);
        assert!(f.factors().iter().all(|pp| pp.exponent() == 2));
    }

    #[test]
    fn word_montgomery_matches_bigint() {
        let mut rng = seeded_rng(21);
        for _ in 0..2000 {
            let n64 = rng.gen::<u64>() | 1;
            let m = Mont64::new(n64);
            let (a, b) = (rng.gen_range(0..n64), rng.gen_range(0..n64));
            let r = BigUint::one() << 64u32;
            let expect = (n(a) * n(b) * crate::ntheory::mod_inverse(&(&r % n64), &n(n64)).unwrap().value()) % n64;
            assert_eq!(n(m.mul(a, b)), expect);
            let n128 = rng.gen::<u128>() | 1 | (1 << 127);
            let m = Mont128::new(n128);
            let (a, b) = (rng.gen_range(0..n128), rng.gen_range(0..n128));
            let big = BigUint::from(n128);
            let r = BigUint::one() << 128u32;
            let rinv = crate::ntheory::mod_inverse(&(&r % &big), &big).unwrap().into_value();
            let expect = (BigUint::from(a) * BigUint::from(b) * rinv) % &big;
            assert_eq!(BigUint::from(m.mul(a, b)), expect);
            assert_eq!(BigUint::from(m.add(a, b)), (BigUint::from(a) + BigUint::from(b)) % &big);
        }
    }

    #[test]
    fn zero_budget_times_out() {
        let o = factorize(&n(45), &FactorBudget::from_millis(0)).unwrap();
        assert_eq!(o.status, FactorStatus::TimedOut);
        assert!(o.factorization.is_none());
    }

    #[test]
    fn balanced_512_bit_semiprime_times_out() {
        let mut rng = seeded_rng(12);
        let p = gen_blum_prime(256, &mut rng).unwrap();
        let q = gen_blum_prime(256, &mut rng).unwrap();
        let budget = FactorBudget::from_millis(1000);
        let o = factorize(&(&p * &q), &budget).unwrap();
        assert_eq!(o.status, FactorStatus::TimedOut);
        // slack: one check interval of 512-bit work is a few milliseconds
        assert!(o.elapsed < Duration::from_millis(1500), "{:?}", o.elapsed);
    }

    #[test]
    fn op_limit_is_reproducible() {
        let p = gen_blum_prime(36, &mut seeded_rng(1)).unwrap();
        let q = gen_blum_prime(36, &mut seeded_rng(2)).unwrap();
        let m = &p * &q * &q;
        let full = factorize(&m, &FactorBudget::unlimited()).unwrap();
        assert!(full.is_complete());
        let tight = FactorBudget::ops(full.ops / 2);
        let a = factorize(&m, &tight).unwrap();
        let b = factorize(&m, &tight).unwrap();
        assert_eq!(a.status, FactorStatus::TimedOut);
        assert_eq!(a.ops, b.ops);
        assert!(factorize(&m, &FactorBudget::ops(full.ops)).unwrap().is_complete());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let p = gen_blum_prime(40, &mut seeded_rng(1)).unwrap();
        let q = gen_blum_prime(44, &mut seeded_rng(2)).unwrap();
        let m = &p * &q * 1_000_003u32;
        let a = factorize_seeded(&m, &FactorBudget::unlimited(), 77).unwrap();
        let b = factorize_seeded(&m, &FactorBudget::unlimited(), 77).unwrap();
        assert_eq!(a.factorization, b.factorization);
        assert_eq!(a.ops, b.ops);
    }

    #[test]
    fn square_free_examples() {
        let f = |v: &[(u64, u32)]| PrimePowerFactorization::from_pairs(v).unwrap();
        assert!(is_square_free(&f(&[(3, 1), (5, 1)])));
        assert!(!is_square_free(&f(&[(3, 2), (5, 1)])));
        assert!(is_square_free(&f(&[(7, 1)])));
    }

    #[test]
    fn p_minus_one_finds_smooth_factor() {
        // p - 1 smooth, q - 1 not: p-1 stage should split quickly
        let smooth: BigUint = primes_below(60).iter().fold(BigUint::one(), |acc, &p| acc * p);
        let mut p = None;
        for k in 1u32..10_000 {
            let cand = &smooth * k * 2u32 + 1u32;
            if is_prime(&cand) {
                p = Some(cand);
                break;
            }
        }
        let p = p.unwrap();
        let q = gen_blum_prime(128, &mut seeded_rng(3)).unwrap();
        let o = factorize(&(&p * &q), &FactorBudget::from_millis(5_000)).unwrap();
        assert!(o.is_complete());
        assert_eq!(o.factorization.unwrap().value(), &p * &q);
    }

    #[test]
    fn outcome_json() {
        let o = factorize(&n(45), &FactorBudget::unlimited()).unwrap();
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["status"], "Complete");
        assert_eq!(
            v["factorization"],
            serde_json::json!([{"prime": "3", "exponent": 2}, {"prime": "5", "exponent": 1}])
        );
        let b = serde_json::to_value(FactorBudget::from_millis(50)).unwrap();
        assert_eq!(b, serde_json::json!({"wall_limit_ms": 50.0, "check_interval": 16384}));
        let back: FactorBudget = serde_json::from_str(r#"{"wall_limit_ms": null}"#).unwrap();
        assert!(back.is_unlimited());
    }
}
