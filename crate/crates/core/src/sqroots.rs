//! Complete solver for `x^2 = C (mod m)`.
//!
//! Covers prime moduli (Blum closed form and Tonelli-Shanks), prime powers
//! (Hensel lifting for units, explicit enumeration when `p | C`), and odd
//! composites through CRT. Nothing here errors merely because `C` has no
//! square root: an empty [`RootSet`] is returned so callers can reject wrong
//! candidate moduli cheaply.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntheory::{inv_mod, is_prime, mul_mod, pow_mod, signed, valuation, Residue};

/// Default bound on the number of roots any single call will enumerate.
pub const DEFAULT_ROOT_CAP: usize = 1 << 20;

/// `p^e` with `p` prime and `e >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PrimePower {
    #[serde(with = "crate::codec::serde_hex")]
    prime: BigUint,
    exponent: u32,
}

impl PrimePower {
    pub fn new(prime: BigUint, exponent: u32) -> Result<Self> {
        if exponent == 0 {
            return Err(Error::Range("prime power exponent must be >= 1".into()));
        }
        if !is_prime(&prime) {
            return Err(Error::Precondition(format!(
                "0x{} is not prime",
                crate::codec::to_hex(&prime)
            )));
        }
        Ok(Self { prime, exponent })
    }

    /// For callers that have already certified primality.
    pub(crate) fn new_unchecked(prime: BigUint, exponent: u32) -> Self {
        debug_assert!(exponent >= 1);
        Self { prime, exponent }
    }

    pub fn prime(&self) -> &BigUint {
        &self.prime
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn value(&self) -> BigUint {
        num_traits::pow(self.prime.clone(), self.exponent as usize)
    }
}

impl fmt::Display for PrimePower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 1 {
            write!(f, "{}", self.prime)
        } else {
            write!(f, "{}^{}", self.prime, self.exponent)
        }
    }
}

/// `p_1^e_1 ... p_w^e_w` with strictly increasing primes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrimePowerFactorization {
    factors: Vec<PrimePower>,
}

impl PrimePowerFactorization {
    /// Sorts the factors; fails if a prime repeats.
    pub fn new(mut factors: Vec<PrimePower>) -> Result<Self> {
        factors.sort();
        if factors.windows(2).any(|w| w[0].prime == w[1].prime) {
            return Err(Error::Precondition("repeated prime in factorization".into()));
        }
        Ok(Self { factors })
    }

    /// Convenience for small literal factorizations; checks primality.
    pub fn from_pairs(pairs: &[(u64, u32)]) -> Result<Self> {
        let factors = pairs
            .iter()
            .map(|&(p, e)| PrimePower::new(BigUint::from(p), e))
            .collect::<Result<Vec<_>>>()?;
        Self::new(factors)
    }

    pub fn factors(&self) -> &[PrimePower] {
        &self.factors
    }

    /// Number of distinct primes.
    pub fn omega(&self) -> usize {
        self.factors.len()
    }

    /// The represented integer.
    pub fn value(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, pp| acc * pp.value())
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

impl fmt::Display for PrimePowerFactorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|pp| pp.to_string()).collect();
        write!(f, "{}", parts.join(" * "))
    }
}

/// The full solution set of a modular square-root problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootSet {
    #[serde(with = "crate::codec::serde_hex")]
    modulus: BigUint,
    #[serde(with = "hex_vec")]
    roots: Vec<BigUint>,
}

mod hex_vec {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
        let hex: Vec<String> = v.iter().map(crate::codec::to_hex).collect();
        hex.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigUint>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|h| crate::codec::from_hex(h).map_err(serde::de::Error::custom))
            .collect()
    }
}

impl RootSet {
    /// Sorts and deduplicates `roots`.
    pub fn new(modulus: BigUint, mut roots: Vec<BigUint>) -> Self {
        roots.sort_unstable();
        roots.dedup();
        debug_assert!(roots.iter().all(|r| r < &modulus));
        Self { modulus, roots }
    }

    pub fn empty(modulus: BigUint) -> Self {
        Self {
            modulus,
            roots: Vec::new(),
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn roots(&self) -> &[BigUint] {
        &self.roots
    }

    pub fn into_roots(self) -> Vec<BigUint> {
        self.roots
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn contains(&self, x: &BigUint) -> bool {
        self.roots.binary_search(x).is_ok()
    }

    pub fn residues(&self) -> impl Iterator<Item = Residue> + '_ {
        self.roots
            .iter()
            .map(|r| Residue::from_parts_unchecked(r.clone(), self.modulus.clone()))
    }

    /// `{r, m - r}` for a nonzero root `r`.
    fn pair(modulus: BigUint, r: BigUint) -> Self {
        let neg = &modulus - &r;
        Self::new(modulus, vec![r, neg])
    }
}

fn euler_is_residue(c: &BigUint, p: &BigUint) -> bool {
    let half = (p - 1u32) >> 1;
    pow_mod(c, &half, p).is_one()
}

/// `x^2 = C (mod p)` for a prime `p = 3 (mod 4)` via `+-C^((p+1)/4)`.
pub fn sqrt_prime_3mod4(c: &BigUint, p: &BigUint) -> Result<RootSet> {
    if (p % 4u32) != BigUint::from(3u32) {
        return Err(Error::WrongBranch("p is not 3 mod 4"));
    }
    let c = c % p;
    if c.is_zero() {
        return Err(Error::Precondition("C must be a unit mod p".into()));
    }
    if !euler_is_residue(&c, p) {
        return Ok(RootSet::empty(p.clone()));
    }
    let r = pow_mod(&c, &((p + 1u32) >> 2), p);
    Ok(RootSet::pair(p.clone(), r))
}

/// Tonelli-Shanks state that depends only on `p`, so repeated roots modulo
/// the same prime skip the non-residue search.
#[derive(Debug, Clone)]
pub struct TonelliShanks {
    p: BigUint,
    /// `p - 1 = 2^s * t`, `t` odd
    s: u64,
    t: BigUint,
    /// `v^t` for the non-residue `v`; has order exactly `2^s`
    g: BigUint,
    g_inv: BigUint,
}

impl TonelliShanks {
    pub fn new(p: &BigUint) -> Result<Self> {
        if p.is_even() || !is_prime(p) {
            return Err(Error::InvalidModulus(p.clone()));
        }
        let p_minus_1 = p - 1u32;
        let s = p_minus_1.trailing_zeros().unwrap_or(0);
        let t = &p_minus_1 >> s;
        // The least non-residue is prime, so scanning integers from 2 finds
        // the same v as scanning primes.
        let mut v = BigUint::from(2u32);
        while euler_is_residue(&v, p) {
            v += 1u32;
        }
        let g = pow_mod(&v, &t, p);
        let g_inv = inv_mod(&g, p)?;
        Ok(Self {
            p: p.clone(),
            s,
            t,
            g,
            g_inv,
        })
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn sqrt(&self, c: &BigUint) -> Result<RootSet> {
        let p = &self.p;
        let c = c % p;
        if c.is_zero() {
            return Err(Error::Precondition("C must be a unit mod p".into()));
        }
        if !euler_is_residue(&c, p) {
            return Ok(RootSet::empty(p.clone()));
        }
        let z = pow_mod(&c, &self.t, p);
        // Discrete log of z to base g, one bit per step: after step i the
        // remainder z * g^-u has order dividing 2^(s-1-i).
        let mut u = BigUint::zero();
        let mut rest = z;
        let mut g_inv_2i = self.g_inv.clone();
        for i in 0..self.s {
            let probe = pow_mod(&rest, &(BigUint::one() << (self.s - 1 - i)), p);
            if !probe.is_one() {
                u.set_bit(i, true);
                rest = mul_mod(&rest, &g_inv_2i, p);
            }
            g_inv_2i = mul_mod(&g_inv_2i, &g_inv_2i, p);
        }
        debug_assert!(rest.is_one());
        let k = (BigUint::one() << self.s) - u;
        debug_assert!(k.is_even());
        let x = mul_mod(
            &pow_mod(&c, &((&self.t + 1u32) >> 1), p),
            &pow_mod(&self.g, &(k >> 1), p),
            p,
        );
        Ok(RootSet::pair(p.clone(), x))
    }
}

/// `x^2 = C (mod p)` for any odd prime `p`.
pub fn tonelli_shanks(c: &BigUint, p: &BigUint) -> Result<RootSet> {
    TonelliShanks::new(p)?.sqrt(c)
}

/// Exponent `k` with `m = p^k`, if any.
fn exponent_of(m: &BigUint, p: &BigUint) -> Option<u32> {
    if m.is_zero() {
        return None;
    }
    let (k, rest) = valuation(m, p);
    (rest.is_one() && k >= 1).then_some(k)
}

/// Lifts a simple root of `x^2 = C` from `p^k` (the modulus of `root`) to
/// `p^target_exp`, doubling precision each step.
pub fn hensel_lift(c: &BigUint, root: &Residue, p: &BigUint, target_exp: u32) -> Result<Residue> {
    let k = exponent_of(root.modulus(), p)
        .ok_or_else(|| Error::Precondition("root modulus is not a power of p".into()))?;
    if target_exp < k {
        return Err(Error::Precondition(format!(
            "cannot lift from p^{k} down to p^{target_exp}"
        )));
    }
    let x0 = root.value();
    if !(x0 * x0 % root.modulus()).eq(&(c % root.modulus())) {
        return Err(Error::Precondition("input is not a root of x^2 = C".into()));
    }
    if ((x0 << 1u32) % p).is_zero() {
        return Err(Error::NonSimpleRoot);
    }

    let mut x = x0.clone();
    let mut level = k;
    let mut pk = root.modulus().clone();
    while level < target_exp {
        let step = level.min(target_exp - level);
        let pm = num_traits::pow(p.clone(), step as usize);
        let next = &pk * &pm;
        // t = -(f(x) / p^level) * f'(x)^-1 mod p^step, f(x) = x^2 - C
        let fx = signed(&(&x * &x)) - signed(&(c % &next));
        let quotient = (fx / signed(&pk)).mod_floor(&signed(&pm));
        let quotient = quotient.to_biguint().expect("non-negative");
        let deriv_inv = inv_mod(&((&x << 1u32) % &pm), &pm)?;
        let t = (&pm - mul_mod(&quotient, &deriv_inv, &pm)) % &pm;
        x = (x + t * &pk) % &next;
        pk = next;
        level += step;
    }
    Ok(Residue::from_parts_unchecked(x, pk))
}

fn require_odd(pp: &PrimePower) -> Result<()> {
    if pp.prime.is_even() {
        Err(Error::EvenPrime)
    } else {
        Ok(())
    }
}

/// Blum closed form `+-C^((phi(p^e)+2)/4) mod p^e`, valid for
/// `p = 3 (mod 4)` and `gcd(C, p) = 1`.
pub fn sqrt_prime_power_closed_form(c: &BigUint, pp: &PrimePower) -> Result<RootSet> {
    require_odd(pp)?;
    let p = &pp.prime;
    if (p % 4u32) != BigUint::from(3u32) {
        return Err(Error::WrongBranch("p is not 3 mod 4"));
    }
    let m = pp.value();
    let c = c % &m;
    if (&c % p).is_zero() {
        return Err(Error::Precondition("C must be a unit mod p".into()));
    }
    let phi = num_traits::pow(p.clone(), (pp.exponent - 1) as usize) * (p - 1u32);
    let r = pow_mod(&c, &((phi + 2u32) >> 2), &m);
    if mul_mod(&r, &r, &m) != c {
        return Ok(RootSet::empty(m));
    }
    Ok(RootSet::pair(m, r))
}

/// Tonelli-Shanks modulo `p` followed by Hensel lifting to `p^e`. Works for
/// every odd prime.
pub fn sqrt_prime_power_lifted(c: &BigUint, pp: &PrimePower) -> Result<RootSet> {
    let ts = TonelliShanks::new(&pp.prime)?;
    lifted_with(c, pp, &ts)
}

fn lifted_with(c: &BigUint, pp: &PrimePower, ts: &TonelliShanks) -> Result<RootSet> {
    let m = pp.value();
    let base = ts.sqrt(c)?;
    let Some(r) = base.roots().first() else {
        return Ok(RootSet::empty(m));
    };
    let seed = Residue::from_parts_unchecked(r.clone(), pp.prime.clone());
    let x = hensel_lift(c, &seed, &pp.prime, pp.exponent)?.into_value();
    Ok(RootSet::pair(m, x))
}

/// `x^2 = C (mod p^e)` with `gcd(C, p) = 1`: exactly two roots or none.
pub fn sqrt_prime_power_unit(c: &BigUint, pp: &PrimePower) -> Result<RootSet> {
    unit_roots(c, pp, None)
}

fn unit_roots(c: &BigUint, pp: &PrimePower, ts: Option<&TonelliShanks>) -> Result<RootSet> {
    require_odd(pp)?;
    if (c % &pp.prime).is_zero() {
        return Err(Error::Precondition("C must be a unit mod p".into()));
    }
    if (&pp.prime % 4u32) == BigUint::from(3u32) {
        return sqrt_prime_power_closed_form(c, pp);
    }
    match ts {
        Some(ts) => lifted_with(c, pp, ts),
        None => sqrt_prime_power_lifted(c, pp),
    }
}

fn check_cap(count: &BigUint, cap: usize) -> Result<usize> {
    match count.to_usize() {
        Some(n) if n <= cap => Ok(n),
        _ => Err(Error::RootOverflow {
            count: count.clone(),
            cap,
        }),
    }
}

/// All roots of `x^2 = 0 (mod p^e)`: `k * p^ceil(e/2)` for
/// `0 <= k < p^floor(e/2)`.
pub fn roots_zero(pp: &PrimePower) -> Result<RootSet> {
    roots_zero_capped(pp, DEFAULT_ROOT_CAP)
}

pub fn roots_zero_capped(pp: &PrimePower, cap: usize) -> Result<RootSet> {
    let e = pp.exponent;
    let count = num_traits::pow(pp.prime.clone(), (e / 2) as usize);
    let n = check_cap(&count, cap)?;
    let step = num_traits::pow(pp.prime.clone(), e.div_ceil(2) as usize);
    let roots = (0..n).map(|k| &step * k).collect();
    Ok(RootSet::new(pp.value(), roots))
}

/// All roots of `x^2 = a p^l (mod p^e)` with `0 < l < e`, `p` not dividing `a`.
/// Empty when `l` is odd or `a` is not a square modulo `p^(e-l)`.
pub fn roots_ramified(c: &BigUint, pp: &PrimePower) -> Result<RootSet> {
    roots_ramified_capped(c, pp, DEFAULT_ROOT_CAP)
}

pub fn roots_ramified_capped(c: &BigUint, pp: &PrimePower, cap: usize) -> Result<RootSet> {
    ramified(c, pp, cap, None)
}

fn ramified(
    c: &BigUint,
    pp: &PrimePower,
    cap: usize,
    ts: Option<&TonelliShanks>,
) -> Result<RootSet> {
    require_odd(pp)?;
    let m = pp.value();
    let c = c % &m;
    if c.is_zero() {
        return Err(Error::Precondition("C = 0 mod p^e; use roots_zero".into()));
    }
    let (l, a) = valuation(&c, &pp.prime);
    if l == 0 {
        return Err(Error::Precondition("C is a unit; use sqrt_prime_power_unit".into()));
    }
    if l % 2 == 1 {
        return Ok(RootSet::empty(m));
    }
    let inner = PrimePower::new_unchecked(pp.prime.clone(), pp.exponent - l);
    let ys = unit_roots(&a, &inner, ts)?;
    if ys.is_empty() {
        return Ok(RootSet::empty(m));
    }
    let half = (l / 2) as usize;
    let lift_count = num_traits::pow(pp.prime.clone(), half);
    check_cap(&(&lift_count * 2u32), cap)?;
    let n = lift_count.to_usize().expect("checked against cap");
    let scale = num_traits::pow(pp.prime.clone(), half);
    let step = num_traits::pow(pp.prime.clone(), pp.exponent as usize - half);
    let mut roots = Vec::with_capacity(2 * n);
    for y in ys.roots() {
        let base = y * &scale;
        roots.extend((0..n).map(|k| &base + &step * k));
    }
    Ok(RootSet::new(m, roots))
}

/// Dispatch on `gcd(C, p^e)`: unit, `p^l` with `0 < l < e`, or `p^e`.
pub fn roots_prime_power(c: &BigUint, pp: &PrimePower) -> Result<RootSet> {
    roots_prime_power_capped(c, pp, DEFAULT_ROOT_CAP)
}

pub fn roots_prime_power_capped(c: &BigUint, pp: &PrimePower, cap: usize) -> Result<RootSet> {
    local_roots(c, pp, cap, None)
}

fn local_roots(
    c: &BigUint,
    pp: &PrimePower,
    cap: usize,
    ts: Option<&TonelliShanks>,
) -> Result<RootSet> {
    require_odd(pp)?;
    let m = pp.value();
    let c = c % &m;
    if c.is_zero() {
        roots_zero_capped(pp, cap)
    } else if (&c % &pp.prime).is_zero() {
        ramified(&c, pp, cap, ts)
    } else {
        unit_roots(&c, pp, ts)
    }
}

/// Number of roots modulo `p^e`: 2, `2p^(l/2)` or `p^floor(e/2)` by the gcd
/// case, and 0 when `C` has no square root.
pub fn local_root_count(c: &BigUint, pp: &PrimePower) -> Result<BigUint> {
    require_odd(pp)?;
    let p = &pp.prime;
    let c = c % pp.value();
    if c.is_zero() {
        return Ok(num_traits::pow(p.clone(), (pp.exponent / 2) as usize));
    }
    let (l, a) = valuation(&c, p);
    // An odd-prime unit is a square mod p^k iff it is one mod p.
    if l % 2 == 1 || !euler_is_residue(&(a % p), p) {
        return Ok(BigUint::zero());
    }
    Ok(num_traits::pow(p.clone(), (l / 2) as usize) * 2u32)
}

/// Multiplicative root count over the factorization.
pub fn count_roots(c: &BigUint, fact: &PrimePowerFactorization) -> Result<BigUint> {
    fact.factors()
        .iter()
        .try_fold(BigUint::one(), |acc, pp| Ok(acc * local_root_count(c, pp)?))
}

/// Solver prepared for one factorization: caches prime-power values, CRT
/// coefficients, and Tonelli-Shanks state.
#[derive(Debug, Clone)]
pub struct RootSolver {
    fact: PrimePowerFactorization,
    modulus: BigUint,
    /// `(p^e, N_j * (N_j^-1 mod p^e) mod N)` per factor
    crt: Vec<(BigUint, BigUint)>,
    tonelli: Vec<Option<TonelliShanks>>,
    cap: usize,
}

impl RootSolver {
    pub fn new(fact: &PrimePowerFactorization) -> Result<Self> {
        Self::with_cap(fact, DEFAULT_ROOT_CAP)
    }

    pub fn with_cap(fact: &PrimePowerFactorization, cap: usize) -> Result<Self> {
        if fact.is_empty() {
            return Err(Error::Precondition("empty factorization".into()));
        }
        if fact.factors().iter().any(|pp| pp.prime.is_even()) {
            return Err(Error::EvenPrime);
        }
        let modulus = fact.value();
        let mut crt = Vec::with_capacity(fact.omega());
        let mut tonelli = Vec::with_capacity(fact.omega());
        for pp in fact.factors() {
            let pe = pp.value();
            let cofactor = &modulus / &pe;
            let inv = inv_mod(&(&cofactor % &pe), &pe).unwrap_or_else(|_| BigUint::zero());
            crt.push((pe, (cofactor * inv) % &modulus));
            tonelli.push(if (&pp.prime % 4u32).is_one() {
                Some(TonelliShanks::new(&pp.prime)?)
            } else {
                None
            });
        }
        Ok(Self {
            fact: fact.clone(),
            modulus,
            crt,
            tonelli,
            cap,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn factorization(&self) -> &PrimePowerFactorization {
        &self.fact
    }

    pub fn count(&self, c: &BigUint) -> Result<BigUint> {
        count_roots(c, &self.fact)
    }

    /// Every root modulo the full modulus, CRT-combined as
    /// `sum_j M_j * N_j * (N_j^-1 mod p_j^e_j) mod N`.
    pub fn solve(&self, c: &BigUint) -> Result<RootSet> {
        let c = c % &self.modulus;
        let mut locals = Vec::with_capacity(self.crt.len());
        let mut total = BigUint::one();
        for (pp, ts) in self.fact.factors().iter().zip(&self.tonelli) {
            let local = local_roots(&c, pp, self.cap, ts.as_ref())?;
            if local.is_empty() {
                return Ok(RootSet::empty(self.modulus.clone()));
            }
            total *= local.len();
            locals.push(local);
        }
        check_cap(&total, self.cap)?;

        let mut acc = vec![BigUint::zero()];
        for (local, (_, coef)) in locals.iter().zip(&self.crt) {
            let terms: Vec<BigUint> = local
                .roots()
                .iter()
                .map(|r| mul_mod(r, coef, &self.modulus))
                .collect();
            let mut next = Vec::with_capacity(acc.len() * terms.len());
            for a in &acc {
                for t in &terms {
                    let s = a + t;
                    next.push(if s >= self.modulus { s - &self.modulus } else { s });
                }
            }
            acc = next;
        }
        Ok(RootSet::new(self.modulus.clone(), acc))
    }
}

/// All roots of `x^2 = C` modulo the integer represented by `fact`. Rejects
/// factorizations containing 2.
pub fn all_roots_mod(c: &BigUint, fact: &PrimePowerFactorization) -> Result<RootSet> {
    RootSolver::new(fact)?.solve(c)
}

pub fn all_roots_mod_capped(
    c: &BigUint,
    fact: &PrimePowerFactorization,
    cap: usize,
) -> Result<RootSet> {
    RootSolver::with_cap(fact, cap)?.solve(c)
}
