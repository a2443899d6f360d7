//! Modular arithmetic primitives shared by the rest of the crate.
//!
//! Values are `BigUint` throughout. Moduli that fit in a machine word take a
//! `u128`-intermediate fast path; results are identical either way.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

/// An element of Z/mZ with `0 <= value < modulus` and `modulus >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Residue {
    value: BigUint,
    modulus: BigUint,
}

impl Residue {
    /// Reduces `value` modulo `modulus`.
    pub fn new(value: BigUint, modulus: BigUint) -> Result<Self> {
        check_modulus(&modulus)?;
        let value = if value < modulus { value } else { value % &modulus };
        Ok(Self { value, modulus })
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn into_value(self) -> BigUint {
        self.value
    }

    pub(crate) fn from_parts_unchecked(value: BigUint, modulus: BigUint) -> Self {
        debug_assert!(value < modulus);
        Self { value, modulus }
    }
}

fn check_modulus(m: &BigUint) -> Result<()> {
    if m < &BigUint::from(2u32) {
        Err(Error::InvalidModulus(m.clone()))
    } else {
        Ok(())
    }
}

/// `base^exp mod m` without validation. `m` must be nonzero.
pub fn pow_mod(base: &BigUint, exp: &BigUint, m: &BigUint) -> BigUint {
    if let (Some(mm), Some(e)) = (m.to_u64(), exp.to_u64()) {
        let b = (base % m).to_u64().unwrap_or(0);
        return BigUint::from(pow_mod_u64(b, e, mm));
    }
    base.modpow(exp, m)
}

/// `a * b mod m` without validation.
pub fn mul_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    if let (Some(x), Some(y), Some(mm)) = (a.to_u64(), b.to_u64(), m.to_u64()) {
        return BigUint::from(mul_mod_u64(x, y, mm));
    }
    (a * b) % m
}

#[inline]
pub(crate) fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    b %= m;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

pub fn mod_pow(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<Residue> {
    check_modulus(modulus)?;
    Ok(Residue::from_parts_unchecked(
        pow_mod(base, exponent, modulus),
        modulus.clone(),
    ))
}

/// Extended Euclid: returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b)`.
pub fn ext_gcd(a: &BigUint, b: &BigUint) -> Result<(BigUint, BigInt, BigInt)> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::UndefinedGcd);
    }
    let (mut r0, mut r1) = (BigInt::from(a.clone()), BigInt::from(b.clone()));
    let (mut s0, mut s1) = (BigInt::one(), BigInt::zero());
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let s2 = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    Ok((r0.magnitude().clone(), s0, t0))
}

/// Inverse of `a` modulo `m`. On failure the error carries `gcd(a, m)`.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Result<Residue> {
    check_modulus(m)?;
    inv_mod(a, m).map(|v| Residue::from_parts_unchecked(v, m.clone()))
}

pub(crate) fn inv_mod(a: &BigUint, m: &BigUint) -> Result<BigUint> {
    if let (Some(x), Some(mm)) = (a.to_u64(), m.to_u64()) {
        return inv_mod_u64(x % mm, mm)
            .map(BigUint::from)
            .map_err(|g| Error::NotInvertible { gcd: BigUint::from(g) });
    }
    let a = a % m;
    if a.is_zero() {
        return Err(Error::NotInvertible { gcd: m.clone() });
    }
    let (g, x, _) = ext_gcd(&a, m)?;
    if !g.is_one() {
        return Err(Error::NotInvertible { gcd: g });
    }
    let mm = BigInt::from(m.clone());
    let x = x.mod_floor(&mm);
    Ok(x.to_biguint().expect("mod_floor is non-negative"))
}

/// Returns the inverse, or the gcd when it is not 1.
fn inv_mod_u64(a: u64, m: u64) -> std::result::Result<u64, u64> {
    let (mut r0, mut r1) = (m as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return Err(r0 as u64);
    }
    Ok(t0.rem_euclid(m as i128) as u64)
}

/// p-adic valuation: returns `(v, n / p^v)` with the cofactor not divisible
/// by `p`. `n` must be nonzero.
pub fn valuation(n: &BigUint, p: &BigUint) -> (u32, BigUint) {
    let mut v = 0;
    let mut rest = n.clone();
    loop {
        let (q, r) = rest.div_rem(p);
        if !r.is_zero() {
            return (v, rest);
        }
        rest = q;
        v += 1;
    }
}

/// Witnesses that make Miller-Rabin exact below [`DETERMINISTIC_BOUND`].
const FIXED_WITNESSES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// 3,317,044,064,679,887,385,961,981
fn deterministic_bound() -> &'static BigUint {
    static BOUND: OnceLock<BigUint> = OnceLock::new();
    BOUND.get_or_init(|| {
        BigUint::parse_bytes(b"3317044064679887385961981", 10).expect("constant parses")
    })
}

pub const DEFAULT_MR_ROUNDS: usize = 40;

/// Miller-Rabin. Exact below 3.3e24 (fixed witness set); above that, `rounds`
/// pseudo-random witnesses seeded from `n` itself so answers are repeatable.
/// "Composite" is always correct.
pub fn is_probable_prime(n: &BigUint, rounds: usize) -> bool {
    if let Some(x) = n.to_u64() {
        return is_prime_u64(x);
    }
    if n.is_even() {
        return false;
    }
    for &p in small_primes().iter().take(64) {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let strong_probable_prime = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            return true;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                return true;
            }
            if x == one {
                return false;
            }
        }
        false
    };

    if n < deterministic_bound() {
        return FIXED_WITNESSES
            .iter()
            .all(|&w| strong_probable_prime(&BigUint::from(w)));
    }
    let mut seed = [0u8; 32];
    for (i, b) in n.to_bytes_le().iter().enumerate() {
        seed[i % 32] ^= b.rotate_left((i / 32) as u32);
    }
    let mut rng = ChaCha20Rng::from_seed(seed);
    let two = BigUint::from(2u32);
    (0..rounds.max(1)).all(|_| {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        strong_probable_prime(&a)
    })
}

pub fn is_prime(n: &BigUint) -> bool {
    is_probable_prime(n, DEFAULT_MR_ROUNDS)
}

pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    // The first 12 primes are a deterministic witness set for all 64-bit n.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Sieve of Eratosthenes: all primes `< limit`.
pub fn primes_below(limit: u32) -> Vec<u32> {
    let limit = limit as usize;
    if limit < 3 {
        return Vec::new();
    }
    let mut composite = vec![false; limit];
    let mut out = Vec::with_capacity(limit / 10);
    for i in 2..limit {
        if !composite[i] {
            out.push(i as u32);
            let mut j = i * i;
            while j < limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

pub const SMALL_PRIME_LIMIT: u32 = 1_000_000;

/// Primes below 10^6, computed once.
pub fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| primes_below(SMALL_PRIME_LIMIT))
}

/// Seeded random source used wherever determinism is part of a contract.
pub type SeededRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random prime `p` with `2^(bits-1) <= p < 2^bits` and `p = 3 (mod 4)`.
pub fn gen_blum_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint> {
    if bits < 4 {
        return Err(Error::Range(format!("prime size {bits} < 4 bits")));
    }
    loop {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        candidate.set_bit(1, true);
        if is_prime(&candidate) {
            return Ok(candidate);
        }
    }
}

/// Montgomery arithmetic modulo an odd `n` with `R = 2^r_bits > n`.
#[derive(Debug, Clone)]
pub struct Montgomery {
    n: BigUint,
    r_bits: u64,
    mask: BigUint,
    /// `-n^{-1} mod R`
    n_prime: BigUint,
    r2: BigUint,
}

impl Montgomery {
    /// `R = 2^bitlen(n)`.
    pub fn new(n: &BigUint) -> Result<Self> {
        Self::with_r_bits(n, n.bits())
    }

    pub fn with_r_bits(n: &BigUint, r_bits: u64) -> Result<Self> {
        if n.is_even() || n < &BigUint::from(3u32) {
            return Err(Error::InvalidModulus(n.clone()));
        }
        if n.bits() > r_bits {
            return Err(Error::Precondition(format!(
                "modulus has {} bits, R = 2^{r_bits}",
                n.bits()
            )));
        }
        let r = BigUint::one() << r_bits;
        let mask = &r - 1u32;
        let n_inv = inv_mod(n, &r)?;
        let n_prime = (&r - n_inv) & &mask;
        let r2 = (&r * &r) % n;
        Ok(Self {
            n: n.clone(),
            r_bits,
            mask,
            n_prime,
            r2,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn r_bits(&self) -> u64 {
        self.r_bits
    }

    /// `R^2 mod n`, the Montgomery-domain entry constant.
    pub fn r_squared(&self) -> &BigUint {
        &self.r2
    }

    /// REDC: `t * R^{-1} mod n` for `t < n * R`.
    pub fn redc(&self, t: &BigUint) -> BigUint {
        let m = ((t & &self.mask) * &self.n_prime) & &self.mask;
        let u = (t + m * &self.n) >> self.r_bits;
        if u >= self.n {
            u - &self.n
        } else {
            u
        }
    }

    /// `a * b * R^{-1} mod n`; requires `a, b < n`.
    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        self.redc(&(a * b))
    }
}

/// `S = A*B*R^{-1} mod N` with `R = 2^bitlen(N)`, i.e. the `S` of
/// `AB + TN = SR`.
pub fn mont_reduce(a: &BigUint, b: &BigUint, n: &BigUint) -> Result<Residue> {
    let ctx = Montgomery::new(n)?;
    if a >= n || b >= n {
        return Err(Error::Precondition("Montgomery operands must be < N".into()));
    }
    Ok(Residue::from_parts_unchecked(ctx.mul(a, b), n.clone()))
}

/// Signed integer view, handy for formulas like `x^2 - C`.
pub(crate) fn signed(n: &BigUint) -> BigInt {
    BigInt::from_biguint(Sign::Plus, n.clone())
}
