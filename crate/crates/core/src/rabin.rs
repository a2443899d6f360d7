//! Textbook Rabin: Blum-prime keys, squaring encryption, root-set decryption.

use num_bigint::BigUint;
use num_traits::One;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntheory::{gen_blum_prime, is_prime};
use crate::sqroots::{all_roots_mod, PrimePower, PrimePowerFactorization, RootSet};

pub use crate::protocols::FormattedMessage;

/// Which message layout / ciphertext form a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Wipr,
    Ramon,
    Raw,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Wipr => "WIPR",
            Scheme::Ramon => "RAMON",
            Scheme::Raw => "RAW",
        }
    }
}

/// Public modulus `N = p q` with secret Blum primes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RabinKeyPair {
    pub n_bits: u64,
    #[serde(rename = "N", with = "crate::codec::serde_hex")]
    n: BigUint,
    #[serde(with = "crate::codec::serde_hex")]
    p: BigUint,
    #[serde(with = "crate::codec::serde_hex")]
    q: BigUint,
}

impl RabinKeyPair {
    /// Builds a keypair from known primes, checking every invariant.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        let three = BigUint::from(3u32);
        if p == q {
            return Err(Error::Precondition("p and q must differ".into()));
        }
        for x in [&p, &q] {
            if x % 4u32 != three || !is_prime(x) {
                return Err(Error::Precondition(format!("{x} is not a Blum prime")));
            }
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        let n = &p * &q;
        Ok(Self {
            n_bits: n.bits(),
            n,
            p,
            q,
        })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn factorization(&self) -> PrimePowerFactorization {
        PrimePowerFactorization::new(vec![
            PrimePower::new_unchecked(self.p.clone(), 1),
            PrimePower::new_unchecked(self.q.clone(), 1),
        ])
        .expect("p != q")
    }

    /// Re-validates a deserialized keypair.
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::from_primes(self.p.clone(), self.q.clone())?;
        if fresh.n != self.n || fresh.n_bits != self.n_bits {
            return Err(Error::Precondition("N != p q or wrong n_bits".into()));
        }
        Ok(())
    }
}

/// Balanced keypair: both primes have `bits/2` bits and `N` has exactly `bits`.
pub fn keygen<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<RabinKeyPair> {
    if bits < 16 || bits % 2 != 0 {
        return Err(Error::Range(format!("key size {bits} must be even and >= 16")));
    }
    loop {
        let p = gen_blum_prime(bits / 2, rng)?;
        let q = gen_blum_prime(bits / 2, rng)?;
        if p == q || (&p * &q).bits() != bits {
            continue;
        }
        return RabinKeyPair::from_primes(p, q);
    }
}

/// `M^2 mod N`.
pub fn encrypt(m: &BigUint, n: &BigUint) -> Result<BigUint> {
    if n <= &BigUint::one() {
        return Err(Error::InvalidModulus(n.clone()));
    }
    if m >= n {
        return Err(Error::Range("message must be < N".into()));
    }
    Ok((m * m) % n)
}

/// All square roots of `C` modulo `N`; four when `C` is a unit square.
pub fn decrypt(c: &BigUint, key: &RabinKeyPair) -> Result<RootSet> {
    all_roots_mod(&(c % &key.n), &key.factorization())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::seeded_rng;

    fn n(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn keygen_contract() {
        let key = keygen(16, &mut seeded_rng(1)).unwrap();
        assert_eq!(key.modulus().bits(), 16);
        assert_eq!(key.n_bits, 16);
        assert_eq!(key.p() * key.q(), *key.modulus());
        assert_eq!(key.p() % 4u32, n(3));
        assert_eq!(key.q() % 4u32, n(3));
        assert_eq!(key, keygen(16, &mut seeded_rng(1)).unwrap());
        assert!(keygen(15, &mut seeded_rng(1)).is_err());
        assert!(keygen(14, &mut seeded_rng(1)).is_err());
    }

    #[test]
    fn from_primes_checks() {
        assert_eq!(RabinKeyPair::from_primes(n(7), n(11)).unwrap().modulus(), &n(77));
        assert!(RabinKeyPair::from_primes(n(7), n(7)).is_err());
        assert!(RabinKeyPair::from_primes(n(5), n(11)).is_err());
        assert!(RabinKeyPair::from_primes(n(15), n(11)).is_err());
    }

    #[test]
    fn encrypt_examples() {
        assert_eq!(encrypt(&n(9), &n(77)).unwrap(), n(4));
        assert_eq!(encrypt(&n(1), &n(77)).unwrap(), n(1));
        assert_eq!(encrypt(&n(0), &n(77)).unwrap(), n(0));
        assert!(matches!(encrypt(&n(77), &n(77)), Err(Error::Range(_))));
    }

    #[test]
    fn decrypt_examples() {
        let key = RabinKeyPair::from_primes(n(7), n(11)).unwrap();
        let roots = decrypt(&n(4), &key).unwrap();
        assert_eq!(roots.roots(), [n(2), n(9), n(68), n(75)]);
        assert!(decrypt(&n(1), &key).unwrap().contains(&n(76)));
    }

    #[test]
    fn keypair_json_uses_hex() {
        let key = RabinKeyPair::from_primes(n(7), n(11)).unwrap();
        let json = serde_json::to_value(&key).unwrap();
        assert_eq!(json, serde_json::json!({"n_bits": 7, "N": "4d", "p": "7", "q": "b"}));
        let back: RabinKeyPair = serde_json::from_value(json).unwrap();
        back.validate().unwrap();
        assert_eq!(back, key);
    }
}
