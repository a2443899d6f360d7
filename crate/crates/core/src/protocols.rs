//! WIPR and RAMON tag/interrogator simulations.
//!
//! WIPR sends the unreduced `C' = M^2 + rN` with
//! `M = BYTEMIX(challenge || R_tag || UID)` read as a big-endian integer.
//! RAMON sends the Montgomery-domain `C* = M^2 R^-1 mod N` where the message
//! bytes are laid out as
//!
//! ```text
//! challenge || tag random || TLV(UID) || zero fill || checksum (2) || 0x00
//! ```
//!
//! and read little-endian, so the trailing zero byte is the most significant
//! one and keeps `M < N`. The checksum is the 16-bit ones'-complement sum of
//! the big-endian 16-bit words before it.

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::codec::{serde_bytes_hex, serde_hex};
use crate::error::{Error, Result};
use crate::ntheory::{inv_mod, Montgomery};
use crate::rabin::{decrypt, keygen, RabinKeyPair, Scheme};

/// Perfect-shuffle byte interleave: the front half (which takes the extra
/// byte for odd lengths) and the back half alternate, front first.
pub fn bytemix(data: &[u8]) -> Vec<u8> {
    let split = data.len().div_ceil(2);
    let (front, back) = data.split_at(split);
    let mut out = Vec::with_capacity(data.len());
    for i in 0..split {
        out.push(front[i]);
        if let Some(&b) = back.get(i) {
            out.push(b);
        }
    }
    out
}

/// Inverse of [`bytemix`].
pub fn unmix(data: &[u8]) -> Vec<u8> {
    let mut front = Vec::with_capacity(data.len().div_ceil(2));
    let mut back = Vec::with_capacity(data.len() / 2);
    for (i, &b) in data.iter().enumerate() {
        if i % 2 == 0 {
            front.push(b);
        } else {
            back.push(b);
        }
    }
    front.extend(back);
    front
}

/// A decoded tag message (the plaintext the attack tries to recover).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormattedMessage {
    #[serde(with = "serde_bytes_hex")]
    pub challenge: Vec<u8>,
    #[serde(with = "serde_bytes_hex")]
    pub tag_random: Vec<u8>,
    #[serde(with = "serde_bytes_hex")]
    pub uid: Vec<u8>,
    pub layout: Scheme,
}

/// Ciphertext as transmitted by a tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub scheme: Scheme,
    #[serde(with = "serde_hex")]
    pub value: BigUint,
}

fn round_to_byte(bits: u64) -> u64 {
    bits.div_ceil(8) * 8
}

/// WIPR sizes in bits. The message occupies `n/8 - 1` bytes so `M < N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiprParams {
    pub s_bits: u64,
    pub t_bits: u64,
    pub uid_bits: u64,
    pub n_bits: u64,
}

impl WiprParams {
    pub fn new(s_bits: u64, t_bits: u64, uid_bits: u64, n_bits: u64) -> Result<Self> {
        let p = Self {
            s_bits,
            t_bits,
            uid_bits,
            n_bits,
        };
        p.validate()?;
        Ok(p)
    }

    /// `s = t = 80` at 1024 bits, scaled with the modulus (floor 32 bits).
    pub fn scaled(n_bits: u64) -> Result<Self> {
        let st = round_to_byte(n_bits * 80 / 1024).clamp(32, 80);
        let uid = round_to_byte(n_bits / 8).clamp(16, 64);
        Self::new(st, st, uid, n_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_bits % 8 != 0 || self.uid_bits % 8 != 0 || self.n_bits % 8 != 0 {
            return Err(Error::Format("WIPR sizes must be whole bytes".into()));
        }
        if self.s_bits == 0 {
            return Err(Error::Format("empty challenge".into()));
        }
        if self.s_bits + self.uid_bits + 8 >= self.n_bits {
            return Err(Error::Format(format!(
                "challenge ({}) + UID ({}) leave no room for R_tag in {} bits",
                self.s_bits, self.uid_bits, self.n_bits
            )));
        }
        Ok(())
    }

    pub fn message_len(&self) -> usize {
        (self.n_bits / 8 - 1) as usize
    }

    pub fn challenge_len(&self) -> usize {
        (self.s_bits / 8) as usize
    }

    pub fn uid_len(&self) -> usize {
        (self.uid_bits / 8) as usize
    }

    pub fn tag_random_len(&self) -> usize {
        self.message_len() - self.challenge_len() - self.uid_len()
    }
}

/// RAMON field sizes in bytes. `10/10` at 1024 bits, smaller at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamonParams {
    pub n_bytes: usize,
    pub challenge_len: usize,
    pub random_len: usize,
}

pub const UID_TLV_TAG: u8 = 0x5a;
const RAMON_TRAILER: usize = 3;
const TLV_HEADER: usize = 2;

impl RamonParams {
    pub fn new(n_bytes: usize, challenge_len: usize, random_len: usize) -> Result<Self> {
        let p = Self {
            n_bytes,
            challenge_len,
            random_len,
        };
        if p.uid_capacity().is_none() || challenge_len == 0 {
            return Err(Error::Format(format!("RAMON layout does not fit {n_bytes} bytes")));
        }
        Ok(p)
    }

    pub fn scaled(n_bits: u64) -> Result<Self> {
        if n_bits % 8 != 0 {
            return Err(Error::Format("RAMON modulus must be whole bytes".into()));
        }
        let n_bytes = (n_bits / 8) as usize;
        let challenge = (n_bytes / 4).clamp(2, 10);
        let random = (n_bytes / 8).saturating_sub(1).min(10);
        let p = Self::new(n_bytes, challenge, random)?;
        if p.uid_capacity() == Some(0) {
            return Err(Error::Format("no room for a UID".into()));
        }
        Ok(p)
    }

    /// Largest UID the layout can carry.
    pub fn uid_capacity(&self) -> Option<usize> {
        self.n_bytes
            .checked_sub(self.challenge_len + self.random_len + TLV_HEADER + RAMON_TRAILER)
            .map(|c| c.min(u8::MAX as usize))
    }
}

/// RFC 1071 style: ones'-complement sum of big-endian 16-bit words.
pub fn ones_complement_sum(bytes: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    for chunk in bytes.chunks(2) {
        let word = (chunk[0] as u32) << 8 | chunk.get(1).copied().unwrap_or(0) as u32;
        sum += word;
        sum = (sum & 0xffff) + (sum >> 16);
    }
    sum as u16
}

/// Structured RAMON plaintext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RamonMessage {
    pub challenge: Vec<u8>,
    pub tag_random: Vec<u8>,
    pub uid: Vec<u8>,
    pub filler_len: usize,
}

impl RamonMessage {
    /// Full layout including checksum and terminator.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.challenge);
        out.extend_from_slice(&self.tag_random);
        out.push(UID_TLV_TAG);
        out.push(self.uid.len() as u8);
        out.extend_from_slice(&self.uid);
        out.resize(out.len() + self.filler_len, 0);
        let sum = ones_complement_sum(&out);
        out.extend_from_slice(&sum.to_be_bytes());
        out.push(0);
        out
    }

    pub fn to_natural(&self) -> BigUint {
        BigUint::from_bytes_le(&self.to_bytes())
    }

    pub fn to_formatted(&self) -> FormattedMessage {
        FormattedMessage {
            challenge: self.challenge.clone(),
            tag_random: self.tag_random.clone(),
            uid: self.uid.clone(),
            layout: Scheme::Ramon,
        }
    }
}

pub fn ramon_format<R: RngCore + ?Sized>(
    challenge: &[u8],
    uid: &[u8],
    rng: &mut R,
    params: &RamonParams,
) -> Result<RamonMessage> {
    if challenge.len() != params.challenge_len {
        return Err(Error::Format(format!(
            "challenge is {} bytes, layout wants {}",
            challenge.len(),
            params.challenge_len
        )));
    }
    let cap = params.uid_capacity().unwrap_or(0);
    if uid.len() > cap {
        return Err(Error::Format(format!("UID of {} bytes exceeds {cap}", uid.len())));
    }
    let mut tag_random = vec![0u8; params.random_len];
    rng.fill_bytes(&mut tag_random);
    Ok(RamonMessage {
        challenge: challenge.to_vec(),
        tag_random,
        uid: uid.to_vec(),
        filler_len: cap - uid.len(),
    })
}

pub fn parse_ramon(bytes: &[u8], params: &RamonParams) -> Result<RamonMessage> {
    let n = params.n_bytes;
    if bytes.len() != n {
        return Err(Error::Reject(format!("expected {n} bytes, got {}", bytes.len())));
    }
    if bytes[n - 1] != 0 {
        return Err(Error::Reject("terminator byte is not zero".into()));
    }
    let body = &bytes[..n - RAMON_TRAILER];
    let stored = u16::from_be_bytes([bytes[n - 3], bytes[n - 2]]);
    if ones_complement_sum(body) != stored {
        return Err(Error::Reject("checksum mismatch".into()));
    }
    let (challenge, rest) = body.split_at(params.challenge_len);
    let (tag_random, rest) = rest.split_at(params.random_len);
    if rest.len() < TLV_HEADER || rest[0] != UID_TLV_TAG {
        return Err(Error::Reject("bad UID TLV tag".into()));
    }
    let len = rest[1] as usize;
    let rest = &rest[TLV_HEADER..];
    if len > rest.len() {
        return Err(Error::Reject("UID TLV length overruns the message".into()));
    }
    let (uid, filler) = rest.split_at(len);
    if filler.iter().any(|&b| b != 0) {
        return Err(Error::Reject("nonzero filler".into()));
    }
    Ok(RamonMessage {
        challenge: challenge.to_vec(),
        tag_random: tag_random.to_vec(),
        uid: uid.to_vec(),
        filler_len: filler.len(),
    })
}

/// Message layout parameters for either scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeParams {
    Wipr(WiprParams),
    Ramon(RamonParams),
}

impl SchemeParams {
    pub fn scaled(scheme: Scheme, n_bits: u64) -> Result<Self> {
        match scheme {
            Scheme::Wipr => WiprParams::scaled(n_bits).map(Self::Wipr),
            Scheme::Ramon => RamonParams::scaled(n_bits).map(Self::Ramon),
            Scheme::Raw => Err(Error::Format("RAW ciphertexts carry no layout".into())),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self {
            Self::Wipr(_) => Scheme::Wipr,
            Self::Ramon(_) => Scheme::Ramon,
        }
    }

    pub fn challenge_len(&self) -> usize {
        match self {
            Self::Wipr(p) => p.challenge_len(),
            Self::Ramon(p) => p.challenge_len,
        }
    }

    /// Integer form of a message.
    pub fn encode(&self, msg: &FormattedMessage) -> Result<BigUint> {
        match self {
            Self::Wipr(p) => wipr_encode(msg, p),
            Self::Ramon(p) => {
                let cap = p.uid_capacity().unwrap_or(0);
                if msg.challenge.len() != p.challenge_len
                    || msg.tag_random.len() != p.random_len
                    || msg.uid.len() > cap
                {
                    return Err(Error::Format("message does not match RAMON layout".into()));
                }
                Ok(RamonMessage {
                    challenge: msg.challenge.clone(),
                    tag_random: msg.tag_random.clone(),
                    uid: msg.uid.clone(),
                    filler_len: cap - msg.uid.len(),
                }
                .to_natural())
            }
        }
    }

    /// Parses a candidate integer; `None` if it violates the layout.
    pub fn decode(&self, m: &BigUint) -> Option<FormattedMessage> {
        match self {
            Self::Wipr(p) => wipr_decode(m, p),
            Self::Ramon(p) => {
                let mut bytes = m.to_bytes_le();
                if bytes.len() > p.n_bytes {
                    return None;
                }
                bytes.resize(p.n_bytes, 0);
                parse_ramon(&bytes, p).ok().map(|r| r.to_formatted())
            }
        }
    }
}

fn wipr_encode(msg: &FormattedMessage, p: &WiprParams) -> Result<BigUint> {
    if msg.challenge.len() != p.challenge_len()
        || msg.tag_random.len() != p.tag_random_len()
        || msg.uid.len() != p.uid_len()
    {
        return Err(Error::Format("message does not match WIPR layout".into()));
    }
    let mut raw = Vec::with_capacity(p.message_len());
    raw.extend_from_slice(&msg.challenge);
    raw.extend_from_slice(&msg.tag_random);
    raw.extend_from_slice(&msg.uid);
    Ok(BigUint::from_bytes_be(&bytemix(&raw)))
}

fn wipr_decode(m: &BigUint, p: &WiprParams) -> Option<FormattedMessage> {
    let len = p.message_len();
    let bytes = m.to_bytes_be();
    if bytes.len() > len {
        return None;
    }
    let mut padded = vec![0u8; len - bytes.len()];
    padded.extend_from_slice(&bytes);
    let raw = unmix(&padded);
    let (challenge, rest) = raw.split_at(p.challenge_len());
    let (tag_random, uid) = rest.split_at(p.tag_random_len());
    Some(FormattedMessage {
        challenge: challenge.to_vec(),
        tag_random: tag_random.to_vec(),
        uid: uid.to_vec(),
        layout: Scheme::Wipr,
    })
}

/// Tag side, message only: `c || R_tag || UID` with a fresh `R_tag`.
pub fn wipr_format<R: RngCore + ?Sized>(
    challenge: &[u8],
    uid: &[u8],
    params: &WiprParams,
    rng: &mut R,
) -> Result<FormattedMessage> {
    params.validate()?;
    if challenge.len() != params.challenge_len() {
        return Err(Error::Format(format!(
            "challenge is {} bytes, expected {}",
            challenge.len(),
            params.challenge_len()
        )));
    }
    if uid.len() != params.uid_len() {
        return Err(Error::Format(format!(
            "UID is {} bytes, expected {}",
            uid.len(),
            params.uid_len()
        )));
    }
    let mut tag_random = vec![0u8; params.tag_random_len()];
    rng.fill_bytes(&mut tag_random);
    Ok(FormattedMessage {
        challenge: challenge.to_vec(),
        tag_random,
        uid: uid.to_vec(),
        layout: Scheme::Wipr,
    })
}

/// `C' = M^2 + rN` with a fresh `r` of exactly `n + t` bits. `modulus` is
/// whatever the tag multiplies by, so a faulted tag passes the perturbed one.
pub fn wipr_encrypt<R: RngCore + ?Sized>(
    msg: &FormattedMessage,
    modulus: &BigUint,
    params: &WiprParams,
    rng: &mut R,
) -> Result<Ciphertext> {
    use num_bigint::RandBigInt;
    let m = wipr_encode(msg, params)?;
    let r_bits = params.n_bits + params.t_bits;
    let mut r = rng.gen_biguint(r_bits);
    r.set_bit(r_bits - 1, true);
    Ok(Ciphertext {
        scheme: Scheme::Wipr,
        value: &m * &m + r * modulus,
    })
}

pub fn wipr_respond<R: RngCore + ?Sized>(
    challenge: &[u8],
    uid: &[u8],
    n: &BigUint,
    params: &WiprParams,
    rng: &mut R,
) -> Result<Ciphertext> {
    let msg = wipr_format(challenge, uid, params, rng)?;
    wipr_encrypt(&msg, n, params, rng)
}

fn unique_match(
    roots: impl Iterator<Item = BigUint>,
    params: &SchemeParams,
    challenge: &[u8],
) -> Result<FormattedMessage> {
    let mut hits: Vec<FormattedMessage> = roots
        .filter_map(|r| params.decode(&r))
        .filter(|m| m.challenge == challenge)
        .collect();
    hits.dedup();
    match hits.len() {
        0 => Err(Error::Reject("no root matches the challenge".into())),
        1 => Ok(hits.pop().expect("len 1")),
        k => Err(Error::Ambiguous(k)),
    }
}

fn expect_scheme(ct: &Ciphertext, expected: Scheme) -> Result<()> {
    if ct.scheme != expected {
        return Err(Error::SchemeMismatch {
            expected: expected.name(),
            found: ct.scheme.name(),
        });
    }
    Ok(())
}

/// Interrogator side of WIPR.
pub fn wipr_verify(
    ct: &Ciphertext,
    key: &RabinKeyPair,
    challenge: &[u8],
    params: &WiprParams,
) -> Result<FormattedMessage> {
    expect_scheme(ct, Scheme::Wipr)?;
    let roots = decrypt(&(&ct.value % key.modulus()), key)?;
    unique_match(roots.into_roots().into_iter(), &SchemeParams::Wipr(*params), challenge)
}

/// Keypair with `N = 1 (mod 2^(bits/2))`. For a Blum prime `p` of `bits/2`
/// bits the partner is forced: `q = p^-1 mod 2^(bits/2)`; candidates are
/// drawn until that `q` is a prime of the right size.
pub fn ramon_modulus<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<RabinKeyPair> {
    const MAX_ATTEMPTS: usize = 200_000;
    if bits < 32 || bits % 4 != 0 {
        return Err(Error::Range(format!("RAMON modulus size {bits} must be >= 32 and divisible by 4")));
    }
    let half = bits / 2;
    let r = BigUint::from(1u32) << half;
    for _ in 0..MAX_ATTEMPTS {
        let p = crate::ntheory::gen_blum_prime(half, rng)?;
        let q = inv_mod(&p, &r)?;
        if q.bits() != half || q == p || !crate::ntheory::is_prime(&q) || (&p * &q).bits() != bits {
            continue;
        }
        return RabinKeyPair::from_primes(p, q);
    }
    Err(Error::GenerationFailed(format!(
        "no {bits}-bit RAMON modulus after {MAX_ATTEMPTS} attempts"
    )))
}

/// `C* = M^2 R^-1 mod N`, `R = 2^bitlen(N)`.
pub fn ramon_encrypt(m: &BigUint, n: &BigUint) -> Result<Ciphertext> {
    if m >= n {
        return Err(Error::Range("message must be < N".into()));
    }
    ramon_encrypt_with_width(m, n, n.bits())
}

/// Montgomery squaring with a fixed register width `R = 2^r_bits`, as a
/// tag with a perturbed modulus would compute it. `m` is reduced first.
pub fn ramon_encrypt_with_width(m: &BigUint, modulus: &BigUint, r_bits: u64) -> Result<Ciphertext> {
    let ctx = Montgomery::with_r_bits(modulus, r_bits)?;
    let m = m % modulus;
    Ok(Ciphertext {
        scheme: Scheme::Ramon,
        value: ctx.mul(&m, &m),
    })
}

/// `C = C* R mod N`.
pub fn ramon_unblind(ct: &Ciphertext, n: &BigUint) -> Result<BigUint> {
    expect_scheme(ct, Scheme::Ramon)?;
    if n < &BigUint::from(2u32) {
        return Err(Error::InvalidModulus(n.clone()));
    }
    Ok((&ct.value << n.bits()) % n)
}

pub fn ramon_respond<R: RngCore + ?Sized>(
    challenge: &[u8],
    uid: &[u8],
    n: &BigUint,
    params: &RamonParams,
    rng: &mut R,
) -> Result<Ciphertext> {
    let msg = ramon_format(challenge, uid, rng, params)?;
    ramon_encrypt(&msg.to_natural(), n)
}

/// Interrogator side of RAMON.
pub fn ramon_verify(
    ct: &Ciphertext,
    key: &RabinKeyPair,
    challenge: &[u8],
    params: &RamonParams,
) -> Result<FormattedMessage> {
    let c = ramon_unblind(ct, key.modulus())?;
    let roots = decrypt(&c, key)?;
    unique_match(roots.into_roots().into_iter(), &SchemeParams::Ramon(*params), challenge)
}

/// Keygen for the given scheme: RAMON needs the special modulus shape.
pub fn scheme_keygen<R: RngCore + ?Sized>(scheme: Scheme, bits: u64, rng: &mut R) -> Result<RabinKeyPair> {
    match scheme {
        Scheme::Ramon => ramon_modulus(bits, rng),
        _ => keygen(bits, rng),
    }
}

/// One challenge-response exchange as seen on the air.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub scheme: Scheme,
    pub challenge_hex: String,
    pub ciphertext_hex: String,
    pub n_bits: u64,
    pub params: Option<SchemeParams>,
}

impl Transcript {
    pub fn new(challenge: &[u8], ct: &Ciphertext, n_bits: u64, params: Option<SchemeParams>) -> Self {
        Self {
            scheme: ct.scheme,
            challenge_hex: crate::codec::bytes_to_hex(challenge),
            ciphertext_hex: crate::codec::to_hex(&ct.value),
            n_bits,
            params,
        }
    }

    pub fn ciphertext(&self) -> Result<Ciphertext> {
        Ok(Ciphertext {
            scheme: self.scheme,
            value: crate::codec::from_hex(&self.ciphertext_hex)?,
        })
    }

    pub fn challenge(&self) -> Result<Vec<u8>> {
        crate::codec::bytes_from_hex(&self.challenge_hex)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::seeded_rng;
    use proptest::prelude::*;

    fn n(x: u64) -> BigUint {
        BigUint::from(x)
    }

    #[test]
    fn bytemix_examples() {
        assert_eq!(bytemix(&[7]), vec![7]);
        assert_eq!(bytemix(b"abcd"), b"acbd".to_vec());
        assert_eq!(bytemix(b"abcde"), b"adbec".to_vec());
        assert_eq!(bytemix(&[]), Vec::<u8>::new());
    }

    #[test]
    fn bytemix_is_a_bijection_on_positions() {
        for len in 0..=4096usize {
            let idx: Vec<u16> = (0..len as u16).collect();
            let bytes: Vec<u8> = (0..len).map(|i| (i % 251) as u8).collect();
            let mixed = bytemix(&bytes);
            assert_eq!(mixed.len(), len);
            assert_eq!(unmix(&mixed), bytes);
            // positions: mixing indices as u16 pairs must hit every slot once
            let mut seen = vec![false; len];
            let split = len.div_ceil(2);
            for (j, _) in idx.iter().enumerate() {
                let src = if j % 2 == 0 { j / 2 } else { split + j / 2 };
                assert!(!seen[src]);
                seen[src] = true;
                assert_eq!(mixed[j], bytes[src]);
            }
        }
    }

    proptest! {
        #[test]
        fn unmix_inverts_bytemix(data in proptest::collection::vec(any::<u8>(), 0..300)) {
            prop_assert_eq!(unmix(&bytemix(&data)), data.clone());
            prop_assert_eq!(bytemix(&unmix(&data)), data);
        }
    }

    #[test]
    fn wipr_params_layout() {
        let p = WiprParams::scaled(64).unwrap();
        assert_eq!((p.s_bits, p.t_bits, p.uid_bits), (32, 32, 16));
        assert_eq!(p.tag_random_len(), 1);
        let p = WiprParams::scaled(1024).unwrap();
        assert_eq!((p.s_bits, p.t_bits), (80, 80));
        assert!(WiprParams::new(32, 32, 24, 64).is_err());
        assert!(WiprParams::new(12, 32, 16, 64).is_err());
    }

    #[test]
    fn wipr_round_trip_and_rejections() {
        let mut rng = seeded_rng(3);
        let key = keygen(64, &mut rng).unwrap();
        let params = WiprParams::scaled(64).unwrap();
        let challenge = [1, 2, 3, 4];
        let uid = [0xab, 0xcd];
        let ct = wipr_respond(&challenge, &uid, key.modulus(), &params, &mut rng).unwrap();
        let got = wipr_verify(&ct, &key, &challenge, &params).unwrap();
        assert_eq!(got.uid, uid);
        assert!(matches!(wipr_verify(&ct, &key, &[1, 2, 3, 5], &params), Err(Error::Reject(_))));

        let ct2 = wipr_respond(&challenge, &uid, key.modulus(), &params, &mut seeded_rng(3)).unwrap();
        let ct3 = wipr_respond(&challenge, &uid, key.modulus(), &params, &mut seeded_rng(3)).unwrap();
        assert_eq!(ct2, ct3);

        assert!(wipr_respond(&[1, 2], &uid, key.modulus(), &params, &mut rng).is_err());
        assert!(wipr_respond(&challenge, &[1, 2, 3], key.modulus(), &params, &mut rng).is_err());
        let raw = Ciphertext { scheme: Scheme::Raw, value: ct.value.clone() };
        assert!(matches!(wipr_verify(&raw, &key, &challenge, &params), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn wipr_ciphertext_is_m_squared_mod_n() {
        let mut rng = seeded_rng(9);
        let key = keygen(64, &mut rng).unwrap();
        let params = WiprParams::scaled(64).unwrap();
        let msg = wipr_format(&[9; 4], &[7; 2], &params, &mut rng).unwrap();
        let m = SchemeParams::Wipr(params).encode(&msg).unwrap();
        let mut reduced = Vec::new();
        for seed in 0..5 {
            let ct = wipr_encrypt(&msg, key.modulus(), &params, &mut seeded_rng(seed)).unwrap();
            assert!(ct.value.bits() <= (2 * m.bits()).max(params.n_bits + params.t_bits + params.n_bits) + 1);
            reduced.push(&ct.value % key.modulus());
        }
        assert!(reduced.iter().all(|c| *c == (&m * &m) % key.modulus()));
    }

    #[test]
    fn ramon_examples() {
        let ct = ramon_encrypt(&n(9), &n(77)).unwrap();
        assert_eq!(ct.value, n(65));
        assert_eq!(ramon_unblind(&ct, &n(77)).unwrap(), n(4));
        assert_eq!(ramon_encrypt(&n(0), &n(77)).unwrap().value, n(0));
        let zero = Ciphertext { scheme: Scheme::Ramon, value: n(0) };
        assert_eq!(ramon_unblind(&zero, &n(77)).unwrap(), n(0));
        let wipr = Ciphertext { scheme: Scheme::Wipr, value: n(0) };
        assert!(ramon_unblind(&wipr, &n(77)).is_err());
    }

    #[test]
    fn ramon_unblind_matches_plain_rabin() {
        for nn in (3u64..400).step_by(2) {
            for m in 0..nn {
                let ct = ramon_encrypt(&n(m), &n(nn)).unwrap();
                assert_eq!(ramon_unblind(&ct, &n(nn)).unwrap(), n(m * m % nn));
            }
        }
    }

    #[test]
    fn ramon_modulus_shape() {
        for seed in 0..5 {
            let key = ramon_modulus(64, &mut seeded_rng(seed)).unwrap();
            let n = key.modulus();
            assert_eq!(n.bits(), 64);
            assert_eq!(n % (BigUint::from(1u32) << 32u32), BigUint::from(1u32));
            let low = n.to_bytes_le();
            assert_eq!(low[0], 1);
            assert!(low[1..4].iter().all(|&b| b == 0));
            assert_eq!(key.p() * key.q(), *n);
        }
        assert!(ramon_modulus(30, &mut seeded_rng(0)).is_err());
        assert!(ramon_modulus(34, &mut seeded_rng(0)).is_err());
    }

    #[test]
    fn ramon_layout_round_trip() {
        let params = RamonParams::scaled(1024).unwrap();
        assert_eq!((params.challenge_len, params.random_len), (10, 10));
        let msg = ramon_format(&[3; 10], b"UID-1234", &mut seeded_rng(1), &params).unwrap();
        let bytes = msg.to_bytes();
        assert_eq!(bytes.len(), 128);
        assert_eq!(*bytes.last().unwrap(), 0);
        assert_eq!(parse_ramon(&bytes, &params).unwrap(), msg);
        for i in 0..bytes.len() {
            for flip in [0x01u8, 0x80, 0xff] {
                let mut bad = bytes.clone();
                bad[i] ^= flip;
                assert!(parse_ramon(&bad, &params).is_err(), "flip {flip:#x} at {i}");
            }
        }
        let small = RamonParams::scaled(64).unwrap();
        assert_eq!(small.uid_capacity(), Some(1));
        assert!(ramon_format(&[1, 2], &[1, 2], &mut seeded_rng(1), &small).is_err());
        assert!(RamonParams::scaled(32).is_err());
    }

    #[test]
    fn ramon_session_round_trip() {
        let mut rng = seeded_rng(11);
        let key = ramon_modulus(64, &mut rng).unwrap();
        let params = RamonParams::scaled(64).unwrap();
        let ct = ramon_respond(&[0xc0, 0xde], &[0x42], key.modulus(), &params, &mut rng).unwrap();
        let got = ramon_verify(&ct, &key, &[0xc0, 0xde], &params).unwrap();
        assert_eq!(got.uid, vec![0x42]);
        assert!(ramon_verify(&ct, &key, &[0xc0, 0xdf], &params).is_err());
    }

    #[test]
    fn transcript_json_shape() {
        let ct = Ciphertext { scheme: Scheme::Wipr, value: n(306) };
        let t = Transcript::new(&[0xab], &ct, 64, Some(SchemeParams::Wipr(WiprParams::scaled(64).unwrap())));
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["scheme"], "WIPR");
        assert_eq!(v["ciphertext_hex"], "132");
        assert_eq!(v["challenge_hex"], "ab");
        assert_eq!(v["params"]["s_bits"], 32);
        let back: Transcript = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.ciphertext().unwrap(), ct);
        let r = Transcript::new(&[1], &Ciphertext { scheme: Scheme::Ramon, value: n(1) }, 64,
            Some(SchemeParams::Ramon(RamonParams::scaled(64).unwrap())));
        let back: Transcript = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
