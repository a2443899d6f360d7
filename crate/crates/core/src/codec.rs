//! Big-endian hexadecimal encoding for naturals and byte strings.
//!
//! All structured I/O (JSON, CSV, CLI) writes numbers as conventional
//! big-endian hex without a prefix. Internally, the fault model indexes the
//! modulus little-endian; see [`crate::faults::ModulusBytes`].

use num_bigint::BigUint;

use crate::error::{Error, Result};

pub fn to_hex(n: &BigUint) -> String {
    n.to_str_radix(16)
}

/// Parses big-endian hex. Accepts an optional `0x` prefix and either case.
pub fn from_hex(s: &str) -> Result<BigUint> {
    let t = s.trim();
    let t = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .unwrap_or(t);
    if t.is_empty() {
        return Err(Error::Hex(s.to_string()));
    }
    BigUint::parse_bytes(t.as_bytes(), 16).ok_or_else(|| Error::Hex(s.to_string()))
}

pub fn bytes_to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn bytes_from_hex(s: &str) -> Result<Vec<u8>> {
    let t = s.trim();
    if t.len() % 2 != 0 {
        return Err(Error::Hex(s.to_string()));
    }
    (0..t.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&t[i..i + 2], 16).map_err(|_| Error::Hex(s.to_string())))
        .collect()
}

/// Serde adapter for `BigUint` fields encoded as big-endian hex strings.
pub mod serde_hex {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_hex(n))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        super::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for byte strings encoded as hex.
pub mod serde_bytes_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::bytes_to_hex(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        super::bytes_from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_prefixed_and_mixed_case() {
        assert_eq!(from_hex("2D").unwrap(), BigUint::from(45u32));
        assert_eq!(from_hex("0x2d").unwrap(), BigUint::from(45u32));
        assert_eq!(to_hex(&BigUint::from(0x1122u32)), "1122");
        assert_eq!(to_hex(&BigUint::from(0u32)), "0");
        assert!(from_hex("").is_err());
        assert!(from_hex("xyz").is_err());
        assert!(bytes_from_hex("abc").is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let n = BigUint::from_bytes_be(&bytes);
            prop_assert_eq!(from_hex(&to_hex(&n)).unwrap(), n);
            prop_assert_eq!(bytes_from_hex(&bytes_to_hex(&bytes)).unwrap(), bytes);
        }
    }
}
