//! SHA3-256 digests.
//!
//! Every digest in the system — block headers, transaction batches, contract
//! addresses and flow records — goes through [`sha3_256`], so the whole
//! artifact hangs off one hashing path that can be validated against
//! published test vectors.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::{Digest as _, Sha3_256};
use std::fmt;

/// A 32-byte SHA3-256 digest, rendered as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0; 32]);

    pub fn to_hex(self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let bytes = hex::decode(s)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| hex::FromHexError::InvalidStringLength)?;
        Ok(Digest32(arr))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", self.to_hex())
    }
}

impl Serialize for Digest32 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest32 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest32::from_hex(&s).map_err(|e| D::Error::custom(format!("bad digest: {e}")))
    }
}

/// SHA3-256 of `data`.
pub fn sha3_256(data: &[u8]) -> Digest32 {
    let mut hasher = Sha3_256::new();
    hasher.update(data);
    Digest32(hasher.finalize().into())
}

/// SHA3-256 over a sequence of byte chunks, equivalent to hashing their
/// concatenation.
pub fn sha3_256_chunks<'a>(chunks: impl IntoIterator<Item = &'a [u8]>) -> Digest32 {
    let mut hasher = Sha3_256::new();
    for chunk in chunks {
        hasher.update(chunk);
    }
    Digest32(hasher.finalize().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_matches_published_value() {
        assert_eq!(
            sha3_256(b"").to_hex(),
            "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"
        );
    }

    #[test]
    fn chunked_hashing_equals_concatenated() {
        let whole = sha3_256(b"hello world");
        let chunked = sha3_256_chunks([b"hello ".as_slice(), b"world".as_slice()]);
        assert_eq!(whole, chunked);
    }

    #[test]
    fn hex_round_trip() {
        let d = sha3_256(b"abc");
        assert_eq!(Digest32::from_hex(&d.to_hex()).unwrap(), d);
        assert!(Digest32::from_hex("xyz").is_err());
        assert!(Digest32::from_hex("ab").is_err());
    }
}
