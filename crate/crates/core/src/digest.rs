use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of arbitrary bytes.
pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the canonical JSON form of `value` (object keys sorted).
pub fn canonical_digest<T: Serialize>(value: &T) -> serde_json::Result<String> {
    Ok(hex_digest(canonical_json(value)?.as_bytes()))
}

/// Serialize with recursively sorted object keys. `serde_json::Map` is a
/// `BTreeMap` without the `preserve_order` feature, so a round trip through
/// `Value` sorts keys.
pub fn canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

/// Digest over an ordered list of parts, length-prefixed so concatenation is unambiguous.
pub fn combine(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}
