//! Content fingerprints (hex SHA-256) for corpora, configs and artifacts.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Fingerprint of a value's canonical JSON encoding.
pub fn of_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serializable value");
    sha256_hex(&bytes)
}

/// First `n` hex characters of a fingerprint.
pub fn short(fp: &str, n: usize) -> &str {
    &fp[..n.min(fp.len())]
}
