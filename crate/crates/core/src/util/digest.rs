//! SHA-256 content digests used for checkpoint identity, freeze checks, and
//! pipeline stage skipping.

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    to_hex(&h.finalize())
}

/// Streaming digest for multi-part content (named tensors, files).
pub struct Sha256Stream {
    inner: Sha256,
}

impl Sha256Stream {
    pub fn new() -> Self {
        Self { inner: Sha256::new() }
    }

    pub fn update(&mut self, bytes: &[u8]) {
        self.inner.update(bytes);
    }

    pub fn update_f64s(&mut self, values: &[f64]) {
        for v in values {
            self.inner.update(v.to_le_bytes());
        }
    }

    pub fn finish_hex(self) -> String {
        to_hex(&self.inner.finalize())
    }
}

impl Default for Sha256Stream {
    fn default() -> Self {
        Self::new()
    }
}

fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        // SHA-256 of the empty string, a fixed vector.
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn stream_matches_one_shot() {
        let mut s = Sha256Stream::new();
        s.update(b"hello ");
        s.update(b"world");
        assert_eq!(s.finish_hex(), sha256_hex(b"hello world"));
    }
}
