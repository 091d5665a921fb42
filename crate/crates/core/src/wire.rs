//! Little-endian binary encoding shared by the FVEC, checkpoint, and probe
//! file formats. All multi-byte values are little-endian; floats are raw IEEE
//! bits, so round-trips are bit-exact.

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};

#[derive(Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Length-prefixed UTF-8 string.
    pub fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.bytes(s.as_bytes());
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }

    /// Append a SHA-256 digest of everything written so far.
    pub fn finish_with_checksum(mut self) -> Vec<u8> {
        let digest = Sha256::digest(&self.buf);
        self.buf.extend_from_slice(&digest);
        self.buf
    }
}

pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: String,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8], path: &str) -> Self {
        Self {
            data,
            pos: 0,
            path: path.to_string(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated {
                path: self.path.clone(),
                msg: format!(
                    "needed {n} bytes for {what} at offset {}, have {}",
                    self.pos,
                    self.data.len() - self.pos
                ),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        self.take(n, what)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Truncated {
            path: self.path.clone(),
            msg: format!("invalid utf-8 in {what}"),
        })
    }

    pub fn expect_magic(&mut self, magic: &'static str) -> Result<()> {
        let got = self.take(magic.len(), "magic").map_err(|_| Error::BadMagic {
            path: self.path.clone(),
            expected: magic,
        })?;
        if got != magic.as_bytes() {
            return Err(Error::BadMagic {
                path: self.path.clone(),
                expected: magic,
            });
        }
        Ok(())
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn at_end(&self) -> bool {
        self.remaining() == 0
    }
}

/// Verify a trailing SHA-256 checksum; returns the payload without the digest.
pub fn verify_checksum<'a>(data: &'a [u8], path: &str) -> Result<&'a [u8]> {
    if data.len() < 32 {
        return Err(Error::Truncated {
            path: path.to_string(),
            msg: "shorter than a checksum".into(),
        });
    }
    let (payload, digest) = data.split_at(data.len() - 32);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(Error::ChecksumMismatch(path.to_string()));
    }
    Ok(payload)
}
