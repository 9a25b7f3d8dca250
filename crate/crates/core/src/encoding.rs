// SPDX-License-Identifier: Apache-2.0

//! Length-prefixed big-endian framing shared by every wire format in the crate.
//!
//! An integer is written as its big-endian magnitude preceded by a 4-byte
//! big-endian length. Zero encodes as an empty magnitude.

use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at byte {offset} (needed {needed} more)")]
    Truncated { offset: usize, needed: usize },
    #[error("{count} trailing bytes after the encoded value")]
    TrailingBytes { count: usize },
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

pub fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

/// Writes `bytes` behind a 4-byte big-endian length.
pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
    put_u32(out, len);
    out.extend_from_slice(bytes);
}

/// Writes the magnitude of `v` (no sign byte, no leading zeros).
pub fn put_uint(out: &mut Vec<u8>, v: &BigUint) {
    put_bytes(out, &uint_bytes(v));
}

/// Minimal big-endian magnitude; empty for zero.
pub fn uint_bytes(v: &BigUint) -> Vec<u8> {
    if v.bits() == 0 {
        Vec::new()
    } else {
        v.to_bytes_be()
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let remaining = self.buf.len() - self.pos;
        if remaining < n {
            return Err(DecodeError::Truncated {
                offset: self.pos,
                needed: n - remaining,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    pub fn raw(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        self.take(n)
    }

    pub fn uint(&mut self) -> Result<BigUint, DecodeError> {
        Ok(BigUint::from_bytes_be(self.bytes()?))
    }

    pub fn utf8(&mut self, len: usize, field: &'static str) -> Result<String, DecodeError> {
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|e| DecodeError::Invalid {
            field,
            reason: e.to_string(),
        })
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    /// Fails unless every byte has been consumed.
    pub fn finish(self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            count => Err(DecodeError::TrailingBytes { count }),
        }
    }
}
