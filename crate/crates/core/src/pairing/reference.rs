// SPDX-License-Identifier: Apache-2.0

//! Transparent discrete-log backend.
//!
//! `G` and `G_T` are both represented by exponents in Z_q: an element of
//! `G` is `g^a` stored as `a`, an element of `G_T` is `e(g,g)^t` stored as
//! `t`. Group products add exponents and `e(g^a, g^b) = e(g,g)^(ab)`.
//! Every algebraic axiom holds exactly, but discrete logs are public, so it
//! offers no secrecy whatsoever. Use it to test protocol algebra only.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{PairingBackend, REFERENCE_BACKEND_ID};
use crate::encoding::uint_bytes;

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    q: BigUint,
}

impl ReferenceBackend {
    /// `q` must already be known to be prime.
    pub fn new(q: BigUint) -> Self {
        Self { q }
    }

    fn parse(&self, repr: &[u8]) -> BigUint {
        BigUint::from_bytes_be(repr) % &self.q
    }

    fn emit(v: &BigUint) -> Vec<u8> {
        uint_bytes(v)
    }

    fn add(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        Self::emit(&((self.parse(a) + self.parse(b)) % &self.q))
    }

    fn scale(&self, a: &[u8], k: &BigUint) -> Vec<u8> {
        Self::emit(&((self.parse(a) * k) % &self.q))
    }

    fn negate(&self, a: &[u8]) -> Vec<u8> {
        let v = self.parse(a);
        if v.is_zero() {
            Vec::new()
        } else {
            Self::emit(&(&self.q - v))
        }
    }

    fn canonical(&self, repr: &[u8]) -> bool {
        repr.first() != Some(&0) && BigUint::from_bytes_be(repr) < self.q
    }
}

/// Reads the exponent behind a reference-backend element representation.
pub fn exponent(repr: &[u8]) -> BigUint {
    BigUint::from_bytes_be(repr)
}

impl PairingBackend for ReferenceBackend {
    fn id(&self) -> u8 {
        REFERENCE_BACKEND_ID
    }

    fn name(&self) -> &'static str {
        "reference"
    }

    fn order(&self) -> &BigUint {
        &self.q
    }

    fn g_generator(&self) -> Vec<u8> {
        Self::emit(&BigUint::one())
    }

    fn g_identity(&self) -> Vec<u8> {
        Vec::new()
    }

    fn gt_identity(&self) -> Vec<u8> {
        Vec::new()
    }

    fn g_mul(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        self.add(a, b)
    }

    fn g_exp(&self, a: &[u8], k: &BigUint) -> Vec<u8> {
        self.scale(a, k)
    }

    fn g_inv(&self, a: &[u8]) -> Vec<u8> {
        self.negate(a)
    }

    fn g_multi_exp(&self, terms: &[(&[u8], &BigUint)]) -> Vec<u8> {
        let sum = terms
            .iter()
            .fold(BigUint::zero(), |acc, (a, k)| acc + self.parse(a) * *k);
        Self::emit(&(sum % &self.q))
    }

    fn gt_mul(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        self.add(a, b)
    }

    fn gt_exp(&self, a: &[u8], k: &BigUint) -> Vec<u8> {
        self.scale(a, k)
    }

    fn gt_inv(&self, a: &[u8]) -> Vec<u8> {
        self.negate(a)
    }

    fn pair(&self, a: &[u8], b: &[u8]) -> Vec<u8> {
        Self::emit(&((self.parse(a) * self.parse(b)) % &self.q))
    }

    fn map_to_g(&self, digest: &[u8]) -> Vec<u8> {
        Self::emit(&self.parse(digest))
    }

    fn is_valid_g(&self, repr: &[u8]) -> bool {
        self.canonical(repr)
    }

    fn is_valid_gt(&self, repr: &[u8]) -> bool {
        self.canonical(repr)
    }

    fn message_capacity(&self) -> usize {
        // 0x01 marker byte + payload must stay below q
        ((self.q.bits() as usize).saturating_sub(1) / 8).saturating_sub(1)
    }

    fn embed_message(&self, msg: &[u8]) -> Option<Vec<u8>> {
        if msg.len() > self.message_capacity() {
            return None;
        }
        let mut bytes = Vec::with_capacity(msg.len() + 1);
        bytes.push(1);
        bytes.extend_from_slice(msg);
        Some(bytes)
    }

    fn extract_message(&self, repr: &[u8]) -> Option<Vec<u8>> {
        match repr.split_first() {
            Some((1, rest)) if rest.len() <= self.message_capacity() => Some(rest.to_vec()),
            _ => None,
        }
    }
}
