// SPDX-License-Identifier: Apache-2.0

//! Arithmetic in the prime field Z_q used for exponents, secret shares and
//! LSSS matrices.

use std::fmt;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

/// An element of Z_q. Always stored reduced.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// The field Z_q for a prime q. Primality is the caller's responsibility
/// (checked by [`crate::pairing::PairingContext`]).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PrimeField {
    q: BigUint,
}

impl PrimeField {
    pub fn new(q: BigUint) -> Self {
        assert!(q > BigUint::one(), "field modulus must exceed 1");
        Self { q }
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    pub fn bits(&self) -> u64 {
        self.q.bits()
    }

    pub fn element(&self, v: BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn from_u64(&self, v: u64) -> Scalar {
        self.element(BigUint::from(v))
    }

    /// Maps a signed integer into the field; `-1` becomes `q - 1`.
    pub fn from_i64(&self, v: i64) -> Scalar {
        self.from_bigint(&BigInt::from(v))
    }

    pub fn from_bigint(&self, v: &BigInt) -> Scalar {
        let q = BigInt::from(self.q.clone());
        let r = v.mod_floor(&q);
        Scalar(r.magnitude().clone())
    }

    /// Signed representative in (-q/2, q/2], used for readable output.
    pub fn to_signed(&self, s: &Scalar) -> BigInt {
        let v = BigInt::from(s.0.clone());
        let q = BigInt::from(self.q.clone());
        if v.clone() * 2 > q {
            v - q
        } else {
            v
        }
    }

    pub fn zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    pub fn one(&self) -> Scalar {
        Scalar(BigUint::one())
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        if a.0 >= b.0 {
            Scalar(&a.0 - &b.0)
        } else {
            Scalar(&self.q - (&b.0 - &a.0))
        }
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        if a.0.is_zero() {
            a.clone()
        } else {
            Scalar(&self.q - &a.0)
        }
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: &Scalar) -> Option<Scalar> {
        if a.0.is_zero() {
            return None;
        }
        let q = BigInt::from(self.q.clone());
        let ext = BigInt::from(a.0.clone()).extended_gcd(&q);
        if !ext.gcd.is_one() {
            return None;
        }
        Some(self.from_bigint(&ext.x))
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&self, a: &[Scalar], b: &[Scalar]) -> Scalar {
        debug_assert_eq!(a.len(), b.len());
        let sum = a
            .iter()
            .zip(b)
            .fold(BigUint::zero(), |acc, (x, y)| acc + &x.0 * &y.0);
        Scalar(sum % &self.q)
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar(rng.gen_biguint_below(&self.q))
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        loop {
            let s = self.random(rng);
            if !s.is_zero() {
                return s;
            }
        }
    }
}
