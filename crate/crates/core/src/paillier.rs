// SPDX-License-Identifier: Apache-2.0

//! Paillier additively homomorphic encryption.
//!
//! Key generation picks `N = q1 * q2` and the generator `g = N + 1`, which
//! always has order divisible by `N` in `Z*_{N^2}` and lets encryption skip
//! one modular exponentiation: `g^m = 1 + m*N (mod N^2)`. Decryption caches
//! `mu = L(g^lambda mod N^2)^-1 mod N`.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::encoding::{self, DecodeError, Reader};
use crate::primes;

pub const DEFAULT_BIT_LENGTH: u64 = 2048;
pub const MIN_BIT_LENGTH: u64 = 16;

const PRIME_CANDIDATES_PER_BIT: usize = 200;
const KEYGEN_ATTEMPTS: usize = 64;
const RANDOMIZER_ATTEMPTS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PaillierError {
    #[error("modulus bit length {0} is below the minimum of {MIN_BIT_LENGTH}")]
    BitLengthTooSmall(u64),
    #[error("prime generation exceeded its retry budget")]
    PrimeGenerationExhausted,
    #[error("invalid key primes: {0}")]
    InvalidPrimes(&'static str),
    #[error("generator is not valid for this modulus: {0}")]
    InvalidGenerator(&'static str),
    #[error("message is not in Z_N")]
    MessageOutOfRange,
    #[error("randomizer is not in Z_N*")]
    InvalidRandomizer,
    #[error("randomness source did not yield a unit of Z_N")]
    RandomnessExhausted,
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error("ciphertexts are under different public keys")]
    ModulusMismatch,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    g: BigUint,
    n_squared: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierSecretKey {
    lambda: BigUint,
    mu: BigUint,
}

/// A ciphertext together with the modulus it lives under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaillierCiphertext {
    value: BigUint,
    modulus: BigUint,
}

/// `L(u) = (u - 1) / N`, defined only for `u = 1 (mod N)`.
fn l_function(u: &BigUint, n: &BigUint) -> Option<BigUint> {
    if u.is_zero() {
        return None;
    }
    let (quot, rem) = (u - 1u8).div_rem(n);
    rem.is_zero().then_some(quot)
}

fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let ext = BigInt::from(a.clone()).extended_gcd(&BigInt::from(m.clone()));
    if !ext.gcd.is_one() {
        return None;
    }
    let m = BigInt::from(m.clone());
    ext.x.mod_floor(&m).to_biguint()
}

impl PaillierPublicKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn generator(&self) -> &BigUint {
        &self.g
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_squared
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// `enc(N) || enc(g)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        encoding::put_uint(&mut out, &self.n);
        encoding::put_uint(&mut out, &self.g);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = Reader::new(bytes);
        let n = r.uint()?;
        let g = r.uint()?;
        r.finish()?;
        if n <= BigUint::one() {
            return Err(PaillierError::InvalidPrimes("modulus must exceed 1"));
        }
        let n_squared = &n * &n;
        if g.is_zero() || g >= n_squared || !g.gcd(&n).is_one() {
            return Err(PaillierError::InvalidGenerator("g must be a unit modulo N^2"));
        }
        Ok(Self { n, g, n_squared })
    }

    fn uses_standard_generator(&self) -> bool {
        self.g == &self.n + 1u8
    }

    /// Fails unless `c` was produced under this key's modulus.
    pub fn check_domain(&self, c: &PaillierCiphertext) -> Result<(), PaillierError> {
        if c.modulus != self.n {
            return Err(PaillierError::ModulusMismatch);
        }
        Ok(())
    }
}

impl PaillierSecretKey {
    pub fn lambda(&self) -> &BigUint {
        &self.lambda
    }

    pub fn mu(&self) -> &BigUint {
        &self.mu
    }

    /// `enc(lambda) || enc(mu)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        encoding::put_uint(&mut out, &self.lambda);
        encoding::put_uint(&mut out, &self.mu);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = Reader::new(bytes);
        let lambda = r.uint()?;
        let mu = r.uint()?;
        r.finish()?;
        Ok(Self { lambda, mu })
    }
}

impl PaillierCiphertext {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    /// Wraps a raw value, checking `0 < c < N^2` and `gcd(c, N^2) = 1`.
    pub fn from_value(pk: &PaillierPublicKey, value: BigUint) -> Result<Self, PaillierError> {
        if value.is_zero() || value >= pk.n_squared {
            return Err(PaillierError::MalformedCiphertext("value outside (0, N^2)"));
        }
        if !value.gcd(&pk.n).is_one() {
            return Err(PaillierError::MalformedCiphertext("value shares a factor with N"));
        }
        Ok(Self {
            value,
            modulus: pk.n.clone(),
        })
    }

    /// `enc(c)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        encoding::put_uint(&mut out, &self.value);
        out
    }

    pub fn from_bytes(pk: &PaillierPublicKey, bytes: &[u8]) -> Result<Self, PaillierError> {
        let mut r = Reader::new(bytes);
        let value = r.uint()?;
        r.finish()?;
        Self::from_value(pk, value)
    }
}

/// Generates a key pair whose modulus has `bit_length` bits.
pub fn keygen<R: Rng + ?Sized>(
    bit_length: u64,
    rng: &mut R,
) -> Result<(PaillierPublicKey, PaillierSecretKey), PaillierError> {
    if bit_length < MIN_BIT_LENGTH {
        return Err(PaillierError::BitLengthTooSmall(bit_length));
    }
    let hi_bits = bit_length.div_ceil(2);
    let lo_bits = bit_length / 2;
    let budget = PRIME_CANDIDATES_PER_BIT * bit_length as usize;

    for _ in 0..KEYGEN_ATTEMPTS {
        let q1 = primes::random_prime(hi_bits, budget, rng)
            .ok_or(PaillierError::PrimeGenerationExhausted)?;
        let q2 = primes::random_prime(lo_bits, budget, rng)
            .ok_or(PaillierError::PrimeGenerationExhausted)?;
        match keygen_from_primes(&q1, &q2) {
            Ok(keys) => return Ok(keys),
            // Equal primes or gcd(lambda, N) != 1: draw again.
            Err(PaillierError::InvalidPrimes(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(PaillierError::PrimeGenerationExhausted)
}

/// Builds keys from caller-supplied primes with `g = N + 1`. Intended for
/// reproducible small vectors.
pub fn keygen_from_primes(
    q1: &BigUint,
    q2: &BigUint,
) -> Result<(PaillierPublicKey, PaillierSecretKey), PaillierError> {
    let n = q1 * q2;
    keygen_from_primes_with_generator(q1, q2, &n + 1u8)
}

/// Like [`keygen_from_primes`] but with an explicit generator, which must
/// have order divisible by `N` modulo `N^2`.
pub fn keygen_from_primes_with_generator(
    q1: &BigUint,
    q2: &BigUint,
    g: BigUint,
) -> Result<(PaillierPublicKey, PaillierSecretKey), PaillierError> {
    if q1 == q2 {
        return Err(PaillierError::InvalidPrimes("q1 and q2 must be distinct"));
    }
    if !primes::is_probable_prime(q1) || !primes::is_probable_prime(q2) {
        return Err(PaillierError::InvalidPrimes("factors must be prime"));
    }
    let n = q1 * q2;
    let n_squared = &n * &n;
    let lambda = (q1 - 1u8).lcm(&(q2 - 1u8));
    if !lambda.gcd(&n).is_one() {
        return Err(PaillierError::InvalidPrimes("gcd(lambda, N) != 1"));
    }
    if g.is_zero() || g >= n_squared || !g.gcd(&n).is_one() {
        return Err(PaillierError::InvalidGenerator("g must be a unit modulo N^2"));
    }
    let denominator = l_function(&g.modpow(&lambda, &n_squared), &n)
        .ok_or(PaillierError::InvalidGenerator("g^lambda != 1 mod N"))?;
    let mu = mod_inverse(&denominator, &n)
        .ok_or(PaillierError::InvalidGenerator("order of g is not a multiple of N"))?;
    Ok((PaillierPublicKey { n, g, n_squared }, PaillierSecretKey { lambda, mu }))
}

/// Encrypts `m` with a fresh randomizer drawn from `rng`.
pub fn encrypt<R: Rng + ?Sized>(
    pk: &PaillierPublicKey,
    m: &BigUint,
    rng: &mut R,
) -> Result<PaillierCiphertext, PaillierError> {
    if m >= &pk.n {
        return Err(PaillierError::MessageOutOfRange);
    }
    for _ in 0..RANDOMIZER_ATTEMPTS {
        let r = rng.gen_biguint_range(&BigUint::one(), &pk.n);
        if r.gcd(&pk.n).is_one() {
            return encrypt_with_randomizer(pk, m, &r);
        }
    }
    Err(PaillierError::RandomnessExhausted)
}

/// `c = g^m * r^N mod N^2` for an explicit randomizer `r` in `Z_N*`.
pub fn encrypt_with_randomizer(
    pk: &PaillierPublicKey,
    m: &BigUint,
    r: &BigUint,
) -> Result<PaillierCiphertext, PaillierError> {
    if m >= &pk.n {
        return Err(PaillierError::MessageOutOfRange);
    }
    if r.is_zero() || r >= &pk.n || !r.gcd(&pk.n).is_one() {
        return Err(PaillierError::InvalidRandomizer);
    }
    let g_m = if pk.uses_standard_generator() {
        (BigUint::one() + m * &pk.n) % &pk.n_squared
    } else {
        pk.g.modpow(m, &pk.n_squared)
    };
    let r_n = r.modpow(&pk.n, &pk.n_squared);
    Ok(PaillierCiphertext {
        value: (g_m * r_n) % &pk.n_squared,
        modulus: pk.n.clone(),
    })
}

/// `m = L(c^lambda mod N^2) * mu mod N`.
pub fn decrypt(
    sk: &PaillierSecretKey,
    pk: &PaillierPublicKey,
    c: &PaillierCiphertext,
) -> Result<BigUint, PaillierError> {
    pk.check_domain(c)?;
    if c.value.is_zero() || c.value >= pk.n_squared || !c.value.gcd(&pk.n).is_one() {
        return Err(PaillierError::MalformedCiphertext("value is not a unit modulo N^2"));
    }
    let u = c.value.modpow(&sk.lambda, &pk.n_squared);
    let l = l_function(&u, &pk.n)
        .ok_or(PaillierError::MalformedCiphertext("c^lambda != 1 mod N"))?;
    Ok((l * &sk.mu) % &pk.n)
}

/// Homomorphic addition: `c1 * c2 mod N^2` decrypts to `m1 + m2 mod N`.
pub fn add(
    pk: &PaillierPublicKey,
    c1: &PaillierCiphertext,
    c2: &PaillierCiphertext,
) -> Result<PaillierCiphertext, PaillierError> {
    pk.check_domain(c1)?;
    pk.check_domain(c2)?;
    Ok(PaillierCiphertext {
        value: (&c1.value * &c2.value) % &pk.n_squared,
        modulus: pk.n.clone(),
    })
}
