// SPDX-License-Identifier: Apache-2.0

//! Probabilistic primality testing and random prime generation.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Miller-Rabin rounds; each round errs with probability at most 1/4, so 40
/// rounds bound the error by 2^-80.
pub const MILLER_RABIN_ROUNDS: usize = 40;

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Primality check with witnesses drawn from `rng`.
pub fn is_probable_prime_with<R: Rng + ?Sized>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let two = BigUint::from(2u8);
    if n < &two {
        return false;
    }
    for &p in SMALL_PRIMES.iter() {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let n_minus_one = n - 1u8;
    let mut d = n_minus_one.clone();
    let mut s = 0u32;
    while d.is_even() {
        d >>= 1;
        s += 1;
    }

    'witness: for _ in 0..rounds {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Deterministic primality check: witnesses come from a generator seeded by
/// the candidate itself, so repeated calls agree.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let seed: [u8; 32] = Sha256::digest(n.to_bytes_be()).into();
    let mut rng = ChaCha20Rng::from_seed(seed);
    is_probable_prime_with(n, MILLER_RABIN_ROUNDS, &mut rng)
}

/// Draws a prime of exactly `bits` bits with the top two bits set, so the
/// product of two such primes has exactly `2 * bits` bits.
///
/// Returns `None` when `max_candidates` odd candidates were rejected.
pub fn random_prime<R: Rng + ?Sized>(
    bits: u64,
    max_candidates: usize,
    rng: &mut R,
) -> Option<BigUint> {
    assert!(bits >= 3, "prime size too small");
    for _ in 0..max_candidates {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime_with(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return Some(candidate);
        }
    }
    None
}

/// Largest prime strictly below `2^bits`.
pub fn largest_prime_below_pow2(bits: u64) -> BigUint {
    assert!(bits >= 2);
    let mut candidate = (BigUint::one() << bits) - 1u8;
    loop {
        if is_probable_prime(&candidate) {
            return candidate;
        }
        candidate -= 2u8;
    }
}
