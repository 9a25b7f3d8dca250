// SPDX-License-Identifier: Apache-2.0

pub mod abe;
pub mod aggregation;
pub mod encoding;
pub mod field;
pub mod harness;
pub mod lsss;
pub mod paillier;
pub mod pairing;
pub mod primes;
