// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::abe::{self, PayloadMode, UserKeyring};
use crate::lsss::{self, AccessTree, Convention};
use crate::pairing::{OpCounts, PairingContext};

use super::cost::{predict_cost, CostModel};
use super::HarnessError;

/// A ChaCha20 generator for reproducible runs.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A seed drawn from the operating system.
pub fn entropy_seed() -> u64 {
    ChaCha20Rng::from_entropy().gen()
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub m: u64,
    pub q_bits: u64,
    pub model: CostModel,
    /// `(2m + 1) T_p + 5m T_m`.
    pub predicted_ms: f64,
    pub encrypt_ops: OpCounts,
    pub decrypt_ops: OpCounts,
    /// The model's timings applied to the measured counts.
    pub predicted_from_counters_ms: f64,
    /// Informational only; depends on the backend and machine.
    pub wall_clock_encrypt_ms: f64,
    pub wall_clock_decrypt_ms: f64,
}

/// Conjunction `a1 & a2 & ... & am`, so every row is needed to decrypt.
pub fn conjunction(m: u64) -> AccessTree {
    let leaf = |i: u64| AccessTree::Leaf(format!("a{i}"));
    (2..=m).fold(leaf(1), |acc, i| AccessTree::And(Box::new(acc), Box::new(leaf(i))))
}

/// Encrypts and decrypts under an `m`-attribute conjunction and reports the
/// operation counts next to the cost model.
pub fn run_bench<R: Rng + ?Sized>(
    ctx: &PairingContext,
    m: u64,
    model: &CostModel,
    rng: &mut R,
) -> Result<BenchReport, HarnessError> {
    let predicted_ms = predict_cost(model, m)?;
    let attrs: Vec<String> = (1..=m).map(|i| format!("a{i}")).collect();
    let kdc = abe::kdc_setup(ctx, "bench", &attrs, rng)?;
    let dir = abe::public_directory([&kdc])?;
    let mut user = UserKeyring::new("bench-user");
    for a in &attrs {
        user.add_key(ctx, &dir, a, kdc.issue_key(ctx, user.user(), a)?)?;
    }
    let program = lsss::compile_lsss(&conjunction(m), ctx.field(), Convention::Counter);

    let start = Instant::now();
    let (res, encrypt_ops) =
        ctx.measure(|| abe::abe_encrypt(ctx, &dir, &program, b"bench", PayloadMode::Kem, rng));
    let wall_clock_encrypt_ms = start.elapsed().as_secs_f64() * 1e3;
    let (c, _) = res?;

    let start = Instant::now();
    let (res, decrypt_ops) = ctx.measure(|| abe::abe_decrypt(ctx, &user, &c, None));
    let wall_clock_decrypt_ms = start.elapsed().as_secs_f64() * 1e3;
    res?;

    let mut total = encrypt_ops;
    total += decrypt_ops;
    Ok(BenchReport {
        m,
        q_bits: ctx.q_bits(),
        model: *model,
        predicted_ms,
        encrypt_ops,
        decrypt_ops,
        predicted_from_counters_ms: model.time_for(total),
        wall_clock_encrypt_ms,
        wall_clock_decrypt_ms,
    })
}
