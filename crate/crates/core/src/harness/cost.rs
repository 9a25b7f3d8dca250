// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::pairing::{OpCounts, PairingContext};

use super::HarnessError;

/// Per-operation timings in milliseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub t_pairing_ms: f64,
    pub t_mul_ms: f64,
}

impl CostModel {
    /// Timings measured for a 160-bit MNT curve.
    pub const REFERENCE_HARDWARE: CostModel = CostModel {
        t_pairing_ms: 4.5,
        t_mul_ms: 0.6,
    };

    /// Time for operations actually counted.
    pub fn time_for(&self, ops: OpCounts) -> f64 {
        ops.pairings as f64 * self.t_pairing_ms + ops.scalar_muls as f64 * self.t_mul_ms
    }
}

/// `(2m + 1) T_p + 5m T_m` for an `m`-attribute policy.
pub fn predict_cost(model: &CostModel, m: u64) -> Result<f64, HarnessError> {
    if m == 0 {
        return Err(HarnessError::InvalidParameter("attribute count must be at least 1".into()));
    }
    let m = m as f64;
    Ok((2.0 * m + 1.0) * model.t_pairing_ms + 5.0 * m * model.t_mul_ms)
}

/// Runs `f` and returns the pairing and exponentiation counts it caused.
pub fn measure_counters<T>(ctx: &PairingContext, f: impl FnOnce() -> T) -> (T, OpCounts) {
    ctx.measure(f)
}

/// Sizes (bits) feeding the communication estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommParams {
    /// Rows in the access matrix.
    pub m: u64,
    pub g_bits: u64,
    pub gt_bits: u64,
    /// Size of the attribute universe.
    pub w: u64,
    pub data_bits: u64,
}

/// `m^2 + m(|G_T| + 2|G|) + |G_T| + ceil(log2 w) + |Data|` bits.
pub fn estimate_comm_overhead(p: &CommParams) -> Result<u64, HarnessError> {
    if p.w == 0 || p.g_bits == 0 || p.gt_bits == 0 {
        return Err(HarnessError::InvalidParameter(
            "group sizes and universe size must be positive".into(),
        ));
    }
    let log_w = u64::from(p.w.next_power_of_two().trailing_zeros());
    Ok(p.m * p.m + p.m * (p.gt_bits + 2 * p.g_bits) + p.gt_bits + log_w + p.data_bits)
}
