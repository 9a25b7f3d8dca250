// SPDX-License-Identifier: Apache-2.0

//! End-to-end orchestration: attribute registry, record repository, cost
//! model and scenario runner.

mod bench;
mod cost;
mod registry;
mod repository;
mod scenario;

use thiserror::Error;

use crate::abe::AbeError;
use crate::aggregation::AggregationError;
use crate::paillier::PaillierError;
use crate::pairing::PairingError;

pub use bench::{conjunction, entropy_seed, run_bench, seeded_rng, BenchReport};
pub use cost::{estimate_comm_overhead, measure_counters, predict_cost, CommParams, CostModel};
pub use registry::{AttributeRegistry, DEFAULT_CATEGORIES};
pub use repository::Repository;
pub use scenario::{
    display_payload, run_scenario, AggregationReport, AttemptReport, AttemptSpec, KdcReport, KdcSpec,
    NodeSpec, Outcome, PaillierSpec, Phase, ReadingSpec, RecordReport, RecordSpec, RevocationReport,
    RevocationSpec, RevokedRecord, RunOptions, Scenario, ScenarioReport, TagAggregate, TopologySpec,
    UserReport, UserSpec, SCHEMA_ID,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("attribute `{attribute}` claimed by both `{first}` and `{second}`")]
    SharedAttribute {
        attribute: String,
        first: String,
        second: String,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no bundled scenario named `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Paillier(#[from] PaillierError),
}

/// Scenario files shipped with the crate, by name.
pub const BUNDLED_SCENARIOS: &[(&str, &str)] = &[
    ("empty", include_str!("scenarios/empty.toml")),
    ("fig2_aggregation", include_str!("scenarios/fig2_aggregation.toml")),
    ("revocation_rounds", include_str!("scenarios/revocation_rounds.toml")),
    ("sec51_access", include_str!("scenarios/sec51_access.toml")),
];

pub fn bundled_scenario(name: &str) -> Result<&'static str, HarnessError> {
    BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| HarnessError::UnknownScenario(name.to_owned()))
}
