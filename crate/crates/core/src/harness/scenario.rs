// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abe::{self, AbeCiphertext, AbeError, EncryptionSecrets, KdcKeyring, PayloadMode, UserKeyring};
use crate::aggregation::{
    self, AggregationTopology, AttributeTag, GatewayNode, GatewayRole, Reading,
};
use crate::lsss::{self, Convention};
use crate::paillier;
use crate::pairing::{BackendSelector, GroupOrder, HashAlgorithm, OpCounts, PairingContext, DEFAULT_Q_BITS};

use super::registry::AttributeRegistry;
use super::repository::Repository;
use super::HarnessError;

pub const SCHEMA_ID: &str = "gridsec-scenario/1";

const DEFAULT_PAILLIER_BITS: u64 = 512;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub paillier: Option<PaillierSpec>,
    #[serde(default)]
    pub topology: Option<TopologySpec>,
    #[serde(default)]
    pub kdcs: Vec<KdcSpec>,
    #[serde(default)]
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub records: Vec<RecordSpec>,
    #[serde(default)]
    pub attempts: Vec<AttemptSpec>,
    #[serde(default)]
    pub revocations: Vec<RevocationSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaillierSpec {
    #[serde(default)]
    pub bits: Option<u64>,
    /// Two decimal primes, for small reproducible keys.
    #[serde(default)]
    pub primes: Option<[String; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub readings: Vec<ReadingSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub role: GatewayRole,
    #[serde(default)]
    pub parent: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingSpec {
    pub node: String,
    pub tag: Vec<String>,
    pub value: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdcSpec {
    pub id: String,
    pub attributes: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub id: String,
    #[serde(default)]
    pub attributes: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    pub id: String,
    pub policy: String,
    pub payload: String,
    #[serde(default)]
    pub mode: PayloadMode,
    #[serde(default)]
    pub convention: Convention,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttemptSpec {
    pub user: String,
    pub record: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevocationSpec {
    pub users: Vec<String>,
    /// Defaults to every record whose policy mentions an attribute of a
    /// revoked user.
    #[serde(default)]
    pub records: Option<Vec<String>>,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> HarnessError {
    HarnessError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let s: Scenario = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Checks ids, references and attribute ownership; returns the registry.
    pub fn validate(&self) -> Result<AttributeRegistry, HarnessError> {
        if self.schema != SCHEMA_ID {
            return Err(invalid("schema", format!("expected `{SCHEMA_ID}`, found `{}`", self.schema)));
        }
        if let Some(p) = &self.paillier {
            if let Some(primes) = &p.primes {
                for (i, v) in primes.iter().enumerate() {
                    if v.parse::<BigUint>().is_err() {
                        return Err(invalid(format!("paillier.primes[{i}]"), "not a decimal integer"));
                    }
                }
            }
        }
        if self.topology.is_some() && self.paillier.is_none() {
            return Err(invalid("paillier", "required when a topology is given"));
        }

        let mut registry = AttributeRegistry::new();
        let mut kdc_ids = BTreeSet::new();
        for (i, k) in self.kdcs.iter().enumerate() {
            if !kdc_ids.insert(k.id.as_str()) {
                return Err(invalid(format!("kdcs[{i}].id"), format!("duplicate KDC `{}`", k.id)));
            }
            if k.attributes.is_empty() {
                return Err(invalid(format!("kdcs[{i}].attributes"), "must not be empty"));
            }
            for (j, a) in k.attributes.iter().enumerate() {
                let path = format!("kdcs[{i}].attributes[{j}]");
                let a = abe::canonical_attribute(a).map_err(|e| invalid(&path, e.to_string()))?;
                registry
                    .register(&k.id, &a)
                    .map_err(|e| invalid(&path, e.to_string()))?;
            }
        }

        let mut users = BTreeSet::new();
        for (i, u) in self.users.iter().enumerate() {
            if !users.insert(u.id.as_str()) {
                return Err(invalid(format!("users[{i}].id"), format!("duplicate user `{}`", u.id)));
            }
            for (j, a) in u.attributes.iter().enumerate() {
                if !registry.contains(a.trim()) {
                    return Err(invalid(
                        format!("users[{i}].attributes[{j}]"),
                        format!("attribute `{a}` is not owned by any KDC"),
                    ));
                }
            }
        }

        let mut records = BTreeSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !records.insert(r.id.as_str()) {
                return Err(invalid(format!("records[{i}].id"), format!("duplicate record `{}`", r.id)));
            }
            let tree = lsss::parse_policy(&r.policy)
                .map_err(|e| invalid(format!("records[{i}].policy"), e.to_string()))?;
            if let Some(a) = tree.leaves().into_iter().find(|a| !registry.contains(a)) {
                return Err(invalid(
                    format!("records[{i}].policy"),
                    format!("attribute `{a}` is not owned by any KDC"),
                ));
            }
        }

        for (i, a) in self.attempts.iter().enumerate() {
            if !users.contains(a.user.as_str()) {
                return Err(invalid(format!("attempts[{i}].user"), format!("unknown user `{}`", a.user)));
            }
            if !records.contains(a.record.as_str()) {
                return Err(invalid(format!("attempts[{i}].record"), format!("unknown record `{}`", a.record)));
            }
        }

        for (i, r) in self.revocations.iter().enumerate() {
            if r.users.is_empty() {
                return Err(invalid(format!("revocations[{i}].users"), "must not be empty"));
            }
            for (j, u) in r.users.iter().enumerate() {
                if !users.contains(u.as_str()) {
                    return Err(invalid(format!("revocations[{i}].users[{j}]"), format!("unknown user `{u}`")));
                }
            }
            for (j, rec) in r.records.iter().flatten().enumerate() {
                if !records.contains(rec.as_str()) {
                    return Err(invalid(format!("revocations[{i}].records[{j}]"), format!("unknown record `{rec}`")));
                }
            }
        }
        Ok(registry)
    }
}

/// Group parameters and randomness for a run.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub backend: BackendSelector,
    pub q_bits: u64,
    pub hash: HashAlgorithm,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            backend: BackendSelector::Reference,
            q_bits: DEFAULT_Q_BITS,
            hash: HashAlgorithm::Sha256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioReport {
    pub schema: String,
    pub scenario: Option<String>,
    pub seed: u64,
    pub backend: String,
    pub q_bits: u64,
    pub aggregation: Option<AggregationReport>,
    pub kdcs: Vec<KdcReport>,
    pub users: Vec<UserReport>,
    pub records: Vec<RecordReport>,
    pub attempts: Vec<AttemptReport>,
    pub revocations: Vec<RevocationReport>,
    pub counters: OpCounts,
    pub denials: usize,
    pub aborted: Option<String>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AggregationReport {
    pub modulus_bits: u64,
    pub gateways: usize,
    pub depth: usize,
    pub readings: usize,
    pub headroom_warning: bool,
    pub tags: Vec<TagAggregate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TagAggregate {
    pub tag: AttributeTag,
    pub sum: String,
    pub expected: String,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KdcReport {
    pub id: String,
    pub attributes: Vec<String>,
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UserReport {
    pub id: String,
    pub keys: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordReport {
    pub id: String,
    pub policy: String,
    pub mode: PayloadMode,
    pub convention: Convention,
    pub matrix: Vec<Vec<String>>,
    pub labels: Vec<String>,
    pub ciphertext_bytes: usize,
    pub ciphertext_sha256: String,
    pub encryption_ops: OpCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Initial,
    AfterRevocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Value,
    Denied,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AttemptReport {
    pub phase: Phase,
    pub user: String,
    pub record: String,
    pub outcome: Outcome,
    pub value: Option<String>,
    pub detail: Option<String>,
    pub rows_used: u64,
    pub ops: OpCounts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevocationReport {
    pub users: Vec<String>,
    pub records: Vec<RevokedRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RevokedRecord {
    pub record: String,
    pub epoch: u32,
    pub withheld_rows: Vec<usize>,
    pub delivered_to: Vec<String>,
    pub ops: OpCounts,
}

/// Renders a payload as text when it is UTF-8, hex otherwise.
pub fn display_payload(bytes: &[u8]) -> String {
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_owned(),
        Err(_) => format!("hex:{}", hex::encode(bytes)),
    }
}

/// Everything the actors hold during a run.
struct World {
    ctx: PairingContext,
    rng: ChaCha20Rng,
    kdcs: Vec<KdcKeyring>,
    directory: abe::PublicDirectory,
    keyrings: BTreeMap<String, UserKeyring>,
    repository: Repository,
    sealed: BTreeMap<String, EncryptionSecrets>,
}

/// Runs every phase in order. Validation problems are errors; a failure
/// inside a phase stops the run and is recorded in `aborted`.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<ScenarioReport, HarnessError> {
    let registry = scenario.validate()?;
    let ctx = PairingContext::new(opts.backend.clone(), GroupOrder::Bits(opts.q_bits), opts.hash)?;
    let mut report = ScenarioReport {
        schema: SCHEMA_ID.to_owned(),
        scenario: scenario.name.clone(),
        seed: opts.seed,
        backend: ctx.backend_name().to_owned(),
        q_bits: ctx.q_bits(),
        aggregation: None,
        kdcs: Vec::new(),
        users: Vec::new(),
        records: Vec::new(),
        attempts: Vec::new(),
        revocations: Vec::new(),
        counters: OpCounts::default(),
        denials: 0,
        aborted: None,
    };
    let mut world = World {
        ctx,
        rng: ChaCha20Rng::seed_from_u64(opts.seed),
        kdcs: Vec::new(),
        directory: abe::PublicDirectory::new(),
        keyrings: BTreeMap::new(),
        repository: Repository::new(),
        sealed: BTreeMap::new(),
    };

    if let Err(e) = run_phases(scenario, &registry, &mut world, &mut report) {
        report.aborted = Some(e.to_string());
    }
    report.counters = world.ctx.counters();
    report.denials = report
        .attempts
        .iter()
        .filter(|a| a.outcome == Outcome::Denied)
        .count();
    Ok(report)
}

fn run_phases(
    s: &Scenario,
    registry: &AttributeRegistry,
    w: &mut World,
    report: &mut ScenarioReport,
) -> Result<(), HarnessError> {
    if let Some(topology) = &s.topology {
        let paillier_spec = s.paillier.as_ref().expect("validated");
        report.aggregation = Some(aggregate(paillier_spec, topology, &mut w.rng)?);
    }

    for k in &s.kdcs {
        let attrs: Vec<&str> = registry.owned_by(&k.id).collect();
        let kdc = abe::kdc_setup(&w.ctx, &k.id, &attrs, &mut w.rng)?;
        report.kdcs.push(KdcReport {
            id: k.id.clone(),
            attributes: attrs.iter().map(|a| a.to_string()).collect(),
            consistent: kdc.is_consistent(&w.ctx),
        });
        w.kdcs.push(kdc);
    }
    w.directory = abe::public_directory(&w.kdcs)?;

    for u in &s.users {
        let mut keyring = UserKeyring::new(&u.id);
        for a in &u.attributes {
            let a = a.trim();
            let owner = registry.owner(a).expect("validated");
            let kdc = w.kdcs.iter().find(|k| k.id() == owner).expect("KDC set up");
            let sk = kdc.issue_key(&w.ctx, &u.id, a)?;
            keyring.add_key(&w.ctx, &w.directory, a, sk)?;
        }
        report.users.push(UserReport {
            id: u.id.clone(),
            keys: keyring.attributes().into_iter().collect(),
        });
        w.keyrings.insert(u.id.clone(), keyring);
    }

    for r in &s.records {
        let tree = lsss::parse_policy(&r.policy).expect("validated");
        let program = lsss::compile_lsss(&tree, w.ctx.field(), r.convention);
        let ctx = w.ctx.clone();
        let (res, ops) = ctx.measure(|| {
            abe::abe_encrypt(&ctx, &w.directory, &program, r.payload.as_bytes(), r.mode, &mut w.rng)
        });
        let (c, secrets) = res?;
        let bytes = c.to_bytes();
        report.records.push(RecordReport {
            id: r.id.clone(),
            policy: tree.to_string(),
            mode: r.mode,
            convention: r.convention,
            matrix: program
                .signed_rows(w.ctx.field())
                .iter()
                .map(|row| row.iter().map(|v| v.to_string()).collect())
                .collect(),
            labels: program.labels().to_vec(),
            ciphertext_bytes: bytes.len(),
            ciphertext_sha256: hex::encode(Sha256::digest(&bytes)),
            encryption_ops: ops,
        });
        w.repository.store(&r.id, c);
        w.sealed.insert(r.id.clone(), secrets);
    }

    run_attempts(s, w, Phase::Initial, report);

    for rev in &s.revocations {
        report.revocations.push(revoke_round(s, rev, w)?);
    }
    if !s.revocations.is_empty() {
        run_attempts(s, w, Phase::AfterRevocation, report);
    }
    Ok(())
}

fn aggregate(
    spec: &PaillierSpec,
    topo: &TopologySpec,
    rng: &mut ChaCha20Rng,
) -> Result<AggregationReport, HarnessError> {
    let (pk, sk) = match &spec.primes {
        Some([p, q]) => paillier::keygen_from_primes(
            &p.parse().expect("validated"),
            &q.parse().expect("validated"),
        )?,
        None => paillier::keygen(spec.bits.unwrap_or(DEFAULT_PAILLIER_BITS), rng)?,
    };
    let nodes = topo
        .nodes
        .iter()
        .map(|n| GatewayNode::new(n.id.clone(), n.role, n.parent.as_deref()))
        .collect();
    let topology = AggregationTopology::new(nodes)?;
    let mut readings = Vec::with_capacity(topo.readings.len());
    let mut expected: BTreeMap<AttributeTag, BigUint> = BTreeMap::new();
    let mut max_reading = 0;
    for r in &topo.readings {
        let tag = AttributeTag::new(&r.tag)?;
        *expected.entry(tag.clone()).or_default() += r.value;
        max_reading = max_reading.max(r.value);
        readings.push(Reading {
            node: r.node.clone(),
            tag,
            value: r.value,
        });
    }
    let packets = aggregation::run_pipeline(&topology, &readings, &pk, rng)?;
    let mut tags = Vec::with_capacity(packets.len());
    for p in &packets {
        let (tag, sum) = aggregation::rtu_open(&sk, &pk, p)?;
        let want = expected.get(&tag).cloned().unwrap_or_default();
        tags.push(TagAggregate {
            matches: sum == want,
            sum: sum.to_string(),
            expected: want.to_string(),
            tag,
        });
    }
    Ok(AggregationReport {
        modulus_bits: pk.bits(),
        gateways: topology.len(),
        depth: topology.depth(),
        readings: readings.len(),
        headroom_warning: aggregation::headroom_warning(&pk, max_reading, readings.len() as u64),
        tags,
    })
}

fn run_attempts(s: &Scenario, w: &World, phase: Phase, report: &mut ScenarioReport) {
    for a in &s.attempts {
        let keyring = &w.keyrings[&a.user];
        let c = w.repository.latest(&a.record).expect("stored");
        let updates = w.repository.updates_for(&a.record, &a.user);
        let (res, ops) = w.ctx.measure(|| abe::abe_decrypt(&w.ctx, keyring, c, updates));
        let (outcome, value, detail) = match res {
            Ok(v) => (Outcome::Value, Some(display_payload(&v)), None),
            Err(AbeError::AccessDenied) => (Outcome::Denied, None, None),
            Err(e) => (Outcome::Error, None, Some(e.to_string())),
        };
        report.attempts.push(AttemptReport {
            phase,
            user: a.user.clone(),
            record: a.record.clone(),
            outcome,
            value,
            detail,
            rows_used: ops.pairings / 2,
            ops,
        });
    }
}

fn revoke_round(s: &Scenario, rev: &RevocationSpec, w: &mut World) -> Result<RevocationReport, HarnessError> {
    let revoked: Vec<&UserKeyring> = rev.users.iter().map(|u| &w.keyrings[u]).collect();
    let revoked_attrs: BTreeSet<String> = revoked.iter().flat_map(|k| k.attributes()).collect();
    let targets: Vec<String> = match &rev.records {
        Some(r) => r.clone(),
        None => s
            .records
            .iter()
            .filter(|r| {
                let c = w.repository.latest(&r.id).expect("stored");
                !c.program.attributes().is_disjoint(&revoked_attrs)
            })
            .map(|r| r.id.clone())
            .collect(),
    };

    let mut out = Vec::with_capacity(targets.len());
    for record in targets {
        let mut c: AbeCiphertext = w.repository.latest(&record).expect("stored").clone();
        let secrets = w.sealed.get_mut(&record).expect("sealed with record");
        let ctx = w.ctx.clone();
        let (res, ops) = ctx.measure(|| abe::revoke(&ctx, &w.directory, &mut c, secrets, &revoked, &mut w.rng));
        let updates = res?;

        let mut delivered_to = Vec::new();
        for (user, keyring) in &w.keyrings {
            if secrets.revoked_users().contains(user) {
                continue;
            }
            let attrs = keyring.attributes();
            let mine: abe::RowUpdates = updates
                .iter()
                .filter(|(x, _)| attrs.contains(c.program.label(**x)))
                .map(|(x, e)| (*x, e.clone()))
                .collect();
            if !mine.is_empty() {
                w.repository.deliver(&record, user, mine);
                delivered_to.push(user.clone());
            }
        }
        out.push(RevokedRecord {
            record: record.clone(),
            epoch: secrets.epoch(),
            withheld_rows: c.withheld_rows(),
            delivered_to,
            ops,
        });
        w.repository.store(&record, c);
    }
    Ok(RevocationReport {
        users: rev.users.clone(),
        records: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> ScenarioReport {
        run_scenario(&Scenario::from_toml(text).unwrap(), &RunOptions { q_bits: 61, ..Default::default() }).unwrap()
    }

    #[test]
    fn empty_scenario() {
        let r = run(&format!("schema = \"{SCHEMA_ID}\""));
        assert!(r.aggregation.is_none());
        assert!(r.attempts.is_empty());
        assert_eq!(r.denials, 0);
        assert_eq!(r.aborted, None);
    }

    fn err_path(text: &str) -> String {
        match Scenario::from_toml(text).unwrap_err() {
            HarnessError::Validation { path, .. } => path,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_reports_field_paths() {
        assert_eq!(err_path("schema = \"v0\""), "schema");
        let base = format!(
            "schema = \"{SCHEMA_ID}\"\n[[kdcs]]\nid = \"A\"\nattributes = [\"a\", \"b\"]\n"
        );
        assert_eq!(
            err_path(&format!("{base}[[kdcs]]\nid = \"B\"\nattributes = [\"c\", \"a\"]\n")),
            "kdcs[1].attributes[1]"
        );
        assert_eq!(
            err_path(&format!("{base}[[users]]\nid = \"u\"\nattributes = [\"z\"]\n")),
            "users[0].attributes[0]"
        );
        assert_eq!(
            err_path(&format!("{base}[[records]]\nid = \"r\"\npolicy = \"a & z\"\npayload = \"x\"\n")),
            "records[0].policy"
        );
        assert_eq!(
            err_path(&format!("{base}[[records]]\nid = \"r\"\npolicy = \"a &\"\npayload = \"x\"\n")),
            "records[0].policy"
        );
        assert_eq!(
            err_path(&format!("{base}[[attempts]]\nuser = \"ghost\"\nrecord = \"r\"\n")),
            "attempts[0].user"
        );
        assert_eq!(
            err_path(&format!("{base}[[revocations]]\nusers = []\n")),
            "revocations[0].users"
        );
        assert_eq!(
            err_path(&format!("schema = \"{SCHEMA_ID}\"\n[topology]\nnodes = []\n")),
            "paillier"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Scenario::from_toml(&format!("schema = \"{SCHEMA_ID}\"\ndecrypt_at_repository = true\n")),
            Err(HarnessError::Parse(_))
        ));
    }

    #[test]
    fn phase_failure_keeps_partial_report() {
        let text = format!(
            "schema = \"{SCHEMA_ID}\"\n[[kdcs]]\nid = \"A\"\nattributes = [\"a\"]\n\
             [[records]]\nid = \"r\"\npolicy = \"a\"\nmode = \"direct\"\n\
             payload = \"far too long for a sixty-one bit group\"\n"
        );
        let r = run(&text);
        assert_eq!(r.kdcs.len(), 1);
        assert!(r.records.is_empty());
        assert!(r.aborted.unwrap().contains("capacity"));
    }
}
