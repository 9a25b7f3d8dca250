// SPDX-License-Identifier: Apache-2.0

//! `gridsec`: key management, record encryption and scenario runs.
//!
//! Exit status: 0 on success, 1 when a decryption was denied, 2 on usage,
//! validation or I/O errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use gridsec_core::abe::{self, AbeCiphertext, AbeError, EncryptionSecrets, KdcKeyring, PayloadMode, UserKeyring};
use gridsec_core::harness::{self, CostModel, Outcome, RunOptions, Scenario};
use gridsec_core::lsss::{self, Convention};
use gridsec_core::paillier;
use gridsec_core::pairing::{BackendSelector, GroupOrder, HashAlgorithm, PairingContext, DEFAULT_Q_BITS};

#[derive(Parser, Debug)]
#[command(name = "gridsec", version, about = "Smart-grid data aggregation and attribute-based access control")]
struct Cli {
    /// Pairing backend.
    #[arg(long, global = true, default_value = "reference")]
    backend: String,
    /// Size of the pairing group order in bits.
    #[arg(long, global = true, default_value_t = DEFAULT_Q_BITS)]
    q_bits: u64,
    /// Identity hash (sha256 or sha1).
    #[arg(long, global = true, default_value = "sha256")]
    hash: String,
    /// Seed for deterministic randomness; drawn from the OS when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a Paillier key pair for an RTU.
    KeygenPaillier {
        #[arg(long, default_value_t = 2048)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run only the aggregation phase of a scenario.
    Aggregate { scenario: String },
    /// Create a KDC and merge its public shares into a directory file.
    KdcSetup {
        #[arg(long)]
        id: String,
        #[arg(long, value_delimiter = ',', required = true)]
        attributes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        directory: PathBuf,
    },
    /// Issue attribute keys to a user, adding them to a keyring file.
    IssueKey {
        #[arg(long)]
        kdc: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long, value_delimiter = ',', required = true)]
        attributes: Vec<String>,
        #[arg(long)]
        keyring: PathBuf,
    },
    /// Encrypt a record under a policy.
    Encrypt {
        #[arg(long)]
        directory: PathBuf,
        #[arg(long)]
        policy: String,
        #[arg(long, conflicts_with = "payload_file", required_unless_present = "payload_file")]
        payload: Option<String>,
        #[arg(long)]
        payload_file: Option<PathBuf>,
        #[arg(long, default_value = "kem")]
        mode: String,
        #[arg(long, default_value = "counter")]
        convention: String,
        #[arg(long)]
        out: PathBuf,
        /// Where the encrypting party keeps the state needed for revocation.
        #[arg(long)]
        secrets_out: PathBuf,
    },
    /// Decrypt a record with a keyring.
    Decrypt {
        #[arg(long)]
        keyring: PathBuf,
        #[arg(long)]
        ciphertext: PathBuf,
        /// Out-of-band rows received after a revocation.
        #[arg(long)]
        updates: Option<PathBuf>,
        /// Write the plaintext here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Revoke users' access to a record.
    Revoke {
        #[arg(long)]
        directory: PathBuf,
        #[arg(long)]
        ciphertext: PathBuf,
        #[arg(long)]
        secrets: PathBuf,
        /// Keyring file of a revoked user; repeatable.
        #[arg(long = "revoked", required = true)]
        revoked: Vec<PathBuf>,
        #[arg(long)]
        updates_out: PathBuf,
    },
    /// Run a scenario file or a bundled scenario by name.
    Run { scenario: String },
    /// Measure operation counts for an m-attribute policy.
    Bench {
        #[arg(long, default_value_t = 10)]
        m: u64,
        #[arg(long, default_value_t = CostModel::REFERENCE_HARDWARE.t_pairing_ms)]
        t_pairing: f64,
        #[arg(long, default_value_t = CostModel::REFERENCE_HARDWARE.t_mul_ms)]
        t_mul: f64,
    },
}

/// On-disk wrapper: binary encodings carried as hex inside JSON.
#[derive(Serialize, Deserialize)]
struct Artifact {
    kind: String,
    backend: String,
    q_bits: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    public: Option<String>,
    data: String,
}

struct Env {
    backend: BackendSelector,
    q_bits: u64,
    hash: HashAlgorithm,
    seed: u64,
}

impl Env {
    fn from_cli(cli: &Cli) -> Result<Self> {
        Ok(Self {
            backend: cli.backend.parse()?,
            q_bits: cli.q_bits,
            hash: cli.hash.parse().map_err(anyhow::Error::msg)?,
            seed: cli.seed.unwrap_or_else(harness::entropy_seed),
        })
    }

    fn ctx(&self) -> Result<PairingContext> {
        Ok(PairingContext::new(self.backend.clone(), GroupOrder::Bits(self.q_bits), self.hash)?)
    }

    fn write(&self, ctx: &PairingContext, path: &Path, kind: &str, id: Option<&str>, public: Option<&[u8]>, data: &[u8]) -> Result<()> {
        let a = Artifact {
            kind: kind.to_owned(),
            backend: ctx.backend_name().to_owned(),
            q_bits: ctx.q_bits(),
            id: id.map(str::to_owned),
            public: public.map(hex::encode),
            data: hex::encode(data),
        };
        let text = serde_json::to_string_pretty(&a)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    fn read(&self, ctx: &PairingContext, path: &Path, kind: &str) -> Result<(Artifact, Vec<u8>)> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let a: Artifact = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if a.kind != kind {
            bail!("{}: expected a {kind} artifact, found {}", path.display(), a.kind);
        }
        if a.backend != ctx.backend_name() || a.q_bits != ctx.q_bits() {
            bail!(
                "{}: made for backend {} with {}-bit q, current settings are {} with {}-bit q",
                path.display(),
                a.backend,
                a.q_bits,
                ctx.backend_name(),
                ctx.q_bits()
            );
        }
        let data = hex::decode(&a.data).with_context(|| format!("{}: data is not hex", path.display()))?;
        Ok((a, data))
    }
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    let text = if path.exists() {
        fs::read_to_string(path).with_context(|| format!("reading {arg}"))?
    } else {
        harness::bundled_scenario(arg)?.to_owned()
    };
    Ok(Scenario::from_toml(&text)?)
}

fn run_options(env: &Env) -> RunOptions {
    RunOptions {
        seed: env.seed,
        backend: env.backend.clone(),
        q_bits: env.q_bits,
        hash: env.hash,
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let env = Env::from_cli(&cli)?;
    let mut rng = harness::seeded_rng(env.seed);
    match cli.command {
        Command::KeygenPaillier { bits, out } => {
            let (pk, sk) = paillier::keygen(bits, &mut rng)?;
            let a = json!({
                "kind": "paillier-keypair",
                "bits": pk.bits(),
                "public": hex::encode(pk.to_bytes()),
                "secret": hex::encode(sk.to_bytes()),
            });
            fs::write(&out, serde_json::to_string_pretty(&a)? + "\n")?;
            eprintln!("wrote {}-bit Paillier key pair to {}", pk.bits(), out.display());
            print_json(&json!({ "bits": pk.bits(), "out": out }))?;
        }
        Command::Aggregate { scenario } => {
            let mut s = load_scenario(&scenario)?;
            s.kdcs.clear();
            s.users.clear();
            s.records.clear();
            s.attempts.clear();
            s.revocations.clear();
            let report = harness::run_scenario(&s, &run_options(&env))?;
            let Some(agg) = &report.aggregation else {
                bail!("scenario has no topology");
            };
            for t in &agg.tags {
                eprintln!("{}: {} ({})", t.tag, t.sum, if t.matches { "ok" } else { "MISMATCH" });
            }
            print_json(agg)?;
            if agg.tags.iter().any(|t| !t.matches) {
                bail!("aggregate does not match the plaintext sum");
            }
        }
        Command::KdcSetup { id, attributes, out, directory } => {
            let ctx = env.ctx()?;
            let kdc = abe::kdc_setup(&ctx, &id, &attributes, &mut rng)?;
            let mut dir = if directory.exists() {
                let (_, bytes) = env.read(&ctx, &directory, "public-directory")?;
                abe::directory_from_bytes(&bytes, &ctx)?
            } else {
                abe::PublicDirectory::new()
            };
            for (a, pk) in kdc.public_shares() {
                if dir.insert(a.clone(), pk.clone()).is_some() {
                    bail!("attribute `{a}` is already owned by another KDC");
                }
            }
            env.write(&ctx, &out, "kdc", Some(&id), None, &kdc.to_bytes())?;
            env.write(&ctx, &directory, "public-directory", None, None, &abe::directory_to_bytes(&dir))?;
            eprintln!("KDC {id} owns {} attributes; directory now lists {}", kdc.public_shares().len(), dir.len());
            print_json(&json!({ "kdc": id, "attributes": kdc.attributes().collect::<Vec<_>>() }))?;
        }
        Command::IssueKey { kdc, user, attributes, keyring } => {
            let ctx = env.ctx()?;
            let (_, bytes) = env.read(&ctx, &kdc, "kdc")?;
            let kdc = KdcKeyring::from_bytes(&bytes, &ctx)?;
            let mut ring = if keyring.exists() {
                let (_, bytes) = env.read(&ctx, &keyring, "user-keyring")?;
                let ring = UserKeyring::from_bytes(&bytes, &ctx)?;
                if ring.user() != user {
                    bail!("{} belongs to user `{}`", keyring.display(), ring.user());
                }
                ring
            } else {
                UserKeyring::new(&user)
            };
            for a in &attributes {
                let sk = kdc.issue_key(&ctx, &user, a)?;
                ring.add_key(&ctx, kdc.public_shares(), a, sk)?;
            }
            env.write(&ctx, &keyring, "user-keyring", Some(&user), None, &ring.to_bytes())?;
            eprintln!("{user} now holds {} keys", ring.keys().len());
            print_json(&json!({ "user": user, "attributes": ring.attributes() }))?;
        }
        Command::Encrypt { directory, policy, payload, payload_file, mode, convention, out, secrets_out } => {
            let ctx = env.ctx()?;
            let (_, bytes) = env.read(&ctx, &directory, "public-directory")?;
            let dir = abe::directory_from_bytes(&bytes, &ctx)?;
            let payload = match (payload, payload_file) {
                (Some(p), _) => p.into_bytes(),
                (None, Some(path)) => fs::read(&path).with_context(|| format!("reading {}", path.display()))?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            let mode: PayloadMode = mode.parse().map_err(anyhow::Error::msg)?;
            let convention: Convention = convention.parse().map_err(anyhow::Error::msg)?;
            let tree = lsss::parse_policy(&policy)?;
            let program = lsss::compile_lsss(&tree, ctx.field(), convention);
            let ((c, secrets), ops) = {
                let (res, ops) = ctx.measure(|| abe::abe_encrypt(&ctx, &dir, &program, &payload, mode, &mut rng));
                (res?, ops)
            };
            let bytes = c.to_bytes();
            fs::write(&out, &bytes).with_context(|| format!("writing {}", out.display()))?;
            env.write(&ctx, &secrets_out, "encryption-secrets", None, None, &secrets.to_bytes())?;
            eprintln!("encrypted {} bytes under `{tree}` ({} rows)", payload.len(), program.n());
            print_json(&json!({
                "policy": tree.to_string(),
                "rows": program.n(),
                "columns": program.h(),
                "ciphertext_bytes": bytes.len(),
                "ops": ops,
            }))?;
        }
        Command::Decrypt { keyring, ciphertext, updates, out } => {
            let ctx = env.ctx()?;
            let (_, bytes) = env.read(&ctx, &keyring, "user-keyring")?;
            let ring = UserKeyring::from_bytes(&bytes, &ctx)?;
            let raw = fs::read(&ciphertext).with_context(|| format!("reading {}", ciphertext.display()))?;
            let c = AbeCiphertext::from_bytes(&raw, &ctx)?;
            let updates = match updates {
                Some(p) => {
                    let (_, bytes) = env.read(&ctx, &p, "row-updates")?;
                    Some(abe::updates_from_bytes(&bytes, &ctx)?)
                }
                None => None,
            };
            let (res, ops) = ctx.measure(|| abe::abe_decrypt(&ctx, &ring, &c, updates.as_ref()));
            match res {
                Ok(plain) => {
                    if let Some(path) = &out {
                        fs::write(path, &plain)?;
                    }
                    eprintln!("{} decrypted {} bytes", ring.user(), plain.len());
                    print_json(&json!({
                        "outcome": "value",
                        "value": harness::display_payload(&plain),
                        "ops": ops,
                    }))?;
                }
                Err(AbeError::AccessDenied) => {
                    eprintln!("access denied for {}", ring.user());
                    print_json(&json!({ "outcome": "denied", "ops": ops }))?;
                    return Ok(ExitCode::from(1));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Revoke { directory, ciphertext, secrets, revoked, updates_out } => {
            let ctx = env.ctx()?;
            let (_, bytes) = env.read(&ctx, &directory, "public-directory")?;
            let dir = abe::directory_from_bytes(&bytes, &ctx)?;
            let raw = fs::read(&ciphertext).with_context(|| format!("reading {}", ciphertext.display()))?;
            let mut c = AbeCiphertext::from_bytes(&raw, &ctx)?;
            let (_, bytes) = env.read(&ctx, &secrets, "encryption-secrets")?;
            let mut sealed = EncryptionSecrets::from_bytes(&bytes, &ctx)?;
            let mut rings = Vec::with_capacity(revoked.len());
            for p in &revoked {
                let (_, bytes) = env.read(&ctx, p, "user-keyring")?;
                rings.push(UserKeyring::from_bytes(&bytes, &ctx)?);
            }
            let refs: Vec<&UserKeyring> = rings.iter().collect();
            let updates = abe::revoke(&ctx, &dir, &mut c, &mut sealed, &refs, &mut rng)?;
            fs::write(&ciphertext, c.to_bytes())?;
            env.write(&ctx, &secrets, "encryption-secrets", None, None, &sealed.to_bytes())?;
            env.write(&ctx, &updates_out, "row-updates", None, None, &abe::updates_to_bytes(&updates))?;
            eprintln!(
                "revoked {} user(s); {} row(s) now delivered out of band",
                rings.len(),
                updates.len()
            );
            print_json(&json!({
                "epoch": sealed.epoch(),
                "revoked_users": sealed.revoked_users(),
                "withheld_rows": c.withheld_rows(),
            }))?;
        }
        Command::Run { scenario } => {
            let s = load_scenario(&scenario)?;
            let report = harness::run_scenario(&s, &run_options(&env))?;
            println!("{}", report.to_json());
            let values = report.attempts.iter().filter(|a| a.outcome == Outcome::Value).count();
            eprintln!(
                "{}: {} attempt(s), {} value(s), {} denied",
                report.scenario.as_deref().unwrap_or("scenario"),
                report.attempts.len(),
                values,
                report.denials
            );
            if let Some(msg) = &report.aborted {
                eprintln!("aborted: {msg}");
                return Ok(ExitCode::from(2));
            }
            if report.denials > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Bench { m, t_pairing, t_mul } => {
            let ctx = env.ctx()?;
            let model = CostModel { t_pairing_ms: t_pairing, t_mul_ms: t_mul };
            let r = harness::run_bench(&ctx, m, &model, &mut rng)?;
            eprintln!(
                "m = {m}: predicted {} ms, from counters {} ms, measured {:.3} ms decrypt",
                r.predicted_ms, r.predicted_from_counters_ms, r.wall_clock_decrypt_ms
            );
            print_json(&r)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
