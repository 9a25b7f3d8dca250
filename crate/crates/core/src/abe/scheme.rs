// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use aes_gcm::aead::{Aead, KeyInit, Payload as AeadPayload};
use aes_gcm::{Aes256Gcm, Nonce};
use num_traits::One;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::encoding::{self, Reader};
use crate::field::Scalar;
use crate::lsss::{self, LsssProgram};
use crate::pairing::{GElement, GtElement, PairingContext};

use super::ciphertext::{AbeCiphertext, Payload, PayloadMode, RowCiphertext, RowUpdates};
use super::keys::{put_str, read_str, PublicDirectory, UserKeyring};
use super::AbeError;

const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
const KEM_DOMAIN: &[u8] = b"gridsec/kem/v1";

/// State the encrypting party keeps to revoke access later.
#[derive(Clone, Debug)]
pub struct EncryptionSecrets {
    blinding: GtElement,
    withheld: BTreeSet<String>,
    revoked: BTreeSet<String>,
    epoch: u32,
}

impl EncryptionSecrets {
    /// Attributes whose rows are delivered out of band.
    pub fn withheld_attributes(&self) -> &BTreeSet<String> {
        &self.withheld
    }

    pub fn revoked_users(&self) -> &BTreeSet<String> {
        &self.revoked
    }

    /// Number of completed revocation rounds.
    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Blinding element, epoch, then the withheld-attribute and revoked-user
    /// lists. Contains the record's unblinding secret: keep it sealed.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.blinding.encode(&mut out);
        encoding::put_u32(&mut out, self.epoch);
        for set in [&self.withheld, &self.revoked] {
            encoding::put_u32(&mut out, set.len() as u32);
            for s in set {
                put_str(&mut out, s);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let blinding = ctx.read_gt(&mut r)?;
        let epoch = r.u32()?;
        let mut sets = [BTreeSet::new(), BTreeSet::new()];
        for set in &mut sets {
            for _ in 0..r.u32()? {
                set.insert(read_str(&mut r, "name")?);
            }
        }
        r.finish()?;
        let [withheld, revoked] = sets;
        Ok(Self {
            blinding,
            withheld,
            revoked,
            epoch,
        })
    }
}

pub fn updates_to_bytes(updates: &RowUpdates) -> Vec<u8> {
    let mut out = Vec::new();
    encoding::put_u32(&mut out, updates.len() as u32);
    for (x, c1) in updates {
        encoding::put_u32(&mut out, *x as u32);
        c1.encode(&mut out);
    }
    out
}

pub fn updates_from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<RowUpdates, AbeError> {
    let mut r = Reader::new(bytes);
    let mut out = RowUpdates::new();
    for _ in 0..r.u32()? {
        let x = r.u32()? as usize;
        out.insert(x, ctx.read_gt(&mut r)?);
    }
    r.finish()?;
    Ok(out)
}

/// Share vectors behind one set of rows; kept for algebra checks in tests.
#[cfg_attr(not(test), allow(dead_code))]
pub(super) struct ShareTrace {
    pub tail: Vec<Scalar>,
    pub w: Vec<Scalar>,
    pub rho: Vec<Scalar>,
}

/// `e(g,g)^s` for a fresh unknown `s`: one pairing of a random point with `g`.
fn fresh_blinding<R: Rng + ?Sized>(ctx: &PairingContext, rng: &mut R) -> Result<GtElement, AbeError> {
    let x = ctx.random_g(rng);
    Ok(ctx.pair(&x, ctx.generator())?)
}

/// `base^k` where `k` is 0 or +-1 costs no exponentiation.
fn gt_pow_small(ctx: &PairingContext, base: &GtElement, k: &Scalar) -> Result<GtElement, AbeError> {
    let f = ctx.field();
    if k.is_zero() {
        Ok(ctx.gt_identity())
    } else if k.value().is_one() {
        Ok(base.clone())
    } else if *k == f.neg(&f.one()) {
        Ok(ctx.gt_inv(base)?)
    } else {
        Ok(ctx.gt_exp(base, k)?)
    }
}

/// Shares `s` over the program rows with `lambda_x = R_x . v` and
/// `omega_x = R_x . w`, `v = (s, tail)`, `w = (0, w')`.
pub(super) fn share_rows<R: Rng + ?Sized>(
    ctx: &PairingContext,
    directory: &PublicDirectory,
    program: &LsssProgram,
    blinding: &GtElement,
    rng: &mut R,
) -> Result<(Vec<RowCiphertext>, ShareTrace), AbeError> {
    let f = ctx.field();
    let h = program.h();
    let tail: Vec<Scalar> = (1..h).map(|_| f.random(rng)).collect();
    let w: Vec<Scalar> = (1..h).map(|_| f.random(rng)).collect();
    let mut rho = Vec::with_capacity(program.n());
    let mut rows = Vec::with_capacity(program.n());
    for x in 0..program.n() {
        let attr = program.label(x);
        let pk = directory
            .get(attr)
            .ok_or_else(|| AbeError::UnknownAttribute(attr.to_owned()))?;
        let r = program.row(x);
        let lambda_tail = f.dot(&r[1..], &tail);
        let omega = f.dot(&r[1..], &w);
        let rho_x = f.random(rng);

        let c1 = ctx.gt_mul(
            &ctx.gt_mul(
                &gt_pow_small(ctx, blinding, &r[0])?,
                &ctx.gt_exp(ctx.gt_generator(), &lambda_tail)?,
            )?,
            &ctx.gt_exp(&pk.egg_alpha, &rho_x)?,
        )?;
        let c2 = ctx.g_pow(&rho_x);
        let c3 = ctx.g_multi_exp(&[(&pk.g_y, &rho_x), (ctx.generator(), &omega)])?;
        rows.push(RowCiphertext {
            c1: Some(c1),
            c2,
            c3,
        });
        rho.push(rho_x);
    }
    Ok((rows, ShareTrace { tail, w, rho }))
}

fn kem_key(blinding: &GtElement) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(KEM_DOMAIN);
    h.update(blinding.to_bytes());
    h.finalize().into()
}

fn seal<R: Rng + ?Sized>(
    blinding: &GtElement,
    program: &LsssProgram,
    payload: &[u8],
    rng: &mut R,
) -> Payload {
    let cipher = Aes256Gcm::new(&kem_key(blinding).into());
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let aad = program.to_bytes();
    let mut sealed = cipher
        .encrypt(Nonce::from_slice(&nonce), AeadPayload { msg: payload, aad: &aad })
        .expect("AES-GCM encryption of an in-memory buffer");
    let tag = sealed.split_off(sealed.len() - TAG_LEN);
    Payload::Kem {
        nonce: nonce.to_vec(),
        body: sealed,
        tag,
    }
}

fn open(blinding: &GtElement, program: &LsssProgram, payload: &Payload) -> Result<Vec<u8>, AbeError> {
    let Payload::Kem { nonce, body, tag } = payload else {
        unreachable!("open is only called in KEM mode");
    };
    if nonce.len() != NONCE_LEN || tag.len() != TAG_LEN {
        return Err(AbeError::IntegrityFailure);
    }
    let cipher = Aes256Gcm::new(&kem_key(blinding).into());
    let mut sealed = body.clone();
    sealed.extend_from_slice(tag);
    let aad = program.to_bytes();
    cipher
        .decrypt(Nonce::from_slice(nonce), AeadPayload { msg: &sealed, aad: &aad })
        .map_err(|_| AbeError::IntegrityFailure)
}

fn unblind(
    ctx: &PairingContext,
    c: &AbeCiphertext,
    blinding: &GtElement,
) -> Result<Vec<u8>, AbeError> {
    match &c.payload {
        Payload::Direct { c0 } => {
            let m = ctx.gt_div(c0, blinding)?;
            ctx.extract_message(&m).ok_or(AbeError::IntegrityFailure)
        }
        Payload::Kem { .. } => open(blinding, &c.program, &c.payload),
    }
}

/// Encrypts `payload` under `program`. Costs one pairing and `4n`
/// exponentiations for an `n`-row program with entries in `{0, 1, -1}`.
pub fn abe_encrypt<R: Rng + ?Sized>(
    ctx: &PairingContext,
    directory: &PublicDirectory,
    program: &LsssProgram,
    payload: &[u8],
    mode: PayloadMode,
    rng: &mut R,
) -> Result<(AbeCiphertext, EncryptionSecrets), AbeError> {
    if let Some(a) = program.labels().iter().find(|a| !directory.contains_key(*a)) {
        return Err(AbeError::UnknownAttribute(a.clone()));
    }
    let embedded = match mode {
        PayloadMode::Direct => {
            let capacity = ctx.message_capacity();
            if payload.len() > capacity {
                return Err(AbeError::PayloadTooLarge {
                    len: payload.len(),
                    capacity,
                });
            }
            Some(ctx.embed_message(payload)?)
        }
        PayloadMode::Kem => None,
    };

    let blinding = fresh_blinding(ctx, rng)?;
    let (rows, _) = share_rows(ctx, directory, program, &blinding, rng)?;
    let payload = match embedded {
        Some(m) => Payload::Direct {
            c0: ctx.gt_mul(&m, &blinding)?,
        },
        None => seal(&blinding, program, payload, rng),
    };
    let secrets = EncryptionSecrets {
        blinding,
        withheld: BTreeSet::new(),
        revoked: BTreeSet::new(),
        epoch: 0,
    };
    Ok((
        AbeCiphertext {
            program: program.clone(),
            payload,
            rows,
        },
        secrets,
    ))
}

/// Rows the holder of `attrs` can use: attribute held and `C1` known.
fn usable_rows(c: &AbeCiphertext, attrs: &BTreeSet<String>, updates: Option<&RowUpdates>) -> Vec<usize> {
    (0..c.program.n())
        .filter(|&x| attrs.contains(c.program.label(x)))
        .filter(|&x| c.rows[x].c1.is_some() || updates.is_some_and(|u| u.contains_key(&x)))
        .collect()
}

fn current_c1<'a>(c: &'a AbeCiphertext, x: usize, updates: Option<&'a RowUpdates>) -> &'a GtElement {
    updates
        .and_then(|u| u.get(&x))
        .or(c.rows[x].c1.as_ref())
        .expect("usable rows have a C1")
}

/// `C1 * e(H(u), C3) / e(sk, C2)` for one row.
fn row_factor(
    ctx: &PairingContext,
    c1: &GtElement,
    row: &RowCiphertext,
    hu: &GElement,
    sk: &GElement,
) -> Result<GtElement, AbeError> {
    let num = ctx.gt_mul(c1, &ctx.pair(hu, &row.c3)?)?;
    Ok(ctx.gt_div(&num, &ctx.pair(sk, &row.c2)?)?)
}

/// Decrypts with the keyring, using out-of-band `C1` values where given.
/// Denial is decided before any pairing is computed.
pub fn abe_decrypt(
    ctx: &PairingContext,
    keyring: &UserKeyring,
    c: &AbeCiphertext,
    updates: Option<&RowUpdates>,
) -> Result<Vec<u8>, AbeError> {
    let rows = usable_rows(c, &keyring.attributes(), updates);
    let coeffs = lsss::solve_rows(&c.program, &rows, ctx.field()).ok_or(AbeError::AccessDenied)?;
    let hu = ctx.hash_to_g(keyring.user().as_bytes());
    let mut blinding = ctx.gt_identity();
    for (&x, k) in &coeffs {
        let sk = keyring
            .key(c.program.label(x))
            .expect("usable rows have a key");
        let d = row_factor(ctx, current_c1(c, x, updates), &c.rows[x], &hu, sk)?;
        blinding = ctx.gt_mul(&blinding, &gt_pow_small(ctx, &d, k)?)?;
    }
    unblind(ctx, c, &blinding)
}

/// Simulates two users pooling their keys: each row is opened with the key
/// holder's own identity. The identity terms do not cancel, so this is
/// expected to fail whenever neither user is authorized alone.
pub fn combine_keyrings_attack(
    ctx: &PairingContext,
    k1: &UserKeyring,
    k2: &UserKeyring,
    c: &AbeCiphertext,
) -> Result<Vec<u8>, AbeError> {
    let mut owner: BTreeMap<String, &UserKeyring> = BTreeMap::new();
    for k in [k2, k1] {
        for a in k.attributes() {
            owner.insert(a, k);
        }
    }
    let attrs: BTreeSet<String> = owner.keys().cloned().collect();
    let rows = usable_rows(c, &attrs, None);
    let coeffs = lsss::solve_rows(&c.program, &rows, ctx.field()).ok_or(AbeError::AccessDenied)?;
    let mut blinding = ctx.gt_identity();
    for (&x, k) in &coeffs {
        let holder = owner[c.program.label(x)];
        let hu = ctx.hash_to_g(holder.user().as_bytes());
        let sk = holder.key(c.program.label(x)).expect("owner holds key");
        let d = row_factor(ctx, current_c1(c, x, None), &c.rows[x], &hu, sk)?;
        blinding = ctx.gt_mul(&blinding, &gt_pow_small(ctx, &d, k)?)?;
    }
    unblind(ctx, c, &blinding)
}

/// Revokes the given users' access to `c`.
///
/// Draws a new blinding secret and re-shares it over every row with fresh
/// randomness. Rows labelled with any attribute of a user revoked so far
/// lose their stored `C1`; the new values are returned for out-of-band
/// delivery to the remaining holders.
pub fn revoke<R: Rng + ?Sized>(
    ctx: &PairingContext,
    directory: &PublicDirectory,
    c: &mut AbeCiphertext,
    secrets: &mut EncryptionSecrets,
    revoked: &[&UserKeyring],
    rng: &mut R,
) -> Result<RowUpdates, AbeError> {
    if revoked.is_empty() {
        return Err(AbeError::EmptyRevocation);
    }
    let policy_attrs = c.program.attributes();
    for k in revoked {
        secrets.revoked.insert(k.user().to_owned());
        secrets
            .withheld
            .extend(k.attributes().intersection(&policy_attrs).cloned());
    }

    let fresh = fresh_blinding(ctx, rng)?;
    let payload = match &c.payload {
        Payload::Direct { c0 } => Payload::Direct {
            c0: ctx.gt_mul(c0, &ctx.gt_div(&fresh, &secrets.blinding)?)?,
        },
        Payload::Kem { .. } => {
            let plain = open(&secrets.blinding, &c.program, &c.payload)?;
            seal(&fresh, &c.program, &plain, rng)
        }
    };
    let (mut rows, _) = share_rows(ctx, directory, &c.program, &fresh, rng)?;
    let mut updates = RowUpdates::new();
    for (x, row) in rows.iter_mut().enumerate() {
        if secrets.withheld.contains(c.program.label(x)) {
            updates.insert(x, row.c1.take().expect("freshly shared"));
        }
    }

    c.payload = payload;
    c.rows = rows;
    secrets.blinding = fresh;
    secrets.epoch += 1;
    Ok(updates)
}
