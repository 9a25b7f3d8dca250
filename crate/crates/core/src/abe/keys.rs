// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::encoding::{self, DecodeError, Reader};
use crate::field::Scalar;
use crate::pairing::{GElement, GtElement, PairingContext};

use super::AbeError;

/// Published share of one attribute: `(e(g,g)^alpha, g^y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributePublicKey {
    pub egg_alpha: GtElement,
    pub g_y: GElement,
}

/// Attribute name to public share, across every KDC.
pub type PublicDirectory = BTreeMap<String, AttributePublicKey>;

#[derive(Clone, PartialEq, Eq)]
struct AttributeSecret {
    alpha: Scalar,
    y: Scalar,
}

/// One authority's secret exponents and published shares.
#[derive(Clone)]
pub struct KdcKeyring {
    id: String,
    secrets: BTreeMap<String, AttributeSecret>,
    public: PublicDirectory,
}

impl std::fmt::Debug for KdcKeyring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KdcKeyring")
            .field("id", &self.id)
            .field("attributes", &self.secrets.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

pub(super) fn put_str(out: &mut Vec<u8>, s: &str) {
    encoding::put_bytes(out, s.as_bytes());
}

pub(super) fn read_str(r: &mut Reader<'_>, field: &'static str) -> Result<String, DecodeError> {
    let len = r.u32()? as usize;
    r.utf8(len, field)
}

/// Trims an attribute name and rejects blanks.
pub fn canonical_attribute(raw: &str) -> Result<String, AbeError> {
    let a = raw.trim();
    if a.is_empty() {
        return Err(AbeError::BlankAttribute);
    }
    Ok(a.to_owned())
}

/// Draws independent `(alpha_i, y_i)` for each attribute and publishes
/// `(e(g,g)^alpha_i, g^y_i)`.
pub fn kdc_setup<R: Rng + ?Sized>(
    ctx: &PairingContext,
    id: &str,
    attrs: &[impl AsRef<str>],
    rng: &mut R,
) -> Result<KdcKeyring, AbeError> {
    if attrs.is_empty() {
        return Err(AbeError::EmptyAttributes);
    }
    let f = ctx.field();
    let mut secrets = BTreeMap::new();
    let mut public = BTreeMap::new();
    for raw in attrs {
        let a = canonical_attribute(raw.as_ref())?;
        if secrets.contains_key(&a) {
            return Err(AbeError::DuplicateAttribute(a));
        }
        let s = AttributeSecret {
            alpha: f.random(rng),
            y: f.random(rng),
        };
        let pk = AttributePublicKey {
            egg_alpha: ctx.gt_exp(ctx.gt_generator(), &s.alpha)?,
            g_y: ctx.g_pow(&s.y),
        };
        public.insert(a.clone(), pk);
        secrets.insert(a, s);
    }
    Ok(KdcKeyring {
        id: id.to_owned(),
        secrets,
        public,
    })
}

impl KdcKeyring {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn attributes(&self) -> impl Iterator<Item = &str> {
        self.secrets.keys().map(String::as_str)
    }

    pub fn owns(&self, attr: &str) -> bool {
        self.secrets.contains_key(attr)
    }

    pub fn public_shares(&self) -> &PublicDirectory {
        &self.public
    }

    /// Recomputes every public share from the secrets.
    pub fn is_consistent(&self, ctx: &PairingContext) -> bool {
        self.secrets.len() == self.public.len()
            && self.secrets.iter().all(|(a, s)| {
                let Some(pk) = self.public.get(a) else {
                    return false;
                };
                ctx.gt_exp(ctx.gt_generator(), &s.alpha).ok().as_ref() == Some(&pk.egg_alpha)
                    && ctx.g_pow(&s.y) == pk.g_y
            })
    }

    /// Secret serialization: id, then `(attribute, alpha, y)` triples.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_str(&mut out, &self.id);
        encoding::put_u32(&mut out, self.secrets.len() as u32);
        for (a, s) in &self.secrets {
            put_str(&mut out, a);
            encoding::put_uint(&mut out, s.alpha.value());
            encoding::put_uint(&mut out, s.y.value());
        }
        out
    }

    /// Restores a keyring and recomputes its public shares.
    pub fn from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let id = read_str(&mut r, "KDC id")?;
        let count = r.u32()?;
        let f = ctx.field();
        let mut secrets = BTreeMap::new();
        let mut public = BTreeMap::new();
        for _ in 0..count {
            let a = read_str(&mut r, "attribute")?;
            let (alpha, y) = (r.uint()?, r.uint()?);
            if &alpha >= f.order() || &y >= f.order() {
                return Err(DecodeError::Invalid {
                    field: "attribute secret",
                    reason: "exponent not reduced modulo q".into(),
                }
                .into());
            }
            let s = AttributeSecret {
                alpha: f.element(alpha),
                y: f.element(y),
            };
            public.insert(
                a.clone(),
                AttributePublicKey {
                    egg_alpha: ctx.gt_exp(ctx.gt_generator(), &s.alpha)?,
                    g_y: ctx.g_pow(&s.y),
                },
            );
            if secrets.insert(a.clone(), s).is_some() {
                return Err(AbeError::DuplicateAttribute(a));
            }
        }
        r.finish()?;
        Ok(Self { id, secrets, public })
    }

    /// `sk_{i,u} = g^alpha_i * H(u)^y_i`.
    pub fn issue_key(&self, ctx: &PairingContext, user: &str, attr: &str) -> Result<GElement, AbeError> {
        let s = self.secrets.get(attr).ok_or_else(|| AbeError::AttributeNotOwned {
            kdc: self.id.clone(),
            attribute: attr.to_owned(),
        })?;
        let hu = ctx.hash_to_g(user.as_bytes());
        let g_alpha = ctx.g_pow(&s.alpha);
        Ok(ctx.g_mul(&g_alpha, &ctx.g_exp(&hu, &s.y)?)?)
    }
}

/// Merges the shares of several KDCs, rejecting attributes claimed twice.
pub fn public_directory<'a>(
    kdcs: impl IntoIterator<Item = &'a KdcKeyring>,
) -> Result<PublicDirectory, AbeError> {
    let mut dir = PublicDirectory::new();
    for kdc in kdcs {
        for (a, pk) in &kdc.public {
            if dir.insert(a.clone(), pk.clone()).is_some() {
                return Err(AbeError::SharedAttribute(a.clone()));
            }
        }
    }
    Ok(dir)
}

pub fn directory_to_bytes(dir: &PublicDirectory) -> Vec<u8> {
    let mut out = Vec::new();
    encoding::put_u32(&mut out, dir.len() as u32);
    for (a, pk) in dir {
        put_str(&mut out, a);
        pk.egg_alpha.encode(&mut out);
        pk.g_y.encode(&mut out);
    }
    out
}

pub fn directory_from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<PublicDirectory, AbeError> {
    let mut r = Reader::new(bytes);
    let mut dir = PublicDirectory::new();
    for _ in 0..r.u32()? {
        let a = read_str(&mut r, "attribute")?;
        let pk = AttributePublicKey {
            egg_alpha: ctx.read_gt(&mut r)?,
            g_y: ctx.read_g(&mut r)?,
        };
        if dir.insert(a.clone(), pk).is_some() {
            return Err(AbeError::SharedAttribute(a));
        }
    }
    r.finish()?;
    Ok(dir)
}

/// Checks `e(sk, g) = e(g,g)^alpha * e(H(u), g^y)`.
pub fn verify_key(
    ctx: &PairingContext,
    user: &str,
    key: &GElement,
    pk: &AttributePublicKey,
) -> Result<bool, AbeError> {
    let lhs = ctx.pair(key, ctx.generator())?;
    let hu = ctx.hash_to_g(user.as_bytes());
    let rhs = ctx.gt_mul(&pk.egg_alpha, &ctx.pair(&hu, &pk.g_y)?)?;
    Ok(lhs == rhs)
}

/// A user's attribute keys, possibly from several KDCs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserKeyring {
    user: String,
    keys: BTreeMap<String, GElement>,
}

impl UserKeyring {
    pub fn new(user: &str) -> Self {
        Self {
            user: user.to_owned(),
            keys: BTreeMap::new(),
        }
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    /// Adds a key after checking it against the attribute's public share.
    pub fn add_key(
        &mut self,
        ctx: &PairingContext,
        directory: &PublicDirectory,
        attr: &str,
        key: GElement,
    ) -> Result<(), AbeError> {
        let pk = directory
            .get(attr)
            .ok_or_else(|| AbeError::UnknownAttribute(attr.to_owned()))?;
        if !verify_key(ctx, &self.user, &key, pk)? {
            return Err(AbeError::KeyVerificationFailed(attr.to_owned()));
        }
        self.keys.insert(attr.to_owned(), key);
        Ok(())
    }

    /// Adds a key without verification.
    pub fn insert_unchecked(&mut self, attr: &str, key: GElement) {
        self.keys.insert(attr.to_owned(), key);
    }

    pub fn key(&self, attr: &str) -> Option<&GElement> {
        self.keys.get(attr)
    }

    pub fn keys(&self) -> &BTreeMap<String, GElement> {
        &self.keys
    }

    pub fn attributes(&self) -> BTreeSet<String> {
        self.keys.keys().cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_str(&mut out, &self.user);
        encoding::put_u32(&mut out, self.keys.len() as u32);
        for (a, k) in &self.keys {
            put_str(&mut out, a);
            k.encode(&mut out);
        }
        out
    }

    /// Decodes without verifying the keys; see [`UserKeyring::add_key`].
    pub fn from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let mut k = UserKeyring::new(&read_str(&mut r, "user id")?);
        for _ in 0..r.u32()? {
            let a = read_str(&mut r, "attribute")?;
            let key = ctx.read_g(&mut r)?;
            k.keys.insert(a, key);
        }
        r.finish()?;
        Ok(k)
    }
}
