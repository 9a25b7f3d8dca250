// SPDX-License-Identifier: Apache-2.0

//! Symmetric bilinear groups `e: G x G -> G_T` of prime order `q` behind a
//! swappable backend.
//!
//! Backends implement [`PairingBackend`] over opaque canonical byte
//! representations. [`PairingContext`] wraps a backend with domain checks,
//! identity hashing and operation counters: every exponentiation in `G` or
//! `G_T` (including one simultaneous multi-exponentiation) adds one scalar
//! multiplication, every pairing adds one pairing. Group products and
//! inverses are not counted.

pub mod reference;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha1::Sha1;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoding::{self, DecodeError, Reader};
use crate::field::{PrimeField, Scalar};
use crate::primes;

pub use reference::ReferenceBackend;

pub const REFERENCE_BACKEND_ID: u8 = 0x01;

/// Default group size, matching a 160-bit pairing-friendly curve.
pub const DEFAULT_Q_BITS: u64 = 160;

const SELF_TEST_ROUNDS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PairingError {
    #[error("group order {0} is not prime")]
    CompositeOrder(BigUint),
    #[error("group order must have at least 2 bits")]
    OrderTooSmall,
    #[error("unknown pairing backend `{0}`")]
    UnknownBackend(String),
    #[error("element belongs to backend {found:#04x}, context uses {expected:#04x}")]
    BackendMismatch { expected: u8, found: u8 },
    #[error("backend self-test failed: {0}")]
    SelfTestFailed(&'static str),
    #[error("message of {len} bytes exceeds the {capacity}-byte G_T embedding capacity")]
    MessageTooLarge { len: usize, capacity: usize },
    #[error("backend does not support embedding messages in G_T")]
    EmbeddingUnsupported,
    #[error("non-canonical group element encoding")]
    InvalidElement,
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// The interface a pairing provider implements. Representations are the
/// backend's canonical element bytes; equal elements must have equal bytes.
pub trait PairingBackend: Send + Sync + fmt::Debug {
    fn id(&self) -> u8;
    fn name(&self) -> &'static str;
    fn order(&self) -> &BigUint;

    fn g_generator(&self) -> Vec<u8>;
    fn g_identity(&self) -> Vec<u8>;
    fn gt_identity(&self) -> Vec<u8>;

    fn g_mul(&self, a: &[u8], b: &[u8]) -> Vec<u8>;
    fn g_exp(&self, a: &[u8], k: &BigUint) -> Vec<u8>;
    fn g_inv(&self, a: &[u8]) -> Vec<u8>;
    fn gt_mul(&self, a: &[u8], b: &[u8]) -> Vec<u8>;
    fn gt_exp(&self, a: &[u8], k: &BigUint) -> Vec<u8>;
    fn gt_inv(&self, a: &[u8]) -> Vec<u8>;

    /// `prod a_i^k_i` in `G`. Providers may use a simultaneous
    /// (Straus/Shamir) exponentiation.
    fn g_multi_exp(&self, terms: &[(&[u8], &BigUint)]) -> Vec<u8> {
        terms.iter().fold(self.g_identity(), |acc, (a, k)| {
            self.g_mul(&acc, &self.g_exp(a, k))
        })
    }

    fn pair(&self, a: &[u8], b: &[u8]) -> Vec<u8>;

    /// Maps a hash digest onto `G`.
    fn map_to_g(&self, digest: &[u8]) -> Vec<u8>;

    fn is_valid_g(&self, repr: &[u8]) -> bool;
    fn is_valid_gt(&self, repr: &[u8]) -> bool;

    /// Largest message (bytes) that [`PairingBackend::embed_message`] accepts.
    fn message_capacity(&self) -> usize {
        0
    }

    /// Injective encoding of a short byte string as a `G_T` element.
    fn embed_message(&self, _msg: &[u8]) -> Option<Vec<u8>> {
        None
    }

    fn extract_message(&self, _repr: &[u8]) -> Option<Vec<u8>> {
        None
    }
}

/// Element of the source group `G`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GElement {
    backend: u8,
    repr: Vec<u8>,
}

/// Element of the target group `G_T`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GtElement {
    backend: u8,
    repr: Vec<u8>,
}

macro_rules! element_common {
    ($ty:ident, $label:literal) => {
        impl $ty {
            pub fn backend_id(&self) -> u8 {
                self.backend
            }

            /// The backend's canonical representation bytes.
            pub fn repr(&self) -> &[u8] {
                &self.repr
            }

            /// Backend id byte, then the length-prefixed representation.
            pub fn encode(&self, out: &mut Vec<u8>) {
                encoding::put_u8(out, self.backend);
                encoding::put_bytes(out, &self.repr);
            }

            pub fn to_bytes(&self) -> Vec<u8> {
                let mut out = Vec::new();
                self.encode(&mut out);
                out
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($label, "[{:#04x}:{}]"), self.backend, hex::encode(&self.repr))
            }
        }
    };
}

element_common!(GElement, "G");
element_common!(GtElement, "GT");

/// Hash used for `H: {0,1}* -> G`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashAlgorithm {
    #[default]
    Sha256,
    /// Compatibility mode; SHA-1 is not collision resistant.
    Sha1,
}

impl HashAlgorithm {
    pub fn digest(self, data: &[u8]) -> Vec<u8> {
        match self {
            HashAlgorithm::Sha256 => Sha256::digest(data).to_vec(),
            HashAlgorithm::Sha1 => Sha1::digest(data).to_vec(),
        }
    }
}

impl FromStr for HashAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sha256" | "sha-256" => Ok(Self::Sha256),
            "sha1" | "sha-1" => Ok(Self::Sha1),
            other => Err(format!("unknown hash `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackendSelector {
    Reference,
}

impl FromStr for BackendSelector {
    type Err = PairingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(Self::Reference),
            other => Err(PairingError::UnknownBackend(other.to_owned())),
        }
    }
}

/// How the group order is chosen for backends that accept one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupOrder {
    /// The largest prime below `2^bits`.
    Bits(u64),
    Explicit(BigUint),
}

/// Snapshot of a context's operation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub pairings: u64,
    pub scalar_muls: u64,
}

impl std::ops::Sub for OpCounts {
    type Output = OpCounts;

    fn sub(self, rhs: OpCounts) -> OpCounts {
        OpCounts {
            pairings: self.pairings - rhs.pairings,
            scalar_muls: self.scalar_muls - rhs.scalar_muls,
        }
    }
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: OpCounts) {
        self.pairings += rhs.pairings;
        self.scalar_muls += rhs.scalar_muls;
    }
}

#[derive(Debug, Default)]
struct Counters {
    pairings: AtomicU64,
    scalar_muls: AtomicU64,
}

/// A bilinear group instance plus the instrumentation the cost model reads.
///
/// Clones share counters.
#[derive(Clone, Debug)]
pub struct PairingContext {
    backend: Arc<dyn PairingBackend>,
    field: PrimeField,
    generator: GElement,
    gt_base: GtElement,
    hash: HashAlgorithm,
    counters: Arc<Counters>,
}

impl PairingContext {
    /// Builds a context for a named backend and checks the pairing axioms on
    /// randomized inputs before returning.
    pub fn new(
        selector: BackendSelector,
        order: GroupOrder,
        hash: HashAlgorithm,
    ) -> Result<Self, PairingError> {
        let q = match order {
            GroupOrder::Bits(bits) if bits < 2 => return Err(PairingError::OrderTooSmall),
            GroupOrder::Bits(bits) => primes::largest_prime_below_pow2(bits),
            GroupOrder::Explicit(q) => {
                if q.bits() < 2 {
                    return Err(PairingError::OrderTooSmall);
                }
                if !primes::is_probable_prime(&q) {
                    return Err(PairingError::CompositeOrder(q));
                }
                q
            }
        };
        let backend: Arc<dyn PairingBackend> = match selector {
            BackendSelector::Reference => Arc::new(ReferenceBackend::new(q)),
        };
        Self::with_backend(backend, hash)
    }

    /// Reference backend at the largest prime below `2^q_bits`, SHA-256.
    pub fn reference(q_bits: u64) -> Result<Self, PairingError> {
        Self::new(BackendSelector::Reference, GroupOrder::Bits(q_bits), HashAlgorithm::Sha256)
    }

    /// Wraps an externally provided backend (e.g. a pairing-curve library).
    pub fn with_backend(
        backend: Arc<dyn PairingBackend>,
        hash: HashAlgorithm,
    ) -> Result<Self, PairingError> {
        let field = PrimeField::new(backend.order().clone());
        let generator = GElement {
            backend: backend.id(),
            repr: backend.g_generator(),
        };
        let gt_base = GtElement {
            backend: backend.id(),
            repr: backend.pair(&generator.repr, &generator.repr),
        };
        let ctx = Self {
            backend,
            field,
            generator,
            gt_base,
            hash,
            counters: Arc::new(Counters::default()),
        };
        ctx.self_test()?;
        ctx.reset_counters();
        Ok(ctx)
    }

    fn self_test(&self) -> Result<(), PairingError> {
        if self.gt_base == self.gt_identity() {
            return Err(PairingError::SelfTestFailed("e(g,g) is the identity"));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0x5e1f_7e57);
        let f = &self.field;
        for _ in 0..SELF_TEST_ROUNDS {
            let p = self.g_pow(&f.random_nonzero(&mut rng));
            let q = self.g_pow(&f.random_nonzero(&mut rng));
            let a = f.random(&mut rng);
            let b = f.random(&mut rng);
            let lhs = self.pair(&self.g_exp(&p, &a)?, &self.g_exp(&q, &b)?)?;
            let rhs = self.gt_exp(&self.pair(&p, &q)?, &f.mul(&a, &b))?;
            if lhs != rhs {
                return Err(PairingError::SelfTestFailed("bilinearity"));
            }
        }
        Ok(())
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn backend_id(&self) -> u8 {
        self.backend.id()
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn order(&self) -> &BigUint {
        self.field.order()
    }

    pub fn q_bits(&self) -> u64 {
        self.field.bits()
    }

    pub fn hash_algorithm(&self) -> HashAlgorithm {
        self.hash
    }

    pub fn generator(&self) -> &GElement {
        &self.generator
    }

    /// `e(g, g)`, computed once when the context is built.
    pub fn gt_generator(&self) -> &GtElement {
        &self.gt_base
    }

    pub fn g_identity(&self) -> GElement {
        self.wrap_g(self.backend.g_identity())
    }

    pub fn gt_identity(&self) -> GtElement {
        self.wrap_gt(self.backend.gt_identity())
    }

    pub fn counters(&self) -> OpCounts {
        OpCounts {
            pairings: self.counters.pairings.load(Ordering::SeqCst),
            scalar_muls: self.counters.scalar_muls.load(Ordering::SeqCst),
        }
    }

    pub fn reset_counters(&self) {
        self.counters.pairings.store(0, Ordering::SeqCst);
        self.counters.scalar_muls.store(0, Ordering::SeqCst);
    }

    /// Runs `f` and returns its result with the counter delta it caused.
    pub fn measure<T>(&self, f: impl FnOnce() -> T) -> (T, OpCounts) {
        let before = self.counters();
        let out = f();
        (out, self.counters() - before)
    }

    fn wrap_g(&self, repr: Vec<u8>) -> GElement {
        GElement {
            backend: self.backend.id(),
            repr,
        }
    }

    fn wrap_gt(&self, repr: Vec<u8>) -> GtElement {
        GtElement {
            backend: self.backend.id(),
            repr,
        }
    }

    fn check(&self, found: u8) -> Result<(), PairingError> {
        if found != self.backend.id() {
            return Err(PairingError::BackendMismatch {
                expected: self.backend.id(),
                found,
            });
        }
        Ok(())
    }

    fn count_mul(&self) {
        self.counters.scalar_muls.fetch_add(1, Ordering::SeqCst);
    }

    /// `g^k` for the context generator (counted).
    pub fn g_pow(&self, k: &Scalar) -> GElement {
        self.count_mul();
        self.wrap_g(self.backend.g_exp(&self.generator.repr, k.value()))
    }

    pub fn g_exp(&self, base: &GElement, k: &Scalar) -> Result<GElement, PairingError> {
        self.check(base.backend)?;
        self.count_mul();
        Ok(self.wrap_g(self.backend.g_exp(&base.repr, k.value())))
    }

    /// `prod base_i^k_i` as one simultaneous exponentiation (counted once).
    pub fn g_multi_exp(&self, terms: &[(&GElement, &Scalar)]) -> Result<GElement, PairingError> {
        for (base, _) in terms {
            self.check(base.backend)?;
        }
        self.count_mul();
        let raw: Vec<(&[u8], &BigUint)> = terms
            .iter()
            .map(|(b, k)| (b.repr.as_slice(), k.value()))
            .collect();
        Ok(self.wrap_g(self.backend.g_multi_exp(&raw)))
    }

    pub fn g_mul(&self, a: &GElement, b: &GElement) -> Result<GElement, PairingError> {
        self.check(a.backend)?;
        self.check(b.backend)?;
        Ok(self.wrap_g(self.backend.g_mul(&a.repr, &b.repr)))
    }

    pub fn g_inv(&self, a: &GElement) -> Result<GElement, PairingError> {
        self.check(a.backend)?;
        Ok(self.wrap_g(self.backend.g_inv(&a.repr)))
    }

    pub fn gt_exp(&self, base: &GtElement, k: &Scalar) -> Result<GtElement, PairingError> {
        self.check(base.backend)?;
        self.count_mul();
        Ok(self.wrap_gt(self.backend.gt_exp(&base.repr, k.value())))
    }

    pub fn gt_mul(&self, a: &GtElement, b: &GtElement) -> Result<GtElement, PairingError> {
        self.check(a.backend)?;
        self.check(b.backend)?;
        Ok(self.wrap_gt(self.backend.gt_mul(&a.repr, &b.repr)))
    }

    pub fn gt_inv(&self, a: &GtElement) -> Result<GtElement, PairingError> {
        self.check(a.backend)?;
        Ok(self.wrap_gt(self.backend.gt_inv(&a.repr)))
    }

    pub fn gt_div(&self, a: &GtElement, b: &GtElement) -> Result<GtElement, PairingError> {
        self.gt_mul(a, &self.gt_inv(b)?)
    }

    pub fn pair(&self, a: &GElement, b: &GElement) -> Result<GtElement, PairingError> {
        self.check(a.backend)?;
        self.check(b.backend)?;
        self.counters.pairings.fetch_add(1, Ordering::SeqCst);
        Ok(self.wrap_gt(self.backend.pair(&a.repr, &b.repr)))
    }

    /// `H(id)`: digest with the context hash, then map onto `G`.
    pub fn hash_to_g(&self, id: &[u8]) -> GElement {
        self.wrap_g(self.backend.map_to_g(&self.hash.digest(id)))
    }

    /// A uniformly random element of `G` with unknown discrete log.
    pub fn random_g<R: Rng + ?Sized>(&self, rng: &mut R) -> GElement {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let mut input = b"gridsec/random-g/".to_vec();
        input.extend_from_slice(&seed);
        self.hash_to_g(&input)
    }

    pub fn message_capacity(&self) -> usize {
        self.backend.message_capacity()
    }

    pub fn embed_message(&self, msg: &[u8]) -> Result<GtElement, PairingError> {
        let capacity = self.backend.message_capacity();
        if capacity == 0 {
            return Err(PairingError::EmbeddingUnsupported);
        }
        self.backend
            .embed_message(msg)
            .map(|r| self.wrap_gt(r))
            .ok_or(PairingError::MessageTooLarge {
                len: msg.len(),
                capacity,
            })
    }

    pub fn extract_message(&self, element: &GtElement) -> Option<Vec<u8>> {
        if element.backend != self.backend.id() {
            return None;
        }
        self.backend.extract_message(&element.repr)
    }

    fn read_repr(&self, r: &mut Reader<'_>) -> Result<Vec<u8>, PairingError> {
        let id = r.u8()?;
        self.check(id)?;
        Ok(r.bytes()?.to_vec())
    }

    pub fn read_g(&self, r: &mut Reader<'_>) -> Result<GElement, PairingError> {
        let repr = self.read_repr(r)?;
        if !self.backend.is_valid_g(&repr) {
            return Err(PairingError::InvalidElement);
        }
        Ok(self.wrap_g(repr))
    }

    pub fn read_gt(&self, r: &mut Reader<'_>) -> Result<GtElement, PairingError> {
        let repr = self.read_repr(r)?;
        if !self.backend.is_valid_gt(&repr) {
            return Err(PairingError::InvalidElement);
        }
        Ok(self.wrap_gt(repr))
    }

    pub fn g_from_bytes(&self, bytes: &[u8]) -> Result<GElement, PairingError> {
        let mut r = Reader::new(bytes);
        let e = self.read_g(&mut r)?;
        r.finish()?;
        Ok(e)
    }

    pub fn gt_from_bytes(&self, bytes: &[u8]) -> Result<GtElement, PairingError> {
        let mut r = Reader::new(bytes);
        let e = self.read_gt(&mut r)?;
        r.finish()?;
        Ok(e)
    }
}
