// SPDX-License-Identifier: Apache-2.0

//! Multi-authority ciphertext-policy attribute-based encryption.
//!
//! Each KDC owns a disjoint set of attributes and issues per-user keys
//! `g^alpha_i * H(u)^y_i`. A ciphertext shares a secret `s` over the rows of
//! an LSSS matrix; users whose attributes authorize a set of rows recover
//! `e(g,g)^s` and unblind the payload. Binding every key to `H(u)` stops
//! users from pooling keys.

mod ciphertext;
mod keys;
mod scheme;

use thiserror::Error;

use crate::encoding::DecodeError;
use crate::lsss::LsssError;
use crate::pairing::PairingError;

pub use ciphertext::{AbeCiphertext, Payload, PayloadMode, RowCiphertext, RowUpdates};
pub use keys::{
    canonical_attribute, directory_from_bytes, directory_to_bytes, kdc_setup, public_directory,
    verify_key, AttributePublicKey, KdcKeyring, PublicDirectory, UserKeyring,
};
pub use scheme::{
    abe_decrypt, abe_encrypt, combine_keyrings_attack, revoke, updates_from_bytes, updates_to_bytes,
    EncryptionSecrets,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbeError {
    #[error("a KDC needs at least one attribute")]
    EmptyAttributes,
    #[error("attribute names must not be blank")]
    BlankAttribute,
    #[error("attribute `{0}` listed twice")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` is claimed by more than one KDC")]
    SharedAttribute(String),
    #[error("KDC `{kdc}` does not own attribute `{attribute}`")]
    AttributeNotOwned { kdc: String, attribute: String },
    #[error("no public key for attribute `{0}`")]
    UnknownAttribute(String),
    #[error("key for attribute `{0}` fails verification")]
    KeyVerificationFailed(String),
    #[error("payload of {len} bytes exceeds the {capacity}-byte direct-mode capacity")]
    PayloadTooLarge { len: usize, capacity: usize },
    #[error("access denied: attributes do not satisfy the policy")]
    AccessDenied,
    #[error("payload failed authentication")]
    IntegrityFailure,
    #[error("revocation needs at least one user")]
    EmptyRevocation,
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Lsss(#[from] LsssError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}
