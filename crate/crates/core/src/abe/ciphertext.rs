// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::encoding::{self, DecodeError, Reader};
use crate::lsss::LsssProgram;
use crate::pairing::{GElement, GtElement, PairingContext};

use super::AbeError;

/// How the payload is bound to the blinding element `e(g,g)^s`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PayloadMode {
    /// Symmetric key derived from `e(g,g)^s`, payload under AES-256-GCM.
    #[default]
    Kem,
    /// Payload embedded in `G_T` and multiplied by `e(g,g)^s`.
    Direct,
}

impl std::str::FromStr for PayloadMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kem" => Ok(Self::Kem),
            "direct" => Ok(Self::Direct),
            other => Err(format!("unknown payload mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Direct { c0: GtElement },
    Kem { nonce: Vec<u8>, body: Vec<u8>, tag: Vec<u8> },
}

impl Payload {
    pub fn mode(&self) -> PayloadMode {
        match self {
            Payload::Direct { .. } => PayloadMode::Direct,
            Payload::Kem { .. } => PayloadMode::Kem,
        }
    }
}

/// `(C1, C2, C3)` for one matrix row. `c1` is `None` while the current value
/// is only available out of band.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowCiphertext {
    pub c1: Option<GtElement>,
    pub c2: GElement,
    pub c3: GElement,
}

/// Fresh `C1` values for withheld rows, keyed by row index.
pub type RowUpdates = BTreeMap<usize, GtElement>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AbeCiphertext {
    pub program: LsssProgram,
    pub payload: Payload,
    pub rows: Vec<RowCiphertext>,
}

const MODE_DIRECT: u8 = 0;
const MODE_KEM: u8 = 1;

impl AbeCiphertext {
    /// Program, mode byte, `C0` (direct only), the row triples with a
    /// presence byte before each `C1`, then nonce, body and tag (KEM only).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.program.encode(&mut out);
        match &self.payload {
            Payload::Direct { c0 } => {
                encoding::put_u8(&mut out, MODE_DIRECT);
                c0.encode(&mut out);
            }
            Payload::Kem { .. } => encoding::put_u8(&mut out, MODE_KEM),
        }
        for row in &self.rows {
            match &row.c1 {
                Some(c1) => {
                    encoding::put_u8(&mut out, 1);
                    c1.encode(&mut out);
                }
                None => encoding::put_u8(&mut out, 0),
            }
            row.c2.encode(&mut out);
            row.c3.encode(&mut out);
        }
        if let Payload::Kem { nonce, body, tag } = &self.payload {
            encoding::put_bytes(&mut out, nonce);
            encoding::put_bytes(&mut out, body);
            encoding::put_bytes(&mut out, tag);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], ctx: &PairingContext) -> Result<Self, AbeError> {
        let mut r = Reader::new(bytes);
        let program = LsssProgram::read(&mut r, ctx.field())?;
        let mode = r.u8()?;
        let c0 = match mode {
            MODE_DIRECT => Some(ctx.read_gt(&mut r)?),
            MODE_KEM => None,
            other => {
                return Err(DecodeError::Invalid {
                    field: "payload mode",
                    reason: format!("unknown mode byte {other}"),
                }
                .into())
            }
        };
        let mut rows = Vec::with_capacity(program.n());
        for _ in 0..program.n() {
            let c1 = match r.u8()? {
                0 => None,
                1 => Some(ctx.read_gt(&mut r)?),
                other => {
                    return Err(DecodeError::Invalid {
                        field: "C1 presence",
                        reason: format!("expected 0 or 1, found {other}"),
                    }
                    .into())
                }
            };
            let c2 = ctx.read_g(&mut r)?;
            let c3 = ctx.read_g(&mut r)?;
            rows.push(RowCiphertext { c1, c2, c3 });
        }
        let payload = match c0 {
            Some(c0) => Payload::Direct { c0 },
            None => Payload::Kem {
                nonce: r.bytes()?.to_vec(),
                body: r.bytes()?.to_vec(),
                tag: r.bytes()?.to_vec(),
            },
        };
        r.finish()?;
        Ok(Self {
            program,
            payload,
            rows,
        })
    }

    /// Rows whose `C1` is not stored.
    pub fn withheld_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&x| self.rows[x].c1.is_none()).collect()
    }
}
