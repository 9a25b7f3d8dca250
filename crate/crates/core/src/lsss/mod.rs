// SPDX-License-Identifier: Apache-2.0

//! Monotone access policies and their linear secret sharing matrices.
//!
//! A policy string parses into a binary [`AccessTree`], which compiles to an
//! [`LsssProgram`]: a matrix `R` over `Z_q` with one row per leaf and a row
//! label naming the leaf attribute. A set of rows is authorized when its span
//! contains `(1, 0, ..., 0)`.

mod parser;
mod solver;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{self, DecodeError, Reader};
use crate::field::{PrimeField, Scalar};

pub use parser::{parse_policy, PolicyError};
pub use solver::{solve_reconstruction, solve_rows, verify, Coefficients};

/// Binary AND/OR tree with attribute leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AccessTree {
    Leaf(String),
    And(Box<AccessTree>, Box<AccessTree>),
    Or(Box<AccessTree>, Box<AccessTree>),
}

impl AccessTree {
    /// Leaf attributes in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            AccessTree::Leaf(a) => out.push(a),
            AccessTree::And(l, r) | AccessTree::Or(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    pub fn and_count(&self) -> usize {
        match self {
            AccessTree::Leaf(_) => 0,
            AccessTree::And(l, r) => 1 + l.and_count() + r.and_count(),
            AccessTree::Or(l, r) => l.and_count() + r.and_count(),
        }
    }

    pub fn attributes(&self) -> BTreeSet<String> {
        self.leaves().into_iter().map(str::to_owned).collect()
    }

    /// Plain boolean evaluation.
    pub fn satisfied_by(&self, attrs: &BTreeSet<String>) -> bool {
        match self {
            AccessTree::Leaf(a) => attrs.contains(a),
            AccessTree::And(l, r) => l.satisfied_by(attrs) && r.satisfied_by(attrs),
            AccessTree::Or(l, r) => l.satisfied_by(attrs) || r.satisfied_by(attrs),
        }
    }

    /// The same tree with every gate's children swapped.
    pub fn mirrored(&self) -> AccessTree {
        match self {
            AccessTree::Leaf(a) => AccessTree::Leaf(a.clone()),
            AccessTree::And(l, r) => AccessTree::And(Box::new(r.mirrored()), Box::new(l.mirrored())),
            AccessTree::Or(l, r) => AccessTree::Or(Box::new(r.mirrored()), Box::new(l.mirrored())),
        }
    }

    fn fmt_nested(&self, f: &mut fmt::Formatter<'_>, root: bool) -> fmt::Result {
        let (l, op, r) = match self {
            AccessTree::Leaf(a) => return f.write_str(a),
            AccessTree::And(l, r) => (l, "&", r),
            AccessTree::Or(l, r) => (l, "|", r),
        };
        if !root {
            f.write_str("(")?;
        }
        l.fmt_nested(f, false)?;
        write!(f, " {op} ")?;
        r.fmt_nested(f, false)?;
        if !root {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Prints a policy that parses back to the identical tree.
impl fmt::Display for AccessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_nested(f, true)
    }
}

/// How an AND gate extends its parent's vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Global gate counter `c`: left child `v || 0.. || 1`, right child
    /// `0^c || -1`, both at length `c + 1`, then `c += 1`. Always a valid
    /// sharing; `h = 1 + #AND`.
    #[default]
    Counter,
    /// Left child `v || 1`, right child `0^|v| || -1`. Reproduces common
    /// hand-built matrices, but sibling AND gates reuse a column, so some
    /// unsatisfying sets can be authorized. `h` is the longest row.
    ParentLength,
}

impl std::str::FromStr for Convention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "counter" => Ok(Self::Counter),
            "parent-length" => Ok(Self::ParentLength),
            other => Err(format!("unknown compiler convention `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LsssError {
    #[error("program has no rows")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("row {row}, column {col}: entry not reduced modulo q")]
    Unreduced { row: usize, col: usize },
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Share-generating matrix with row labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LsssProgram {
    rows: Vec<Vec<Scalar>>,
    labels: Vec<String>,
}

impl LsssProgram {
    pub fn new(rows: Vec<Vec<Scalar>>, labels: Vec<String>) -> Result<Self, LsssError> {
        if rows.is_empty() {
            return Err(LsssError::Empty);
        }
        if rows.len() != labels.len() {
            return Err(LsssError::LabelCount {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        let h = rows[0].len();
        if h == 0 {
            return Err(LsssError::Empty);
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != h) {
            return Err(LsssError::Ragged {
                row,
                found: r.len(),
                expected: h,
            });
        }
        Ok(Self { rows, labels })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn h(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[Vec<Scalar>] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> &[Scalar] {
        &self.rows[x]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn attributes(&self) -> BTreeSet<String> {
        self.labels.iter().cloned().collect()
    }

    /// Entries as signed integers in `(-q/2, q/2]`.
    pub fn signed_rows(&self, field: &PrimeField) -> Vec<Vec<BigInt>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|s| field.to_signed(s)).collect())
            .collect()
    }

    /// `n`, `h` as u32, entries row-major, then one length-prefixed label
    /// per row.
    pub fn encode(&self, out: &mut Vec<u8>) {
        encoding::put_u32(out, self.n() as u32);
        encoding::put_u32(out, self.h() as u32);
        for row in &self.rows {
            for s in row {
                encoding::put_uint(out, s.value());
            }
        }
        for label in &self.labels {
            encoding::put_bytes(out, label.as_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode(&mut out);
        out
    }

    pub fn read(r: &mut Reader<'_>, field: &PrimeField) -> Result<Self, LsssError> {
        let n = r.u32()? as usize;
        let h = r.u32()? as usize;
        if n == 0 || h == 0 {
            return Err(LsssError::Empty);
        }
        let mut rows = Vec::with_capacity(n.min(1024));
        for row in 0..n {
            let mut entries = Vec::with_capacity(h.min(1024));
            for col in 0..h {
                let v = r.uint()?;
                if &v >= field.order() {
                    return Err(LsssError::Unreduced { row, col });
                }
                entries.push(field.element(v));
            }
            rows.push(entries);
        }
        let mut labels = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let raw = r.bytes()?;
            let label = String::from_utf8(raw.to_vec()).map_err(|e| DecodeError::Invalid {
                field: "row label",
                reason: e.to_string(),
            })?;
            labels.push(label);
        }
        Self::new(rows, labels)
    }

    pub fn from_bytes(bytes: &[u8], field: &PrimeField) -> Result<Self, LsssError> {
        let mut r = Reader::new(bytes);
        let p = Self::read(&mut r, field)?;
        r.finish()?;
        Ok(p)
    }
}

/// Compiles a tree to an LSSS matrix; rows follow depth-first leaf order and
/// short rows are zero-padded at the end.
pub fn compile_lsss(tree: &AccessTree, field: &PrimeField, convention: Convention) -> LsssProgram {
    let one = field.one();
    let minus_one = field.neg(&one);
    let mut rows: Vec<Vec<Scalar>> = Vec::new();
    let mut labels = Vec::new();
    let mut counter = 1usize;

    // Explicit stack so deep chains do not recurse.
    let mut stack = vec![(tree, vec![one.clone()])];
    while let Some((node, v)) = stack.pop() {
        match node {
            AccessTree::Leaf(a) => {
                rows.push(v);
                labels.push(a.clone());
            }
            AccessTree::Or(l, r) => {
                stack.push((r, v.clone()));
                stack.push((l, v));
            }
            AccessTree::And(l, r) => {
                let width = match convention {
                    Convention::Counter => counter,
                    Convention::ParentLength => v.len(),
                };
                let mut left = v;
                left.resize(width, field.zero());
                left.push(one.clone());
                let mut right = vec![field.zero(); width];
                right.push(minus_one.clone());
                counter += 1;
                stack.push((r, right));
                stack.push((l, left));
            }
        }
    }

    let h = rows.iter().map(Vec::len).max().unwrap_or(1);
    for row in &mut rows {
        row.resize(h, field.zero());
    }
    LsssProgram::new(rows, labels).expect("compiler output is rectangular")
}
