// SPDX-License-Identifier: Apache-2.0

//! Reconstruction coefficients: find `k` with `sum k_x R_x = (1, 0, ..., 0)`.

use std::collections::{BTreeMap, BTreeSet};

use crate::field::{PrimeField, Scalar};

use super::LsssProgram;

/// Coefficients for the rows with nonzero `k_x`, keyed by row index.
pub type Coefficients = BTreeMap<usize, Scalar>;

/// Solves for the rows whose attribute is in `attrs`. `None` means the set
/// is not authorized.
pub fn solve_reconstruction(
    program: &LsssProgram,
    attrs: &BTreeSet<String>,
    field: &PrimeField,
) -> Option<Coefficients> {
    let rows: Vec<usize> = (0..program.n())
        .filter(|&x| attrs.contains(program.label(x)))
        .collect();
    solve_rows(program, &rows, field)
}

/// Solves using only the listed rows. The returned support is
/// inclusion-minimal and the result is verified by substitution.
pub fn solve_rows(program: &LsssProgram, rows: &[usize], field: &PrimeField) -> Option<Coefficients> {
    let mut support: Vec<usize> = rows.to_vec();
    support.sort_unstable();
    support.dedup();
    let first = solve_subset(program, &support, field)?;
    support.retain(|x| first.contains_key(x));

    let mut i = 0;
    while i < support.len() {
        let mut trial = support.clone();
        trial.remove(i);
        if solve_subset(program, &trial, field).is_some() {
            support = trial;
        } else {
            i += 1;
        }
    }

    let coeffs = solve_subset(program, &support, field)?;
    if verify(program, &coeffs, field) {
        Some(coeffs)
    } else {
        debug_assert!(false, "solver produced an invalid combination");
        None
    }
}

/// Checks `sum k_x R_x = (1, 0, ..., 0)` directly.
pub fn verify(program: &LsssProgram, coeffs: &Coefficients, field: &PrimeField) -> bool {
    let mut acc = vec![field.zero(); program.h()];
    for (&x, k) in coeffs {
        if x >= program.n() {
            return false;
        }
        for (a, r) in acc.iter_mut().zip(program.row(x)) {
            *a = field.add(a, &field.mul(k, r));
        }
    }
    acc.iter()
        .enumerate()
        .all(|(j, a)| if j == 0 { *a == field.one() } else { a.is_zero() })
}

/// Gaussian elimination on `R_X^T k = e_1`, free variables set to zero.
fn solve_subset(program: &LsssProgram, rows: &[usize], field: &PrimeField) -> Option<Coefficients> {
    let h = program.h();
    let m = rows.len();
    if m == 0 {
        return None;
    }
    // h equations, m unknowns, augmented column at index m.
    let mut a: Vec<Vec<Scalar>> = (0..h)
        .map(|j| {
            let mut eq: Vec<Scalar> = rows.iter().map(|&x| program.row(x)[j].clone()).collect();
            eq.push(if j == 0 { field.one() } else { field.zero() });
            eq
        })
        .collect();

    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m {
        let Some(p) = (r..h).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = field.inv(&a[r][c]).expect("nonzero pivot");
        for v in a[r].iter_mut() {
            *v = field.mul(v, &inv);
        }
        for i in 0..h {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                let pivot_row = a[r].clone();
                for (v, p) in a[i].iter_mut().zip(&pivot_row) {
                    *v = field.sub(v, &field.mul(&f, p));
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == h {
            break;
        }
    }

    if a[r..].iter().any(|eq| !eq[m].is_zero()) {
        return None;
    }
    let mut out = Coefficients::new();
    for (i, &c) in pivots.iter().enumerate() {
        if !a[i][m].is_zero() {
            out.insert(rows[c], a[i][m].clone());
        }
    }
    Some(out)
}
