//! Brute-force oracles shared by the integration tests. They deliberately
//! avoid the library's own LP and vertex code.

#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

/// Every vertex of `{x : P x <= phi}` (dimension `d = P.ncols()`), found by
/// solving each `d`-subset of rows as equalities and keeping the feasible
/// solutions. Duplicates within `1e-9` are merged.
pub fn brute_vertices(p: &DMatrix<f64>, phi: &[f64]) -> Vec<DVector<f64>> {
    let d = p.ncols();
    let mut out: Vec<DVector<f64>> = Vec::new();
    for rows in (0..p.nrows()).combinations(d) {
        let a = DMatrix::from_fn(d, d, |i, j| p[(rows[i], j)]);
        let b = DVector::from_fn(d, |i, _| phi[rows[i]]);
        if a.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        let feasible = (0..p.nrows()).all(|i| (p.row(i) * &x)[0] <= phi[i] + 1e-9);
        if feasible && !out.iter().any(|v| (v - &x).amax() < 1e-9) {
            out.push(x);
        }
    }
    out
}

/// Minimum of `c·x` over `{x : A_eq x = b_eq, A_in x <= b_in, lo <= x <= hi}`
/// with finite bounds, by enumerating basic solutions. `None` when empty.
pub fn brute_lp(
    c: &[f64],
    a_eq: &DMatrix<f64>,
    b_eq: &[f64],
    a_in: &DMatrix<f64>,
    b_in: &[f64],
    lo: &[f64],
    hi: &[f64],
) -> Option<f64> {
    let n = c.len();
    // inequality rows: A_in, then -x <= -lo, then x <= hi
    let mut rows: Vec<(Vec<f64>, f64)> = (0..a_in.nrows()).map(|i| (a_in.row(i).iter().copied().collect(), b_in[i])).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        rows.push((e.clone(), -lo[j]));
        e[j] = 1.0;
        rows.push((e, hi[j]));
    }
    let k = n - a_eq.nrows();
    let mut best: Option<f64> = None;
    for active in (0..rows.len()).combinations(k) {
        let a = DMatrix::from_fn(n, n, |i, j| if i < a_eq.nrows() { a_eq[(i, j)] } else { rows[active[i - a_eq.nrows()]].0[j] });
        let b = DVector::from_fn(n, |i, _| if i < a_eq.nrows() { b_eq[i] } else { rows[active[i - a_eq.nrows()]].1 });
        if a.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        let eq_ok = (0..a_eq.nrows()).all(|i| ((a_eq.row(i) * &x)[0] - b_eq[i]).abs() <= 1e-8);
        let in_ok = rows.iter().all(|(r, rhs)| r.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-8);
        if eq_ok && in_ok {
            let v: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            best = Some(best.map_or(v, |b: f64| b.min(v)));
        }
    }
    best
}
