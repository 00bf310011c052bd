//! Hurwitz tests through the characteristic polynomial and the Routh array.

use super::{ensure_finite, ensure_square, Matrix};
use crate::error::{Error, Result};

const MAX_DIM: usize = 12;

/// Coefficients of `det(sI - M)`, highest power first (leading 1).
///
/// Faddeev-LeVerrier recursion; adequate for the small closed loops handled here.
pub fn characteristic_polynomial(m: &Matrix) -> Result<Vec<f64>> {
    ensure_square(m, "matrix")?;
    ensure_finite(m, "characteristic polynomial input")?;
    let n = m.nrows();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[0] = 1.0;
    let mut mk = Matrix::zeros(n, n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I ; c_k = -tr(A M_k) / k
        mk = m * &mk;
        for i in 0..n {
            mk[(i, i)] += coeffs[k - 1];
        }
        let amk = m * &mk;
        coeffs[k] = -amk.trace() / k as f64;
    }
    Ok(coeffs)
}

/// First column of the Routh array of `poly` (highest power first).
///
/// Stops early and returns the partial column when a zero pivot appears, in
/// which case the polynomial is not strictly Hurwitz.
pub fn routh_first_column(poly: &[f64]) -> Vec<f64> {
    let deg = poly.len().saturating_sub(1);
    let sign = if poly.first().copied().unwrap_or(1.0) < 0.0 { -1.0 } else { 1.0 };
    let width = deg / 2 + 1;
    let mut prev: Vec<f64> = (0..width).map(|i| poly.get(2 * i).map_or(0.0, |c| sign * c)).collect();
    let mut cur: Vec<f64> =
        (0..width).map(|i| poly.get(2 * i + 1).map_or(0.0, |c| sign * c)).collect();
    let mut col = vec![prev[0]];
    for _ in 0..deg {
        col.push(cur[0]);
        if cur[0] == 0.0 {
            break;
        }
        let next: Vec<f64> = (0..width)
            .map(|i| {
                let a = prev.get(i + 1).copied().unwrap_or(0.0);
                let b = cur.get(i + 1).copied().unwrap_or(0.0);
                (cur[0] * a - prev[0] * b) / cur[0]
            })
            .collect();
        prev = cur;
        cur = next;
    }
    col.truncate(deg + 1);
    col
}

fn strictly_hurwitz(poly: &[f64]) -> bool {
    let col = routh_first_column(poly);
    col.len() == poly.len() && col.iter().all(|c| *c > 0.0)
}

/// True iff every eigenvalue of `m` has real part below `-margin`.
pub fn is_hurwitz(m: &Matrix, margin: f64) -> Result<bool> {
    ensure_square(m, "matrix")?;
    if m.nrows() > MAX_DIM {
        return Err(Error::DimensionMismatch(format!(
            "stability test supports dimension <= {MAX_DIM}, got {}",
            m.nrows()
        )));
    }
    let mut shifted = m.clone();
    for i in 0..m.nrows() {
        shifted[(i, i)] += margin;
    }
    Ok(strictly_hurwitz(&characteristic_polynomial(&shifted)?))
}

/// Largest `margin` for which [`is_hurwitz`] holds (the negated spectral
/// abscissa), found by bisection on the shift. Negative for unstable `m`.
pub fn hurwitz_margin(m: &Matrix) -> Result<f64> {
    ensure_square(m, "matrix")?;
    let bound = 1.0 + m.iter().fold(0.0_f64, |a, b| a.max(b.abs())) * m.nrows() as f64;
    let (mut lo, mut hi) = (-bound, bound);
    if !is_hurwitz(m, lo)? {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if is_hurwitz(m, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * bound {
            break;
        }
    }
    Ok(lo)
}
