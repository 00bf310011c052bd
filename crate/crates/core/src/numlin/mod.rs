//! Dense linear algebra substrate: matrix helpers, the simplex solver and
//! continuous-time stability tests.

pub mod lp;
pub mod stability;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use lp::{solve_lp, LpOutcome, LpProblem, LpStatus, DEFAULT_FEAS_TOL};
pub use stability::{characteristic_polynomial, hurwitz_margin, is_hurwitz, routh_first_column};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative tolerance used by [`left_inverse`] and the Kalman rank tests.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Numerical rank: singular values above `rel_tol * sigma_max`.
pub fn rank(m: &Matrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0_f64, |a, b| a.max(*b));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > rel_tol * smax).count()
}

/// Returns `V` with `V * M = I` for a full column rank `M`.
///
/// Rank is judged against `tol` times the largest column norm of `M`.
pub fn left_inverse(m: &Matrix, tol: f64) -> Result<Matrix> {
    ensure_finite(m, "left_inverse input")?;
    if m.nrows() < m.ncols() || m.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "left inverse needs rows >= cols, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let colmax = m.column_iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let svd = m.clone().svd(true, true);
    let smin = svd.singular_values.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let thresh = tol * colmax.max(f64::MIN_POSITIVE);
    if !(smin > thresh) {
        return Err(Error::RankDeficient { sigma_min: smin, tol: thresh });
    }
    svd.pseudo_inverse(0.0)
        .map_err(|e| Error::NumericalBreakdown(e.to_string()))
}

/// Largest absolute entry.
pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<f64, R, C>>(
    m: &nalgebra::Matrix<f64, R, C, S>,
) -> f64 {
    m.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-5..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
