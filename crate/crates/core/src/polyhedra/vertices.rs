use itertools::Itertools;

use super::Polyhedron;
use crate::error::{Error, Result};
use crate::numlin::{Matrix, Vector};

/// Vertices closer than this (max-norm) are merged.
pub const VERTEX_DEDUP_TOL: f64 = 1e-9;

const MAX_VERTEX_DIM: usize = 4;
const SINGULAR_RATIO: f64 = 1e-11;

/// All vertices of a bounded polyhedron in dimension <= 4.
///
/// Every `n`-subset of rows is tried as an active set; subsets whose rows
/// are numerically dependent are skipped, so degenerate vertices show up
/// once per active set and are merged afterwards.
pub fn vertices(poly: &Polyhedron) -> Result<Vec<Vector>> {
    let n = poly.dim();
    if n > MAX_VERTEX_DIM {
        return Err(Error::TooHighDimensional { dim: n, max: MAX_VERTEX_DIM });
    }
    if !poly.is_bounded()? {
        return Err(Error::Unbounded);
    }
    let p = poly.shape();
    let phi = poly.offset();
    let mut out: Vec<Vector> = Vec::new();
    for rows in (0..poly.num_rows()).combinations(n) {
        let a = Matrix::from_fn(n, n, |i, j| p[(rows[i], j)]);
        let b = Vector::from_fn(n, |i, _| phi[rows[i]]);
        let sv = a.clone().svd(false, false).singular_values;
        let smax = sv.max();
        if smax == 0.0 || sv.min() <= SINGULAR_RATIO * smax {
            continue;
        }
        let Some(x) = a.lu().solve(&b) else { continue };
        if !poly.contains(x.as_slice(), VERTEX_DEDUP_TOL)? {
            continue;
        }
        if out.iter().all(|v| (v - &x).amax() > VERTEX_DEDUP_TOL) {
            out.push(x);
        }
    }
    Ok(out)
}
