//! Starting polytopes built from the closed-loop modes.
//!
//! A real mode with left eigenvector `w` contributes the slab `|w·x| ≤ c`,
//! invariant for unit-bounded references once `c ≥ |w·B_cl| / |λ|`. A complex
//! pair contributes a regular `N`-gon in the plane of `(Re w, Im w)`, with `N`
//! large enough that the rotation cannot push a vertex outward.

use std::f64::consts::PI;

use crate::numlin::{Matrix, Vector};

/// Safety factor on the decay rate used to size the slabs and polygons.
const MARGIN: f64 = 0.9;

/// Left null vector of `a_t − λI` (real case) via the smallest singular vector.
fn null_vector(m: Matrix) -> Option<Vector> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let (k, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    Some(v_t.row(k).transpose())
}

enum Block {
    Pair(Vector),
    Polygon { p: Vector, q: Vector, sides: usize, sigma: f64, omega: f64 },
}

/// Rows of a polytope `{x : L x ≤ 1}` invariant for `ẋ = A_cl x + B_cl r`
/// with `|r| ≤ 1`, padded to `l` rows; `None` when the modes need more than
/// `l` rows, a mode is not strictly stable, or an eigenvector is degenerate.
pub fn modal_rows(a_cl: &Matrix, b_cl: &Vector, l: usize) -> Option<Matrix> {
    let n = a_cl.nrows();
    let a_t = a_cl.transpose();
    let eig = a_cl.clone().complex_eigenvalues();
    let mut blocks = Vec::new();
    for lam in eig.iter() {
        if lam.im < -1e-9 {
            continue;
        }
        if lam.re >= 0.0 {
            return None;
        }
        if lam.im.abs() <= 1e-9 {
            let mut m = a_t.clone();
            for i in 0..n {
                m[(i, i)] -= lam.re;
            }
            let w = null_vector(m)?;
            blocks.push(Block::Pair(w.normalize()));
        } else {
            let (sigma, omega) = (lam.re, lam.im);
            let mut m = Matrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] = a_t[(i, j)];
                    m[(n + i, n + j)] = a_t[(i, j)];
                }
                m[(i, i)] -= sigma;
                m[(n + i, n + i)] -= sigma;
                m[(i, n + i)] = omega;
                m[(n + i, i)] = -omega;
            }
            let v = null_vector(m)?;
            let p = v.rows(0, n).into_owned();
            let q = v.rows(n, n).into_owned();
            let sides = (3..=l).find(|&s| sigma + omega * (PI / s as f64).tan() < -1e-3 * sigma.abs())?;
            blocks.push(Block::Polygon { p, q, sides, sigma, omega });
        }
    }

    // per block: directions and the raw scale that makes them invariant
    let mut scaled: Vec<(Vec<Vector>, f64)> = Vec::new();
    for (blk, lam) in blocks.iter().zip(eig.iter().filter(|l| l.im >= -1e-9)) {
        match blk {
            Block::Pair(w) => {
                let b = w.dot(b_cl).abs();
                scaled.push((vec![w.clone(), -w], b / (-lam.re * MARGIN)));
            }
            Block::Polygon { p, q, sides, sigma, omega } => {
                let half = PI / *sides as f64;
                let dirs: Vec<Vector> = (0..*sides)
                    .map(|k| {
                        let th = 2.0 * PI * k as f64 / *sides as f64;
                        p * th.cos() + q * th.sin()
                    })
                    .collect();
                let rate = -(sigma + omega * half.tan());
                let b = dirs.iter().map(|d| d.dot(b_cl).abs()).fold(0.0, f64::max) / half.cos();
                scaled.push((dirs, b / (rate * MARGIN)));
            }
        }
    }
    // a mode the reference does not excite is invariant at any scale; keep
    // it comparable to the others so the rows stay well conditioned
    let floor = 1e-3 * scaled.iter().map(|s| s.1).fold(1e-9, f64::max);
    let mut rows: Vec<Vector> = Vec::new();
    for (dirs, c) in scaled {
        let c = c.max(floor);
        rows.extend(dirs.into_iter().map(|d| d / c));
    }
    if rows.len() > l || rows.iter().any(|r| !r.iter().all(|v| v.is_finite())) {
        return None;
    }
    let base = rows.len();
    for k in 0..(l - base) {
        rows.push(&rows[k % base] * 0.5);
    }
    Some(Matrix::from_fn(l, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::{vertices, Polyhedron};

    /// Checks the tangency condition of invariance at every vertex: for each
    /// row active at a vertex, the derivative along that row is non-positive
    /// under both extreme references.
    fn invariant_at_vertices(a: &Matrix, b: &Vector, l: &Matrix) -> bool {
        let poly = Polyhedron::unit_offset(l.clone()).unwrap();
        let verts = vertices(&poly).unwrap();
        verts.iter().all(|v| {
            (0..l.nrows()).all(|i| {
                let row = l.row(i);
                if ((row * v)[0] - 1.0).abs() > 1e-8 {
                    return true;
                }
                [1.0, -1.0].iter().all(|r| (row * (a * v + b * *r))[0] <= 1e-8)
            })
        })
    }

    #[test]
    fn real_modes_give_invariant_slabs() {
        let a = Matrix::from_row_slice(3, 3, &[-6.0, 11.0, 6.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = Vector::from_vec(vec![4.0, 1.0, 0.0]);
        let l = modal_rows(&a, &b, 7).unwrap();
        assert_eq!(l.shape(), (7, 3));
        assert!(invariant_at_vertices(&a, &b, &l));
    }

    #[test]
    fn complex_pair_gives_invariant_polygon() {
        let a = Matrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
        let b = Vector::from_vec(vec![1.0, 0.3]);
        let l = modal_rows(&a, &b, 40).unwrap();
        assert!(invariant_at_vertices(&a, &b, &l));
    }

    #[test]
    fn unstable_or_oversized_requests_fail() {
        let a = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        let b = Vector::from_vec(vec![1.0, 1.0]);
        assert!(modal_rows(&a, &b, 6).is_none());
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        assert!(modal_rows(&a, &b, 3).is_none());
    }
}
