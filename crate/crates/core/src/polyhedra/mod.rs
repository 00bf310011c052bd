//! H-representation polyhedra `{x : P x <= phi}` and the LP certificates
//! built on them: Farkas inclusion witnesses, Minkowski-sum inclusion,
//! vertex enumeration and planar projection.

mod project;
mod vertices;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numlin::{solve_lp, LpProblem, LpStatus, Matrix, Vector, DEFAULT_FEAS_TOL};

pub use project::{polygon_csv, project_2d};
pub use vertices::{vertices, VERTEX_DEDUP_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    shape: Matrix,
    offset: Vector,
}

/// Outcome of a support-function query.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Bounded { value: f64, point: Vector },
    Unbounded,
    Empty,
}

impl Polyhedron {
    pub fn new(shape: Matrix, offset: Vector) -> Result<Self> {
        if shape.ncols() == 0 {
            return Err(Error::DimensionMismatch("polyhedron needs ambient dimension >= 1".into()));
        }
        if shape.nrows() != offset.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape has {} rows but offset has {} entries",
                shape.nrows(),
                offset.len()
            )));
        }
        if !shape.iter().chain(offset.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("polyhedron data"));
        }
        Ok(Self { shape, offset })
    }

    /// `{x : P x <= 1}`.
    pub fn unit_offset(shape: Matrix) -> Result<Self> {
        let rows = shape.nrows();
        Self::new(shape, Vector::from_element(rows, 1.0))
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        let n = lo.len();
        let mut shape = Matrix::zeros(2 * n, n);
        let mut offset = Vector::zeros(2 * n);
        for i in 0..n {
            shape[(i, i)] = 1.0;
            offset[i] = hi[i];
            shape[(n + i, i)] = -1.0;
            offset[n + i] = -lo[i];
        }
        Self::new(shape, offset)
    }

    pub fn shape(&self) -> &Matrix {
        &self.shape
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.shape.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.shape.nrows()
    }

    /// Origin strictly inside, which for this representation means `phi > 0`.
    pub fn origin_interior(&self) -> bool {
        self.offset.iter().all(|v| *v > 0.0)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, polyhedron {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.slack(x).iter().all(|s| *s >= -tol))
    }

    /// `phi - P x`, row by row.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_rows())
            .map(|i| self.offset[i] - (0..self.dim()).map(|j| self.shape[(i, j)] * x[j]).sum::<f64>())
            .collect()
    }

    /// Maximizes `dir' x` over the polyhedron.
    pub fn support(&self, dir: &[f64]) -> Result<Support> {
        let n = self.dim();
        if dir.len() != n {
            return Err(Error::DimensionMismatch("support direction".into()));
        }
        let mut lp = LpProblem::new(n);
        lp.cost = dir.iter().map(|d| -d).collect();
        lp.var_lower = vec![f64::NEG_INFINITY; n];
        lp.ineq_lhs = self.shape.clone();
        lp.ineq_rhs = self.offset.iter().copied().collect();
        let out = solve_lp(&lp, DEFAULT_FEAS_TOL)?;
        Ok(match out.status {
            LpStatus::Optimal => Support::Bounded {
                value: -out.objective.unwrap_or_default(),
                point: Vector::from_vec(out.solution.unwrap_or_default()),
            },
            LpStatus::Unbounded => Support::Unbounded,
            LpStatus::Infeasible => Support::Empty,
        })
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(matches!(self.support(&vec![0.0; self.dim()])?, Support::Empty))
    }

    /// Every coordinate direction has a finite maximum and minimum (2n LPs).
    /// Empty sets count as bounded.
    pub fn is_bounded(&self) -> Result<bool> {
        let n = self.dim();
        for k in 0..n {
            for sign in [1.0, -1.0] {
                let mut dir = vec![0.0; n];
                dir[k] = sign;
                match self.support(&dir)? {
                    Support::Unbounded => return Ok(false),
                    Support::Empty => return Ok(true),
                    Support::Bounded { .. } => {}
                }
            }
        }
        Ok(true)
    }

    /// Image-free scaling `{x : P x <= s phi}`.
    pub fn scaled(&self, s: f64) -> Self {
        Self { shape: self.shape.clone(), offset: &self.offset * s }
    }
}

/// Non-negative `Q` with `Q P_inner = P_outer` and `Q phi_inner <= phi_outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionWitness {
    pub q: Matrix,
}

impl InclusionWitness {
    /// Largest violation of the witness identities; zero for an exact witness.
    pub fn residual(&self, inner: &Polyhedron, outer: &Polyhedron) -> f64 {
        let eq = &self.q * inner.shape() - outer.shape();
        let off = &self.q * inner.offset() - outer.offset();
        let neg = self.q.iter().fold(0.0_f64, |a, v| a.max(-v));
        eq.iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(off.iter().fold(0.0_f64, |a, v| a.max(*v)))
            .max(neg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inclusion {
    Included(InclusionWitness),
    NotIncluded,
}

/// Decides `inner ⊆ outer` by searching for a Farkas witness matrix.
pub fn inclusion_witness(inner: &Polyhedron, outer: &Polyhedron, tol: f64) -> Result<Inclusion> {
    if inner.dim() != outer.dim() {
        return Err(Error::DimensionMismatch(format!(
            "inner has dimension {}, outer {}",
            inner.dim(),
            outer.dim()
        )));
    }
    if inner.is_empty()? {
        return Err(Error::EmptyInner);
    }
    let blocks = [Block { map: None, set: inner }];
    match witness_lp(&blocks, outer, tol)? {
        Some(mut qs) => Ok(Inclusion::Included(InclusionWitness { q: qs.remove(0) })),
        None => Ok(Inclusion::NotIncluded),
    }
}

/// Witness pair for `map_a · set_a ⊕ map_b · set_b ⊆ target`.
#[derive(Debug, Clone, PartialEq)]
pub enum MinkowskiInclusion {
    Included { q: Matrix, q_r: Matrix },
    NotIncluded,
}

/// Decides `map_a·set_a ⊕ map_b·set_b ⊆ target` through non-negative `(Q, Q_r)`
/// with `Q P_a = U map_a`, `Q_r P_b = U map_b` and `Q phi_a + Q_r phi_b <= phi_target`.
pub fn minkowski_inclusion(
    map_a: &Matrix,
    set_a: &Polyhedron,
    map_b: &Matrix,
    set_b: &Polyhedron,
    target: &Polyhedron,
    tol: f64,
) -> Result<MinkowskiInclusion> {
    for (map, set, name) in [(map_a, set_a, "a"), (map_b, set_b, "b")] {
        if map.ncols() != set.dim() || map.nrows() != target.dim() {
            return Err(Error::DimensionMismatch(format!(
                "map_{name} is {}x{}, expected {}x{}",
                map.nrows(),
                map.ncols(),
                target.dim(),
                set.dim()
            )));
        }
    }
    if set_a.is_empty()? || set_b.is_empty()? {
        return Err(Error::EmptyInner);
    }
    let blocks = [Block { map: Some(map_a), set: set_a }, Block { map: Some(map_b), set: set_b }];
    match witness_lp(&blocks, target, tol)? {
        Some(mut qs) => {
            let q_r = qs.pop().unwrap_or_else(|| DMatrix::zeros(0, 0));
            let q = qs.pop().unwrap_or_else(|| DMatrix::zeros(0, 0));
            Ok(MinkowskiInclusion::Included { q, q_r })
        }
        None => Ok(MinkowskiInclusion::NotIncluded),
    }
}

struct Block<'a> {
    map: Option<&'a Matrix>,
    set: &'a Polyhedron,
}

/// One LP over all witness blocks. Variables are the entries of each `Q_k`,
/// row-major, block after block; the objective is the total offset mass.
fn witness_lp(blocks: &[Block<'_>], target: &Polyhedron, tol: f64) -> Result<Option<Vec<Matrix>>> {
    let lt = target.num_rows();
    let sizes: Vec<usize> = blocks.iter().map(|b| b.set.num_rows()).collect();
    let starts: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, s| {
            let st = *acc;
            *acc += lt * s;
            Some(st)
        })
        .collect();
    let nvar: usize = sizes.iter().map(|s| lt * s).sum();

    let targets: Vec<Matrix> = blocks
        .iter()
        .map(|b| match b.map {
            Some(m) => target.shape() * m,
            None => target.shape().clone(),
        })
        .collect();
    let neq: usize = blocks.iter().map(|b| lt * b.set.dim()).sum();

    let mut lp = LpProblem::new(nvar);
    lp.eq_lhs = Matrix::zeros(neq, nvar);
    lp.eq_rhs = vec![0.0; neq];
    lp.ineq_lhs = Matrix::zeros(lt, nvar);
    lp.ineq_rhs = target.offset().iter().copied().collect();
    let mut row = 0;
    for (k, b) in blocks.iter().enumerate() {
        let p = b.set.shape();
        let phi = b.set.offset();
        let ls = sizes[k];
        for i in 0..lt {
            for c in 0..b.set.dim() {
                for j in 0..ls {
                    lp.eq_lhs[(row, starts[k] + i * ls + j)] = p[(j, c)];
                }
                lp.eq_rhs[row] = targets[k][(i, c)];
                row += 1;
            }
            for j in 0..ls {
                let v = starts[k] + i * ls + j;
                lp.ineq_lhs[(i, v)] = phi[j];
                lp.cost[v] = phi[j];
            }
        }
    }
    let out = solve_lp(&lp, DEFAULT_FEAS_TOL.min(tol))?;
    if out.status != LpStatus::Optimal {
        return Ok(None);
    }
    let x = out.solution.unwrap_or_default();
    Ok(Some(
        blocks
            .iter()
            .enumerate()
            .map(|(k, _)| {
                Matrix::from_fn(lt, sizes[k], |i, j| x[starts[k] + i * sizes[k] + j].max(0.0))
            })
            .collect(),
    ))
}

/// Off-diagonal entries all `>= -tol`.
pub fn is_metzler(m: &Matrix, tol: f64) -> Result<bool> {
    crate::numlin::ensure_square(m, "Metzler candidate")?;
    let n = m.nrows();
    Ok((0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] >= -tol)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_box(n: usize) -> Polyhedron {
        Polyhedron::from_box(&vec![-1.0; n], &vec![1.0; n]).unwrap()
    }

    #[test]
    fn box_membership() {
        let b = unit_box(2);
        assert!(b.contains(&[0.0, 0.0], 0.0).unwrap());
        assert!(!b.contains(&[2.0, 0.0], 1e-9).unwrap());
        assert!(b.contains(&[1.0 + 1e-10, 0.0], 1e-9).unwrap());
        assert!(b.contains(&[0.0], 0.0).is_err());
        assert!(b.origin_interior());
    }

    #[test]
    fn self_inclusion_has_identity_witness() {
        let b = unit_box(2);
        match inclusion_witness(&b, &b, 1e-9).unwrap() {
            Inclusion::Included(w) => {
                assert_abs_diff_eq!(w.q, Matrix::identity(4, 4), epsilon = 1e-9);
                assert!(w.residual(&b, &b) < 1e-9);
            }
            Inclusion::NotIncluded => panic!("P is included in itself"),
        }
    }

    #[test]
    fn scaled_box_inclusion() {
        let inner = unit_box(2);
        // outer box [-2, 2]^2 written with unit offsets
        let outer = Polyhedron::unit_offset(inner.shape() * 0.5).unwrap();
        match inclusion_witness(&inner, &outer, 1e-9).unwrap() {
            Inclusion::Included(w) => {
                assert_abs_diff_eq!(w.q, Matrix::identity(4, 4) * 0.5, epsilon = 1e-9);
            }
            Inclusion::NotIncluded => panic!("expected inclusion"),
        }
        assert_eq!(inclusion_witness(&outer, &inner, 1e-9).unwrap(), Inclusion::NotIncluded);
    }

    #[test]
    fn empty_inner_is_an_error() {
        let empty = Polyhedron::from_box(&[1.0], &[-1.0]).unwrap();
        assert_eq!(inclusion_witness(&empty, &unit_box(1), 1e-9), Err(Error::EmptyInner));
    }

    #[test]
    fn minkowski_of_intervals() {
        let (a, b) = (0.7, 1.8);
        let iv = unit_box(1);
        let target = Polyhedron::from_box(&[-(a + b)], &[a + b]).unwrap();
        let ma = Matrix::from_element(1, 1, a);
        let mb = Matrix::from_element(1, 1, b);
        match minkowski_inclusion(&ma, &iv, &mb, &iv, &target, 1e-9).unwrap() {
            MinkowskiInclusion::Included { q, q_r } => {
                let lhs = &q * iv.offset() + &q_r * iv.offset();
                assert_abs_diff_eq!(lhs[0], a + b, epsilon = 1e-9);
            }
            MinkowskiInclusion::NotIncluded => panic!("interval sum fits exactly"),
        }
        let tight = Polyhedron::from_box(&[-(a + b) * 0.99], &[(a + b) * 0.99]).unwrap();
        assert_eq!(
            minkowski_inclusion(&ma, &iv, &mb, &iv, &tight, 1e-9).unwrap(),
            MinkowskiInclusion::NotIncluded
        );
    }

    #[test]
    fn minkowski_degenerate_second_set() {
        // map_a = 0 and set_b = {0}: reduces to 0 ∈ target
        let set_b = Polyhedron::from_box(&[0.0], &[0.0]).unwrap();
        let target = unit_box(2);
        let ma = Matrix::zeros(2, 2);
        let mb = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        match minkowski_inclusion(&ma, &unit_box(2), &mb, &set_b, &target, 1e-9).unwrap() {
            MinkowskiInclusion::Included { q, q_r } => {
                assert!(crate::numlin::max_abs(&q) < 1e-12);
                assert!(q_r.iter().all(|v| *v >= 0.0));
                let off = &q_r * set_b.offset();
                assert!(off.iter().all(|v| v.abs() < 1e-12));
            }
            MinkowskiInclusion::NotIncluded => panic!("origin is in the target"),
        }
    }

    #[test]
    fn metzler_examples() {
        let m = Matrix::from_row_slice(2, 2, &[-5.0, 2.0, 0.1, -3.0]);
        assert!(is_metzler(&m, 1e-9).unwrap());
        let m = Matrix::from_row_slice(2, 2, &[0.0, -0.01, 0.0, 0.0]);
        assert!(!is_metzler(&m, 1e-9).unwrap());
        assert!(is_metzler(&Matrix::zeros(2, 3), 0.0).is_err());
    }

    #[test]
    fn boundedness() {
        assert!(unit_box(3).is_bounded().unwrap());
        let half = Polyhedron::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0]), Vector::from_vec(vec![1.0]))
            .unwrap();
        assert!(!half.is_bounded().unwrap());
    }
}
