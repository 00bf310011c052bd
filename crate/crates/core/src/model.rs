//! Plant, constraints, reference exosystem and the augmented closed loop.
//!
//! The controller is `u = K y + K_I1 x_I1 + K_I2 x_I2 + K_r r` with integral
//! states driven by `ẋ_I1 = r − y − α x_I2`, `ẋ_I2 = x_I1`, which embeds the
//! exosystem `r̈ + α r = 0` (a ramp generator for `α = 0`, an oscillator of
//! frequency `ω = √α` otherwise).

use crate::error::{Error, Result};
use crate::numlin::{ensure_finite, ensure_square, left_inverse, rank, Matrix, Vector, DEFAULT_RANK_TOL};
use crate::polyhedra::Polyhedron;

/// Relative tolerance of the Kalman rank tests.
pub const KALMAN_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    a: Matrix,
    b: Matrix,
    c: Matrix,
}

impl PlantModel {
    /// Validates shapes, a single output row, controllability of `(A, B)`
    /// and observability of `(C, A)`.
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        ensure_square(&a, "A")?;
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        let n = a.nrows();
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!("B must be {n}xm, got {}x{}", b.nrows(), b.ncols())));
        }
        if c.nrows() != 1 || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C must be a single 1x{n} output row, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        let mut ctrb = Matrix::zeros(n, n * b.ncols());
        let mut blk = b.clone();
        for k in 0..n {
            ctrb.columns_mut(k * b.ncols(), b.ncols()).copy_from(&blk);
            blk = &a * blk;
        }
        if rank(&ctrb, KALMAN_RANK_TOL) < n {
            return Err(Error::InvalidModel("(A, B) is not controllable".into()));
        }
        let mut obsv = Matrix::zeros(n, n);
        let mut row = c.clone();
        for k in 0..n {
            obsv.row_mut(k).copy_from(&row);
            row = &row * &a;
        }
        if rank(&obsv, KALMAN_RANK_TOL) < n {
            return Err(Error::InvalidModel("(C, A) is not observable".into()));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn n_cl(&self) -> usize {
        self.n() + 2
    }
}

/// `X x <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateConstraint {
    pub x_mat: Matrix,
}

impl StateConstraint {
    pub fn new(x_mat: Matrix) -> Result<Self> {
        ensure_finite(&x_mat, "X")?;
        if x_mat.nrows() == 0 || x_mat.ncols() == 0 {
            return Err(Error::DimensionMismatch("X must have at least one row".into()));
        }
        Ok(Self { x_mat })
    }

    /// Rows for `lo <= x <= hi` with `lo < 0 < hi` per coordinate.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        Ok(Self { x_mat: box_rows(lo, hi)? })
    }

    pub fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::unit_offset(self.x_mat.clone())
    }
}

/// `U u <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputConstraint {
    pub u_mat: Matrix,
}

impl InputConstraint {
    pub fn new(u_mat: Matrix) -> Result<Self> {
        ensure_finite(&u_mat, "U")?;
        if u_mat.nrows() == 0 || u_mat.ncols() == 0 {
            return Err(Error::DimensionMismatch("U must have at least one row".into()));
        }
        Ok(Self { u_mat })
    }

    /// `|u_i| <= bound_i` for every input.
    pub fn symmetric(bounds: &[f64]) -> Result<Self> {
        let lo: Vec<f64> = bounds.iter().map(|b| -b).collect();
        Ok(Self { u_mat: box_rows(&lo, bounds)? })
    }

    pub fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::unit_offset(self.u_mat.clone())
    }
}

fn box_rows(lo: &[f64], hi: &[f64]) -> Result<Matrix> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::DimensionMismatch("box bounds differ in length".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(*l < 0.0 && *h > 0.0)) {
        return Err(Error::InvalidModel("box must contain the origin strictly".into()));
    }
    let n = lo.len();
    let mut m = Matrix::zeros(2 * n, n);
    for i in 0..n {
        m[(2 * i, i)] = 1.0 / hi[i];
        m[(2 * i + 1, i)] = 1.0 / lo[i];
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    Ramp,
    Sinusoid { omega: f64 },
}

/// Exosystem `r̈ + α r = 0` with the admissible box `−ρ₂ <= r <= ρ₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceClass {
    pub kind: ReferenceKind,
    pub rho: [f64; 2],
}

impl ReferenceClass {
    pub fn new(kind: ReferenceKind, rho: [f64; 2]) -> Result<Self> {
        if let ReferenceKind::Sinusoid { omega } = kind {
            if !(omega.is_finite() && omega > 0.0) {
                return Err(Error::InvalidModel(format!("sinusoid frequency must be positive, got {omega}")));
            }
        }
        if !rho.iter().all(|r| r.is_finite() && *r > 0.0) {
            return Err(Error::InvalidModel(format!("rho must be positive, got {rho:?}")));
        }
        Ok(Self { kind, rho })
    }

    pub fn alpha(&self) -> f64 {
        alpha_of(self.kind)
    }

    /// `R = [1; −1]`.
    pub fn r_mat() -> Matrix {
        Matrix::from_column_slice(2, 1, &[1.0, -1.0])
    }

    pub fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::new(Self::r_mat(), Vector::from_column_slice(&self.rho))
    }
}

pub fn alpha_of(kind: ReferenceKind) -> f64 {
    match kind {
        ReferenceKind::Ramp => 0.0,
        ReferenceKind::Sinusoid { omega } => omega * omega,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k: Vector,
    pub k_i1: Vector,
    pub k_i2: Vector,
    pub k_r: Vector,
}

impl ControllerGains {
    pub fn zeros(m: usize) -> Self {
        Self { k: Vector::zeros(m), k_i1: Vector::zeros(m), k_i2: Vector::zeros(m), k_r: Vector::zeros(m) }
    }

    /// Single-input gains `(K, K_I1, K_I2, K_r)`.
    pub fn scalar(k: f64, k_i1: f64, k_i2: f64, k_r: f64) -> Self {
        let v = |x: f64| Vector::from_element(1, x);
        Self { k: v(k), k_i1: v(k_i1), k_i2: v(k_i2), k_r: v(k_r) }
    }

    pub fn m(&self) -> usize {
        self.k.len()
    }

    fn check(&self, m: usize) -> Result<()> {
        let parts = [&self.k, &self.k_i1, &self.k_i2, &self.k_r];
        if parts.iter().any(|g| g.len() != m) {
            return Err(Error::DimensionMismatch(format!("gains must all have length {m}")));
        }
        if parts.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("controller gains"));
        }
        Ok(())
    }
}

/// Positive scalars bounding the integral states:
/// `X_I11 x_I1 <= 1`, `−X_I21 x_I1 <= 1`, `X_I12 x_I2 <= 1`, `−X_I22 x_I2 <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralBounds {
    pub xi11: f64,
    pub xi21: f64,
    pub xi12: f64,
    pub xi22: f64,
}

impl IntegralBounds {
    pub fn new(xi11: f64, xi21: f64, xi12: f64, xi22: f64) -> Result<Self> {
        let s = Self { xi11, xi21, xi12, xi22 };
        if !s.as_array().iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidModel(format!("integral bounds must be positive, got {:?}", s.as_array())));
        }
        Ok(s)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.xi11, self.xi21, self.xi12, self.xi22]
    }

    /// The 4x2 block `[[X_I11, 0], [−X_I21, 0], [0, X_I12], [0, −X_I22]]`.
    pub fn matrix(&self) -> Matrix {
        Matrix::from_row_slice(4, 2, &[self.xi11, 0.0, -self.xi21, 0.0, 0.0, self.xi12, 0.0, -self.xi22])
    }

    pub fn sum(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_cl: Matrix,
    pub b_cl: Matrix,
}

impl ClosedLoop {
    pub fn n_cl(&self) -> usize {
        self.a_cl.nrows()
    }

    /// Reads the gains and `α` back out of the block structure.
    /// Needs `B` with full column rank.
    pub fn decompose(&self, plant: &PlantModel) -> Result<(ControllerGains, f64)> {
        let n = plant.n();
        if self.n_cl() != n + 2 {
            return Err(Error::DimensionMismatch("closed loop does not match plant".into()));
        }
        let b_pinv = left_inverse(plant.b(), DEFAULT_RANK_TOL)?;
        let bkc = self.a_cl.view((0, 0), (n, n)) - plant.a();
        // C is a single row, so K = B⁺ (BKC) Cᵀ / (C Cᵀ)
        let c = plant.c();
        let cc = (c * c.transpose())[(0, 0)];
        let k = &b_pinv * bkc * c.transpose() / cc;
        let col = |j: usize| Matrix::from(self.a_cl.view((0, j), (n, 1)));
        let k_i1 = &b_pinv * col(n);
        let k_i2 = &b_pinv * col(n + 1);
        let k_r = &b_pinv * Matrix::from(self.b_cl.view((0, 0), (n, 1)));
        let alpha = -self.a_cl[(n, n + 1)];
        let v = |m: Matrix| Vector::from_column_slice(m.as_slice());
        Ok((ControllerGains { k: v(k), k_i1: v(k_i1), k_i2: v(k_i2), k_r: v(k_r) }, alpha))
    }
}

/// `A_cl = [[A + BKC, BK_I1, BK_I2], [−C, 0, −α], [0, 1, 0]]`, `B_cl = [BK_r; 1; 0]`.
pub fn build_closed_loop(plant: &PlantModel, gains: &ControllerGains, alpha: f64) -> Result<ClosedLoop> {
    gains.check(plant.m())?;
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    let n = plant.n();
    let (a, b, c) = (plant.a(), plant.b(), plant.c());
    let mut a_cl = Matrix::zeros(n + 2, n + 2);
    a_cl.view_mut((0, 0), (n, n)).copy_from(&(a + b * &gains.k * c));
    a_cl.view_mut((0, n), (n, 1)).copy_from(&(b * &gains.k_i1));
    a_cl.view_mut((0, n + 1), (n, 1)).copy_from(&(b * &gains.k_i2));
    for j in 0..n {
        a_cl[(n, j)] = -c[(0, j)];
    }
    a_cl[(n, n + 1)] = -alpha;
    a_cl[(n + 1, n)] = 1.0;
    let mut b_cl = Matrix::zeros(n + 2, 1);
    b_cl.view_mut((0, 0), (n, 1)).copy_from(&(b * &gains.k_r));
    b_cl[(n, 0)] = 1.0;
    Ok(ClosedLoop { a_cl, b_cl })
}

/// True iff `[A − σI, B; C, 0]` has rank `n + 1` at every root of `σ² + α = 0`.
/// Complex pencils are tested through the real embedding `[[Re, −Im], [Im, Re]]`.
pub fn transmission_zero_check(plant: &PlantModel, kind: ReferenceKind, tol: f64) -> bool {
    let n = plant.n();
    let m = plant.m();
    let pencil = |shift: f64| {
        let mut p = Matrix::zeros(n + 1, n + m);
        p.view_mut((0, 0), (n, n)).copy_from(&(plant.a() - Matrix::identity(n, n) * shift));
        p.view_mut((0, n), (n, m)).copy_from(plant.b());
        p.view_mut((n, 0), (1, n)).copy_from(plant.c());
        p
    };
    match kind {
        ReferenceKind::Ramp => rank(&pencil(0.0), tol) == n + 1,
        ReferenceKind::Sinusoid { omega } => [omega, -omega].iter().all(|w| {
            let re = pencil(0.0);
            let mut im = Matrix::zeros(n + 1, n + m);
            for i in 0..n {
                im[(i, i)] = -w;
            }
            let mut big = Matrix::zeros(2 * (n + 1), 2 * (n + m));
            big.view_mut((0, 0), (n + 1, n + m)).copy_from(&re);
            big.view_mut((0, n + m), (n + 1, n + m)).copy_from(&(-&im));
            big.view_mut((n + 1, 0), (n + 1, n + m)).copy_from(&im);
            big.view_mut((n + 1, n + m), (n + 1, n + m)).copy_from(&re);
            rank(&big, tol) == 2 * (n + 1)
        }),
    }
}

/// `X_cl = diag(X, X_I)` with unit offsets.
pub fn stack_state_constraints(xc: &StateConstraint, xi: &IntegralBounds) -> Result<Polyhedron> {
    let (lx, n) = xc.x_mat.shape();
    let mut x_cl = Matrix::zeros(lx + 4, n + 2);
    x_cl.view_mut((0, 0), (lx, n)).copy_from(&xc.x_mat);
    x_cl.view_mut((lx, n), (4, 2)).copy_from(&xi.matrix());
    Polyhedron::unit_offset(x_cl)
}

/// `[KC, K_I1, K_I2, K_r]`, the linear map from `(x_cl, r)` to `u`.
pub fn input_constraint_map(gains: &ControllerGains, plant: &PlantModel) -> Result<Matrix> {
    gains.check(plant.m())?;
    let n = plant.n();
    let m = plant.m();
    let mut out = Matrix::zeros(m, n + 3);
    out.view_mut((0, 0), (m, n)).copy_from(&(&gains.k * plant.c()));
    out.set_column(n, &gains.k_i1);
    out.set_column(n + 1, &gains.k_i2);
    out.set_column(n + 2, &gains.k_r);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub l_r: usize,
    pub l_x: usize,
    pub l_xi1: usize,
    pub l_xi2: usize,
    pub l_u: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProblemSize {
    pub variables: usize,
    pub equalities: usize,
    pub inequalities: usize,
}

/// Size of the bilinear design program.
pub fn problem_size(d: &ProblemDims) -> ProblemSize {
    let n_cl = d.n + 2;
    ProblemSize {
        variables: d.m
            + d.l * (n_cl + d.l + d.l_r + d.l_x + d.l_xi1 + d.l_xi2 + d.l_u)
            + 2 * (d.l_u + 2)
            + n_cl * n_cl
            + 1,
        equalities: n_cl * (d.l + d.l_x + d.l_xi1 + d.l_xi2 + d.l_u + n_cl) + 2 * (d.l + d.l_u),
        inequalities: d.l + d.l_x + d.l_xi1 + d.l_xi2 + d.l_u,
    }
}
