//! The certificate relations written as scalar rows over one flat variable
//! vector. Each row is `constant + Σ aᵢ zᵢ + Σ bᵢⱼ zᵢ zⱼ` and is either an
//! equality (`= 0`) or an upper bound (`<= 0`). Fixing a subset of
//! variables, or linearizing the remaining products around a point, turns
//! the system into an LP.

use crate::error::{Error, Result};
use crate::model::{InputConstraint, PlantModel, StateConstraint};
use crate::numlin::{solve_lp, LpProblem, LpStatus, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    K,
    KI1,
    KI2,
    KR,
    L,
    H,
    HR,
    T,
    Q,
    QR,
    Rho,
    Xi,
    Gamma,
}

pub const GROUPS: [Group; 13] = [
    Group::K,
    Group::KI1,
    Group::KI2,
    Group::KR,
    Group::L,
    Group::H,
    Group::HR,
    Group::T,
    Group::Q,
    Group::QR,
    Group::Rho,
    Group::Xi,
    Group::Gamma,
];

/// Element-wise bounds for every variable group.
#[derive(Debug, Clone, PartialEq)]
pub struct VarBox {
    pub gains: (f64, f64),
    pub geometry: (f64, f64),
    pub h_diag: (f64, f64),
    pub multipliers: (f64, f64),
    pub v: (f64, f64),
    pub rho: (f64, f64),
    pub xi: (f64, f64),
    pub gamma: (f64, f64),
}

impl Default for VarBox {
    fn default() -> Self {
        Self {
            gains: (-100.0, 100.0),
            geometry: (-100.0, 100.0),
            h_diag: (-100.0, 100.0),
            multipliers: (0.0, 100.0),
            v: (-1000.0, 1000.0),
            rho: (1e-4, 100.0),
            xi: (1e-3, 0.1),
            gamma: (1e-6, 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub lx: usize,
    pub lu: usize,
    starts: [usize; 13],
    shapes: [(usize, usize); 13],
    pub total: usize,
}

impl Layout {
    pub fn new(n: usize, m: usize, l: usize, lx: usize, lu: usize) -> Self {
        let n_cl = n + 2;
        let shapes = [
            (m, 1),
            (m, 1),
            (m, 1),
            (m, 1),
            (l, n_cl),
            (l, l),
            (l, 2),
            (lx + 4, l),
            (lu, l),
            (lu, 2),
            (2, 1),
            (4, 1),
            (1, 1),
        ];
        let mut starts = [0; 13];
        let mut acc = 0;
        for (k, (r, c)) in shapes.iter().enumerate() {
            starts[k] = acc;
            acc += r * c;
        }
        Self { n, m, l, lx, lu, starts, shapes, total: acc }
    }

    fn slot(g: Group) -> usize {
        GROUPS.iter().position(|x| *x == g).unwrap_or(0)
    }

    pub fn idx(&self, g: Group, i: usize, j: usize) -> usize {
        let k = Self::slot(g);
        debug_assert!(i < self.shapes[k].0 && j < self.shapes[k].1);
        self.starts[k] + i * self.shapes[k].1 + j
    }

    pub fn range(&self, g: Group) -> std::ops::Range<usize> {
        let k = Self::slot(g);
        self.starts[k]..self.starts[k] + self.shapes[k].0 * self.shapes[k].1
    }

    pub fn shape(&self, g: Group) -> (usize, usize) {
        self.shapes[Self::slot(g)]
    }

    pub fn get(&self, z: &[f64], g: Group) -> Matrix {
        let (r, c) = self.shape(g);
        Matrix::from_row_slice(r, c, &z[self.range(g)])
    }

    pub fn set(&self, z: &mut [f64], g: Group, m: &Matrix) {
        let (r, c) = self.shape(g);
        debug_assert_eq!(m.shape(), (r, c));
        for i in 0..r {
            for j in 0..c {
                z[self.idx(g, i, j)] = m[(i, j)];
            }
        }
    }

    pub fn mask(&self, groups: &[Group]) -> Vec<bool> {
        let mut out = vec![false; self.total];
        for g in groups {
            out[self.range(*g)].iter_mut().for_each(|b| *b = true);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sense: Sense,
    pub constant: f64,
    pub lin: Vec<(usize, f64)>,
    pub bil: Vec<(usize, usize, f64)>,
}

impl Row {
    fn new(sense: Sense) -> Self {
        Self { sense, constant: 0.0, lin: Vec::new(), bil: Vec::new() }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.constant
            + self.lin.iter().map(|(i, a)| a * z[*i]).sum::<f64>()
            + self.bil.iter().map(|(i, j, b)| b * z[*i] * z[*j]).sum::<f64>()
    }

    /// Equality residual magnitude, or positive part of an upper bound.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let v = self.value(z);
        match self.sense {
            Sense::Eq => v.abs(),
            Sense::Le => v.max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub layout: Layout,
    pub rows: Vec<Row>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// One affine row over the full variable vector: `coef · z + constant`.
pub struct LinearRow {
    pub sense: Sense,
    pub coef: Vec<(usize, f64)>,
    pub constant: f64,
}

impl System {
    pub fn build(
        plant: &PlantModel,
        xc: &StateConstraint,
        uc: &InputConstraint,
        alpha: f64,
        l: usize,
        bounds: &VarBox,
    ) -> Result<Self> {
        let (n, m) = (plant.n(), plant.m());
        let (x, u) = (&xc.x_mat, &uc.u_mat);
        if x.ncols() != n || u.ncols() != m {
            return Err(Error::DimensionMismatch("constraint matrices do not match the plant".into()));
        }
        let (lx, lu) = (x.nrows(), u.nrows());
        let lay = Layout::new(n, m, l, lx, lu);
        let (a, b, c) = (plant.a(), plant.b(), plant.c());
        let idx = |g, i, j| lay.idx(g, i, j);
        let (ci1, ci2) = (n, n + 1);
        let mut rows = Vec::new();

        // invariance: H L_cl against the closed-loop flow, row block by row block
        for i in 0..l {
            for j in 0..n {
                let mut r = Row::new(Sense::Eq);
                for k in 0..l {
                    r.bil.push((idx(Group::H, i, k), idx(Group::L, k, j), 1.0));
                }
                for k in 0..n {
                    r.lin.push((idx(Group::L, i, k), -a[(k, j)]));
                    for q in 0..m {
                        r.bil.push((idx(Group::L, i, k), idx(Group::K, q, 0), -b[(k, q)] * c[(0, j)]));
                    }
                }
                r.lin.push((idx(Group::L, i, ci1), c[(0, j)]));
                rows.push(r);
            }
            for (col, gain, other, other_coef) in
                [(ci1, Group::KI1, ci2, -1.0), (ci2, Group::KI2, ci1, alpha)]
            {
                let mut r = Row::new(Sense::Eq);
                for k in 0..l {
                    r.bil.push((idx(Group::H, i, k), idx(Group::L, k, col), 1.0));
                }
                for k in 0..n {
                    for q in 0..m {
                        r.bil.push((idx(Group::L, i, k), idx(gain, q, 0), -b[(k, q)]));
                    }
                }
                r.lin.push((idx(Group::L, i, other), other_coef));
                rows.push(r);
            }
            let mut r = Row::new(Sense::Eq);
            r.lin.push((idx(Group::HR, i, 0), 1.0));
            r.lin.push((idx(Group::HR, i, 1), -1.0));
            for k in 0..n {
                for q in 0..m {
                    r.bil.push((idx(Group::L, i, k), idx(Group::KR, q, 0), -b[(k, q)]));
                }
            }
            r.lin.push((idx(Group::L, i, ci1), -1.0));
            rows.push(r);

            let mut r = Row::new(Sense::Le);
            for k in 0..l {
                r.lin.push((idx(Group::H, i, k), 1.0));
            }
            for s in 0..2 {
                r.bil.push((idx(Group::HR, i, s), idx(Group::Rho, s, 0), 1.0));
            }
            r.lin.push((idx(Group::Gamma, 0, 0), 1.0));
            rows.push(r);
        }

        // state inclusion T L_cl = diag(X, X_I), T 1 <= 1
        for i in 0..lx + 4 {
            for j in 0..n + 2 {
                let mut r = Row::new(Sense::Eq);
                for k in 0..l {
                    r.bil.push((idx(Group::T, i, k), idx(Group::L, k, j), 1.0));
                }
                if i < lx {
                    if j < n {
                        r.constant = -x[(i, j)];
                    }
                } else {
                    let s = i - lx;
                    let col = if s < 2 { ci1 } else { ci2 };
                    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                    if j == col {
                        r.lin.push((idx(Group::Xi, s, 0), -sign));
                    }
                }
                rows.push(r);
            }
            let mut r = Row::new(Sense::Le);
            for k in 0..l {
                r.lin.push((idx(Group::T, i, k), 1.0));
            }
            r.constant = -1.0;
            rows.push(r);
        }

        // input inclusion Q L_cl = U [KC, K_I1, K_I2], Q_r R = U K_r, Q 1 + Q_r ρ <= 1
        for i in 0..lu {
            for j in 0..n + 2 {
                let mut r = Row::new(Sense::Eq);
                for k in 0..l {
                    r.bil.push((idx(Group::Q, i, k), idx(Group::L, k, j), 1.0));
                }
                for q in 0..m {
                    if j < n {
                        r.lin.push((idx(Group::K, q, 0), -u[(i, q)] * c[(0, j)]));
                    } else {
                        let g = if j == ci1 { Group::KI1 } else { Group::KI2 };
                        r.lin.push((idx(g, q, 0), -u[(i, q)]));
                    }
                }
                rows.push(r);
            }
            let mut r = Row::new(Sense::Eq);
            r.lin.push((idx(Group::QR, i, 0), 1.0));
            r.lin.push((idx(Group::QR, i, 1), -1.0));
            for q in 0..m {
                r.lin.push((idx(Group::KR, q, 0), -u[(i, q)]));
            }
            rows.push(r);
            let mut r = Row::new(Sense::Le);
            for k in 0..l {
                r.lin.push((idx(Group::Q, i, k), 1.0));
            }
            for s in 0..2 {
                r.bil.push((idx(Group::QR, i, s), idx(Group::Rho, s, 0), 1.0));
            }
            r.constant = -1.0;
            rows.push(r);
        }

        let mut lower = vec![0.0; lay.total];
        let mut upper = vec![0.0; lay.total];
        let mut put = |g: Group, (lo, hi): (f64, f64)| {
            for v in lay.range(g) {
                lower[v] = lo;
                upper[v] = hi;
            }
        };
        for g in [Group::K, Group::KI1, Group::KI2, Group::KR] {
            put(g, bounds.gains);
        }
        put(Group::L, bounds.geometry);
        for g in [Group::H, Group::HR, Group::T, Group::Q, Group::QR] {
            put(g, bounds.multipliers);
        }
        put(Group::Rho, bounds.rho);
        put(Group::Xi, bounds.xi);
        put(Group::Gamma, bounds.gamma);
        for i in 0..l {
            let d = lay.idx(Group::H, i, i);
            lower[d] = bounds.h_diag.0;
            upper[d] = bounds.h_diag.1;
        }
        Ok(Self { layout: lay, rows, lower, upper })
    }

    /// Largest equality residual and largest inequality excess at `z`.
    pub fn residuals(&self, z: &[f64]) -> (f64, f64) {
        let mut eq = 0.0_f64;
        let mut le = 0.0_f64;
        for r in &self.rows {
            match r.sense {
                Sense::Eq => eq = eq.max(r.violation(z)),
                Sense::Le => le = le.max(r.violation(z)),
            }
        }
        (eq, le)
    }

    /// Affine rows around `z`: variables with `free[i] == false` are frozen at
    /// `z[i]`, products of two free variables are replaced by their tangent plane.
    pub fn linearize(&self, z: &[f64], free: &[bool]) -> Vec<LinearRow> {
        self.rows
            .iter()
            .map(|r| {
                let mut constant = r.constant;
                let mut coef: Vec<(usize, f64)> = Vec::with_capacity(r.lin.len() + 2 * r.bil.len());
                for &(i, a) in &r.lin {
                    if free[i] {
                        coef.push((i, a));
                    } else {
                        constant += a * z[i];
                    }
                }
                for &(i, j, b) in &r.bil {
                    match (free[i], free[j]) {
                        (false, false) => constant += b * z[i] * z[j],
                        (false, true) => coef.push((j, b * z[i])),
                        (true, false) => coef.push((i, b * z[j])),
                        (true, true) => {
                            coef.push((i, b * z[j]));
                            coef.push((j, b * z[i]));
                            constant -= b * z[i] * z[j];
                        }
                    }
                }
                LinearRow { sense: r.sense, coef, constant }
            })
            .collect()
    }

    /// Solves the LP obtained from [`System::linearize`] with the given cost
    /// over the free variables and per-variable bounds. Returns the updated
    /// full vector, or `None` when the LP is infeasible or unbounded.
    pub fn solve_linearized(
        &self,
        z: &[f64],
        free: &[bool],
        cost: &[f64],
        lower: &[f64],
        upper: &[f64],
        feas_tol: f64,
    ) -> Result<Option<Vec<f64>>> {
        let cols: Vec<usize> = (0..z.len()).filter(|i| free[*i]).collect();
        let mut col_of = vec![usize::MAX; z.len()];
        for (c, &v) in cols.iter().enumerate() {
            col_of[v] = c;
        }
        let lin = self.linearize(z, free);
        let n_eq = lin.iter().filter(|r| r.sense == Sense::Eq).count();
        let n_le = lin.len() - n_eq;
        let mut lp = LpProblem::new(cols.len());
        lp.eq_lhs = Matrix::zeros(n_eq, cols.len());
        lp.eq_rhs = vec![0.0; n_eq];
        lp.ineq_lhs = Matrix::zeros(n_le, cols.len());
        lp.ineq_rhs = vec![0.0; n_le];
        let (mut ie, mut iu) = (0, 0);
        for r in &lin {
            let (mat, rhs, k) = match r.sense {
                Sense::Eq => (&mut lp.eq_lhs, &mut lp.eq_rhs, &mut ie),
                Sense::Le => (&mut lp.ineq_lhs, &mut lp.ineq_rhs, &mut iu),
            };
            for &(v, a) in &r.coef {
                mat[(*k, col_of[v])] += a;
            }
            rhs[*k] = -r.constant;
            *k += 1;
        }
        for (c, &v) in cols.iter().enumerate() {
            lp.cost[c] = cost[v];
            lp.var_lower[c] = lower[v];
            lp.var_upper[c] = upper[v];
        }
        let out = solve_lp(&lp, feas_tol)?;
        if out.status != LpStatus::Optimal {
            return Ok(None);
        }
        let x = out.solution.unwrap_or_default();
        let mut znew = z.to_vec();
        for (c, &v) in cols.iter().enumerate() {
            znew[v] = x[c];
        }
        Ok(Some(znew))
    }

    /// Minimum weighted ℓ1 move from `z` that satisfies the linearization at
    /// `z`, with the variables outside `free` frozen. Each free variable is
    /// split into `z + d⁺ − d⁻` so the box stays a pair of simple bounds.
    pub fn project_linearized(
        &self,
        z: &[f64],
        free: &[bool],
        lower: &[f64],
        upper: &[f64],
        feas_tol: f64,
    ) -> Result<Option<Vec<f64>>> {
        let cols: Vec<usize> = (0..z.len()).filter(|i| free[*i]).collect();
        let nf = cols.len();
        let mut col_of = vec![usize::MAX; z.len()];
        for (c, &v) in cols.iter().enumerate() {
            col_of[v] = c;
        }
        let lin = self.linearize(z, free);
        let n_eq = lin.iter().filter(|r| r.sense == Sense::Eq).count();
        let n_le = lin.len() - n_eq;
        let mut lp = LpProblem::new(2 * nf);
        lp.eq_lhs = Matrix::zeros(n_eq, 2 * nf);
        lp.eq_rhs = vec![0.0; n_eq];
        lp.ineq_lhs = Matrix::zeros(n_le, 2 * nf);
        lp.ineq_rhs = vec![0.0; n_le];
        let (mut ie, mut iu) = (0, 0);
        for r in &lin {
            let (mat, rhs, k) = match r.sense {
                Sense::Eq => (&mut lp.eq_lhs, &mut lp.eq_rhs, &mut ie),
                Sense::Le => (&mut lp.ineq_lhs, &mut lp.ineq_rhs, &mut iu),
            };
            // a·(z + d⁺ − d⁻) + constant
            let mut at_z = r.constant;
            for &(v, a) in &r.coef {
                let c = col_of[v];
                mat[(*k, c)] += a;
                mat[(*k, nf + c)] -= a;
                at_z += a * z[v];
            }
            rhs[*k] = -at_z;
            *k += 1;
        }
        for (c, &v) in cols.iter().enumerate() {
            let w = 1.0 / z[v].abs().max(1.0);
            lp.cost[c] = w;
            lp.cost[nf + c] = w;
            lp.var_lower[c] = 0.0;
            lp.var_upper[c] = (upper[v] - z[v]).max(0.0);
            lp.var_lower[nf + c] = 0.0;
            lp.var_upper[nf + c] = (z[v] - lower[v]).max(0.0);
        }
        let out = solve_lp(&lp, feas_tol)?;
        if out.status != LpStatus::Optimal {
            return Ok(None);
        }
        let x = out.solution.unwrap_or_default();
        let mut znew = z.to_vec();
        for (c, &v) in cols.iter().enumerate() {
            znew[v] = (z[v] + x[c] - x[nf + c]).clamp(lower[v], upper[v]);
        }
        Ok(Some(znew))
    }
}
