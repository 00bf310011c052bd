//! Dense two-phase primal simplex with bounded variables.
//!
//! The problem is taken in the form
//!
//! ```text
//! minimize    c'x
//! subject to  A_eq x  = b_eq
//!             A_ub x <= b_ub
//!             lower <= x <= upper      (infinite bounds allowed)
//! ```
//!
//! Inequalities receive a slack column, every row gets an artificial column,
//! and phase 1 minimizes the artificial mass. Nonbasic variables sit at one of
//! their bounds (free variables at zero), so no extra rows are spent on bounds.
//! Pricing is Dantzig's rule; after a streak of degenerate pivots the solver
//! falls back to Bland's rule until a pivot makes progress again.
//!
//! Rows and columns are equilibrated before the tableau is built. The Harris
//! ratio test and the final feasibility repair work with per-column
//! tolerances derived from the caller's `feas_tol` in the original units, so
//! the returned point is checked against the unscaled problem.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default primal feasibility tolerance for [`solve_lp`].
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
/// Share of the caller's feasibility tolerance the ratio test may spend.
const HARRIS_SHARE: f64 = 0.01;
const REPAIR_ROUNDS: usize = 4;
const REFINE_SWEEPS: usize = 2;
/// Multiple of the per-column tolerance tolerated before a repair starts.
const REPAIR_SLACK: f64 = 10.0;
const DEGENERATE_STREAK: usize = 30;
const REFACTOR_EVERY: usize = 100;
/// Entries below this fraction of their row's largest entry are ignored
/// when choosing scale factors.
const NEGLIGIBLE: f64 = 1e-13;
const SCALE_PASSES: usize = 4;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub eq_lhs: DMatrix<f64>,
    pub eq_rhs: Vec<f64>,
    pub ineq_lhs: DMatrix<f64>,
    pub ineq_rhs: Vec<f64>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
}

impl LpProblem {
    /// A problem with `n` variables, no constraints and `[0, +inf)` bounds.
    pub fn new(n: usize) -> Self {
        Self {
            cost: vec![0.0; n],
            eq_lhs: DMatrix::zeros(0, n),
            eq_rhs: Vec::new(),
            ineq_lhs: DMatrix::zeros(0, n),
            ineq_rhs: Vec::new(),
            var_lower: vec![0.0; n],
            var_upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.cost.len();
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.eq_lhs.ncols() != n || self.ineq_lhs.ncols() != n {
            return bad("constraint column count differs from cost length");
        }
        if self.eq_lhs.nrows() != self.eq_rhs.len() {
            return bad("equality rows and rhs length differ");
        }
        if self.ineq_lhs.nrows() != self.ineq_rhs.len() {
            return bad("inequality rows and rhs length differ");
        }
        if self.var_lower.len() != n || self.var_upper.len() != n {
            return bad("bound vectors differ from cost length");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.cost)
            || !finite(&self.eq_rhs)
            || !finite(&self.ineq_rhs)
            || !finite(self.eq_lhs.as_slice())
            || !finite(self.ineq_lhs.as_slice())
        {
            return Err(Error::NonFinite("linear program data"));
        }
        for (lo, hi) in self.var_lower.iter().zip(&self.var_upper) {
            if lo.is_nan() || hi.is_nan() || lo > hi || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY
            {
                return bad("variable lower bound exceeds upper bound");
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.eq_lhs.nrows() {
            let lhs: f64 = (0..x.len()).map(|j| self.eq_lhs[(i, j)] * x[j]).sum();
            worst = worst.max((lhs - self.eq_rhs[i]).abs());
        }
        for i in 0..self.ineq_lhs.nrows() {
            let lhs: f64 = (0..x.len()).map(|j| self.ineq_lhs[(i, j)] * x[j]).sum();
            worst = worst.max(lhs - self.ineq_rhs[i]);
        }
        for (j, xj) in x.iter().enumerate() {
            worst = worst.max(self.var_lower[j] - xj).max(xj - self.var_upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective: Option<f64>,
}

impl LpOutcome {
    fn status_only(status: LpStatus) -> Self {
        Self { status, solution: None, objective: None }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `p` to optimality, or certifies infeasibility / unboundedness.
pub fn solve_lp(p: &LpProblem, feas_tol: f64) -> Result<LpOutcome> {
    p.validate()?;
    let (sp, row_scale, col_scale) = equilibrate(p);
    let out = solve_scaled(&sp, &row_scale, &col_scale, feas_tol)?;
    let Some(xs) = out.solution else {
        return Ok(out);
    };
    let mut x: Vec<f64> = xs.iter().zip(&col_scale).map(|(v, d)| v * d).collect();
    for (j, xj) in x.iter_mut().enumerate() {
        *xj = xj.clamp(p.var_lower[j], p.var_upper[j]);
    }
    let viol = p.max_violation(&x);
    if viol > feas_tol {
        return Err(Error::NumericalBreakdown(format!(
            "optimal basis violates constraints by {viol:.3e}"
        )));
    }
    let objective = p.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpOutcome { status: LpStatus::Optimal, solution: Some(x), objective: Some(objective) })
}

/// Geometric-mean row and column equilibration. Returns the scaled problem,
/// the row factors and the column factors `d` with `x = d ∘ x_scaled`.
/// Entries negligible against the largest entry of their row stay in the
/// matrix but do not steer the scaling.
fn equilibrate(p: &LpProblem) -> (LpProblem, Vec<f64>, Vec<f64>) {
    let n = p.num_vars();
    let mut a = DMatrix::zeros(p.eq_lhs.nrows() + p.ineq_lhs.nrows(), n);
    a.rows_mut(0, p.eq_lhs.nrows()).copy_from(&p.eq_lhs);
    a.rows_mut(p.eq_lhs.nrows(), p.ineq_lhs.nrows()).copy_from(&p.ineq_lhs);
    let m = a.nrows();
    let row_max: Vec<f64> = (0..m).map(|i| a.row(i).amax()).collect();
    let counts = DMatrix::from_fn(m, n, |i, j| a[(i, j)].abs() > NEGLIGIBLE * row_max[i]);
    let mut r = vec![1.0; m];
    let mut d = vec![1.0; n];
    let spread = |it: &mut dyn Iterator<Item = (f64, bool)>| {
        let (lo, hi) = it.filter(|v| v.1).fold((f64::INFINITY, 0.0_f64), |(lo, hi), (v, _)| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
        if hi > 0.0 { 1.0 / (lo * hi).sqrt() } else { 1.0 }
    };
    for _ in 0..SCALE_PASSES {
        for i in 0..m {
            let ri = spread(&mut a.row(i).iter().copied().zip(counts.row(i).iter().copied()));
            r[i] *= ri;
            a.row_mut(i).scale_mut(ri);
        }
        for j in 0..n {
            let dj = spread(&mut a.column(j).iter().copied().zip(counts.column(j).iter().copied()));
            d[j] *= dj;
            a.column_mut(j).scale_mut(dj);
        }
    }
    let mut q = LpProblem::new(n);
    let me = p.eq_lhs.nrows();
    q.eq_lhs = a.rows(0, me).into_owned();
    q.ineq_lhs = a.rows(me, m - me).into_owned();
    q.eq_rhs = (0..me).map(|i| p.eq_rhs[i] * r[i]).collect();
    q.ineq_rhs = (0..m - me).map(|i| p.ineq_rhs[i] * r[me + i]).collect();
    q.cost = p.cost.iter().zip(&d).map(|(c, dj)| c * dj).collect();
    q.var_lower = p.var_lower.iter().zip(&d).map(|(v, dj)| v / dj).collect();
    q.var_upper = p.var_upper.iter().zip(&d).map(|(v, dj)| v / dj).collect();
    (q, r, d)
}

fn solve_scaled(p: &LpProblem, row_scale: &[f64], col_scale: &[f64], feas_tol: f64) -> Result<LpOutcome> {
    let mut tab = Tableau::new(p, row_scale, col_scale, feas_tol);
    let scale = 1.0 + tab.rhs.iter().fold(0.0_f64, |a, b| a.max(b.abs()));

    // phase 1
    let mut c1 = vec![0.0; tab.ncols];
    for c in c1.iter_mut().skip(tab.art_start) {
        *c = 1.0;
    }
    tab.set_cost(c1);
    match tab.run(false, false)? {
        Phase::Optimal => {}
        Phase::Unbounded => {
            return Err(Error::NumericalBreakdown("phase 1 reported unbounded".into()))
        }
    }
    let infeas: f64 = (tab.art_start..tab.ncols).map(|j| tab.x[j].abs()).sum();
    if infeas > feas_tol.max(1e-10) * scale {
        return Ok(LpOutcome::status_only(LpStatus::Infeasible));
    }
    tab.evict_artificials()?;

    // phase 2
    let cmax = p.cost.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    let cscale = if cmax > 0.0 { 1.0 / cmax } else { 1.0 };
    let mut c2 = vec![0.0; tab.ncols];
    for (j, c) in p.cost.iter().enumerate() {
        c2[j] = c * cscale;
    }
    for round in 0..=REPAIR_ROUNDS {
        tab.set_cost(c2.clone());
        match tab.run(true, false)? {
            Phase::Optimal => {}
            Phase::Unbounded => return Ok(LpOutcome::status_only(LpStatus::Unbounded)),
        }
        tab.refactor()?;
        // rounding can leave basics just outside their bounds; walk them back
        // in and reoptimize from there
        if round == REPAIR_ROUNDS || tab.infeasible_basics().is_empty() {
            break;
        }
        tab.repair()?;
    }

    let n = p.num_vars();
    let x: Vec<f64> = tab.x[..n].to_vec();
    Ok(LpOutcome { status: LpStatus::Optimal, solution: Some(x), objective: None })
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    art_start: usize,
    /// scaled constraint matrix `[A | S | Art]`, row-major, kept for refactoring
    a: Vec<f64>,
    rhs: Vec<f64>,
    /// current `B^-1 [A | S | Art]`, row-major
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<Option<usize>>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    since_refactor: usize,
    /// per-column bound slack, the caller's tolerance in original units
    tol: Vec<f64>,
}

impl Tableau {
    fn new(p: &LpProblem, row_scale: &[f64], col_scale: &[f64], feas_tol: f64) -> Self {
        let n = p.num_vars();
        let me = p.eq_lhs.nrows();
        let mu = p.ineq_lhs.nrows();
        let m = me + mu;
        let art_start = n + mu;
        let ncols = art_start + m;

        let mut a = vec![0.0; m * ncols];
        let mut rhs = vec![0.0; m];
        let share = HARRIS_SHARE * feas_tol;
        let mut tol = vec![0.0; ncols];
        for j in 0..n {
            // clamping x_j must neither break its bound nor move any row by
            // more than `share` in original units
            let big = (0..me)
                .map(|i| p.eq_lhs[(i, j)].abs() / row_scale[i])
                .chain((0..mu).map(|i| p.ineq_lhs[(i, j)].abs() / row_scale[me + i]))
                .fold(1.0 / col_scale[j], f64::max);
            tol[j] = share / big;
        }
        for i in 0..m {
            let (row, b): (Vec<f64>, f64) = if i < me {
                ((0..n).map(|j| p.eq_lhs[(i, j)]).collect(), p.eq_rhs[i])
            } else {
                ((0..n).map(|j| p.ineq_lhs[(i - me, j)]).collect(), p.ineq_rhs[i - me])
            };
            let s = row.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let s = if s > 0.0 { 1.0 / s } else { 1.0 };
            for j in 0..n {
                a[i * ncols + j] = row[j] * s;
            }
            if i >= me {
                a[i * ncols + n + (i - me)] = s;
                tol[n + (i - me)] = share * row_scale[i];
            }
            tol[art_start + i] = share * row_scale[i] * s;
            rhs[i] = b * s;
        }

        let mut lower = vec![0.0; ncols];
        let mut upper = vec![f64::INFINITY; ncols];
        lower[..n].copy_from_slice(&p.var_lower);
        upper[..n].copy_from_slice(&p.var_upper);

        let mut x = vec![0.0; ncols];
        for j in 0..n {
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }

        let mut basis = vec![0; m];
        let mut row_of = vec![None; ncols];
        for i in 0..m {
            let resid = rhs[i] - (0..n).map(|j| a[i * ncols + j] * x[j]).sum::<f64>();
            let art = art_start + i;
            if i >= me && resid >= 0.0 {
                let slack = n + (i - me);
                basis[i] = slack;
                x[slack] = resid / a[i * ncols + slack];
                upper[art] = 0.0;
            } else {
                a[i * ncols + art] = if resid >= 0.0 { 1.0 } else { -1.0 };
                basis[i] = art;
                x[art] = resid.abs();
            }
            row_of[basis[i]] = Some(i);
        }

        let mut tab = Self {
            m,
            ncols,
            art_start,
            t: a.clone(),
            a,
            rhs,
            lower,
            upper,
            x,
            basis,
            row_of,
            cost: vec![0.0; ncols],
            reduced: vec![0.0; ncols],
            since_refactor: 0,
            tol,
        };
        // the initial basis is a signed diagonal, so B^-1 A is a row rescale
        for i in 0..tab.m {
            let d = tab.a[i * tab.ncols + tab.basis[i]];
            for j in 0..tab.ncols {
                tab.t[i * tab.ncols + j] /= d;
            }
        }
        tab
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced();
    }

    fn recompute_reduced(&mut self) {
        let nc = self.ncols;
        self.reduced.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * nc..(i + 1) * nc];
                for (r, v) in self.reduced.iter_mut().zip(row) {
                    *r -= cb * v;
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
    }

    /// Rebuilds `B^-1 A`, basic values and reduced costs from the scaled data.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let nc = self.ncols;
        self.since_refactor = 0;
        if m == 0 {
            self.recompute_reduced();
            return Ok(());
        }
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[i * nc + self.basis[k]]);
        let lu = bmat.clone().lu();
        let full = DMatrix::from_row_slice(m, nc, &self.a);
        let b_inv = lu
            .try_inverse()
            .ok_or_else(|| Error::NumericalBreakdown("singular basis".into()))?;
        let tm = &b_inv * full;
        let mut r = nalgebra::DVector::from_column_slice(&self.rhs);
        for j in 0..nc {
            if self.row_of[j].is_none() && self.x[j] != 0.0 {
                for i in 0..m {
                    r[i] -= self.a[i * nc + j] * self.x[j];
                }
            }
        }
        let mut xb = lu
            .solve(&r)
            .ok_or_else(|| Error::NumericalBreakdown("singular basis".into()))?;
        for _ in 0..REFINE_SWEEPS {
            let resid = &r - &bmat * &xb;
            match lu.solve(&resid) {
                Some(dx) => xb += dx,
                None => break,
            }
        }
        if tm.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown("non-finite tableau after refactor".into()));
        }
        for i in 0..m {
            for j in 0..nc {
                self.t[i * nc + j] = tm[(i, j)];
            }
            self.x[self.basis[i]] = xb[i];
        }
        self.recompute_reduced();
        Ok(())
    }

    fn eligible(&self, j: usize) -> Option<f64> {
        if self.row_of[j].is_some() {
            return None;
        }
        let d = self.reduced[j];
        let (lo, hi, xj) = (self.lower[j], self.upper[j], self.x[j]);
        if lo == hi {
            return None;
        }
        let at_upper = hi.is_finite() && xj >= hi;
        let at_lower = lo.is_finite() && xj <= lo;
        if d < -OPT_TOL && !at_upper {
            Some(1.0)
        } else if d > OPT_TOL && !at_lower {
            Some(-1.0)
        } else {
            None
        }
    }

    /// Primal simplex on the current cost. With `until_feasible` it stops as
    /// soon as every basic is back within its bounds.
    fn run(&mut self, phase_two: bool, until_feasible: bool) -> Result<Phase> {
        let nc = self.ncols;
        let limit = 50 * (self.m + nc) + 1000;
        let mut streak = 0usize;
        let mut banned = vec![false; nc];
        for _ in 0..limit {
            if until_feasible && self.infeasible_basics().is_empty() {
                return Ok(Phase::Optimal);
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = streak > DEGENERATE_STREAK;
            let mut enter: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..nc {
                if banned[j] {
                    continue;
                }
                if let Some(dir) = self.eligible(j) {
                    if bland {
                        enter = Some((j, dir));
                        break;
                    }
                    let score = self.reduced[j].abs();
                    if score > best {
                        best = score;
                        enter = Some((j, dir));
                    }
                }
            }
            let Some((j, dir)) = enter else {
                return Ok(Phase::Optimal);
            };

            // Harris two-pass ratio test
            let mut tmax = self.upper[j] - self.lower[j];
            for i in 0..self.m {
                let alpha = dir * self.t[i * nc + j];
                if let Some((d, _)) = self.room(i, alpha) {
                    // an already-infeasible basic blocks at zero, never below
                    tmax = tmax.min((d.max(0.0) + self.tol[self.basis[i]]) / alpha.abs());
                }
            }
            if !tmax.is_finite() {
                // a stale tableau can fake a ray; only trust one seen right
                // after refactoring, and in phase 1 never (it is bounded)
                if self.since_refactor > 0 {
                    self.refactor()?;
                    continue;
                }
                if phase_two {
                    return Ok(Phase::Unbounded);
                }
                banned[j] = true;
                continue;
            }
            let mut leave: Option<(usize, f64, f64)> = None;
            let mut best_alpha = 0.0;
            for i in 0..self.m {
                let alpha = dir * self.t[i * nc + j];
                if let Some((d, bound)) = self.room(i, alpha) {
                    let ratio = d.max(0.0) / alpha.abs();
                    let take = if bland {
                        ratio <= tmax
                            && leave.is_none_or(|(r, _, _)| self.basis[i] < self.basis[r])
                    } else {
                        ratio <= tmax && alpha.abs() > best_alpha
                    };
                    if take {
                        best_alpha = alpha.abs();
                        leave = Some((i, ratio, bound));
                    }
                }
            }
            let flip = self.upper[j] - self.lower[j];
            match leave {
                Some((r, step, bound)) if step < flip => {
                    streak = if step <= 1e-12 { streak + 1 } else { 0 };
                    self.pivot(r, j, dir, step, bound);
                    banned.iter_mut().for_each(|b| *b = false);
                }
                _ => {
                    // bound flip of the entering variable
                    streak = 0;
                    for i in 0..self.m {
                        let b = self.basis[i];
                        self.x[b] -= dir * flip * self.t[i * nc + j];
                    }
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
            }
        }
        Err(Error::NumericalBreakdown("simplex iteration limit reached".into()))
    }

    /// Distance the basic variable of row `i` may travel, and the bound it
    /// stops at, when its tableau coefficient along the entering direction
    /// is `alpha`. A basic outside its bounds stops at the violated bound,
    /// whichever way it moves.
    fn room(&self, i: usize, alpha: f64) -> Option<(f64, f64)> {
        let b = self.basis[i];
        let (lo, hi, x) = (self.lower[b], self.upper[b], self.x[b]);
        let falling = alpha > PIVOT_TOL;
        if !falling && alpha >= -PIVOT_TOL {
            return None;
        }
        if x < lo {
            return Some((if falling { x - lo } else { lo - x }, lo));
        }
        if x > hi {
            return Some((if falling { x - hi } else { hi - x }, hi));
        }
        if falling && lo.is_finite() {
            Some((x - lo, lo))
        } else if !falling && hi.is_finite() {
            Some((hi - x, hi))
        } else {
            None
        }
    }

    /// Basics outside their bounds by more than the rounding allowance, with
    /// the sign of the violated side.
    fn infeasible_basics(&self) -> Vec<(usize, f64)> {
        self.basis
            .iter()
            .filter_map(|&b| {
                let slack = REPAIR_SLACK * self.tol[b];
                if self.x[b] < self.lower[b] - slack {
                    Some((b, -1.0))
                } else if self.x[b] > self.upper[b] + slack {
                    Some((b, 1.0))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Drives the bound violation of the basics down until none is left.
    fn repair(&mut self) -> Result<()> {
        for _ in 0..REPAIR_ROUNDS {
            let bad = self.infeasible_basics();
            if bad.is_empty() {
                return Ok(());
            }
            let mut cost = vec![0.0; self.ncols];
            for (b, sign) in bad {
                cost[b] = sign;
            }
            self.set_cost(cost);
            self.run(true, true)?;
            self.refactor()?;
        }
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize, dir: f64, step: f64, bound: f64) {
        let nc = self.ncols;
        for i in 0..self.m {
            let b = self.basis[i];
            self.x[b] -= dir * step * self.t[i * nc + j];
        }
        self.x[self.basis[r]] = bound;
        self.x[j] += dir * step;
        self.basis_swap(r, j);
    }

    /// Gaussian pivot making column `j` basic in row `r`.
    fn basis_swap(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let leaving = self.basis[r];
        let piv = self.t[r * nc + j];
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v /= piv;
            }
        }
        let pivot_row: Vec<f64> = self.t[r * nc..(r + 1) * nc].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * nc + j];
            if f != 0.0 {
                let row = &mut self.t[i * nc..(i + 1) * nc];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let d = self.reduced[j];
        if d != 0.0 {
            for (v, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= d * p;
            }
        }
        self.reduced[j] = 0.0;
        self.basis[r] = j;
        self.row_of[j] = Some(r);
        self.row_of[leaving] = None;
        self.since_refactor += 1;
    }

    /// Pushes zero-valued artificials out of the basis where possible and
    /// pins every artificial at zero for phase 2.
    fn evict_artificials(&mut self) -> Result<()> {
        let nc = self.ncols;
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.art_start {
                continue;
            }
            let mut best: Option<usize> = None;
            let mut best_abs = 1e-7;
            for j in 0..self.art_start {
                if self.row_of[j].is_none() {
                    let v = self.t[r * nc + j].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = Some(j);
                    }
                }
            }
            if let Some(j) = best {
                self.x[b] = 0.0;
                self.basis_swap(r, j);
            }
        }
        for j in self.art_start..nc {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.row_of[j].is_none() {
                self.x[j] = 0.0;
            }
        }
        self.refactor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_var_box(upper_row: f64) -> LpProblem {
        let mut p = LpProblem::new(1);
        p.cost = vec![-1.0];
        p.ineq_lhs = DMatrix::from_row_slice(1, 1, &[1.0]);
        p.ineq_rhs = vec![upper_row];
        p
    }

    #[test]
    fn one_variable_box() {
        let out = solve_lp(&one_var_box(1.0), DEFAULT_FEAS_TOL).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_abs_diff_eq!(out.solution.unwrap()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.objective.unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_box_is_infeasible() {
        let mut p = one_var_box(-1.0);
        p.cost = vec![0.0];
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        assert!(out.solution.is_none());
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new(2);
        p.cost = vec![-1.0, 0.0];
        p.ineq_lhs = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
        p.ineq_rhs = vec![1.0];
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y  s.t. x - y = 1, x >= -3 (free y), y <= 2
        let mut p = LpProblem::new(2);
        p.cost = vec![1.0, 1.0];
        p.eq_lhs = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        p.eq_rhs = vec![1.0];
        p.var_lower = vec![-3.0, f64::NEG_INFINITY];
        p.var_upper = vec![f64::INFINITY, 2.0];
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        let x = out.solution.unwrap();
        assert_abs_diff_eq!(x[0], -3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x[1], -4.0, epsilon = 1e-10);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(2);
        p.cost = vec![1.0, 2.0];
        p.eq_lhs = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        p.eq_rhs = vec![1.0, 2.0];
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        let x = out.solution.unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn inconsistent_equalities() {
        let mut p = LpProblem::new(1);
        p.eq_lhs = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        p.eq_rhs = vec![1.0, 2.0];
        assert_eq!(solve_lp(&p, DEFAULT_FEAS_TOL).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn malformed_problem() {
        let mut p = LpProblem::new(2);
        p.var_lower = vec![0.0];
        assert!(matches!(solve_lp(&p, DEFAULT_FEAS_TOL), Err(Error::DimensionMismatch(_))));
        let mut p = LpProblem::new(1);
        p.var_lower = vec![2.0];
        p.var_upper = vec![1.0];
        assert!(matches!(solve_lp(&p, DEFAULT_FEAS_TOL), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn degenerate_klee_minty_like() {
        // several constraints through the optimum vertex
        let mut p = LpProblem::new(2);
        p.cost = vec![-1.0, -1.0];
        p.ineq_lhs =
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0]);
        p.ineq_rhs = vec![1.0, 1.0, 2.0, 3.0];
        let out = solve_lp(&p, DEFAULT_FEAS_TOL).unwrap();
        assert_abs_diff_eq!(out.objective.unwrap(), -2.0, epsilon = 1e-10);
    }
}
