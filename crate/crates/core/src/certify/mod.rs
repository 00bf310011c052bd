//! Invariance and constraint-admissibility certificates for the augmented
//! closed loop, their residual check, LP completion of the multipliers, and a
//! Monte-Carlo falsification harness.

mod falsify;
pub mod system;
pub mod text;

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{
    build_closed_loop, ControllerGains, InputConstraint, IntegralBounds, PlantModel, ReferenceClass,
    ReferenceKind, StateConstraint,
};
use crate::numlin::{hurwitz_margin, left_inverse, max_abs, rank, Matrix, Vector, DEFAULT_FEAS_TOL, DEFAULT_RANK_TOL};
use crate::polyhedra::Polyhedron;

pub use falsify::{falsify_by_simulation, FalsifyOptions, Violation, ViolationKind};
pub use system::{Group, Layout, System, VarBox};

/// Smallest decay margin accepted as strictly positive.
pub const GAMMA_MIN: f64 = 1e-6;
/// Required stability margin of `A_cl`.
pub const HURWITZ_MARGIN: f64 = 1e-6;
/// Default tolerance for equality and inclusion residuals.
pub const DEFAULT_CERT_TOL: f64 = 1e-7;

/// `{x_cl : L_cl x_cl <= 1}` with `L_cl = [L, L_I1, L_I2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    l_cl: Matrix,
}

impl InvariantSet {
    /// Requires more rows than columns and full column rank.
    pub fn new(l_cl: Matrix) -> Result<Self> {
        let (l, n_cl) = l_cl.shape();
        if n_cl < 3 || l <= n_cl {
            return Err(Error::DimensionMismatch(format!(
                "L_cl must have more rows than columns (and at least 3 columns), got {l}x{n_cl}"
            )));
        }
        if !l_cl.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("L_cl"));
        }
        if rank(&l_cl, DEFAULT_RANK_TOL) < n_cl {
            return Err(Error::InvalidModel("L_cl does not have full column rank".into()));
        }
        Ok(Self { l_cl })
    }

    pub fn l_cl(&self) -> &Matrix {
        &self.l_cl
    }
    pub fn rows(&self) -> usize {
        self.l_cl.nrows()
    }
    pub fn n_cl(&self) -> usize {
        self.l_cl.ncols()
    }
    /// The plant-state block `L`.
    pub fn l_x(&self) -> Matrix {
        self.l_cl.columns(0, self.n_cl() - 2).into_owned()
    }
    pub fn l_i1(&self) -> Vector {
        self.l_cl.column(self.n_cl() - 2).into_owned()
    }
    pub fn l_i2(&self) -> Vector {
        self.l_cl.column(self.n_cl() - 1).into_owned()
    }

    pub fn polyhedron(&self) -> Result<Polyhedron> {
        Polyhedron::unit_offset(self.l_cl.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub gains: ControllerGains,
    pub inv: InvariantSet,
    pub h: Matrix,
    pub h_r: Matrix,
    /// Rows of `T` for the plant-state constraints.
    pub t1: Matrix,
    /// Rows of `T` bounding `x_I1`.
    pub t2: Matrix,
    /// Rows of `T` bounding `x_I2`.
    pub t3: Matrix,
    pub q: Matrix,
    pub q_r: Matrix,
    pub v: Matrix,
    pub gamma: f64,
    pub xi: IntegralBounds,
    pub rho: [f64; 2],
}

impl Certificate {
    pub fn reference_class(&self, kind: ReferenceKind) -> Result<ReferenceClass> {
        ReferenceClass::new(kind, self.rho)
    }

    /// `T = [T1; T2; T3]`.
    pub fn t(&self) -> Matrix {
        let l = self.inv.rows();
        let (a, b, c) = (self.t1.nrows(), self.t2.nrows(), self.t3.nrows());
        let mut t = Matrix::zeros(a + b + c, l);
        t.rows_mut(0, a).copy_from(&self.t1);
        t.rows_mut(a, b).copy_from(&self.t2);
        t.rows_mut(a + b, c).copy_from(&self.t3);
        t
    }

    /// Serializes in the sectioned text format; equal certificates give
    /// byte-identical text.
    pub fn to_text(&self) -> String {
        let g = &self.gains;
        let vals = |v: &Vector| v.iter().copied().collect::<Vec<_>>();
        let mut w = text::Writer::new();
        w.comment("rpitrack certificate")
            .section("certificate")
            .floats("rho", &self.rho)
            .floats("xi", &self.xi.as_array())
            .floats("gamma", &[self.gamma])
            .section("gains")
            .floats("K", &vals(&g.k))
            .floats("K_I1", &vals(&g.k_i1))
            .floats("K_I2", &vals(&g.k_i2))
            .floats("K_r", &vals(&g.k_r))
            .section("multipliers")
            .matrix("L_cl", self.inv.l_cl())
            .matrix("H", &self.h)
            .matrix("H_r", &self.h_r)
            .matrix("T1", &self.t1)
            .matrix("T2", &self.t2)
            .matrix("T3", &self.t3)
            .matrix("Q", &self.q)
            .matrix("Q_r", &self.q_r)
            .matrix("V", &self.v);
        w.finish()
    }

    /// Parses [`Certificate::to_text`] output. Shapes are checked only as far
    /// as the file itself can be inconsistent; agreement with a plant is the
    /// checker's business.
    pub fn from_text(src: &str) -> Result<Self> {
        let doc = text::parse(src)?;
        let head = doc.section("certificate")?;
        head.only(&["rho", "xi", "gamma"])?;
        let at = |e: &text::Entry, r: Result<()>| {
            r.map_err(|err| Error::Parse { line: e.line, msg: err.to_string() })
        };

        let rho_e = head.entry("rho")?;
        let rho = rho_e.floats()?;
        let rho: [f64; 2] = match rho.as_slice() {
            [a, b] if *a > 0.0 && *b > 0.0 => [*a, *b],
            _ => return Err(Error::Parse { line: rho_e.line, msg: "rho takes two positive numbers".into() }),
        };
        let xi_e = head.entry("xi")?;
        let xi = match xi_e.floats()?.as_slice() {
            [a, b, c, d] => IntegralBounds::new(*a, *b, *c, *d)
                .map_err(|err| Error::Parse { line: xi_e.line, msg: err.to_string() })?,
            _ => return Err(Error::Parse { line: xi_e.line, msg: "xi takes four numbers".into() }),
        };
        let gamma = head.scalar("gamma")?;

        let gs = doc.section("gains")?;
        gs.only(&["K", "K_I1", "K_I2", "K_r"])?;
        let vec_of = |key: &str| gs.floats(key).map(Vector::from_vec);
        let gains = ControllerGains { k: vec_of("K")?, k_i1: vec_of("K_I1")?, k_i2: vec_of("K_I2")?, k_r: vec_of("K_r")? };
        let m = gains.m();
        for key in ["K_I1", "K_I2", "K_r"] {
            let e = gs.entry(key)?;
            if e.floats()?.len() != m {
                at(e, Err(Error::DimensionMismatch(format!("{key} must have {m} entries like K"))))?;
            }
        }

        let ms = doc.section("multipliers")?;
        ms.only(&["L_cl", "H", "H_r", "T1", "T2", "T3", "Q", "Q_r", "V"])?;
        let l_e = ms.entry("L_cl")?;
        let inv = InvariantSet::new(l_e.matrix()?)
            .map_err(|err| Error::Parse { line: l_e.line, msg: err.to_string() })?;
        Ok(Self {
            gains,
            inv,
            h: ms.matrix("H")?,
            h_r: ms.matrix("H_r")?,
            t1: ms.matrix("T1")?,
            t2: ms.matrix("T2")?,
            t3: ms.matrix("T3")?,
            q: ms.matrix("Q")?,
            q_r: ms.matrix("Q_r")?,
            v: ms.matrix("V")?,
            gamma,
            xi,
            rho,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
}

impl Residual {
    pub fn ok(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertReport {
    pub passed: bool,
    pub residuals: Vec<Residual>,
}

impl CertReport {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn failures(&self) -> Vec<&Residual> {
        self.residuals.iter().filter(|r| !r.ok()).collect()
    }

    /// `name = value` lines, one per residual, plus `passed`.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        for r in &self.residuals {
            s.push_str(&format!("{} = {:e}\n", r.name, r.value));
        }
        s.push_str(&format!("passed = {}\n", self.passed));
        s
    }
}

impl fmt::Display for CertReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<22} {:>12} {:>10}  status", "condition", "residual", "tol")?;
        for r in &self.residuals {
            writeln!(
                f,
                "{:<22} {:>12.3e} {:>10.1e}  {}",
                r.name,
                r.value,
                r.tol,
                if r.ok() { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "certificate {}", if self.passed { "PASSED" } else { "FAILED" })
    }
}

fn max_pos(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0_f64, |a, x| a.max(x))
}

fn max_neg(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(-v))
}

/// Evaluates every relation of the certificate. Semantic failures show up in
/// the report; only inconsistent shapes are errors.
pub fn check_certificate(
    cert: &Certificate,
    plant: &PlantModel,
    xc: &StateConstraint,
    uc: &InputConstraint,
    kind: ReferenceKind,
    tol: f64,
) -> Result<CertReport> {
    let (n, m) = (plant.n(), plant.m());
    let l = cert.inv.rows();
    let (lx, lu) = (xc.x_mat.nrows(), uc.u_mat.nrows());
    let shapes = [
        ("L_cl", cert.inv.l_cl.shape(), (l, n + 2)),
        ("H", cert.h.shape(), (l, l)),
        ("H_r", cert.h_r.shape(), (l, 2)),
        ("T1", cert.t1.shape(), (lx, l)),
        ("T2", cert.t2.shape(), (2, l)),
        ("T3", cert.t3.shape(), (2, l)),
        ("Q", cert.q.shape(), (lu, l)),
        ("Q_r", cert.q_r.shape(), (lu, 2)),
        ("V", cert.v.shape(), (n + 2, l)),
        ("X", xc.x_mat.shape(), (lx, n)),
        ("U", uc.u_mat.shape(), (lu, m)),
    ];
    for (name, got, want) in shapes {
        if got != want {
            return Err(Error::DimensionMismatch(format!("{name} is {got:?}, expected {want:?}")));
        }
    }
    let alpha = crate::model::alpha_of(kind);
    let g = &cert.gains;
    let cl = build_closed_loop(plant, g, alpha)?;

    let (a, b, c) = (plant.a(), plant.b(), plant.c());
    let lxm = cert.inv.l_x();
    let (l1, l2) = (cert.inv.l_i1(), cert.inv.l_i2());
    let h = &cert.h;
    let lb = &lxm * b;
    let ones_l = Vector::from_element(l, 1.0);
    let rho = Vector::from_column_slice(&cert.rho);
    let r_mat = ReferenceClass::r_mat();

    let res_a = h * &lxm - &lxm * (a + b * &g.k * c) + &l1 * c;
    let res_b = h * &l1 - &lb * &g.k_i1 - &l2;
    let res_c = h * &l2 - &lb * &g.k_i2 + &l1 * alpha;
    let res_d = &cert.h_r * &r_mat - &lb * &g.k_r - Matrix::from_column_slice(l, 1, l1.as_slice());
    let decay = h * &ones_l + &cert.h_r * &rho + Vector::from_element(l, cert.gamma);
    let res_f = &cert.v * cert.inv.l_cl() - Matrix::identity(n + 2, n + 2);

    let lcl = cert.inv.l_cl();
    let mut x_blk = Matrix::zeros(lx, n + 2);
    x_blk.columns_mut(0, n).copy_from(&xc.x_mat);
    let xi = cert.xi;
    let mut i1_blk = Matrix::zeros(2, n + 2);
    i1_blk[(0, n)] = xi.xi11;
    i1_blk[(1, n)] = -xi.xi21;
    let mut i2_blk = Matrix::zeros(2, n + 2);
    i2_blk[(0, n + 1)] = xi.xi12;
    i2_blk[(1, n + 1)] = -xi.xi22;
    let t_sum = cert.t() * &ones_l;

    let u = &uc.u_mat;
    let res_h1 = &cert.q * &lxm - u * &g.k * c;
    let res_h2 = &cert.q * &l1 - u * &g.k_i1;
    let res_h3 = &cert.q * &l2 - u * &g.k_i2;
    let res_h4 = &cert.q_r * &r_mat - u * &g.k_r;
    let q_sum = &cert.q * &ones_l + &cert.q_r * &rho;

    let mut h_off = 0.0_f64;
    for i in 0..l {
        for j in 0..l {
            if i != j {
                h_off = h_off.max(-h[(i, j)]);
            }
        }
    }
    let nonneg = [&cert.h_r, &cert.t1, &cert.t2, &cert.t3, &cert.q, &cert.q_r]
        .into_iter()
        .map(max_neg)
        .fold(0.0_f64, f64::max);

    let margin = hurwitz_margin(&cl.a_cl)?;

    let residuals = vec![
        Residual { name: "a_invariance_x", value: max_abs(&res_a), tol },
        Residual { name: "b_invariance_xi1", value: max_abs(&res_b), tol },
        Residual { name: "c_invariance_xi2", value: max_abs(&res_c), tol },
        Residual { name: "d_invariance_ref", value: max_abs(&res_d), tol },
        Residual { name: "e_decay", value: max_pos(decay.iter().copied()), tol },
        Residual { name: "f_rank", value: max_abs(&res_f), tol },
        Residual { name: "g1_state_x", value: max_abs(&(&cert.t1 * lcl - x_blk)), tol },
        Residual { name: "g2_state_xi1", value: max_abs(&(&cert.t2 * lcl - i1_blk)), tol },
        Residual { name: "g3_state_xi2", value: max_abs(&(&cert.t3 * lcl - i2_blk)), tol },
        Residual { name: "g4_state_offset", value: max_pos(t_sum.iter().map(|v| v - 1.0)), tol },
        Residual { name: "h1_input_x", value: max_abs(&res_h1), tol },
        Residual { name: "h2_input_xi1", value: max_abs(&res_h2), tol },
        Residual { name: "h3_input_xi2", value: max_abs(&res_h3), tol },
        Residual { name: "h4_input_ref", value: max_abs(&res_h4), tol },
        Residual { name: "h5_input_offset", value: max_pos(q_sum.iter().map(|v| v - 1.0)), tol },
        Residual { name: "i_metzler", value: h_off, tol },
        Residual { name: "i_nonnegative", value: nonneg, tol },
        Residual { name: "i_gamma", value: GAMMA_MIN - cert.gamma, tol: 0.0 },
        Residual { name: "j_hurwitz", value: HURWITZ_MARGIN - margin, tol: 0.0 },
    ];
    let passed = residuals.iter().all(Residual::ok);
    Ok(CertReport { passed, residuals })
}

/// Problem data shared by completion, synthesis and falsification.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub plant: PlantModel,
    pub xc: StateConstraint,
    pub uc: InputConstraint,
    pub kind: ReferenceKind,
}

impl Problem {
    pub fn alpha(&self) -> f64 {
        crate::model::alpha_of(self.kind)
    }
}

/// Fixing gains, `L_cl`, `ρ` and `X_I` leaves every relation linear in the
/// multipliers; one LP maximizes `γ` over them and `V` comes from a left inverse.
pub fn complete_certificate(
    gains: &ControllerGains,
    inv: &InvariantSet,
    rho: [f64; 2],
    xi: IntegralBounds,
    prob: &Problem,
    bounds: &VarBox,
    tol: f64,
) -> Result<Certificate> {
    if inv.n_cl() != prob.plant.n_cl() {
        return Err(Error::DimensionMismatch("L_cl does not match the plant".into()));
    }
    let sys = System::build(&prob.plant, &prob.xc, &prob.uc, prob.alpha(), inv.rows(), bounds)?;
    let lay = &sys.layout;
    let mut z = vec![0.0; lay.total];
    write_gains(lay, &mut z, gains);
    lay.set(&mut z, Group::L, inv.l_cl());
    z[lay.range(Group::Rho)].copy_from_slice(&rho);
    z[lay.range(Group::Xi)].copy_from_slice(&xi.as_array());
    let free = lay.mask(&[Group::H, Group::HR, Group::T, Group::Q, Group::QR, Group::Gamma]);
    let mut cost = vec![0.0; lay.total];
    cost[lay.idx(Group::Gamma, 0, 0)] = -1.0;
    let mut lower = sys.lower.clone();
    lower[lay.idx(Group::Gamma, 0, 0)] = lower[lay.idx(Group::Gamma, 0, 0)].max(GAMMA_MIN);
    let z = sys
        .solve_linearized(&z, &free, &cost, &lower, &sys.upper, DEFAULT_FEAS_TOL.min(tol))?
        .ok_or_else(|| Error::Infeasible("no multipliers satisfy the certificate relations".into()))?;
    certificate_from_vector(lay, &z)
}

pub(crate) fn write_gains(lay: &Layout, z: &mut [f64], g: &ControllerGains) {
    for (grp, v) in [(Group::K, &g.k), (Group::KI1, &g.k_i1), (Group::KI2, &g.k_i2), (Group::KR, &g.k_r)] {
        z[lay.range(grp)].copy_from_slice(v.as_slice());
    }
}

pub(crate) fn read_gains(lay: &Layout, z: &[f64]) -> ControllerGains {
    let v = |g| Vector::from_column_slice(&z[lay.range(g)]);
    ControllerGains { k: v(Group::K), k_i1: v(Group::KI1), k_i2: v(Group::KI2), k_r: v(Group::KR) }
}

/// Unpacks a flat iterate into a certificate, computing `V` by left inverse.
pub(crate) fn certificate_from_vector(lay: &Layout, z: &[f64]) -> Result<Certificate> {
    let l_cl = lay.get(z, Group::L);
    let inv = InvariantSet::new(l_cl)?;
    let v = left_inverse(inv.l_cl(), DEFAULT_RANK_TOL)?;
    let t = lay.get(z, Group::T);
    let lx = lay.lx;
    let xi = &z[lay.range(Group::Xi)];
    let rho = &z[lay.range(Group::Rho)];
    Ok(Certificate {
        gains: read_gains(lay, z),
        h: lay.get(z, Group::H),
        h_r: lay.get(z, Group::HR),
        t1: t.rows(0, lx).into_owned(),
        t2: t.rows(lx, 2).into_owned(),
        t3: t.rows(lx + 2, 2).into_owned(),
        q: lay.get(z, Group::Q),
        q_r: lay.get(z, Group::QR),
        v,
        gamma: z[lay.idx(Group::Gamma, 0, 0)],
        xi: IntegralBounds::new(xi[0], xi[1], xi[2], xi[3])?,
        rho: [rho[0], rho[1]],
        inv,
    })
}

#[cfg(test)]
mod tests;
