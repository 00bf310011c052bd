//! Fixed-step RK4 simulation of the augmented closed loop.

use std::fmt::Write as _;

use crate::certify::InvariantSet;
use crate::error::{Error, Result};
use crate::model::{input_constraint_map, ClosedLoop, ControllerGains, InputConstraint, PlantModel, StateConstraint};
use crate::numlin::{fmt_sig, Matrix, Vector};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 400.0;
pub const DEFAULT_DECIMATE: usize = 10;

const CONTINUITY_TOL: f64 = 1e-9;

/// One affine piece `r = slope·t + intercept`, active from `t_break` on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_break: f64,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceSignal {
    Ramp { slope: f64 },
    /// Segment `k` covers `(t_k, t_{k+1}]`; the first one also covers `t = t_0`.
    PiecewiseRamp(Vec<Segment>),
    Sinusoid { amplitude: f64, omega: f64, phase: f64 },
    /// Alternates between `high` and `low` every half period, starting high.
    Square { high: f64, low: f64, period: f64 },
}

impl ReferenceSignal {
    pub fn constant(value: f64) -> Self {
        Self::PiecewiseRamp(vec![Segment { t_break: 0.0, slope: 0.0, intercept: value }])
    }

    /// Checks ordering and continuity of piecewise segments.
    pub fn piecewise(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidModel("piecewise ramp needs at least one segment".into()));
        }
        for w in segments.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b.t_break <= a.t_break {
                return Err(Error::InvalidModel("segment breakpoints must increase".into()));
            }
            let left = a.slope * b.t_break + a.intercept;
            let right = b.slope * b.t_break + b.intercept;
            if (left - right).abs() > CONTINUITY_TOL {
                return Err(Error::InvalidModel(format!(
                    "reference jumps by {:e} at t = {}",
                    right - left,
                    b.t_break
                )));
            }
        }
        Ok(Self::PiecewiseRamp(segments))
    }

    /// Rise at 0.01/s to 0.3 at t = 30, fall linearly to −0.2 at t = 100, then hold.
    pub fn two_tank_profile() -> Self {
        let slope = -0.5 / 70.0;
        Self::PiecewiseRamp(vec![
            Segment { t_break: 0.0, slope: 0.01, intercept: 0.0 },
            Segment { t_break: 30.0, slope, intercept: 0.3 - slope * 30.0 },
            Segment { t_break: 100.0, slope: 0.0, intercept: -0.2 },
        ])
    }

    /// Smallest and largest value taken on `[0, horizon]`.
    pub fn range(&self, horizon: f64) -> (f64, f64) {
        match self {
            Self::Ramp { slope } => {
                let end = slope * horizon;
                (end.min(0.0), end.max(0.0))
            }
            Self::PiecewiseRamp(segs) => {
                let mut pts = vec![eval_reference(self, 0.0), eval_reference(self, horizon)];
                pts.extend(segs.iter().filter(|s| s.t_break <= horizon).map(|s| eval_reference(self, s.t_break)));
                // right limits at breakpoints equal the left ones for continuous profiles
                let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            Self::Sinusoid { amplitude, .. } => (-amplitude.abs(), amplitude.abs()),
            Self::Square { high, low, .. } => (low.min(*high), low.max(*high)),
        }
    }
}

pub fn eval_reference(sig: &ReferenceSignal, t: f64) -> f64 {
    match sig {
        ReferenceSignal::Ramp { slope } => slope * t,
        ReferenceSignal::PiecewiseRamp(segs) => {
            let k = segs.iter().rposition(|s| s.t_break < t).unwrap_or(0);
            segs[k].slope * t + segs[k].intercept
        }
        ReferenceSignal::Sinusoid { amplitude, omega, phase } => amplitude * (omega * t + phase).sin(),
        ReferenceSignal::Square { high, low, period } => {
            let frac = (t / period).rem_euclid(1.0);
            if frac < 0.5 {
                *high
            } else {
                *low
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Keep every `decimate`-th step in the returned trajectory.
    pub decimate: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, dt: DEFAULT_DT, decimate: DEFAULT_DECIMATE }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub outputs: Vec<f64>,
    pub references: Vec<f64>,
    pub errors: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t, x1..xn, x_I1, x_I2, u1..um, y, r, e`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let n_cl = self.states.first().map_or(2, |x| x.len());
        let m = self.inputs.first().map_or(1, |u| u.len());
        let mut head = vec!["t".to_string()];
        head.extend((1..=n_cl - 2).map(|i| format!("x{i}")));
        head.push("x_I1".into());
        head.push("x_I2".into());
        if m == 1 {
            head.push("u".into());
        } else {
            head.extend((1..=m).map(|i| format!("u{i}")));
        }
        head.extend(["y".into(), "r".into(), "e".into()]);
        s.push_str(&head.join(","));
        s.push('\n');
        for k in 0..self.len() {
            let mut cols = vec![fmt_sig(self.times[k])];
            cols.extend(self.states[k].iter().map(|v| fmt_sig(*v)));
            cols.extend(self.inputs[k].iter().map(|v| fmt_sig(*v)));
            cols.extend([self.outputs[k], self.references[k], self.errors[k]].map(fmt_sig));
            let _ = writeln!(s, "{}", cols.join(","));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    State,
    Input,
    Invariant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorViolation {
    pub t: f64,
    pub constraint: Constraint,
    /// Excess over the unit offset, `max(row · v) − 1`.
    pub margin: f64,
}

/// Row-wise checks of `X x <= 1`, `U u <= 1` and optionally `L_cl x_cl <= 1`.
#[derive(Debug, Clone)]
pub struct Monitor<'a> {
    pub xc: &'a StateConstraint,
    pub uc: &'a InputConstraint,
    pub inv: Option<&'a InvariantSet>,
    pub tol: f64,
}

impl Monitor<'_> {
    pub fn check(&self, t: f64, x_cl: &[f64], u: &[f64], out: &mut Vec<MonitorViolation>) {
        let n = self.xc.x_mat.ncols();
        let worst = |m: &Matrix, v: &[f64]| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let xs = worst(&self.xc.x_mat, &x_cl[..n]);
        if xs > 1.0 + self.tol {
            out.push(MonitorViolation { t, constraint: Constraint::State, margin: xs - 1.0 });
        }
        let us = worst(&self.uc.u_mat, u);
        if us > 1.0 + self.tol {
            out.push(MonitorViolation { t, constraint: Constraint::Input, margin: us - 1.0 });
        }
        if let Some(inv) = self.inv {
            let ls = worst(inv.l_cl(), x_cl);
            if ls > 1.0 + self.tol {
                out.push(MonitorViolation { t, constraint: Constraint::Invariant, margin: ls - 1.0 });
            }
        }
    }
}

/// Every stored sample that breaks a constraint by more than `tol`.
pub fn monitor(
    traj: &Trajectory,
    xc: &StateConstraint,
    uc: &InputConstraint,
    inv: Option<&InvariantSet>,
    tol: f64,
) -> Vec<MonitorViolation> {
    let mon = Monitor { xc, uc, inv, tol };
    let mut out = Vec::new();
    for k in 0..traj.len() {
        mon.check(traj.times[k], traj.states[k].as_slice(), traj.inputs[k].as_slice(), &mut out);
    }
    out
}

/// Integrates `ẋ_cl = A_cl x_cl + B_cl r(t)` with classic RK4 and stores every
/// `cfg.decimate`-th sample.
pub fn simulate(
    cl: &ClosedLoop,
    gains: &ControllerGains,
    plant: &PlantModel,
    sig: &ReferenceSignal,
    x0: &Vector,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    simulate_monitored(cl, gains, plant, sig, x0, cfg, None).map(|(t, _)| t)
}

/// Same as [`simulate`], additionally running `mon` on every integration
/// step before decimation.
pub fn simulate_monitored(
    cl: &ClosedLoop,
    gains: &ControllerGains,
    plant: &PlantModel,
    sig: &ReferenceSignal,
    x0: &Vector,
    cfg: &SimConfig,
    mon: Option<&Monitor<'_>>,
) -> Result<(Trajectory, Vec<MonitorViolation>)> {
    let n_cl = cl.n_cl();
    if x0.len() != n_cl {
        return Err(Error::DimensionMismatch(format!("x0 has length {}, expected {n_cl}", x0.len())));
    }
    if !(cfg.dt > 0.0 && cfg.horizon >= cfg.dt && cfg.decimate >= 1) {
        return Err(Error::InvalidModel(format!(
            "need dt > 0, horizon >= dt, decimate >= 1 (got {}, {}, {})",
            cfg.dt, cfg.horizon, cfg.decimate
        )));
    }
    let umap = input_constraint_map(gains, plant)?;
    let m = plant.m();
    let n = plant.n();
    let c: Vec<f64> = plant.c().iter().copied().collect();
    let a: Vec<f64> = (0..n_cl * n_cl).map(|i| cl.a_cl[(i / n_cl, i % n_cl)]).collect();
    let b: Vec<f64> = cl.b_cl.column(0).iter().copied().collect();
    let f = |x: &[f64], r: f64, out: &mut [f64]| {
        for i in 0..n_cl {
            out[i] = a[i * n_cl..(i + 1) * n_cl].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + b[i] * r;
        }
    };

    let steps = cfg.steps();
    let mut traj = Trajectory::default();
    let mut viol = Vec::new();
    let mut u = vec![0.0; m];
    let mut record = |k: usize, x: &[f64], traj: &mut Trajectory, viol: &mut Vec<MonitorViolation>| {
        let t = k as f64 * cfg.dt;
        let r = eval_reference(sig, t);
        for (q, uq) in u.iter_mut().enumerate() {
            *uq = (0..n_cl).map(|j| umap[(q, j)] * x[j]).sum::<f64>() + umap[(q, n_cl)] * r;
        }
        if let Some(mo) = mon {
            mo.check(t, x, &u, viol);
        }
        if k.is_multiple_of(cfg.decimate) {
            let y = (0..n).map(|j| c[j] * x[j]).sum::<f64>();
            traj.times.push(t);
            traj.states.push(Vector::from_column_slice(x));
            traj.inputs.push(Vector::from_column_slice(&u));
            traj.outputs.push(y);
            traj.references.push(r);
            traj.errors.push(r - y);
        }
    };
    let mut x: Vec<f64> = x0.iter().copied().collect();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n_cl], vec![0.0; n_cl], vec![0.0; n_cl], vec![0.0; n_cl], vec![0.0; n_cl]);
    record(0, &x, &mut traj, &mut viol);
    let h = cfg.dt;
    for k in 0..steps {
        let t = k as f64 * h;
        let r0 = eval_reference(sig, t);
        let rh = eval_reference(sig, t + 0.5 * h);
        let r1 = eval_reference(sig, t + h);
        f(&x, r0, &mut k1);
        for i in 0..n_cl {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        f(&tmp, rh, &mut k2);
        for i in 0..n_cl {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        f(&tmp, rh, &mut k3);
        for i in 0..n_cl {
            tmp[i] = x[i] + h * k3[i];
        }
        f(&tmp, r1, &mut k4);
        for i in 0..n_cl {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !x.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
            return Err(Error::NonFiniteState(t + h));
        }
        record(k + 1, &x, &mut traj, &mut viol);
    }
    Ok((traj, viol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_closed_loop;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// `ẋ = −x + r` written as the closed loop of `ẋ = −x + u`, `u = r`.
    /// The integral states see `r − x`, which is harmless for the plant state.
    fn scalar_loop() -> (ClosedLoop, ControllerGains, PlantModel) {
        let plant = PlantModel::new(
            Matrix::from_element(1, 1, -1.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let g = ControllerGains::scalar(0.0, 0.0, 0.0, 1.0);
        (build_closed_loop(&plant, &g, 0.0).unwrap(), g, plant)
    }

    fn endpoint_error(dt: f64) -> f64 {
        let (cl, g, p) = scalar_loop();
        let cfg = SimConfig { horizon: 1.0, dt, decimate: 1 };
        let tr = simulate(&cl, &g, &p, &ReferenceSignal::constant(1.0), &Vector::zeros(3), &cfg).unwrap();
        (tr.states.last().unwrap()[0] - (1.0 - (-1.0_f64).exp())).abs()
    }

    #[test]
    fn closed_form_scalar() {
        assert!(endpoint_error(1e-3) <= 1e-8);
        let ratio = endpoint_error(0.1) / endpoint_error(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn equilibrium_stays_zero() {
        let (cl, g, p) = scalar_loop();
        let cfg = SimConfig { horizon: 1.0, dt: 1e-2, decimate: 1 };
        let tr = simulate(&cl, &g, &p, &ReferenceSignal::constant(0.0), &Vector::zeros(3), &cfg).unwrap();
        assert!(tr.states.iter().all(|x| x.iter().all(|v| *v == 0.0)));
        assert_eq!(tr.len(), 101);
    }

    #[test]
    fn profile_values() {
        let s = ReferenceSignal::two_tank_profile();
        assert_abs_diff_eq!(eval_reference(&s, 30.0), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(eval_reference(&s, 200.0), -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(eval_reference(&s, 10.0), 0.1, epsilon = 1e-12);
        // the falling segment rounds to −0.0071 t + 0.5143
        if let ReferenceSignal::PiecewiseRamp(segs) = &s {
            assert_abs_diff_eq!(segs[1].slope, -0.0071, epsilon = 5e-5);
            assert_abs_diff_eq!(segs[1].intercept, 0.5143, epsilon = 5e-5);
            assert!(ReferenceSignal::piecewise(segs.clone()).is_ok());
        }
        let sin = ReferenceSignal::Sinusoid { amplitude: 0.13, omega: 1.0, phase: 0.0 };
        assert_abs_diff_eq!(eval_reference(&sin, PI / 2.0), 0.13, epsilon = 1e-15);
    }

    #[test]
    fn discontinuous_profile_rejected() {
        let segs = vec![
            Segment { t_break: 0.0, slope: 0.01, intercept: 0.0 },
            Segment { t_break: 30.0, slope: -0.0071, intercept: 0.5143 },
        ];
        assert!(ReferenceSignal::piecewise(segs).is_err());
    }

    #[test]
    fn decimation_row_count() {
        let (cl, g, p) = scalar_loop();
        let cfg = SimConfig { horizon: 2.0, dt: 1e-3, decimate: 10 };
        let tr = simulate(&cl, &g, &p, &ReferenceSignal::constant(1.0), &Vector::zeros(3), &cfg).unwrap();
        assert_eq!(tr.len(), 201);
        assert_abs_diff_eq!(tr.times[1], 0.01, epsilon = 1e-15);
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,x1,x_I1,x_I2,u,y,r,e\n"));
        assert_eq!(csv.lines().count(), 202);
    }

    #[test]
    fn unstable_loop_reports_non_finite() {
        let plant = PlantModel::new(
            Matrix::from_element(1, 1, 50.0),
            Matrix::from_element(1, 1, 1.0),
            Matrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let g = ControllerGains::scalar(0.0, 0.0, 0.0, 1.0);
        let cl = build_closed_loop(&plant, &g, 0.0).unwrap();
        let cfg = SimConfig { horizon: 100.0, dt: 1e-2, decimate: 100 };
        let x0 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            simulate(&cl, &g, &plant, &ReferenceSignal::constant(0.0), &x0, &cfg),
            Err(Error::NonFiniteState(_))
        ));
    }

    #[test]
    fn monitor_flags_inflated_feedforward() {
        let (cl, _, p) = scalar_loop();
        let xc = StateConstraint::from_box(&[-2.0], &[2.0]).unwrap();
        let uc = InputConstraint::symmetric(&[1.0]).unwrap();
        let cfg = SimConfig { horizon: 5.0, dt: 1e-2, decimate: 1 };
        let sig = ReferenceSignal::constant(0.5);
        let g = ControllerGains::scalar(0.0, 0.0, 0.0, 1.0);
        let tr = simulate(&cl, &g, &p, &sig, &Vector::zeros(3), &cfg).unwrap();
        assert!(monitor(&tr, &xc, &uc, None, 1e-9).is_empty());
        let hot = ControllerGains::scalar(0.0, 0.0, 0.0, 10.0);
        let cl_hot = build_closed_loop(&p, &hot, 0.0).unwrap();
        let tr = simulate(&cl_hot, &hot, &p, &sig, &Vector::zeros(3), &cfg).unwrap();
        let v = monitor(&tr, &xc, &uc, None, 1e-9);
        assert!(v.iter().any(|m| m.constraint == Constraint::Input));
        assert!(v.iter().any(|m| m.constraint == Constraint::State));
    }

    #[test]
    fn zero_trajectory_is_clean() {
        let tr = Trajectory {
            times: vec![0.0],
            states: vec![Vector::zeros(3)],
            inputs: vec![Vector::zeros(1)],
            outputs: vec![0.0],
            references: vec![0.0],
            errors: vec![0.0],
        };
        let xc = StateConstraint::from_box(&[-1.0], &[1.0]).unwrap();
        let uc = InputConstraint::symmetric(&[1.0]).unwrap();
        assert!(monitor(&tr, &xc, &uc, None, 0.0).is_empty());
    }
}
