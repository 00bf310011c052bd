//! Local search for a controller and invariant polytope maximizing the size of
//! the admissible reference class (or of the integral-error bounds).
//!
//! Every restart proceeds as follows.
//!
//! 1. Sample stabilizing gains, build a modal polytope and scan its scale until
//!    the multiplier LP is feasible ([`Synthesizer::initialize`]).
//! 2. Repeat a geometry step (a trust-region LP on the full linearization,
//!    followed by Newton-type ℓ1 corrections back onto the bilinear manifold)
//!    and a multiplier step (an exact LP with `L_cl` and `ρ` frozen).
//! 3. Accept only strict improvements of the merit `Φ + μ·γ`; the trust region
//!    grows on success and halves on failure.
//!
//! Restarts are independent and run on the rayon pool; the best certified
//! result wins, ties broken by larger `γ` and then by lower restart index.

mod modal;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use modal::modal_rows;

use crate::certify::{
    certificate_from_vector, check_certificate, complete_certificate, read_gains, write_gains, CertReport,
    Certificate, Group, InvariantSet, Layout, Problem, System, VarBox, DEFAULT_CERT_TOL,
};
use crate::error::{Error, Result};
use crate::model::{build_closed_loop, ControllerGains, IntegralBounds};
use crate::numlin::{is_hurwitz, Vector, DEFAULT_FEAS_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `ρ₁ + ρ₂`, the size of the admissible reference box.
    Phi1,
    /// `X_I11 + X_I21 + X_I12 + X_I22`; larger entries mean tighter
    /// integral-error bounds.
    Phi2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub objective: Objective,
    pub l_rows: usize,
    pub var_box: VarBox,
    pub max_outer_iters: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    pub conv_tol: f64,
    /// Lower bound imposed on each `ρ` component. While it is not met the
    /// search maximizes `ρ₁ + ρ₂` capped at this value.
    pub rho_min: [f64; 2],
    /// Half-width of the uniform gain sampling box (intersected with `var_box`).
    pub gain_range: f64,
    /// Weight of `γ` in the merit.
    pub mu: f64,
    /// Floor on `γ` enforced by every step.
    pub gamma_floor: f64,
    pub init_attempts: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Phi1,
            l_rows: 9,
            var_box: VarBox::default(),
            max_outer_iters: 200,
            restarts: 20,
            rng_seed: 1,
            conv_tol: 1e-6,
            rho_min: [0.0, 0.0],
            gain_range: 10.0,
            mu: 1e-3,
            gamma_floor: 1e-4,
            init_attempts: 20_000,
        }
    }
}

impl SynthesisOptions {
    pub fn validate(&self, n_cl: usize) -> Result<()> {
        if self.l_rows <= n_cl {
            return Err(Error::DimensionMismatch(format!(
                "l_rows must exceed the closed-loop order {n_cl}, got {}",
                self.l_rows
            )));
        }
        if self.restarts == 0 || !(self.conv_tol > 0.0) || !(self.gain_range > 0.0) {
            return Err(Error::InvalidModel("restarts, conv_tol and gain_range must be positive".into()));
        }
        if self.rho_min.iter().any(|r| !(*r >= 0.0)) || !(self.gamma_floor > 0.0) || !(self.mu >= 0.0) {
            return Err(Error::InvalidModel("rho_min, mu must be nonnegative and gamma_floor positive".into()));
        }
        Ok(())
    }
}

/// Search stage: `Grow` pushes `ρ` up to `rho_min`, `Main` optimizes the
/// chosen objective with `ρ ≥ rho_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Grow,
    Main,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Multipliers,
    Geometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Accepted,
    /// Accepted after bisecting `ρ` back towards the previous iterate.
    AcceptedBisected,
    Rejected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub stage: Stage,
    pub status: StepStatus,
    pub merit: f64,
    pub gamma: f64,
    pub rho: [f64; 2],
    pub xi_sum: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub z: Vec<f64>,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RestartOutcome {
    Certified { objective: f64, gamma: f64 },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub cert: Certificate,
    pub objective_value: f64,
    /// Merit `Φ + μ·γ` after every main-stage outer iteration of the winning
    /// restart; non-decreasing by construction.
    pub history: Vec<f64>,
    pub restart_index: usize,
    pub converged: bool,
    pub report: CertReport,
    pub log: Vec<IterRecord>,
    pub restarts: Vec<RestartOutcome>,
}

const CORRECTION_STEPS: usize = 6;
const CORRECTION_TOL: f64 = 1e-10;
const BISECTION_STEPS: usize = 12;
const MIN_RADIUS: f64 = 1e-4;
const START_RADIUS: f64 = 0.3;
const ACCEPT_GAIN: f64 = 1e-9;
const STALL_SWEEPS: usize = 3;

/// Problem data, options and the bilinear row system shared by all restarts.
pub struct Synthesizer<'a> {
    prob: &'a Problem,
    opts: &'a SynthesisOptions,
    sys: System,
}

impl<'a> Synthesizer<'a> {
    pub fn new(prob: &'a Problem, opts: &'a SynthesisOptions) -> Result<Self> {
        opts.validate(prob.plant.n_cl())?;
        let sys = System::build(&prob.plant, &prob.xc, &prob.uc, prob.alpha(), opts.l_rows, &opts.var_box)?;
        Ok(Self { prob, opts, sys })
    }

    pub fn layout(&self) -> &Layout {
        &self.sys.layout
    }

    fn gamma_idx(&self) -> usize {
        self.sys.layout.idx(Group::Gamma, 0, 0)
    }

    fn bounds(&self, stage: Stage) -> (Vec<f64>, Vec<f64>) {
        let (mut lo, mut hi) = (self.sys.lower.clone(), self.sys.upper.clone());
        let rho = self.sys.layout.range(Group::Rho);
        for (k, i) in rho.enumerate() {
            let floor = self.opts.rho_min[k];
            match stage {
                Stage::Grow => hi[i] = hi[i].min(floor),
                Stage::Main => lo[i] = lo[i].max(floor),
            }
        }
        (lo, hi)
    }

    fn cost(&self, stage: Stage) -> Vec<f64> {
        let lay = &self.sys.layout;
        let mut c = vec![0.0; lay.total];
        c[self.gamma_idx()] = -self.opts.mu;
        let grp = match (stage, self.opts.objective) {
            (Stage::Grow, _) | (_, Objective::Phi1) => Group::Rho,
            (Stage::Main, Objective::Phi2) => Group::Xi,
        };
        for i in lay.range(grp) {
            c[i] -= 1.0;
        }
        c
    }

    pub fn merit(&self, z: &[f64], stage: Stage) -> f64 {
        -self.cost(stage).iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }

    fn lp(&self, r: Result<Option<Vec<f64>>>) -> Result<Option<Vec<f64>>> {
        match r {
            Err(Error::NumericalBreakdown(_)) => Ok(None),
            other => other,
        }
    }

    /// Exact LP over everything except `L_cl` and `ρ`, maximizing the merit.
    fn multipliers(&self, z: &[f64], stage: Stage) -> Result<Option<Vec<f64>>> {
        let lay = &self.sys.layout;
        let mut free = vec![true; lay.total];
        for i in lay.range(Group::L).chain(lay.range(Group::Rho)) {
            free[i] = false;
        }
        let (mut lo, hi) = self.bounds(stage);
        let g = self.gamma_idx();
        lo[g] = lo[g].max(self.opts.gamma_floor);
        self.lp(self.sys.solve_linearized(z, &free, &self.cost(stage), &lo, &hi, DEFAULT_FEAS_TOL))
    }

    /// Trust-region LP on the full linearization at `z`, then ℓ1 corrections
    /// with `ρ` frozen until the bilinear residual vanishes.
    fn geometry(&self, z: &[f64], stage: Stage, radius: f64) -> Result<Option<Vec<f64>>> {
        let n = z.len();
        let (mut lo, mut hi) = self.bounds(stage);
        let g = self.gamma_idx();
        lo[g] = lo[g].max((2.0 * self.opts.gamma_floor).max(0.5 * z[g]));
        for i in 0..n {
            let r = radius * z[i].abs().max(1.0);
            lo[i] = lo[i].max(z[i] - r).min(z[i]);
            hi[i] = hi[i].min(z[i] + r).max(z[i]);
        }
        let free = vec![true; n];
        let Some(step) = self.lp(self.sys.solve_linearized(z, &free, &self.cost(stage), &lo, &hi, DEFAULT_FEAS_TOL))?
        else {
            return Ok(None);
        };
        self.correct(step, stage)
    }

    fn correct(&self, mut z: Vec<f64>, stage: Stage) -> Result<Option<Vec<f64>>> {
        let lay = &self.sys.layout;
        let mut free = vec![true; lay.total];
        for i in lay.range(Group::Rho) {
            free[i] = false;
        }
        let (mut lo, hi) = self.bounds(stage);
        let g = self.gamma_idx();
        lo[g] = lo[g].max(self.opts.gamma_floor);
        for _ in 0..CORRECTION_STEPS {
            match self.lp(self.sys.project_linearized(&z, &free, &lo, &hi, DEFAULT_FEAS_TOL))? {
                Some(next) => z = next,
                None => return Ok(None),
            }
            let (eq, le) = self.sys.residuals(&z);
            if eq.max(le) < CORRECTION_TOL {
                break;
            }
        }
        Ok(Some(z))
    }

    /// One phase of the outer iteration. The geometry phase is the
    /// trust-region step and its correction; it needs `radius`.
    pub fn alternate_step(&self, it: &Iterate, phase: Phase, radius: f64) -> Result<Option<Vec<f64>>> {
        match phase {
            Phase::Multipliers => self.multipliers(&it.z, it.stage),
            Phase::Geometry => self.geometry(&it.z, it.stage, radius),
        }
    }

    fn sample_gains(&self, rng: &mut ChaCha8Rng) -> ControllerGains {
        let (lo, hi) = self.opts.var_box.gains;
        let (lo, hi) = (lo.max(-self.opts.gain_range), hi.min(self.opts.gain_range));
        let m = self.prob.plant.m();
        let mut draw = |_| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        ControllerGains {
            k: Vector::from_fn(m, |i, _| draw(i)),
            k_i1: Vector::from_fn(m, |i, _| draw(i)),
            k_i2: Vector::from_fn(m, |i, _| draw(i)),
            k_r: Vector::from_fn(m, |i, _| draw(i)),
        }
    }

    /// Rejection-samples stabilizing gains, builds a modal polytope and
    /// scans its scale `κ` over `10^-4 … 10^6` until the multiplier LP is
    /// feasible with `ρ = 1/κ` (capped by `rho_min` while growing).
    pub fn initialize(&self, restart_index: usize) -> Result<Iterate> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.rng_seed.wrapping_add(restart_index as u64));
        let lay = &self.sys.layout;
        let stage = if self.opts.rho_min.iter().any(|r| *r > 0.0) { Stage::Grow } else { Stage::Main };
        let (lo, hi) = self.bounds(stage);
        let mut stabilizing = 0;
        for _ in 0..self.opts.init_attempts {
            let gains = self.sample_gains(&mut rng);
            let cl = build_closed_loop(&self.prob.plant, &gains, self.prob.alpha())?;
            if !is_hurwitz(&cl.a_cl, 0.0)? {
                continue;
            }
            stabilizing += 1;
            let b_cl = cl.b_cl.column(0).into_owned();
            let Some(l0) = modal_rows(&cl.a_cl, &b_cl, self.opts.l_rows) else {
                continue;
            };
            let mut z = vec![0.0; lay.total];
            write_gains(lay, &mut z, &gains);
            for i in lay.range(Group::Xi) {
                z[i] = lo[i];
            }
            for e in -16..24 {
                let kappa = 10f64.powf(e as f64 * 0.25);
                lay.set(&mut z, Group::L, &(&l0 * kappa));
                for i in lay.range(Group::Rho) {
                    z[i] = (1.0 / kappa).clamp(lo[i], hi[i]);
                }
                if let Some(zm) = self.multipliers(&z, stage)? {
                    return Ok(Iterate { z: zm, stage });
                }
            }
        }
        if stabilizing == 0 {
            Err(Error::NoStabilizingGains(self.opts.init_attempts))
        } else {
            Err(Error::NoFeasiblePoint)
        }
    }

    fn bisect_rho(&self, from: &[f64], step: &[f64], stage: Stage) -> Result<Option<Vec<f64>>> {
        let rho = self.sys.layout.range(Group::Rho);
        let (r0, r1) = (from[rho.clone()].to_vec(), step[rho.clone()].to_vec());
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best = None;
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let mut zt = step.to_vec();
            for (k, i) in rho.clone().enumerate() {
                zt[i] = r0[k] + mid * (r1[k] - r0[k]);
            }
            match self.multipliers(&zt, stage)? {
                Some(zm) => {
                    lo = mid;
                    best = Some(zm);
                }
                None => hi = mid,
            }
        }
        Ok(best)
    }

    fn stage_done(&self, z: &[f64]) -> bool {
        let rho = &z[self.sys.layout.range(Group::Rho)];
        rho.iter().zip(&self.opts.rho_min).all(|(r, m)| *r >= m - 1e-9)
    }

    /// Runs the outer iteration from `it`. Returns the final iterate, the
    /// per-iteration log and whether the stopping rule fired before the cap.
    pub fn run(&self, mut it: Iterate) -> Result<(Iterate, Vec<IterRecord>, bool)> {
        let lay = &self.sys.layout;
        let g = self.gamma_idx();
        let mut radius = START_RADIUS;
        let mut best = self.merit(&it.z, it.stage);
        let mut log = Vec::new();
        let mut stall = 0;
        for iter in 0..self.opts.max_outer_iters {
            if it.stage == Stage::Grow && self.stage_done(&it.z) {
                it.stage = Stage::Main;
                best = self.merit(&it.z, it.stage);
                radius = START_RADIUS;
            }
            let mut status = StepStatus::Rejected;
            if let Some(step) = self.alternate_step(&it, Phase::Geometry, radius)? {
                let mut cand = self.multipliers(&step, it.stage)?;
                let mut bisected = false;
                if cand.is_none() {
                    cand = self.bisect_rho(&it.z, &step, it.stage)?;
                    bisected = true;
                }
                if let Some(c) = cand {
                    let m = self.merit(&c, it.stage);
                    if m > best + ACCEPT_GAIN {
                        stall = if m - best < self.opts.conv_tol { stall + 1 } else { 0 };
                        best = m;
                        it.z = c;
                        status = if bisected { StepStatus::AcceptedBisected } else { StepStatus::Accepted };
                    }
                }
            }
            radius = if status == StepStatus::Rejected { 0.5 * radius } else { (1.5 * radius).min(1.0) };
            let xi: f64 = it.z[lay.range(Group::Xi)].iter().sum();
            let rho = &it.z[lay.range(Group::Rho)];
            log.push(IterRecord {
                iter,
                stage: it.stage,
                status,
                merit: best,
                gamma: it.z[g],
                rho: [rho[0], rho[1]],
                xi_sum: xi,
                radius,
            });
            if it.stage == Stage::Main && (radius < MIN_RADIUS || stall >= STALL_SWEEPS) {
                return Ok((it, log, true));
            }
            if it.stage == Stage::Grow && radius < MIN_RADIUS {
                return Ok((it, log, false));
            }
        }
        Ok((it, log, false))
    }

    /// Completes and checks the certificate at the iterate's geometry.
    pub fn certify(&self, z: &[f64]) -> Result<(Certificate, CertReport)> {
        let lay = &self.sys.layout;
        let gains = read_gains(lay, z);
        let inv = InvariantSet::new(lay.get(z, Group::L))?;
        let rho = &z[lay.range(Group::Rho)];
        let xi = &z[lay.range(Group::Xi)];
        let xi = IntegralBounds::new(xi[0], xi[1], xi[2], xi[3])?;
        let tol = DEFAULT_CERT_TOL.min(self.opts.conv_tol);
        let cert = complete_certificate(&gains, &inv, [rho[0], rho[1]], xi, self.prob, &self.opts.var_box, tol)?;
        let p = self.prob;
        let report = check_certificate(&cert, &p.plant, &p.xc, &p.uc, p.kind, tol)?;
        Ok((cert, report))
    }

    pub fn objective_value(&self, cert: &Certificate) -> f64 {
        match self.opts.objective {
            Objective::Phi1 => cert.rho[0] + cert.rho[1],
            Objective::Phi2 => cert.xi.sum(),
        }
    }

    /// One full restart: initialize, iterate, certify.
    pub fn restart(&self, index: usize) -> Result<SynthesisResult> {
        let it = self.initialize(index)?;
        let (it, log, converged) = self.run(it)?;
        if it.stage != Stage::Main {
            return Err(Error::Infeasible("rho_min was not reached".into()));
        }
        let (cert, report) = self.certify(&it.z)?;
        if !report.passed {
            return Err(Error::Infeasible(format!("completed certificate fails: {report}")));
        }
        let history = log.iter().filter(|r| r.stage == Stage::Main).map(|r| r.merit).collect();
        Ok(SynthesisResult {
            objective_value: self.objective_value(&cert),
            cert,
            history,
            restart_index: index,
            converged,
            report,
            log,
            restarts: Vec::new(),
        })
    }
}

/// Multi-start synthesis. Fails with [`Error::NoFeasiblePoint`] when no
/// restart produces a certified point.
pub fn synthesize(prob: &Problem, opts: &SynthesisOptions) -> Result<SynthesisResult> {
    let syn = Synthesizer::new(prob, opts)?;
    let runs: Vec<Result<SynthesisResult>> = (0..opts.restarts).into_par_iter().map(|k| syn.restart(k)).collect();
    let mut outcomes = Vec::with_capacity(runs.len());
    let mut best: Option<SynthesisResult> = None;
    for run in runs {
        match run {
            Ok(r) => {
                outcomes.push(RestartOutcome::Certified { objective: r.objective_value, gamma: r.cert.gamma });
                let better = match &best {
                    None => true,
                    Some(b) => {
                        r.objective_value > b.objective_value
                            || (r.objective_value == b.objective_value && r.cert.gamma > b.cert.gamma)
                    }
                };
                if better {
                    best = Some(r);
                }
            }
            Err(e @ (Error::DimensionMismatch(_) | Error::InvalidModel(_) | Error::NonFinite(_))) => return Err(e),
            Err(e) => outcomes.push(RestartOutcome::Failed(e.to_string())),
        }
    }
    let mut best = best.ok_or(Error::NoFeasiblePoint)?;
    best.restarts = outcomes;
    Ok(best)
}

/// The certificate at an iterate, without completion (for inspection).
pub fn iterate_certificate(syn: &Synthesizer<'_>, it: &Iterate) -> Result<Certificate> {
    certificate_from_vector(syn.layout(), &it.z)
}
