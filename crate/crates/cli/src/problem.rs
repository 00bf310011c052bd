//! Problem files: plant, constraints, reference class, synthesis settings and
//! an optional simulation setup, in the sectioned text format.
//!
//! ```text
//! [plant]
//! A = [
//!   -0.0304  0.0187
//!    0      -0.0187
//! ]
//! B = [
//!   6.6667
//!   10
//! ]
//! C = [1 0]
//!
//! [constraints]
//! x_lower = -0.38 -0.35      # or X = [ ... ] with rows of X x <= 1
//! x_upper = 0.68 0.65
//! u_bound = 2                # or U = [ ... ] with rows of U u <= 1
//!
//! [reference]
//! kind = ramp                # or sinusoid, with omega = ...
//!
//! [synthesis]
//! objective = phi1
//! l = 9
//! restarts = 20
//! seed = 1
//!
//! [simulation]
//! signal = two-tank
//! horizon = 400
//! ```
//!
//! Every error carries the line it refers to.

use rpitrack_core::certify::text::{self, Entry, Section};
use rpitrack_core::certify::Problem;
use rpitrack_core::model::{InputConstraint, PlantModel, ReferenceKind, StateConstraint};
use rpitrack_core::sim::{ReferenceSignal, SimConfig};
use rpitrack_core::synth::{Objective, SynthesisOptions};
use rpitrack_core::{Error, Result};

use crate::signal::parse_signal;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationSpec {
    /// Default signal for `simulate` when none is given on the command line.
    pub signal: Option<ReferenceSignal>,
    pub config: SimConfig,
    /// Closed-loop initial state; zero when absent.
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub synthesis: SynthesisOptions,
    pub simulation: SimulationSpec,
}

fn at<T>(line: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Parse { .. } => e,
        other => Error::Parse { line, msg: other.to_string() },
    })
}

fn fail<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, msg: msg.into() })
}

fn pair(e: &Entry) -> Result<(f64, f64)> {
    match e.floats()?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => fail(e.line, format!("'{}' takes two numbers", e.key)),
    }
}

fn positive(e: &Entry) -> Result<f64> {
    let v = e.scalar()?;
    if v > 0.0 {
        Ok(v)
    } else {
        fail(e.line, format!("'{}' must be positive", e.key))
    }
}

impl ProblemFile {
    pub fn parse(src: &str) -> Result<Self> {
        let doc = text::parse(src)?;
        for s in &doc.sections {
            if !["plant", "constraints", "reference", "synthesis", "simulation"].contains(&s.name.as_str()) {
                return fail(s.line, format!("unknown section [{}]", s.name));
            }
        }

        let ps = doc.section("plant")?;
        ps.only(&["A", "B", "C"])?;
        let plant = at(ps.line, PlantModel::new(ps.matrix("A")?, ps.matrix("B")?, ps.matrix("C")?))?;

        let cs = doc.section("constraints")?;
        cs.only(&["X", "x_lower", "x_upper", "U", "u_bound"])?;
        let xc = state_constraint(cs, plant.n())?;
        let uc = input_constraint(cs, plant.m())?;

        let rs = doc.section("reference")?;
        rs.only(&["kind", "omega"])?;
        let kind_e = rs.entry("kind")?;
        let kind = match (kind_e.word()?, rs.get("omega")) {
            ("ramp", None) => ReferenceKind::Ramp,
            ("ramp", Some(e)) => return fail(e.line, "a ramp reference takes no omega"),
            ("sinusoid", Some(e)) => ReferenceKind::Sinusoid { omega: positive(e)? },
            ("sinusoid", None) => return fail(kind_e.line, "a sinusoid reference needs omega"),
            (other, _) => return fail(kind_e.line, format!("unknown reference kind '{other}' (ramp or sinusoid)")),
        };

        let synthesis = match doc.get("synthesis") {
            Some(s) => {
                let o = synthesis_options(s)?;
                at(s.line, o.validate(plant.n() + 2))?;
                o
            }
            None => SynthesisOptions::default(),
        };
        let simulation = match doc.get("simulation") {
            Some(s) => simulation_spec(s, plant.n() + 2)?,
            None => SimulationSpec::default(),
        };
        Ok(Self { problem: Problem { plant, xc, uc, kind }, synthesis, simulation })
    }
}

fn state_constraint(cs: &Section, n: usize) -> Result<StateConstraint> {
    match (cs.get("X"), cs.get("x_lower"), cs.get("x_upper")) {
        (Some(e), None, None) => {
            let x = e.matrix()?;
            if x.ncols() != n {
                return fail(e.line, format!("X has {} columns, the plant has {n} states", x.ncols()));
            }
            at(e.line, StateConstraint::new(x))
        }
        (None, Some(lo), Some(hi)) => {
            let (l, h) = (lo.floats()?, hi.floats()?);
            for (e, v) in [(lo, &l), (hi, &h)] {
                if v.len() != n {
                    return fail(e.line, format!("'{}' has {} entries, the plant has {n} states", e.key, v.len()));
                }
            }
            at(lo.line, StateConstraint::from_box(&l, &h))
        }
        (Some(e), _, _) => fail(e.line, "give either X or x_lower/x_upper, not both"),
        _ => fail(cs.line, "state constraints need X or both x_lower and x_upper"),
    }
}

fn input_constraint(cs: &Section, m: usize) -> Result<InputConstraint> {
    match (cs.get("U"), cs.get("u_bound")) {
        (Some(e), None) => {
            let u = e.matrix()?;
            if u.ncols() != m {
                return fail(e.line, format!("U has {} columns, the plant has {m} inputs", u.ncols()));
            }
            at(e.line, InputConstraint::new(u))
        }
        (None, Some(e)) => {
            let b = e.floats()?;
            if b.len() != m {
                return fail(e.line, format!("u_bound has {} entries, the plant has {m} inputs", b.len()));
            }
            at(e.line, InputConstraint::symmetric(&b))
        }
        (Some(e), Some(_)) => fail(e.line, "give either U or u_bound, not both"),
        (None, None) => fail(cs.line, "input constraints need U or u_bound"),
    }
}

const BOX_KEYS: [&str; 8] =
    ["gain_box", "geometry_box", "h_diag_box", "multiplier_box", "v_box", "rho_box", "xi_box", "gamma_box"];

fn synthesis_options(s: &Section) -> Result<SynthesisOptions> {
    let mut known = vec![
        "objective",
        "l",
        "restarts",
        "seed",
        "rho_min",
        "gain_range",
        "max_iters",
        "conv_tol",
        "mu",
        "gamma_floor",
        "init_attempts",
    ];
    known.extend(BOX_KEYS);
    s.only(&known)?;
    let mut o = SynthesisOptions::default();
    for e in &s.entries {
        match e.key.as_str() {
            "objective" => {
                o.objective = match e.word()? {
                    "phi1" => Objective::Phi1,
                    "phi2" => Objective::Phi2,
                    other => return fail(e.line, format!("unknown objective '{other}' (phi1 or phi2)")),
                }
            }
            "l" => o.l_rows = e.count()?,
            "restarts" => o.restarts = e.count()?,
            "seed" => o.rng_seed = e.count()? as u64,
            "rho_min" => {
                let (a, b) = pair(e)?;
                o.rho_min = [a, b];
            }
            "gain_range" => o.gain_range = positive(e)?,
            "max_iters" => o.max_outer_iters = e.count()?,
            "conv_tol" => o.conv_tol = positive(e)?,
            "mu" => o.mu = e.scalar()?,
            "gamma_floor" => o.gamma_floor = positive(e)?,
            "init_attempts" => o.init_attempts = e.count()?,
            key => {
                let b = pair(e)?;
                if b.0 > b.1 {
                    return fail(e.line, format!("'{key}' has lower bound above upper bound"));
                }
                let vb = &mut o.var_box;
                *match key {
                    "gain_box" => &mut vb.gains,
                    "geometry_box" => &mut vb.geometry,
                    "h_diag_box" => &mut vb.h_diag,
                    "multiplier_box" => &mut vb.multipliers,
                    "v_box" => &mut vb.v,
                    "rho_box" => &mut vb.rho,
                    "xi_box" => &mut vb.xi,
                    _ => &mut vb.gamma,
                } = b;
            }
        }
    }
    Ok(o)
}

fn simulation_spec(s: &Section, n_cl: usize) -> Result<SimulationSpec> {
    s.only(&["signal", "horizon", "dt", "decimate", "x0"])?;
    let mut spec = SimulationSpec::default();
    if let Some(e) = s.get("signal") {
        let words = match &e.value {
            text::Value::Words(w) => w.join(" "),
            text::Value::Rows(_) => return fail(e.line, "signal is a spec such as 'sinusoid 0.13 1'"),
        };
        spec.signal = Some(parse_signal(&words).or_else(|m| fail(e.line, m))?);
    }
    if let Some(e) = s.get("horizon") {
        spec.config.horizon = positive(e)?;
    }
    if let Some(e) = s.get("dt") {
        spec.config.dt = positive(e)?;
    }
    if let Some(e) = s.get("decimate") {
        spec.config.decimate = e.count()?.max(1);
    }
    if spec.config.dt > spec.config.horizon {
        return fail(s.line, "dt exceeds the horizon");
    }
    if let Some(e) = s.get("x0") {
        let x0 = e.floats()?;
        if x0.len() != n_cl {
            return fail(e.line, format!("x0 has {} entries, the closed loop has {n_cl} states", x0.len()));
        }
        spec.x0 = Some(x0);
    }
    Ok(spec)
}
