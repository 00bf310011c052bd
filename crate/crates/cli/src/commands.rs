use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rpitrack_core::certify::{check_certificate, Certificate, DEFAULT_CERT_TOL};
use rpitrack_core::model::build_closed_loop;
use rpitrack_core::numlin::Vector;
use rpitrack_core::polyhedra::{polygon_csv, project_2d};
use rpitrack_core::sim::{simulate_monitored, Constraint, Monitor, MonitorViolation};
use rpitrack_core::synth::{synthesize, RestartOutcome, SynthesisResult};
use rpitrack_core::Error;

use crate::manifest::{write_atomic, RunManifest};
use crate::problem::ProblemFile;
use crate::signal::parse_signal;

/// Default constraint tolerance of the simulation monitor.
pub const DEFAULT_MONITOR_TOL: f64 = 1e-6;

/// Violations listed individually in the report; the rest are only counted.
const REPORT_LIMIT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    CertificateFailed = 1,
    BadInput = 2,
    NoFeasiblePoint = 3,
    Numerical = 4,
    OutsideReferenceSet = 5,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

pub fn exit_for(e: &Error) -> Exit {
    match e {
        Error::Parse { .. }
        | Error::DimensionMismatch(_)
        | Error::InvalidModel(_)
        | Error::NonFinite(_)
        | Error::TooHighDimensional { .. } => Exit::BadInput,
        Error::NoFeasiblePoint | Error::NoStabilizingGains(_) | Error::Infeasible(_) => Exit::NoFeasiblePoint,
        Error::NumericalBreakdown(_)
        | Error::RankDeficient { .. }
        | Error::Unbounded
        | Error::EmptyInner
        | Error::NonFiniteState(_) => Exit::Numerical,
    }
}

/// Flags shared by every verb.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOpts {
    /// Synthesis seed, overriding the problem file.
    pub seed: Option<u64>,
    /// Convergence tolerance for `synthesize`, residual tolerance for
    /// `certify`, monitor and admissibility tolerance for `simulate`.
    pub tol: Option<f64>,
    /// Make an inadmissible reference a hard error (exit 5).
    pub strict: bool,
    pub out_dir: PathBuf,
}

impl Default for GlobalOpts {
    fn default() -> Self {
        Self { seed: None, tol: None, strict: false, out_dir: PathBuf::from(".") }
    }
}

#[derive(Debug)]
struct Failure {
    exit: Exit,
    msg: String,
}

impl Failure {
    fn new(exit: Exit, msg: impl Into<String>) -> Self {
        Self { exit, msg: msg.into() }
    }

    fn core(path: &Path, e: Error) -> Self {
        let msg = match &e {
            Error::Parse { line, msg } => format!("{}:{line}: {msg}", path.display()),
            other => format!("{}: {other}", path.display()),
        };
        Self::new(exit_for(&e), msg)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(exit_for(&e), e.to_string())
    }
}

type Outcome = Result<(Exit, String), Failure>;

fn read_input(path: &Path, role: &str, m: &mut RunManifest) -> Result<String, Failure> {
    let bytes = fs::read(path);
    m.input(role, path, bytes.as_deref().ok());
    let bytes = bytes.map_err(|e| Failure::new(Exit::BadInput, format!("cannot read {}: {e}", path.display())))?;
    String::from_utf8(bytes).map_err(|_| Failure::new(Exit::BadInput, format!("{} is not UTF-8 text", path.display())))
}

fn load_problem(path: &Path, m: &mut RunManifest) -> Result<ProblemFile, Failure> {
    let src = read_input(path, "problem", m)?;
    ProblemFile::parse(&src).map_err(|e| Failure::core(path, e))
}

fn load_certificate(path: &Path, m: &mut RunManifest) -> Result<Certificate, Failure> {
    let src = read_input(path, "certificate", m)?;
    Certificate::from_text(&src).map_err(|e| Failure::core(path, e))
}

fn emit(path: &Path, role: &str, contents: &str, m: &mut RunManifest) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::new(Exit::Numerical, format!("cannot create {}: {e}", dir.display())))?;
    }
    write_atomic(path, contents.as_bytes())
        .map_err(|e| Failure::new(Exit::Numerical, format!("cannot write {}: {e}", path.display())))?;
    m.outputs.push((role.to_string(), path.to_path_buf()));
    Ok(())
}

/// Reports the outcome, writes the manifest and returns the exit status.
fn finish(mut m: RunManifest, started: Instant, outcome: Outcome, g: &GlobalOpts) -> Exit {
    let (exit, summary) = outcome.unwrap_or_else(|f| {
        eprintln!("error: {}", f.msg);
        (f.exit, f.msg)
    });
    m.exit_code = exit.code();
    m.summary = summary;
    m.wall_clock = started.elapsed();
    let path = g.out_dir.join(format!("manifest-{}.txt", m.command));
    let written = fs::create_dir_all(&g.out_dir).and_then(|_| write_atomic(&path, m.to_text().as_bytes()));
    if let Err(e) = written {
        eprintln!("warning: cannot write manifest {}: {e}", path.display());
    }
    exit
}

/// Runs the multi-start synthesis of a problem file. Writes
/// `certificate.txt`, `synthesis.log` and the manifest to `out_dir`.
pub fn cmd_synthesize(problem_path: &Path, restarts: Option<usize>, g: &GlobalOpts) -> Exit {
    let started = Instant::now();
    let mut m = RunManifest::new("synthesize");
    let outcome = synthesize_inner(problem_path, restarts, g, &mut m);
    finish(m, started, outcome, g)
}

fn synthesize_inner(problem_path: &Path, restarts: Option<usize>, g: &GlobalOpts, m: &mut RunManifest) -> Outcome {
    let pf = load_problem(problem_path, m)?;
    let mut opts = pf.synthesis.clone();
    if let Some(s) = g.seed {
        opts.rng_seed = s;
    }
    if let Some(t) = g.tol {
        opts.conv_tol = t;
    }
    if let Some(r) = restarts {
        opts.restarts = r;
    }
    m.seed = Some(opts.rng_seed);
    let res = match synthesize(&pf.problem, &opts) {
        Ok(r) => r,
        Err(Error::NoFeasiblePoint) => {
            return Err(Failure::new(
                Exit::NoFeasiblePoint,
                format!("none of {} restarts (seed {}) produced a certified point", opts.restarts, opts.rng_seed),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let cert_path = g.out_dir.join("certificate.txt");
    emit(&cert_path, "certificate", &res.cert.to_text(), m)?;
    emit(&g.out_dir.join("synthesis.log"), "log", &synthesis_log(&res), m)?;

    let c = &res.cert;
    println!("certified by restart {} (objective {:.6})", res.restart_index, res.objective_value);
    println!("  rho   = [{:.6}, {:.6}]", c.rho[0], c.rho[1]);
    let xi = c.xi.as_array();
    println!("  X_I   = [{:.6}, {:.6}, {:.6}, {:.6}]", xi[0], xi[1], xi[2], xi[3]);
    println!("  gamma = {:.3e}", c.gamma);
    println!("  K = {:?}  K_I1 = {:?}  K_I2 = {:?}  K_r = {:?}", vals(&c.gains.k), vals(&c.gains.k_i1), vals(&c.gains.k_i2), vals(&c.gains.k_r));
    println!("certificate written to {}", cert_path.display());
    let exit = if res.report.passed { Exit::Ok } else { Exit::CertificateFailed };
    Ok((exit, format!("objective {} from restart {}", res.objective_value, res.restart_index)))
}

fn vals(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn synthesis_log(res: &SynthesisResult) -> String {
    let mut s = String::from("# restart outcomes\n");
    for (k, o) in res.restarts.iter().enumerate() {
        let _ = match o {
            RestartOutcome::Certified { objective, gamma } => {
                writeln!(s, "restart {k}: certified objective {objective:.6} gamma {gamma:.3e}")
            }
            RestartOutcome::Failed(why) => writeln!(s, "restart {k}: failed: {why}"),
        };
    }
    let _ = writeln!(s, "# iterations of restart {}", res.restart_index);
    s.push_str("iter stage status merit gamma rho1 rho2 xi_sum radius\n");
    for r in &res.log {
        let _ = writeln!(
            s,
            "{} {:?} {:?} {:.9} {:.3e} {:.6} {:.6} {:.6} {:.3e}",
            r.iter, r.stage, r.status, r.merit, r.gamma, r.rho[0], r.rho[1], r.xi_sum, r.radius
        );
    }
    let _ = writeln!(s, "# converged {}", res.converged);
    s
}

/// Checks every relation of a certificate against a problem and prints the
/// residual table.
pub fn cmd_certify(certificate_path: &Path, problem_path: &Path, g: &GlobalOpts) -> Exit {
    let started = Instant::now();
    let mut m = RunManifest::new("certify");
    let outcome = certify_inner(certificate_path, problem_path, g, &mut m);
    finish(m, started, outcome, g)
}

fn certify_inner(certificate_path: &Path, problem_path: &Path, g: &GlobalOpts, m: &mut RunManifest) -> Outcome {
    let cert = load_certificate(certificate_path, m)?;
    let pf = load_problem(problem_path, m)?;
    let p = &pf.problem;
    let tol = g.tol.unwrap_or(DEFAULT_CERT_TOL);
    let report = check_certificate(&cert, &p.plant, &p.xc, &p.uc, p.kind, tol)?;
    println!("{report}");
    emit(&g.out_dir.join("certify-report.txt"), "report", &report.to_key_values(), m)?;
    if report.passed {
        Ok((Exit::Ok, "certificate passed".into()))
    } else {
        let names: Vec<&str> = report.failures().iter().map(|r| r.name).collect();
        Ok((Exit::CertificateFailed, format!("certificate failed: {}", names.join(" "))))
    }
}

/// Simulates the certified closed loop under a reference signal, monitoring
/// state, input and invariant-set constraints on every integration step.
pub fn cmd_simulate(
    problem_path: &Path,
    certificate_path: &Path,
    signal_spec: Option<&str>,
    out_csv: Option<&Path>,
    g: &GlobalOpts,
) -> Exit {
    let started = Instant::now();
    let mut m = RunManifest::new("simulate");
    let outcome = simulate_inner(problem_path, certificate_path, signal_spec, out_csv, g, &mut m);
    finish(m, started, outcome, g)
}

fn simulate_inner(
    problem_path: &Path,
    certificate_path: &Path,
    signal_spec: Option<&str>,
    out_csv: Option<&Path>,
    g: &GlobalOpts,
    m: &mut RunManifest,
) -> Outcome {
    let pf = load_problem(problem_path, m)?;
    let cert = load_certificate(certificate_path, m)?;
    let p = &pf.problem;
    let sig = match signal_spec {
        Some(spec) => parse_signal(spec).map_err(|e| Failure::new(Exit::BadInput, format!("--signal: {e}")))?,
        None => pf.simulation.signal.clone().ok_or_else(|| {
            Failure::new(Exit::BadInput, "no reference signal: pass --signal or set [simulation] signal")
        })?,
    };
    let n_cl = p.plant.n() + 2;
    if cert.inv.n_cl() != n_cl {
        return Err(Failure::new(
            Exit::BadInput,
            format!("certificate is for {} closed-loop states, the problem has {n_cl}", cert.inv.n_cl()),
        ));
    }
    let cfg = pf.simulation.config;
    let tol = g.tol.unwrap_or(DEFAULT_MONITOR_TOL);

    let (lo, hi) = sig.range(cfg.horizon);
    let [rho1, rho2] = cert.rho;
    let admissible = hi <= rho1 + tol && lo >= -rho2 - tol;
    if !admissible {
        let msg = format!("reference range [{lo}, {hi}] leaves the certified set [{}, {rho1}]", -rho2);
        if g.strict {
            return Err(Failure::new(Exit::OutsideReferenceSet, msg));
        }
        eprintln!("warning: {msg}; the certificate guarantees nothing for this run");
    }

    let cl = build_closed_loop(&p.plant, &cert.gains, p.alpha())?;
    let x0 = Vector::from_vec(pf.simulation.x0.clone().unwrap_or_else(|| vec![0.0; n_cl]));
    let mon = Monitor { xc: &p.xc, uc: &p.uc, inv: Some(&cert.inv), tol };
    let (traj, viol) = simulate_monitored(&cl, &cert.gains, &p.plant, &sig, &x0, &cfg, Some(&mon))?;

    let csv_path = out_csv.map_or_else(|| g.out_dir.join("trajectory.csv"), Path::to_path_buf);
    emit(&csv_path, "trajectory", &traj.to_csv(), m)?;
    let stem = csv_path.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy().into_owned());
    let report_path = csv_path.with_file_name(format!("{stem}-violations.txt"));
    emit(&report_path, "violations", &violation_report(&viol, admissible), m)?;

    println!("{} samples written to {}", traj.len(), csv_path.display());
    if viol.is_empty() {
        println!("no constraint violations");
        Ok((Exit::Ok, format!("{} samples, no violations", traj.len())))
    } else {
        println!("{} constraint violations, see {}", viol.len(), report_path.display());
        Ok((Exit::CertificateFailed, format!("{} violations", viol.len())))
    }
}

fn violation_report(viol: &[MonitorViolation], admissible: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# reference admissible: {admissible}");
    let _ = writeln!(s, "# violations: {}", viol.len());
    for kind in [Constraint::State, Constraint::Input, Constraint::Invariant] {
        let worst = viol.iter().filter(|v| v.constraint == kind).map(|v| v.margin).fold(None, |a: Option<f64>, x| {
            Some(a.map_or(x, |a| a.max(x)))
        });
        if let Some(w) = worst {
            let _ = writeln!(s, "# worst {kind:?}: {w:e}");
        }
    }
    s.push_str("t,constraint,margin\n");
    for v in viol.iter().take(REPORT_LIMIT) {
        let _ = writeln!(s, "{},{:?},{:e}", v.t, v.constraint, v.margin);
    }
    if viol.len() > REPORT_LIMIT {
        let _ = writeln!(s, "# {} more not listed", viol.len() - REPORT_LIMIT);
    }
    s
}

/// Projects the certified invariant set onto two closed-loop coordinates and
/// writes the polygon vertices.
pub fn cmd_project(certificate_path: &Path, dims: (usize, usize), out_csv: Option<&Path>, g: &GlobalOpts) -> Exit {
    let started = Instant::now();
    let mut m = RunManifest::new("project");
    let outcome = project_inner(certificate_path, dims, out_csv, g, &mut m);
    finish(m, started, outcome, g)
}

fn project_inner(
    certificate_path: &Path,
    dims: (usize, usize),
    out_csv: Option<&Path>,
    g: &GlobalOpts,
    m: &mut RunManifest,
) -> Outcome {
    let cert = load_certificate(certificate_path, m)?;
    let n_cl = cert.inv.n_cl();
    if dims.0 >= n_cl || dims.1 >= n_cl || dims.0 == dims.1 {
        return Err(Failure::new(
            Exit::BadInput,
            format!("dims ({}, {}) must be two distinct indices below {n_cl}", dims.0, dims.1),
        ));
    }
    let poly = project_2d(&cert.inv.polyhedron()?, dims)?;
    let csv = polygon_csv(&poly)?;
    let path = out_csv.map_or_else(|| g.out_dir.join(format!("projection-{}-{}.csv", dims.0, dims.1)), Path::to_path_buf);
    emit(&path, "polygon", &csv, m)?;
    let verts = csv.lines().count() - 1;
    println!("{verts} vertices written to {}", path.display());
    Ok((Exit::Ok, format!("{verts} vertices")))
}
