use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Certificate, Problem};
use crate::error::Result;
use crate::model::{build_closed_loop, ReferenceKind};
use crate::numlin::Vector;
use crate::polyhedra::{vertices, Support};
use crate::sim::{simulate_monitored, Constraint, Monitor, ReferenceSignal, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FalsifyOptions {
    pub n_samples: usize,
    pub horizon: f64,
    pub dt: f64,
    pub tol: f64,
    pub seed: u64,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self { n_samples: 100, horizon: 300.0, dt: 1e-3, tol: 1e-6, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    LeftInvariant,
    State,
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub t: f64,
    pub kind: ViolationKind,
    pub margin: f64,
}

/// Simulates from points on the boundary of the certified set under extreme
/// admissible references and reports the worst excursion of each kind per
/// sample. A valid certificate yields an empty list.
///
/// Starts are random convex combinations of the vertices of one facet when
/// the closed loop has at most four states, LP-maximal points along random
/// directions otherwise.
pub fn falsify_by_simulation(cert: &Certificate, prob: &Problem, opts: &FalsifyOptions) -> Result<Vec<Violation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = boundary_points(cert, opts.n_samples, &mut rng)?;
    let [hi, lo] = cert.rho;
    let refs: Vec<ReferenceSignal> = (0..opts.n_samples)
        .map(|s| match (s % 4, prob.kind) {
            (0, _) => ReferenceSignal::constant(hi),
            (1, _) => ReferenceSignal::constant(-lo),
            (3, ReferenceKind::Sinusoid { omega }) => ReferenceSignal::Sinusoid {
                amplitude: hi.min(lo),
                omega,
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            },
            _ => ReferenceSignal::Square { high: hi, low: -lo, period: rng.gen_range(2.0..100.0) },
        })
        .collect();

    let cl = build_closed_loop(&prob.plant, &cert.gains, prob.alpha())?;
    let mon = Monitor { xc: &prob.xc, uc: &prob.uc, inv: Some(&cert.inv), tol: opts.tol };
    let steps = (opts.horizon / opts.dt).round() as usize;
    let cfg = SimConfig { horizon: opts.horizon, dt: opts.dt, decimate: steps.max(1) };

    let per_sample: Vec<Result<Vec<Violation>>> = starts
        .par_iter()
        .zip(refs.par_iter())
        .enumerate()
        .map(|(s, (x0, sig))| {
            let (_, hits) = simulate_monitored(&cl, &cert.gains, &prob.plant, sig, x0, &cfg, Some(&mon))?;
            let mut worst: Vec<Violation> = Vec::new();
            for h in hits {
                let kind = match h.constraint {
                    Constraint::Invariant => ViolationKind::LeftInvariant,
                    Constraint::State => ViolationKind::State,
                    Constraint::Input => ViolationKind::Input,
                };
                match worst.iter_mut().find(|w| w.kind == kind) {
                    Some(w) if w.margin < h.margin => {
                        w.margin = h.margin;
                        w.t = h.t;
                    }
                    Some(_) => {}
                    None => worst.push(Violation { sample: s, t: h.t, kind, margin: h.margin }),
                }
            }
            Ok(worst)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_sample {
        out.extend(r?);
    }
    Ok(out)
}

fn boundary_points(cert: &Certificate, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vector>> {
    let poly = cert.inv.polyhedron()?;
    let n_cl = poly.dim();
    if n_cl <= 4 {
        let verts = vertices(&poly)?;
        let lcl = cert.inv.l_cl();
        // vertices on each facet
        let facets: Vec<Vec<usize>> = (0..lcl.nrows())
            .map(|i| {
                (0..verts.len())
                    .filter(|&k| ((lcl.row(i) * &verts[k])[0] - 1.0).abs() <= 1e-7)
                    .collect::<Vec<_>>()
            })
            .filter(|f: &Vec<usize>| !f.is_empty())
            .collect();
        if facets.is_empty() {
            return Ok(vec![Vector::zeros(n_cl); count]);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let f = &facets[rng.gen_range(0..facets.len())];
            let w: Vec<f64> = f.iter().map(|_| -rng.gen_range(f64::EPSILON..1.0).ln()).collect();
            let total: f64 = w.iter().sum();
            let mut x = Vector::zeros(n_cl);
            for (k, wk) in f.iter().zip(&w) {
                x += &verts[*k] * (wk / total);
            }
            out.push(x);
        }
        Ok(out)
    } else {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let dir: Vec<f64> = (0..n_cl).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if let Support::Bounded { point, .. } = poly.support(&dir)? {
                out.push(point);
            }
        }
        Ok(out)
    }
}
