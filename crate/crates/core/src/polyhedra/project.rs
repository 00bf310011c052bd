use std::fmt::Write as _;

use super::{vertices, Polyhedron, Support};
use crate::error::{Error, Result};
use crate::numlin::{fmt_sig, Matrix, Vector};

const MAX_PROJECT_DIM: usize = 8;
const ZERO_COEF: f64 = 1e-12;
const REDUNDANT_TOL: f64 = 1e-9;

#[derive(Clone)]
struct Row {
    a: Vec<f64>,
    b: f64,
}

impl Row {
    /// Scales so the largest remaining coefficient has magnitude one.
    fn normalized(mut self, live: usize) -> Option<Row> {
        let s = self.a[..live].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if s <= ZERO_COEF {
            return None;
        }
        self.a.iter_mut().for_each(|v| *v /= s);
        self.b /= s;
        Some(self)
    }
}

/// Orthogonal projection onto coordinates `dims` by Fourier–Motzkin
/// elimination, pruning redundant rows with one LP per row after every step.
pub fn project_2d(poly: &Polyhedron, dims: (usize, usize)) -> Result<Polyhedron> {
    let n = poly.dim();
    if dims.0 >= n || dims.1 >= n || dims.0 == dims.1 {
        return Err(Error::DimensionMismatch(format!(
            "projection coordinates {dims:?} invalid for dimension {n}"
        )));
    }
    if n > MAX_PROJECT_DIM {
        return Err(Error::TooHighDimensional { dim: n, max: MAX_PROJECT_DIM });
    }
    if !poly.is_bounded()? {
        return Err(Error::Unbounded);
    }

    // kept coordinates first, eliminated ones after
    let order: Vec<usize> = [dims.0, dims.1]
        .into_iter()
        .chain((0..n).filter(|k| *k != dims.0 && *k != dims.1))
        .collect();
    let p = poly.shape();
    let mut rows: Vec<Row> = (0..poly.num_rows())
        .map(|i| Row { a: order.iter().map(|&k| p[(i, k)]).collect(), b: poly.offset()[i] })
        .collect();
    let mut infeasible = Vec::new();

    for live in (2..n).rev() {
        let (mut keep, mut pos, mut neg) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            let c = r.a[live];
            if c > ZERO_COEF {
                pos.push(r);
            } else if c < -ZERO_COEF {
                neg.push(r);
            } else {
                keep.push(r);
            }
        }
        for rp in &pos {
            for rn in &neg {
                let (sp, sn) = (1.0 / rp.a[live], -1.0 / rn.a[live]);
                keep.push(Row {
                    a: rp.a.iter().zip(&rn.a).map(|(x, y)| sp * x + sn * y).collect(),
                    b: sp * rp.b + sn * rn.b,
                });
            }
        }
        rows = Vec::new();
        for r in keep {
            match r.clone().normalized(live) {
                Some(nr) => rows.push(nr),
                None if r.b < -REDUNDANT_TOL => infeasible.push(r),
                None => {}
            }
        }
        rows = prune(rows, live)?;
    }

    let m = rows.len() + usize::from(!infeasible.is_empty());
    let mut shape = Matrix::zeros(m, 2);
    let mut offset = Vector::zeros(m);
    for (i, r) in rows.iter().enumerate() {
        shape[(i, 0)] = r.a[0];
        shape[(i, 1)] = r.a[1];
        offset[i] = r.b;
    }
    if let Some(r) = infeasible.first() {
        // 0 <= b < 0 keeps an empty projection empty
        offset[m - 1] = r.b;
    }
    Polyhedron::new(shape, offset)
}

fn prune(rows: Vec<Row>, live: usize) -> Result<Vec<Row>> {
    let mut uniq: Vec<Row> = Vec::new();
    for r in rows {
        match uniq
            .iter_mut()
            .find(|u| u.a[..live].iter().zip(&r.a[..live]).all(|(x, y)| (x - y).abs() <= REDUNDANT_TOL))
        {
            Some(u) => u.b = u.b.min(r.b),
            None => uniq.push(r),
        }
    }
    let mut i = 0;
    while i < uniq.len() && uniq.len() > 1 {
        let mut shape = Matrix::zeros(uniq.len(), live);
        let mut offset = Vector::zeros(uniq.len());
        for (k, r) in uniq.iter().enumerate() {
            for j in 0..live {
                shape[(k, j)] = r.a[j];
            }
            offset[k] = if k == i { r.b + 1.0 } else { r.b };
        }
        let relaxed = Polyhedron::new(shape, offset)?;
        let redundant = match relaxed.support(&uniq[i].a[..live])? {
            Support::Bounded { value, .. } => value <= uniq[i].b + REDUNDANT_TOL,
            Support::Unbounded => false,
            // the other rows are already inconsistent; keep everything
            Support::Empty => false,
        };
        if redundant {
            uniq.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(uniq)
}

/// Vertex list of a planar polyhedron as CSV, counterclockwise around the
/// centroid, with an `x,y` header.
pub fn polygon_csv(poly: &Polyhedron) -> Result<String> {
    if poly.dim() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "polygon export needs a planar set, got dimension {}",
            poly.dim()
        )));
    }
    let verts = ccw_vertices(poly)?;
    let mut out = String::from("x,y\n");
    for v in verts {
        let _ = writeln!(out, "{},{}", fmt_sig(v[0]), fmt_sig(v[1]));
    }
    Ok(out)
}

/// Vertices of a planar polyhedron sorted counterclockwise.
pub fn ccw_vertices(poly: &Polyhedron) -> Result<Vec<Vector>> {
    let mut verts = vertices(poly)?;
    if verts.is_empty() {
        return Ok(verts);
    }
    let k = verts.len() as f64;
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / k;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / k;
    verts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    Ok(verts)
}
