//! Point localization: nearest scattering set in Hausdorff distance, and
//! refinement of the source position with the forward model.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use super::hausdorff::{hausdorff_cutoff, PreparedSet, SetDistance};
use crate::data::{scattering_set, BoundarySample, Dataset, ScatteringSet};
use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::{integrate_geodesic, FlowOptions, GeodesicRecord, GeodesicState};

/// Distances closer than this to the minimum count as ties.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub id: String,
    pub index: usize,
    pub distance: SetDistance,
    /// Second smallest distance, when the dataset has more than one set.
    pub runner_up: Option<f64>,
}

/// A dataset prepared for repeated localization queries.
#[derive(Debug, Clone)]
pub struct LocalizeIndex {
    pub len: f64,
    ids: Vec<String>,
    sets: Vec<PreparedSet>,
}

impl LocalizeIndex {
    pub fn new(ds: &Dataset) -> Result<Self> {
        if ds.sets.is_empty() {
            return Err(Error::InsufficientData { reason: "dataset has no scattering sets".into(), achieved: 0.0 });
        }
        let sets = ds.sets.iter().map(|s| PreparedSet::new(s, ds.boundary_len)).collect::<Result<Vec<_>>>()?;
        Ok(LocalizeIndex { len: ds.boundary_len, ids: ds.ids(), sets })
    }

    pub fn prepare(&self, target: &ScatteringSet) -> Result<PreparedSet> {
        PreparedSet::new(target, self.len)
    }

    pub fn localize(&self, target: &PreparedSet) -> Result<Localization> {
        // shared pruning bound: best distance so far plus the tie margin
        let bound = AtomicU64::new(f64::INFINITY.to_bits());
        let dists: Vec<SetDistance> = self
            .sets
            .par_iter()
            .map(|s| {
                let cutoff = f64::from_bits(bound.load(Ordering::Relaxed));
                let d = hausdorff_cutoff(target, s, cutoff);
                if d.value + TIE_TOL < cutoff {
                    bound.fetch_min((d.value + TIE_TOL).to_bits(), Ordering::Relaxed);
                }
                d
            })
            .collect();
        let best = dists.iter().map(|d| d.value).fold(f64::INFINITY, f64::min);
        let ties: Vec<usize> = (0..dists.len()).filter(|&i| dists[i].value <= best + TIE_TOL).collect();
        if ties.len() > 1 {
            return Err(Error::Ambiguous(ties.iter().map(|&i| self.ids[i].clone()).collect()));
        }
        let index = ties[0];
        let runner_up = (0..dists.len()).filter(|&i| i != index).map(|i| dists[i].value).reduce(f64::min);
        Ok(Localization { id: self.ids[index].clone(), index, distance: dists[index], runner_up })
    }
}

/// Dataset set closest to `target` in Hausdorff distance.
pub fn localize(ds: &Dataset, target: &ScatteringSet) -> Result<Localization> {
    let index = LocalizeIndex::new(ds)?;
    index.localize(&index.prepare(target)?)
}

#[derive(Debug, Clone)]
pub struct RefineOptions {
    /// Direction grid of the forward model; must match the target's.
    pub grid: usize,
    pub restarts: usize,
    /// Half-width of the first golden-section bracket.
    pub bracket: f64,
    /// Objective value accepted without further search.
    pub accept: f64,
    /// Final bracket width of each line search.
    pub xtol: f64,
}

impl RefineOptions {
    pub fn new(grid: usize) -> Self {
        RefineOptions { grid, restarts: 3, bracket: 0.05, accept: 1e-9, xtol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub x: Vec<f64>,
    pub distance: f64,
    pub evaluations: usize,
}

/// Backward geodesic `γ_{q,−η}` of a complete exit sample.
pub fn backward_chord(m: &Manifold, sample: &BoundarySample) -> Result<GeodesicRecord> {
    let q = m.boundary_point(sample.s)?;
    let f = m.frame_at(&q);
    let (t, nu) = (sample.eta_t[0], sample.eta_nu.unwrap_or(0.0));
    let v: Vec<f64> = (0..2).map(|k| -(t * f.tangent[0][k] + nu * f.normal[k])).collect();
    integrate_geodesic(m, &GeodesicState::new(&q, &v), &FlowOptions::stored())
}

fn polyline(rec: &GeodesicRecord) -> Vec<(f64, [f64; 2])> {
    let mut out = vec![(0.0, [rec.start.x[0], rec.start.x[1]])];
    for st in &rec.steps {
        for j in 1..=8 {
            let t = (st.t0 + st.h * j as f64 / 8.0).min(rec.t_end);
            let s = rec.state_at(t).unwrap();
            out.push((t, [s.x[0], s.x[1]]));
        }
    }
    out
}

/// Transversal intersection of two curves, located on the polylines and
/// polished by Newton iteration on the continuous extensions.
fn intersect(a: &GeodesicRecord, b: &GeodesicRecord) -> Option<Vec<f64>> {
    let (pa, pb) = (polyline(a), polyline(b));
    let cross = |u: [f64; 2], w: [f64; 2]| u[0] * w[1] - u[1] * w[0];
    let mut guess = None;
    'outer: for wa in pa.windows(2) {
        let (p0, p1) = (wa[0].1, wa[1].1);
        let r = [p1[0] - p0[0], p1[1] - p0[1]];
        for wb in pb.windows(2) {
            let (q0, q1) = (wb[0].1, wb[1].1);
            let s = [q1[0] - q0[0], q1[1] - q0[1]];
            let den = cross(r, s);
            if den.abs() < 1e-14 {
                continue;
            }
            let qp = [q0[0] - p0[0], q0[1] - p0[1]];
            let u = cross(qp, s) / den;
            let w = cross(qp, r) / den;
            if (0.0..=1.0).contains(&u) && (0.0..=1.0).contains(&w) {
                guess = Some((wa[0].0 + u * (wa[1].0 - wa[0].0), wb[0].0 + w * (wb[1].0 - wb[0].0)));
                break 'outer;
            }
        }
    }
    let (mut ta, mut tb) = guess?;
    for _ in 0..20 {
        let (sa, sb) = (a.state_at(ta.clamp(0.0, a.t_end))?, b.state_at(tb.clamp(0.0, b.t_end))?);
        let r = [sa.x[0] - sb.x[0], sa.x[1] - sb.x[1]];
        // solve [va, −vb] (dta, dtb) = −r
        let det = sa.v[0] * (-sb.v[1]) - (-sb.v[0]) * sa.v[1];
        if det.abs() < 1e-12 {
            return None;
        }
        let dta = (-r[0] * (-sb.v[1]) + sb.v[0] * (-r[1])) / det;
        let dtb = (sa.v[0] * (-r[1]) - sa.v[1] * (-r[0])) / det;
        ta += dta;
        tb += dtb;
        if dta.abs() + dtb.abs() < 1e-14 {
            break;
        }
    }
    let (sa, sb) = (a.state_at(ta.clamp(0.0, a.t_end))?, b.state_at(tb.clamp(0.0, b.t_end))?);
    if (sa.x[0] - sb.x[0]).hypot(sa.x[1] - sb.x[1]) > 1e-8 {
        return None;
    }
    Some(sa.x)
}

/// Source position estimated as the common point of backward chords of
/// well-separated samples (coordinate-wise median over several pairs).
pub fn chord_intersection(m: &Manifold, target: &ScatteringSet) -> Result<Vec<f64>> {
    let usable: Vec<&BoundarySample> = target.samples.iter().filter(|s| s.eta_nu.map_or(false, |v| v > 0.2)).collect();
    let n = usable.len();
    if n < 8 {
        return Err(Error::InsufficientData { reason: "too few non-grazing samples to trace chords".into(), achieved: n as f64 });
    }
    let picks: Vec<(usize, usize)> = (0..5).map(|k| (k * n / 10, (k * n / 10 + n / 4) % n)).collect();
    let hits: Vec<Vec<f64>> = picks
        .par_iter()
        .map(|&(i, j)| -> Result<Option<Vec<f64>>> {
            let a = backward_chord(m, usable[i])?;
            let b = backward_chord(m, usable[j])?;
            Ok(intersect(&a, &b))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if hits.is_empty() {
        return Err(Error::InsufficientData { reason: "backward chords do not intersect".into(), achieved: 0.0 });
    }
    let median = |k: usize| {
        let mut v: Vec<f64> = hits.iter().map(|h| h[k]).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    Ok(vec![median(0), median(1)])
}

/// Derivative-free refinement of `p ↦ d_H(R^E(p), target)` by golden-section
/// coordinate descent with rotated axes on each restart.
pub fn refine(m: &Manifold, target: &ScatteringSet, start: Option<Vec<f64>>, opts: &RefineOptions) -> Result<Refinement> {
    let len = m.boundary_len()?;
    let tp = PreparedSet::new(target, len)?;
    let mut evals = 0usize;
    let mut objective = |x: &[f64]| -> Result<f64> {
        evals += 1;
        if m.domain.b(x) >= -1e-9 {
            return Ok(f64::INFINITY);
        }
        let s = scattering_set(m, x, opts.grid, true, "trial")?;
        Ok(hausdorff_cutoff(&PreparedSet::new(&s, len)?, &tp, f64::INFINITY).value)
    };
    let mut x = match start {
        Some(x) => x,
        None => chord_intersection(m, target)?,
    };
    let mut fx = objective(&x)?;
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut bracket = opts.bracket;
    for r in 0..opts.restarts {
        if fx <= opts.accept {
            break;
        }
        let rot = r as f64 * PI / (2.0 * opts.restarts as f64);
        for axis in 0..2 {
            let th = rot + axis as f64 * PI / 2.0;
            let e = [th.cos(), th.sin()];
            let at = |a: f64| vec![x[0] + a * e[0], x[1] + a * e[1]];
            let (mut lo, mut hi) = (-bracket, bracket);
            let mut c = hi - gr * (hi - lo);
            let mut d = lo + gr * (hi - lo);
            let mut fc = objective(&at(c))?;
            let mut fd = objective(&at(d))?;
            while hi - lo > opts.xtol {
                if fc < fd {
                    hi = d;
                    d = c;
                    fd = fc;
                    c = hi - gr * (hi - lo);
                    fc = objective(&at(c))?;
                } else {
                    lo = c;
                    c = d;
                    fc = fd;
                    d = lo + gr * (hi - lo);
                    fd = objective(&at(d))?;
                }
            }
            let (a, fa) = if fc < fd { (c, fc) } else { (d, fd) };
            if fa < fx {
                x = at(a);
                fx = fa;
            }
        }
        bracket *= 0.25;
    }
    Ok(Refinement { x, distance: fx, evaluations: evals })
}
