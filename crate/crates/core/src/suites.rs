//! Property suites run by `verify`: each property reports a measured
//! residual and passes when it is strictly below its tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{scattering_set, ScatteringSet};
use crate::domain::{Manifold, TangentFrame};
use crate::error::{Error, Result};
use crate::flow::{integrate_free, integrate_geodesic, unit, FlowOptions, GeodesicState, EPS_EVENT};
use crate::jacobi::{jacobi_field, rotate90};
use crate::metric::{self, inner, norm, Scaled};
use crate::reconstruction::hausdorff::hausdorff;
use crate::reconstruction::invariant::i0_trace;

pub const SUITES: [&str; 5] = ["convexity", "conservation", "jacobi", "hausdorff", "i0"];

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub property: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl PropertyResult {
    fn new(suite: &'static str, property: &'static str, measured: f64, tolerance: f64) -> Self {
        PropertyResult { suite, property, measured, tolerance, pass: measured < tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Replaces every residual tolerance when set.
    pub tolerance: Option<f64>,
    pub seed: u64,
    /// Random samples per sampled property.
    pub samples: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { tolerance: None, seed: 0, samples: 16 }
    }
}

/// Resolves `all` and rejects unknown names.
pub fn suite_names(name: &str) -> Result<Vec<&'static str>> {
    if name == "all" {
        return Ok(SUITES.to_vec());
    }
    SUITES
        .iter()
        .find(|s| **s == name)
        .map(|s| vec![*s])
        .ok_or_else(|| Error::Usage(format!("unknown suite `{name}` (expected one of {}, all)", SUITES.join(", "))))
}

fn interior_points(m: &Manifold, count: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, Vec<f64>)> {
    let bb = &m.domain.bbox;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = vec![rng.gen_range(bb[0].0..bb[0].1), rng.gen_range(bb[1].0..bb[1].1)];
        if m.domain.b(&x) < -0.05 {
            let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let v = unit(m.metric.as_ref(), &x, &[a.cos(), a.sin()]);
            out.push((x, v));
        }
    }
    out
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    // NaN propagates as a failure
    it.fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

fn convexity(m: &Manifold, tol: &dyn Fn(f64) -> f64) -> Result<Vec<PropertyResult>> {
    const S: &str = "convexity";
    let (_, min_eig) = m.is_strictly_convex(256)?;
    let len = m.boundary_len()?;
    let grid: Vec<f64> = (0..512).map(|k| len * k as f64 / 512.0).collect();
    let g = m.metric.as_ref();
    let speed = max_of(grid.iter().map(|&s| {
        let z = m.boundary_point(s).unwrap_or_default();
        let dz = m.boundary_velocity(s).unwrap_or_default();
        (norm(g, &z, &dz) - 1.0).abs()
    }));
    let frame = max_of(grid.iter().map(|&s| {
        let z = m.boundary_point(s).unwrap_or_default();
        let f = m.frame_at(&z);
        let nn = (inner(g, &z, &f.normal, &f.normal) - 1.0).abs();
        let nt = inner(g, &z, &f.normal, &f.tangent[0]).abs();
        nn.max(nt)
    }));
    let induced = max_of(grid.iter().step_by(8).map(|&s| {
        m.boundary_metric(s, TangentFrame::Orthonormal).map(|b| (b[0][0] - 1.0).abs()).unwrap_or(f64::NAN)
    }));
    Ok(vec![
        // a certificate rather than a residual: its threshold is not overridden
        PropertyResult::new(S, "min_shape_eigenvalue_negated", -min_eig, -crate::domain::EPS_CONVEX),
        PropertyResult::new(S, "arclength_speed", speed, tol(1e-8)),
        PropertyResult::new(S, "frame_orthonormality", frame, tol(1e-10)),
        PropertyResult::new(S, "induced_metric_identity", induced, tol(1e-10)),
    ])
}

fn conservation(m: &Manifold, opts: &SuiteOptions, tol: &dyn Fn(f64) -> f64) -> Result<Vec<PropertyResult>> {
    const S: &str = "conservation";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts = interior_points(m, opts.samples, &mut rng);
    let g = m.metric.as_ref();
    let fo = FlowOptions::default();
    let rows: Vec<(f64, f64, f64)> = starts
        .par_iter()
        .map(|(x, v)| {
            let st = GeodesicState::new(x, v);
            let drift = integrate_free(g, &st, 10.0, &fo).map(|r| r.max_drift).unwrap_or(f64::INFINITY);
            let back = integrate_free(g, &st, 2.0, &fo)
                .and_then(|r| integrate_free(g, &r.end.reversed(), 2.0, &fo))
                .map(|r| (r.end.x[0] - x[0]).hypot(r.end.x[1] - x[1]))
                .unwrap_or(f64::INFINITY);
            let on = integrate_geodesic(m, &st, &fo).map(|r| m.domain.b(&r.exit().x_exit).abs()).unwrap_or(f64::INFINITY);
            (drift, back, on)
        })
        .collect();
    Ok(vec![
        PropertyResult::new(S, "speed_drift_t10", max_of(rows.iter().map(|r| r.0)), tol(1e-7)),
        PropertyResult::new(S, "reversibility", max_of(rows.iter().map(|r| r.1)), tol(1e-6)),
        PropertyResult::new(S, "exit_on_boundary", max_of(rows.iter().map(|r| r.2)), tol(10.0 * EPS_EVENT)),
    ])
}

/// Relative error between a Jacobi field with `J(0) = 0, D_t J(0) = w` and
/// the central difference of geodesics started at `v ± δw`.
pub fn jacobi_variation_error(m: &Manifold, x: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    let g = m.metric.as_ref();
    let rec = integrate_geodesic(m, &GeodesicState::new(x, v), &FlowOptions::stored())?;
    let t = 0.9 * rec.t_end;
    let sol = jacobi_field(g, &rec, &[0.0, 0.0], w)?;
    let (j, _) = sol.at(g, t)?;
    let d = 1e-4;
    let fine = FlowOptions { rtol: 1e-12, atol: 1e-12, ..FlowOptions::default() };
    let shot = |sgn: f64| -> Result<Vec<f64>> {
        let v2: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + sgn * d * b).collect();
        Ok(integrate_free(g, &GeodesicState::new(x, &v2), t, &fine)?.end.x)
    };
    let (p, q) = (shot(1.0)?, shot(-1.0)?);
    let fd: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * d)).collect();
    let err = (fd[0] - j[0]).hypot(fd[1] - j[1]);
    Ok(err / j[0].hypot(j[1]).max(1e-12))
}

fn jacobi(m: &Manifold, opts: &SuiteOptions, tol: &dyn Fn(f64) -> f64) -> Result<Vec<PropertyResult>> {
    const S: &str = "jacobi";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6a);
    let starts = interior_points(m, opts.samples, &mut rng);
    let g = m.metric.as_ref();
    let rows: Vec<(f64, f64)> = starts
        .par_iter()
        .map(|(x, v)| {
            let w = rotate90(g, x, v);
            let var = jacobi_variation_error(m, x, v, &w).unwrap_or(f64::INFINITY);
            // a tangential field t·v stays tangential with unit rate
            let tangential = integrate_geodesic(m, &GeodesicState::new(x, v), &FlowOptions::stored())
                .and_then(|rec| {
                    let sol = jacobi_field(g, &rec, &[0.0, 0.0], v)?;
                    let (j, _) = sol.end();
                    let end = &rec.end;
                    let along = inner(g, &end.x, j, &end.v);
                    Ok((along - rec.t_end).abs() / rec.t_end.max(1e-12))
                })
                .unwrap_or(f64::INFINITY);
            (var, tangential)
        })
        .collect();
    Ok(vec![
        PropertyResult::new(S, "variation_relative_error", max_of(rows.iter().map(|r| r.0)), tol(1e-4)),
        PropertyResult::new(S, "tangential_field_rate", max_of(rows.iter().map(|r| r.1)), tol(1e-6)),
    ])
}

/// `max_a min_b ‖a − b‖` both ways, by exhaustive search.
pub fn hausdorff_brute(a: &ScatteringSet, b: &ScatteringSet, len: f64) -> f64 {
    let d = |x: &[f64; 2], y: &[f64; 2]| crate::data::sample_distance(len, x[0], x[1], y[0], y[1]);
    let (pa, pb) = (a.points(), b.points());
    let dir = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        p.iter().map(|x| q.iter().map(|y| d(x, y)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    dir(&pa, &pb).max(dir(&pb, &pa))
}

fn hausdorff_suite(m: &Manifold, opts: &SuiteOptions, tol: &dyn Fn(f64) -> f64) -> Result<Vec<PropertyResult>> {
    const S: &str = "hausdorff";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4d);
    let pts = interior_points(m, 3 * opts.samples.div_ceil(3).max(1), &mut rng);
    let sets: Vec<ScatteringSet> = pts
        .par_iter()
        .enumerate()
        .map(|(k, (x, _))| scattering_set(m, x, 64, true, &format!("h{k}")))
        .collect::<Result<_>>()?;
    let len = m.boundary_len()?;
    let (mut sym, mut tri, mut brute, mut ident): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for c in sets.chunks(3) {
        let (a, b, cc) = (&c[0], &c[1], &c[2]);
        let ab = hausdorff(a, b, len)?.value;
        let ba = hausdorff(b, a, len)?.value;
        let bc = hausdorff(b, cc, len)?.value;
        let ac = hausdorff(a, cc, len)?.value;
        sym = sym.max((ab - ba).abs());
        tri = tri.max(ac - ab - bc);
        brute = brute.max((ab - hausdorff_brute(a, b, len)).abs());
        ident = ident.max(hausdorff(a, a, len)?.value);
    }
    Ok(vec![
        PropertyResult::new(S, "symmetry", sym, tol(1e-15)),
        PropertyResult::new(S, "triangle_excess", tri, tol(1e-12)),
        PropertyResult::new(S, "brute_force_agreement", brute, tol(1e-15)),
        PropertyResult::new(S, "identity", ident, tol(1e-15)),
    ])
}

fn i0_suite(m: &Manifold, opts: &SuiteOptions, tol: &dyn Fn(f64) -> f64) -> Result<Vec<PropertyResult>> {
    const S: &str = "i0";
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x10);
    let starts = interior_points(m, opts.samples, &mut rng);
    let g = m.metric.as_ref();
    let c = 2.5;
    let scaled = Scaled { inner: m.metric.clone(), factor: c };
    let target = c.powf(-1.0 / 3.0);
    let rows: Vec<(f64, f64)> = starts
        .par_iter()
        .map(|(x, v)| {
            let rec = match integrate_geodesic(m, &GeodesicState::new(x, v), &FlowOptions { rtol: 1e-12, atol: 1e-12, ..FlowOptions::stored() }) {
                Ok(r) => r,
                Err(_) => return (f64::INFINITY, f64::INFINITY),
            };
            let same = i0_trace(g, g, &rec, 200).map(|t| t.max_rel_var).unwrap_or(f64::INFINITY);
            let sc = i0_trace(g, &scaled, &rec, 200)
                .map(|t| {
                    // normalized by g(v, v) along the record
                    max_of(t.times.iter().zip(&t.values).map(|(tt, val)| {
                        let s = rec.state_at(*tt).expect("inside record");
                        (val / metric::inner(g, &s.x, &s.v, &s.v) - target).abs()
                    }))
                })
                .unwrap_or(f64::INFINITY);
            (same, sc)
        })
        .collect();
    Ok(vec![
        PropertyResult::new(S, "equal_metric_variation", max_of(rows.iter().map(|r| r.0)), tol(1e-9)),
        PropertyResult::new(S, "scaled_metric_constant", max_of(rows.iter().map(|r| r.1)), tol(1e-8)),
    ])
}

/// Runs the named suites (`all` for every one) in a fixed order.
pub fn run_suites(m: &Manifold, name: &str, opts: &SuiteOptions) -> Result<Vec<PropertyResult>> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let names = suite_names(name)?;
    let tol = |default: f64| opts.tolerance.unwrap_or(default);
    let mut out = Vec::new();
    for s in names {
        out.extend(match s {
            "convexity" => convexity(m, &tol)?,
            "conservation" => conservation(m, opts, &tol)?,
            "jacobi" => jacobi(m, opts, &tol)?,
            "hausdorff" => hausdorff_suite(m, opts, &tol)?,
            _ => i0_suite(m, opts, &tol)?,
        });
    }
    Ok(out)
}

pub fn results_to_csv(results: &[PropertyResult]) -> String {
    let mut s = String::from("suite,property,measured,tolerance,status\n");
    for r in results {
        s.push_str(&format!(
            "{},{},{:.16e},{:.16e},{}\n",
            r.suite,
            r.property,
            r.measured,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    s
}
