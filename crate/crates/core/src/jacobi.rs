//! Jacobi fields along stored geodesics, the differential of the
//! exponential map, and classification of exit directions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::{
    direction, direction_frame, exponential_record, grid_angles, integrate_geodesic, ExitRecord, FlowOptions,
    GeodesicRecord, GeodesicState, EPS_TANGENT, ON_BOUNDARY,
};
use crate::metric::{self, g_singular_values, inner_with, Christoffel, MetricField};
use crate::ode::{rk5_step, System};

pub const EPS_CONJ: f64 = 1e-6;
pub const EPS_SELF: f64 = 1e-6;
pub const INJ_FLOOR: f64 = 1e-3;

/// Geodesic equation together with `m` copies of its linearization
/// `(δx, δv)`. State layout: `x, v, δx₁, δv₁, …, δx_m, δv_m`.
struct LinearizedSystem<'a> {
    metric: &'a dyn MetricField,
    n: usize,
    fields: usize,
}

impl System for LinearizedSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.n * (self.fields + 1)
    }

    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) -> bool {
        let n = self.n;
        let x = &y[..n];
        let v = &y[n..2 * n];
        let Ok(gam) = metric::christoffel(self.metric, x) else { return false };
        let mut dgam = Vec::with_capacity(n);
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            match metric::christoffel_dir_deriv(self.metric, x, &e) {
                Ok(d) => dgam.push(d),
                Err(_) => return false,
            }
        }
        dy[..n].copy_from_slice(v);
        let mut acc = vec![0.0; n];
        gam.contract(v, v, &mut acc);
        for k in 0..n {
            dy[n + k] = -acc[k];
        }
        let mut tmp = vec![0.0; n];
        for f in 0..self.fields {
            let base = 2 * n * (f + 1);
            let dx = &y[base..base + n];
            let dv = &y[base + n..base + 2 * n];
            dy[base..base + n].copy_from_slice(dv);
            // δv' = −(∂_δx Γ)(v,v) − 2 Γ(v, δv)
            gam.contract(v, dv, &mut tmp);
            for k in 0..n {
                let mut s = -2.0 * tmp[k];
                for (c, d) in dgam.iter().enumerate() {
                    if dx[c] != 0.0 {
                        let mut q = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                q += d.get(k, i, j) * v[i] * v[j];
                            }
                        }
                        s -= dx[c] * q;
                    }
                }
                dy[base + n + k] = s;
            }
        }
        dy.iter().all(|a| a.is_finite())
    }
}

/// Jacobi field sampled at the step nodes of its geodesic.
#[derive(Debug, Clone)]
pub struct JacobiSolution {
    pub times: Vec<f64>,
    pub j: Vec<Vec<f64>>,
    /// Covariant derivative `D_t J`.
    pub dj: Vec<Vec<f64>>,
    pub along: GeodesicRecord,
    /// Linearized state `(δx, δv)` at each node.
    raw: Vec<Vec<f64>>,
}

impl JacobiSolution {
    pub fn end(&self) -> (&[f64], &[f64]) {
        (self.j.last().unwrap(), self.dj.last().unwrap())
    }

    /// `(J(t), D_t J(t))` at an arbitrary time, by a fifth-order sub-step
    /// from the preceding node.
    pub fn at(&self, metric: &dyn MetricField, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = metric.dim();
        if t <= 0.0 || self.along.steps.is_empty() {
            return Ok((self.j[0].clone(), self.dj[0].clone()));
        }
        let steps = &self.along.steps;
        let k = steps.partition_point(|s| s.t1() < t).min(steps.len() - 1);
        let st = &steps[k];
        let mut y = st.start().to_vec();
        y.extend_from_slice(&self.raw[k]);
        let mut sys = LinearizedSystem { metric, n, fields: 1 };
        let mut out = vec![0.0; y.len()];
        if !rk5_step(&mut sys, &y, t.min(self.along.t_end) - st.t0, &mut out) {
            return Err(Error::DegenerateMetric { at: y[..n].to_vec(), reason: "Jacobi sub-step failed".into() });
        }
        Ok(split_field(metric, &out[..2 * n], &out[2 * n..4 * n]))
    }
}

fn split_field(metric: &dyn MetricField, xv: &[f64], d: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = metric.dim();
    let (x, v) = xv.split_at(n);
    let (dx, dv) = d.split_at(n);
    let gam = metric::christoffel(metric, x).unwrap_or(Christoffel { dim: n, data: vec![0.0; n * n * n] });
    let mut c = vec![0.0; n];
    gam.contract(v, dx, &mut c);
    (dx.to_vec(), dv.iter().zip(&c).map(|(a, b)| a + b).collect())
}

/// Jacobi fields along a stored geodesic for several initial conditions
/// `(J(0), D_t J(0))`, integrated on the geodesic's own step grid.
pub fn jacobi_fields(metric: &dyn MetricField, record: &GeodesicRecord, inits: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<JacobiSolution>> {
    if !record.has_dense_output() {
        return Err(Error::Usage("Jacobi integration needs a geodesic record with stored steps".into()));
    }
    let n = metric.dim();
    let m = inits.len();
    let x0 = &record.start.x;
    let v0 = &record.start.v;
    let gam0 = metric::christoffel(metric, x0)?;
    let mut d = Vec::with_capacity(2 * n * m);
    for (j0, dj0) in inits {
        let mut c = vec![0.0; n];
        gam0.contract(v0, j0, &mut c);
        d.extend_from_slice(j0);
        d.extend(dj0.iter().zip(&c).map(|(a, b)| a - b));
    }
    let mut sys = LinearizedSystem { metric, n, fields: m };
    let mut raws: Vec<Vec<f64>> = vec![d.clone()];
    let mut times = vec![0.0];
    let mut xvs: Vec<Vec<f64>> = vec![[x0.as_slice(), v0.as_slice()].concat()];
    let mut y = vec![0.0; 2 * n * (m + 1)];
    let mut out = vec![0.0; y.len()];
    for st in &record.steps {
        let h = st.h.min(record.t_end - st.t0);
        y[..2 * n].copy_from_slice(st.start());
        y[2 * n..].copy_from_slice(&d);
        if !rk5_step(&mut sys, &y, h, &mut out) {
            return Err(Error::DegenerateMetric { at: y[..n].to_vec(), reason: "Jacobi step failed".into() });
        }
        d.copy_from_slice(&out[2 * n..]);
        raws.push(d.clone());
        times.push(st.t0 + h);
        xvs.push(out[..2 * n].to_vec());
    }
    let mut sols = Vec::with_capacity(m);
    for f in 0..m {
        let mut js = Vec::with_capacity(times.len());
        let mut djs = Vec::with_capacity(times.len());
        let mut raw = Vec::with_capacity(times.len());
        for (xv, r) in xvs.iter().zip(&raws) {
            let part = &r[2 * n * f..2 * n * (f + 1)];
            let (j, dj) = split_field(metric, xv, part);
            js.push(j);
            djs.push(dj);
            raw.push(part.to_vec());
        }
        sols.push(JacobiSolution { times: times.clone(), j: js, dj: djs, along: record.clone(), raw });
    }
    Ok(sols)
}

pub fn jacobi_field(metric: &dyn MetricField, record: &GeodesicRecord, j0: &[f64], dj0: &[f64]) -> Result<JacobiSolution> {
    Ok(jacobi_fields(metric, record, &[(j0.to_vec(), dj0.to_vec())])?.remove(0))
}

/// Columns `J_i(L)/L` for `J_i(0) = 0`, `D_t J_i(0) = e_i` along a unit-speed record of length L.
fn d_exp_from_record(metric: &dyn MetricField, rec: &GeodesicRecord) -> Result<DMatrix<f64>> {
    let n = metric.dim();
    let len = rec.t_end;
    if len == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let inits: Vec<_> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            (vec![0.0; n], e)
        })
        .collect();
    let sols = jacobi_fields(metric, rec, &inits)?;
    let mut out = DMatrix::zeros(n, n);
    for (i, s) in sols.iter().enumerate() {
        let (j, _) = s.end();
        for k in 0..n {
            out[(k, i)] = j[k] / len;
        }
    }
    Ok(out)
}

/// `D exp_q |_w` in chart coordinates.
pub fn d_exp(m: &Manifold, q: &[f64], w: &[f64]) -> Result<DMatrix<f64>> {
    let rec = exponential_record(m, q, w, &FlowOptions::stored())?;
    d_exp_from_record(m.metric.as_ref(), &rec)
}

/// Singular values of `D exp_q|_w`, measured with g at both ends, descending.
pub fn d_exp_singular_values(m: &Manifold, q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let rec = exponential_record(m, q, w, &FlowOptions::stored())?;
    let map = d_exp_from_record(m.metric.as_ref(), &rec)?;
    Ok(g_singular_values(&map, &metric::metric_at(m.metric.as_ref(), q), &metric::metric_at(m.metric.as_ref(), &rec.end.x)))
}

/// g-rotation by +90° of a planar vector at x.
pub fn rotate90(metric: &dyn MetricField, x: &[f64], v: &[f64]) -> Vec<f64> {
    let mut g = [0.0; 4];
    metric.eval(x, &mut g);
    let gv = [g[0] * v[0] + g[1] * v[1], g[2] * v[0] + g[3] * v[1]];
    let s = (g[0] * g[3] - g[1] * g[2]).sqrt();
    vec![-gv[1] / s, gv[0] / s]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    SelfIntersecting,
    Good,
    Conjugate,
    Tangential,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::SelfIntersecting => "self_intersecting",
            Tag::Good => "good",
            Tag::Conjugate => "conjugate",
            Tag::Tangential => "tangential",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectionClass {
    pub angle: f64,
    pub direction: Vec<f64>,
    pub exit: ExitRecord,
    pub tag: Tag,
    /// `σ_min / σ_max` of `D exp_p` at `τ_exit ξ`.
    pub smin_ratio: f64,
    /// Signed normal component of the perpendicular Jacobi field at exit.
    pub normal_jacobi: f64,
}

pub fn classes_to_csv(classes: &[DirectionClass]) -> String {
    let mut s = String::from("dir_angle,tag,t_exit,smin_ratio\n");
    for c in classes {
        s.push_str(&format!("{:.16e},{},{:.16e},{:.16e}\n", c.angle, c.tag.as_str(), c.exit.t_exit, c.smin_ratio));
    }
    s
}

/// Smallest distance of the stored curve to p over times `t ≥ t_min`.
fn min_distance_after(rec: &GeodesicRecord, p: &[f64], t_min: f64) -> f64 {
    let mut best = f64::INFINITY;
    if rec.t_end < t_min {
        return best;
    }
    let d = |y: &[f64]| (y[0] - p[0]).hypot(y[1] - p[1]);
    let f = |y: &[f64]| (y[0] - p[0]) * y[2] + (y[1] - p[1]) * y[3];
    let mut y = [0.0; 4];
    best = best.min(d(&[rec.end.x.clone(), rec.end.v.clone()].concat()));
    for st in &rec.steps {
        if st.t1() < t_min {
            continue;
        }
        const SUB: usize = 4;
        let a = st.t0.max(t_min);
        let b = st.t1().min(rec.t_end);
        st.eval(a, &mut y);
        best = best.min(d(&y));
        let mut tp = a;
        let mut fp = f(&y);
        for j in 1..=SUB {
            let t = a + (b - a) * j as f64 / SUB as f64;
            st.eval(t, &mut y);
            let fc = f(&y);
            best = best.min(d(&y));
            if fp < 0.0 && fc >= 0.0 {
                let (mut lo, mut hi) = (tp, t);
                let mut ym = [0.0; 4];
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    st.eval(mid, &mut ym);
                    if f(&ym) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                st.eval(0.5 * (lo + hi), &mut ym);
                best = best.min(d(&ym));
            }
            tp = t;
            fp = fc;
        }
    }
    best
}

struct Probe {
    exit: ExitRecord,
    smin_ratio: f64,
    normal_jacobi: f64,
    self_hit: bool,
}

fn probe(m: &Manifold, p: &[f64], xi: &[f64], check_self: bool) -> Result<Probe> {
    let metric = m.metric.as_ref();
    let opts = FlowOptions::stored();
    let fwd = integrate_geodesic(m, &GeodesicState::new(p, xi), &opts)?;
    let exit = fwd.exit().clone();
    let (smin_ratio, normal_jacobi) = if fwd.t_end > 0.0 {
        let map = d_exp_from_record(metric, &fwd)?;
        let sv = g_singular_values(&map, &metric::metric_at(metric, p), &metric::metric_at(metric, &fwd.end.x));
        let perp = rotate90(metric, p, xi);
        let j = map * nalgebra::DVector::from_column_slice(&perp);
        let nend = rotate90(metric, &fwd.end.x, &fwd.end.v);
        let mut g = [0.0; 4];
        metric.eval(&fwd.end.x, &mut g);
        (sv[sv.len() - 1] / sv[0], inner_with(&g, 2, j.as_slice(), &nend))
    } else {
        (1.0, 1.0)
    };
    let self_hit = if check_self {
        let back_dir: Vec<f64> = xi.iter().map(|c| -c).collect();
        let back = integrate_geodesic(m, &GeodesicState::new(p, &back_dir), &opts)?;
        min_distance_after(&fwd, p, INJ_FLOOR) < EPS_SELF || min_distance_after(&back, p, INJ_FLOOR) < EPS_SELF
    } else {
        false
    };
    Ok(Probe { exit, smin_ratio, normal_jacobi, self_hit })
}

fn tag_of(m: &Manifold, p: &[f64], xi: &[f64], pr: &Probe) -> Tag {
    if m.domain.b(p).abs() <= ON_BOUNDARY {
        let nu = m.normal_at(p);
        if metric::inner(m.metric.as_ref(), p, xi, &nu).abs() < EPS_TANGENT {
            return Tag::Tangential;
        }
    }
    if pr.self_hit {
        Tag::SelfIntersecting
    } else if pr.smin_ratio < EPS_CONJ {
        Tag::Conjugate
    } else {
        Tag::Good
    }
}

/// Classifies a single unit direction ξ at p.
pub fn classify_direction(m: &Manifold, p: &[f64], xi: &[f64]) -> Result<DirectionClass> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let frame = direction_frame(m, p);
    let g = metric::metric_at(m.metric.as_ref(), p);
    let gs = g.as_slice();
    let angle = inner_with(gs, 2, xi, &frame[1]).atan2(inner_with(gs, 2, xi, &frame[0])).rem_euclid(2.0 * PI);
    let pr = probe(m, p, xi, true)?;
    let tag = tag_of(m, p, xi, &pr);
    Ok(DirectionClass { angle, direction: xi.to_vec(), exit: pr.exit, tag, smin_ratio: pr.smin_ratio, normal_jacobi: pr.normal_jacobi })
}

/// Classifies the uniform direction grid at p; conjugate directions found
/// between grid neighbours (sign change of the normal Jacobi component at
/// exit) are refined by bisection and inserted in angle order.
pub fn classify_directions(m: &Manifold, p: &[f64], grid: usize) -> Result<Vec<DirectionClass>> {
    if grid < 64 {
        return Err(Error::Precondition(format!("direction grid must be at least 64, got {grid}")));
    }
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let frame = direction_frame(m, p);
    let angles = grid_angles(grid);
    let mut classes: Vec<DirectionClass> = angles
        .par_iter()
        .map(|&a| {
            let xi = direction(&frame, a);
            let pr = probe(m, p, &xi, true)?;
            let tag = tag_of(m, p, &xi, &pr);
            Ok(DirectionClass {
                angle: a,
                direction: xi,
                exit: pr.exit,
                tag,
                smin_ratio: pr.smin_ratio,
                normal_jacobi: pr.normal_jacobi,
            })
        })
        .collect::<Result<_>>()?;

    let brackets: Vec<(f64, f64, f64)> = (0..grid)
        .filter_map(|k| {
            let (a, b) = (&classes[k], &classes[(k + 1) % grid]);
            let usable = |c: &DirectionClass| c.exit.t_exit > 0.0 && c.tag != Tag::Tangential;
            (usable(a) && usable(b) && a.normal_jacobi.signum() != b.normal_jacobi.signum() && a.tag != Tag::Conjugate)
                .then(|| (a.angle, a.angle + 2.0 * PI / grid as f64, a.normal_jacobi))
        })
        .collect();
    let refined: Vec<DirectionClass> = brackets
        .par_iter()
        .map(|&(lo, hi, flo)| refine_conjugate(m, p, &frame, lo, hi, flo))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    classes.extend(refined);
    classes.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
    Ok(classes)
}

fn refine_conjugate(m: &Manifold, p: &[f64], frame: &[Vec<f64>; 2], mut lo: f64, mut hi: f64, mut flo: f64) -> Result<Option<DirectionClass>> {
    let mut best: Option<(f64, Probe)> = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xi = direction(frame, mid);
        let pr = probe(m, p, &xi, false)?;
        if pr.exit.t_exit == 0.0 {
            return Ok(None);
        }
        let f = pr.normal_jacobi;
        if f.signum() == flo.signum() {
            lo = mid;
            flo = f;
        } else {
            hi = mid;
        }
        let done = pr.smin_ratio < 1e-12;
        if best.as_ref().map_or(true, |b| pr.smin_ratio < b.1.smin_ratio) {
            best = Some((mid, pr));
        }
        if done {
            break;
        }
    }
    let Some((a, _)) = best else { return Ok(None) };
    let xi = direction(frame, a);
    let pr = probe(m, p, &xi, true)?;
    let tag = tag_of(m, p, &xi, &pr);
    if tag != Tag::Conjugate {
        return Ok(None);
    }
    Ok(Some(DirectionClass { angle: a, direction: xi, exit: pr.exit, tag, smin_ratio: pr.smin_ratio, normal_jacobi: pr.normal_jacobi }))
}

/// Outcome of the variational conjugacy test for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationalReport {
    pub fired: bool,
    /// `|dq/dθ|_g · η_ν / τ`, comparable with the singular-value ratio.
    pub rate: f64,
    /// `|dη_t/dθ|`.
    pub turn: f64,
}

pub const VAR_STEP: f64 = 1e-4;
pub const VAR_RATE_TOL: f64 = 1e-5;
pub const VAR_TURN_TOL: f64 = 1e-3;

/// Varies the shooting direction `ξ(θ)` at p and watches the exit point and
/// exit direction. Fires when the exit point is stationary to first order
/// while the tangential exit direction keeps turning.
pub fn conjugate_variational_direction(m: &Manifold, p: &[f64], xi: &[f64]) -> Result<VariationalReport> {
    let metric = m.metric.as_ref();
    let perp = rotate90(metric, p, xi);
    let opts = FlowOptions { rtol: 1e-12, atol: 1e-12, ..FlowOptions::default() };
    let shoot = |th: f64| -> Result<(ExitRecord, f64)> {
        let (s, c) = th.sin_cos();
        let d: Vec<f64> = (0..2).map(|k| c * xi[k] + s * perp[k]).collect();
        let rec = integrate_geodesic(m, &GeodesicState::new(p, &d), &opts)?;
        let e = rec.exit().clone();
        let f = m.frame_at(&e.x_exit);
        let mut g = [0.0; 4];
        metric.eval(&e.x_exit, &mut g);
        let eta_t = inner_with(&g, 2, &e.v_exit, &f.tangent[0]);
        Ok((e, eta_t))
    };
    let (e0, _) = shoot(0.0)?;
    if e0.t_exit == 0.0 {
        return Err(Error::Inconclusive("direction exits immediately".into()));
    }
    let f0 = m.frame_at(&e0.x_exit);
    let eta_nu = metric::inner(metric, &e0.x_exit, &e0.v_exit, &f0.normal);
    if eta_nu < 1e-3 {
        return Err(Error::Inconclusive(format!("grazing exit (normal component {eta_nu:.3e})")));
    }
    let h = VAR_STEP;
    let (ep, tp) = shoot(h)?;
    let (em, tm) = shoot(-h)?;
    if ep.t_exit == 0.0 || em.t_exit == 0.0 {
        return Err(Error::Inconclusive("variation family leaves through a tangential exit".into()));
    }
    let ch = m.chart()?;
    let dq = ch.periodic_diff(ep.s_exit.unwrap(), em.s_exit.unwrap()) / (2.0 * h);
    let a = dq.abs() * eta_nu / e0.t_exit;
    let rate = a.min(1.0 / a);
    let turn = ((tp - tm) / (2.0 * h)).abs();
    Ok(VariationalReport { fired: rate < VAR_RATE_TOL && turn > VAR_TURN_TOL, rate, turn })
}

/// Variational conjugacy test for an exit sample `(q, η)` of the source p.
/// The generating direction at p is recovered by tracing `(q, −η)` back.
pub fn conjugate_variational_test(m: &Manifold, p: &[f64], q: &[f64], eta: &[f64]) -> Result<bool> {
    let back: Vec<f64> = eta.iter().map(|c| -c).collect();
    let rec = integrate_geodesic(m, &GeodesicState::new(q, &back), &FlowOptions::stored())?;
    let mut best = (f64::INFINITY, 0.0);
    for st in &rec.steps {
        for j in 0..=32 {
            let t = st.t0 + st.h * j as f64 / 32.0;
            let s = rec.state_at(t.min(rec.t_end)).unwrap();
            let d = (s.x[0] - p[0]).hypot(s.x[1] - p[1]);
            if d < best.0 {
                best = (d, t.min(rec.t_end));
            }
        }
    }
    // polish the closest approach by golden-section search
    let (mut lo, mut hi) = ((best.1 - 1e-2).max(0.0), (best.1 + 1e-2).min(rec.t_end));
    let dist = |t: f64| {
        let s = rec.state_at(t).unwrap();
        (s.x[0] - p[0]).hypot(s.x[1] - p[1])
    };
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - gr * (hi - lo);
        let b = lo + gr * (hi - lo);
        if dist(a) < dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let t = 0.5 * (lo + hi);
    if dist(t) > 1e-6 {
        return Err(Error::Precondition("exit sample does not belong to the source".into()));
    }
    let s = rec.state_at(t).unwrap();
    let xi: Vec<f64> = s.v.iter().map(|c| -c).collect();
    let xi = crate::flow::unit(m.metric.as_ref(), p, &xi);
    Ok(conjugate_variational_direction(m, p, &xi)?.fired)
}

/// Wronskian `g(D_t J₁, J₂) − g(J₁, D_t J₂)` at every node.
pub fn wronskian(metric: &dyn MetricField, a: &JacobiSolution, b: &JacobiSolution) -> Vec<f64> {
    let n = metric.dim();
    let mut g = vec![0.0; n * n];
    (0..a.times.len())
        .map(|i| {
            let x = a.along.state_at(a.times[i]).map(|s| s.x).unwrap_or_else(|| a.along.end.x.clone());
            metric.eval(&x, &mut g);
            inner_with(&g, n, &a.dj[i], &b.j[i]) - inner_with(&g, n, &a.j[i], &b.dj[i])
        })
        .collect()
}

/// `|D_t² J + R(J, γ̇) γ̇|_g` at time t, with `D_t² J` from central
/// differences of `D_t J` and R from finite-difference curvature.
pub fn jacobi_residual(metric: &dyn MetricField, sol: &JacobiSolution, t: f64) -> Result<f64> {
    let n = metric.dim();
    let h = 1e-4;
    let st = sol.along.state_at(t).ok_or_else(|| Error::Usage("time outside the geodesic".into()))?;
    let (j, _) = sol.at(metric, t)?;
    let (_, djp) = sol.at(metric, t + h)?;
    let (_, djm) = sol.at(metric, t - h)?;
    let (_, dj0) = sol.at(metric, t)?;
    let gam = metric::christoffel(metric, &st.x)?;
    let mut c = vec![0.0; n];
    gam.contract(&st.v, &dj0, &mut c);
    let d2: Vec<f64> = (0..n).map(|k| (djp[k] - djm[k]) / (2.0 * h) + c[k]).collect();
    let r = metric::riemann_fd(metric, &st.x)?;
    let rj = metric::curvature_term(&r, n, &j, &st.v);
    let res: Vec<f64> = d2.iter().zip(&rj).map(|(a, b)| a + b).collect();
    Ok(metric::norm(metric, &st.x, &res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::metric::{Conformal, Flat, StereographicSphere};
    use std::sync::Arc;

    fn sphere(radius: f64, bbox: f64) -> Manifold {
        let mut d = Domain::disk(radius);
        d.bbox = vec![(-bbox, bbox); 2];
        Manifold::new(Arc::new(Conformal::new(2, StereographicSphere, "sphere")), d).unwrap()
    }

    #[test]
    fn flat_jacobi_fields_are_linear() {
        let m = Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(1.0)).unwrap();
        let rec = integrate_geodesic(&m, &GeodesicState::new(&[-0.2, 0.1], &[0.6, 0.8]), &FlowOptions::stored()).unwrap();
        let w = [0.3, -0.7];
        let sol = jacobi_field(m.metric.as_ref(), &rec, &[0.0, 0.0], &w).unwrap();
        for (t, j) in sol.times.iter().zip(&sol.j) {
            assert!((j[0] - t * w[0]).abs() < 1e-9 && (j[1] - t * w[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn sphere_jacobi_norm_is_sine() {
        let m = sphere(2.0, 3.5);
        let x = [-1.2, 0.3];
        let v = crate::flow::unit(m.metric.as_ref(), &x, &[1.0, 0.1]);
        let rec = integrate_geodesic(&m, &GeodesicState::new(&x, &v), &FlowOptions::stored()).unwrap();
        let w = rotate90(m.metric.as_ref(), &x, &v);
        let sol = jacobi_field(m.metric.as_ref(), &rec, &[0.0, 0.0], &w).unwrap();
        for (i, t) in sol.times.iter().enumerate() {
            let st = rec.state_at(*t).unwrap_or(rec.end.clone());
            let nj = metric::norm(m.metric.as_ref(), &st.x, &sol.j[i]);
            assert!((nj - t.sin().abs()).abs() < 1e-6, "t = {t}: {nj}");
        }
    }

    #[test]
    fn flat_d_exp_is_identity() {
        let m = Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(1.0)).unwrap();
        let d = d_exp(&m, &[0.1, 0.2], &[0.3, -0.5]).unwrap();
        assert!((d - DMatrix::identity(2, 2)).abs().max() < 1e-8);
    }

    #[test]
    fn sphere_d_exp_singular_values() {
        let m = sphere(1.5, 2.5);
        let q = [-1.4, 0.0];
        let dir = crate::flow::unit(m.metric.as_ref(), &q, &[1.0, 0.0]);
        let w: Vec<f64> = dir.iter().map(|c| c * PI / 2.0).collect();
        let sv = d_exp_singular_values(&m, &q, &w).unwrap();
        assert!((sv[0] - 1.0).abs() < 1e-4 && (sv[1] - 2.0 / PI).abs() < 1e-4, "{sv:?}");
        let w: Vec<f64> = dir.iter().map(|c| c * PI).collect();
        let sv = d_exp_singular_values(&m, &q, &w).unwrap();
        assert!(sv[1] < 1e-3, "{sv:?}");
    }

    #[test]
    fn wronskian_is_constant() {
        let m = sphere(1.0, 2.0);
        let x = [0.1, -0.3];
        let v = crate::flow::unit(m.metric.as_ref(), &x, &[0.4, 1.0]);
        let rec = integrate_geodesic(&m, &GeodesicState::new(&x, &v), &FlowOptions::stored()).unwrap();
        let s = jacobi_fields(m.metric.as_ref(), &rec, &[(vec![0.2, 0.1], vec![-0.3, 0.5]), (vec![0.0, -0.4], vec![0.7, 0.2])]).unwrap();
        let w = wronskian(m.metric.as_ref(), &s[0], &s[1]);
        for x in &w {
            assert!((x - w[0]).abs() < 1e-7);
        }
    }

    #[test]
    fn classify_rejects_small_grid() {
        let m = Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(1.0)).unwrap();
        assert!(matches!(classify_directions(&m, &[0.0, 0.0], 32), Err(Error::Precondition(_))));
    }

    #[test]
    fn flat_disk_directions_are_good() {
        let m = Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(1.0)).unwrap();
        let c = classify_directions(&m, &[0.2, -0.1], 64).unwrap();
        assert_eq!(c.len(), 64);
        assert!(c.iter().all(|d| d.tag == Tag::Good));
        let r = conjugate_variational_direction(&m, &[0.2, -0.1], &[0.6, 0.8]).unwrap();
        assert!(!r.fired);
    }
}
