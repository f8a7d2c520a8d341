//! Geodesic integration with boundary-exit detection, exit times, the
//! exponential map, the scattering relation and geodesic counting.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::metric::{self, inner_with, ConnectionWork, MetricField};
use crate::ode::{rk5_step, DenseStep, Dopri5, OdeError, System};

pub const EPS_EVENT: f64 = 1e-11;
pub const EPS_TANGENT: f64 = 1e-7;
/// A start point counts as lying on the boundary when `|b| ≤ ON_BOUNDARY`.
pub const ON_BOUNDARY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl GeodesicState {
    pub fn new(x: &[f64], v: &[f64]) -> Self {
        GeodesicState { x: x.to_vec(), v: v.to_vec() }
    }

    pub fn reversed(&self) -> Self {
        GeodesicState { x: self.x.clone(), v: self.v.iter().map(|c| -c).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitRecord {
    pub t_exit: f64,
    pub x_exit: Vec<f64>,
    pub v_exit: Vec<f64>,
    /// Boundary arclength parameter of the exit point (n = 2 only).
    pub s_exit: Option<f64>,
    /// The start was on the boundary with an outward or tangential direction.
    pub immediate: bool,
}

/// Integrator settings.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Horizon; `None` uses `50 · diam`.
    pub t_max: Option<f64>,
    /// Keep the continuous extension of every step.
    pub store: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { rtol: 1e-10, atol: 1e-10, t_max: None, store: false }
    }
}

impl FlowOptions {
    pub fn stored() -> Self {
        FlowOptions { store: true, ..Self::default() }
    }
}

/// A solved geodesic segment.
#[derive(Debug, Clone)]
pub struct GeodesicRecord {
    pub start: GeodesicState,
    pub t_end: f64,
    pub end: GeodesicState,
    /// Present when the segment ended on the boundary.
    pub exit: Option<ExitRecord>,
    /// Continuous extension of the accepted steps, if stored.
    pub steps: Vec<DenseStep>,
    /// `max |g(ẋ,ẋ) − 1|` over step endpoints.
    pub max_drift: f64,
}

impl GeodesicRecord {
    pub fn has_dense_output(&self) -> bool {
        !self.steps.is_empty() || self.t_end == 0.0
    }

    /// State at time t from the stored continuous extension.
    pub fn state_at(&self, t: f64) -> Option<GeodesicState> {
        let n = self.start.x.len();
        if t <= 0.0 || self.steps.is_empty() {
            return (t == 0.0).then(|| self.start.clone());
        }
        if t >= self.t_end {
            return (t <= self.t_end * (1.0 + 1e-14)).then(|| self.end.clone());
        }
        let k = self.steps.partition_point(|s| s.t1() < t).min(self.steps.len() - 1);
        let mut y = vec![0.0; 2 * n];
        self.steps[k].eval(t, &mut y);
        Some(GeodesicState { x: y[..n].to_vec(), v: y[n..].to_vec() })
    }

    pub fn exit(&self) -> &ExitRecord {
        self.exit.as_ref().expect("record ends on the boundary")
    }
}

/// First-order form `(x, v)' = (v, −Γ(v,v))` of the geodesic equation.
pub struct GeodesicSystem<'a> {
    metric: &'a dyn MetricField,
    work: ConnectionWork,
    n: usize,
}

impl<'a> GeodesicSystem<'a> {
    pub fn new(metric: &'a dyn MetricField) -> Self {
        let n = metric.dim();
        GeodesicSystem { metric, work: ConnectionWork::new(n), n }
    }
}

impl System for GeodesicSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.n
    }
    fn rhs(&mut self, y: &[f64], dy: &mut [f64]) -> bool {
        let n = self.n;
        dy[..n].copy_from_slice(&y[n..]);
        let (x, v) = y.split_at(n);
        self.work.acceleration(self.metric, x, v, &mut dy[n..]) && dy[n..].iter().all(|a| a.is_finite())
    }
}

fn map_ode_err(e: OdeError, x: &[f64]) -> Error {
    match e {
        OdeError::Underflow { t, h } => Error::Stiffness { t, h },
        OdeError::Eval { .. } => Error::DegenerateMetric { at: x.to_vec(), reason: "connection evaluation failed".into() },
    }
}

fn speed_drift(g: &mut [f64], m: &dyn MetricField, y: &[f64], n: usize) -> f64 {
    m.eval(&y[..n], g);
    (inner_with(g, n, &y[n..], &y[n..]) - 1.0).abs()
}

/// Locates `b = 0` inside a step whose sub-interval `[lo, hi]` brackets a
/// crossing, then polishes with Newton iterations on direct RK sub-steps.
fn locate_exit(m: &Manifold, sys: &mut GeodesicSystem, step: &DenseStep, mut lo: f64, mut hi: f64) -> (f64, Vec<f64>) {
    let n = m.dim();
    let mut y = vec![0.0; 2 * n];
    let b_at = |t: f64, y: &mut [f64]| {
        step.eval(t, y);
        m.domain.b(&y[..n])
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let b = b_at(mid, &mut y);
        if b < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if b.abs() < 1e-14 {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    let mut best_t = t;
    let mut best_b = f64::INFINITY;
    let mut best_y = {
        step.eval(t, &mut y);
        y.clone()
    };
    let mut grad = vec![0.0; n];
    for _ in 0..6 {
        if !rk5_step(sys, step.start(), t - step.t0, &mut y) {
            break;
        }
        let b = m.domain.b(&y[..n]);
        if b.abs() < best_b {
            best_b = b.abs();
            best_t = t;
            best_y.copy_from_slice(&y);
        }
        if b.abs() < 1e-14 {
            break;
        }
        m.domain.grad_b(&y[..n], &mut grad);
        let db: f64 = grad.iter().zip(&y[n..]).map(|(a, v)| a * v).sum();
        if db == 0.0 {
            break;
        }
        t -= b / db;
        if !(t >= step.t0 && t <= step.t1() + 1e-3 * step.h) {
            break;
        }
    }
    (best_t, best_y)
}

/// Direction-related checks at a start point. Returns Some(record) when
/// the start is on the boundary with an outward or tangential direction.
fn start_checks(m: &Manifold, start: &GeodesicState) -> Result<Option<ExitRecord>> {
    let n = m.dim();
    if start.x.len() != n || start.v.len() != n {
        return Err(Error::Precondition("state dimension mismatch".into()));
    }
    if !m.domain.in_bbox(&start.x) {
        return Err(Error::Precondition(format!("start {:?} outside the chart box", start.x)));
    }
    let b = m.domain.b(&start.x);
    if b > ON_BOUNDARY {
        return Err(Error::Precondition(format!("start {:?} lies outside the closure of the domain", start.x)));
    }
    let sp = metric::inner(m.metric.as_ref(), &start.x, &start.v, &start.v);
    if (sp - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("start direction is not unit speed: g(v,v) = {sp}")));
    }
    if b.abs() <= ON_BOUNDARY {
        let nu = m.normal_at(&start.x);
        let vn = metric::inner(m.metric.as_ref(), &start.x, &start.v, &nu);
        if vn > -EPS_TANGENT {
            let s_exit = if n == 2 { Some(m.boundary_param(&start.x)?) } else { None };
            return Ok(Some(ExitRecord {
                t_exit: 0.0,
                x_exit: start.x.clone(),
                v_exit: start.v.clone(),
                s_exit,
                immediate: true,
            }));
        }
    }
    Ok(None)
}

/// Solves the geodesic from `start` until it leaves the domain, or until
/// `stop` if given and reached first.
fn run(m: &Manifold, start: &GeodesicState, opts: &FlowOptions, stop: Option<f64>) -> Result<GeodesicRecord> {
    let n = m.dim();
    if let Some(rec) = start_checks(m, start)? {
        if stop.map_or(true, |s| s > 0.0) {
            return Ok(GeodesicRecord {
                start: start.clone(),
                t_end: 0.0,
                end: start.clone(),
                exit: Some(rec),
                steps: vec![],
                max_drift: 0.0,
            });
        }
    }
    let t_max = opts.t_max.unwrap_or_else(|| m.t_max());
    let h_cap = m.diam_estimate() / 8.0;
    let mut sys = GeodesicSystem::new(m.metric.as_ref());
    let mut y0 = start.x.clone();
    y0.extend_from_slice(&start.v);
    let mut ode = Dopri5::new(&y0, opts.rtol, opts.atol);
    let mut steps = Vec::new();
    let mut gbuf = vec![0.0; n * n];
    let mut max_drift: f64 = speed_drift(&mut gbuf, m.metric.as_ref(), &y0, n);
    let mut ybuf = vec![0.0; 2 * n];
    const SUB: usize = 8;
    loop {
        let limit = stop.unwrap_or(t_max);
        if ode.t >= limit {
            if stop.is_some() {
                let end = GeodesicState { x: ode.y[..n].to_vec(), v: ode.y[n..].to_vec() };
                return Ok(GeodesicRecord { start: start.clone(), t_end: ode.t, end, exit: None, steps, max_drift });
            }
            return Err(Error::Trapping { t_max });
        }
        ode.step(&mut sys, h_cap.min(limit - ode.t)).map_err(|e| map_ode_err(e, &ode.y[..n]))?;
        let step = ode.last.clone().expect("accepted step");
        // scan the step for the first point outside M
        let mut prev = step.t0;
        let mut crossing = None;
        for j in 1..=SUB {
            let t = step.t0 + step.h * j as f64 / SUB as f64;
            if j == SUB {
                ybuf.copy_from_slice(&ode.y);
            } else {
                step.eval(t, &mut ybuf);
            }
            if m.domain.b(&ybuf[..n]) > 0.0 {
                crossing = Some((prev, t));
                break;
            }
            prev = t;
        }
        if let Some((lo, hi)) = crossing {
            let (t_exit, y) = locate_exit(m, &mut sys, &step, lo, hi);
            if stop.map_or(true, |s| t_exit < s) {
                max_drift = max_drift.max(speed_drift(&mut gbuf, m.metric.as_ref(), &y, n));
                if opts.store {
                    steps.push(step);
                }
                let x_exit = y[..n].to_vec();
                let v_exit = y[n..].to_vec();
                let s_exit = if n == 2 { Some(m.boundary_param(&x_exit)?) } else { None };
                let exit = ExitRecord { t_exit, x_exit: x_exit.clone(), v_exit: v_exit.clone(), s_exit, immediate: false };
                return Ok(GeodesicRecord {
                    start: start.clone(),
                    t_end: t_exit,
                    end: GeodesicState { x: x_exit, v: v_exit },
                    exit: Some(exit),
                    steps,
                    max_drift,
                });
            }
        }
        max_drift = max_drift.max(speed_drift(&mut gbuf, m.metric.as_ref(), &ode.y, n));
        if opts.store {
            steps.push(step);
        }
    }
}

pub fn integrate_geodesic(m: &Manifold, start: &GeodesicState, opts: &FlowOptions) -> Result<GeodesicRecord> {
    run(m, start, opts, None)
}

/// Solves the geodesic for a fixed time in the ambient chart, ignoring the
/// domain. Used for conservation checks.
pub fn integrate_free(metric: &dyn MetricField, start: &GeodesicState, t_end: f64, opts: &FlowOptions) -> Result<GeodesicRecord> {
    let n = metric.dim();
    let mut sys = GeodesicSystem::new(metric);
    let mut y0 = start.x.clone();
    y0.extend_from_slice(&start.v);
    let mut ode = Dopri5::new(&y0, opts.rtol, opts.atol);
    let mut gbuf = vec![0.0; n * n];
    let mut max_drift: f64 = speed_drift(&mut gbuf, metric, &y0, n);
    let mut steps = Vec::new();
    // remainders at rounding level are dropped rather than stepped
    while t_end - ode.t > 1e-14 * t_end.max(1.0) {
        ode.step(&mut sys, t_end - ode.t).map_err(|e| map_ode_err(e, &ode.y[..n]))?;
        max_drift = max_drift.max(speed_drift(&mut gbuf, metric, &ode.y, n));
        if opts.store {
            steps.push(ode.last.clone().expect("accepted step"));
        }
    }
    Ok(GeodesicRecord {
        start: start.clone(),
        t_end: ode.t,
        end: GeodesicState { x: ode.y[..n].to_vec(), v: ode.y[n..].to_vec() },
        exit: None,
        steps,
        max_drift,
    })
}

/// `τ_exit(p, ξ)`.
pub fn exit_time(m: &Manifold, p: &[f64], xi: &[f64]) -> Result<f64> {
    Ok(integrate_geodesic(m, &GeodesicState::new(p, xi), &FlowOptions::default())?.t_end)
}

/// `exp_q(w)`; fails with the exit record if the geodesic leaves first.
pub fn exponential_map(m: &Manifold, q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    Ok(exponential_record(m, q, w, &FlowOptions::default())?.end.x)
}

/// Slack allowed between the exit time and the requested length.
const EXP_SLACK: f64 = 1e-9;

pub fn exponential_record(m: &Manifold, q: &[f64], w: &[f64], opts: &FlowOptions) -> Result<GeodesicRecord> {
    let len = metric::norm(m.metric.as_ref(), q, w);
    if len == 0.0 {
        let st = GeodesicState::new(q, w);
        return Ok(GeodesicRecord { start: st.clone(), t_end: 0.0, end: st, exit: None, steps: vec![], max_drift: 0.0 });
    }
    let dir: Vec<f64> = w.iter().map(|c| c / len).collect();
    let rec = run(m, &GeodesicState::new(q, &dir), opts, Some(len))?;
    if let Some(exit) = &rec.exit {
        if exit.t_exit < len - EXP_SLACK * (1.0 + len) {
            return Err(Error::OutOfDomain(Box::new(exit.clone())));
        }
        // exit within slack of the requested length: report the exit point
    }
    Ok(rec)
}

/// Normalizes `v` to unit g-length at x.
pub fn unit(m: &dyn MetricField, x: &[f64], v: &[f64]) -> Vec<f64> {
    let r = metric::norm(m, x, v);
    v.iter().map(|c| c / r).collect()
}

/// g-orthonormal pair spanning directions at p (n = 2). On the boundary the
/// pair is (tangent, outward normal) so that grid angles 0 and π are tangential.
pub fn direction_frame(m: &Manifold, p: &[f64]) -> [Vec<f64>; 2] {
    if m.domain.b(p).abs() <= ON_BOUNDARY {
        let f = m.frame_at(p);
        [f.tangent[0].clone(), f.normal]
    } else {
        let f = metric::orthonormal_frame(m.metric.as_ref(), p);
        [f[0].clone(), f[1].clone()]
    }
}

pub fn direction(frame: &[Vec<f64>; 2], angle: f64) -> Vec<f64> {
    let (s, c) = angle.sin_cos();
    vec![c * frame[0][0] + s * frame[1][0], c * frame[0][1] + s * frame[1][1]]
}

pub fn grid_angles(grid: usize) -> Vec<f64> {
    (0..grid).map(|k| 2.0 * PI * k as f64 / grid as f64).collect()
}

/// Exit records of the uniform direction fan from p, in grid order.
pub fn shoot_fan(m: &Manifold, p: &[f64], grid: usize) -> Result<Vec<ExitRecord>> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let frame = direction_frame(m, p);
    let opts = FlowOptions::default();
    grid_angles(grid)
        .into_par_iter()
        .map(|a| {
            let xi = direction(&frame, a);
            Ok(integrate_geodesic(m, &GeodesicState::new(p, &xi), &opts)?.exit().clone())
        })
        .collect()
}

/// Scattering relation `L_g(x, ξ)` for an inward (or tangential) boundary vector.
pub fn scattering_relation(m: &Manifold, x: &[f64], xi: &[f64]) -> Result<ExitRecord> {
    if m.domain.b(x).abs() > ON_BOUNDARY {
        return Err(Error::Precondition("entry point is not on the boundary".into()));
    }
    let nu = m.normal_at(x);
    let vn = metric::inner(m.metric.as_ref(), x, xi, &nu);
    if vn > EPS_TANGENT {
        return Err(Error::Precondition("entry direction points outward".into()));
    }
    if vn > -EPS_TANGENT {
        let s_exit = Some(m.boundary_param(x)?);
        return Ok(ExitRecord { t_exit: 0.0, x_exit: x.to_vec(), v_exit: xi.to_vec(), s_exit, immediate: true });
    }
    Ok(integrate_geodesic(m, &GeodesicState::new(x, xi), &FlowOptions::default())?.exit().clone())
}

/// One entry of the lens relation in boundary-frame coordinates. Entry
/// angles are measured from the inward normal, exit angles from the outward
/// normal, both signed toward the tangent frame vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LensEntry {
    pub s_in: f64,
    pub angle_in: f64,
    pub s_out: f64,
    pub angle_out: f64,
    /// Travel time; only known when produced by the forward model.
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LensData {
    pub entries: Vec<LensEntry>,
}

impl LensData {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s_in,angle_in,s_out,angle_out,time\n");
        for e in &self.entries {
            let time = e.time.map_or_else(|| "nan".to_string(), |t| format!("{t:.16e}"));
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                e.s_in, e.angle_in, e.s_out, e.angle_out, time
            ));
        }
        out
    }
}

/// Inward boundary vector at boundary parameter s and entry angle.
pub fn entry_vector(m: &Manifold, s: f64, angle_in: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = m.boundary_point(s)?;
    let f = m.frame_at(&x);
    let (sn, cs) = angle_in.sin_cos();
    let xi = (0..2).map(|k| -cs * f.normal[k] + sn * f.tangent[0][k]).collect();
    Ok((x, xi))
}

pub fn exit_angle(m: &Manifold, x: &[f64], v: &[f64]) -> f64 {
    let f = m.frame_at(x);
    let g = metric::metric_at(m.metric.as_ref(), x);
    let gs = g.as_slice();
    inner_with(gs, 2, v, &f.tangent[0]).atan2(inner_with(gs, 2, v, &f.normal))
}

/// Forward lens data on a tensor grid of entry parameters and angles.
pub fn forward_lens_data(m: &Manifold, s_count: usize, angle_count: usize) -> Result<LensData> {
    let len = m.boundary_len()?;
    let jobs: Vec<(f64, f64)> = (0..s_count)
        .flat_map(|i| {
            (0..angle_count).map(move |j| {
                let s = len * i as f64 / s_count as f64;
                let a = -0.5 * PI + PI * (j as f64 + 0.5) / angle_count as f64;
                (s, a)
            })
        })
        .collect();
    let entries = jobs
        .into_par_iter()
        .map(|(s, a)| {
            let (x, xi) = entry_vector(m, s, a)?;
            let e = scattering_relation(m, &x, &xi)?;
            Ok(LensEntry {
                s_in: s,
                angle_in: a,
                s_out: e.s_exit.expect("planar domain"),
                angle_out: exit_angle(m, &e.x_exit, &e.v_exit),
                time: Some(e.t_exit),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LensData { entries })
}

// ---------------------------------------------------------------------------
// connecting geodesics

/// A geodesic from p through q found by shooting.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub angle: f64,
    pub length: f64,
    pub miss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub count: usize,
    /// Some refinement did not reach the target accuracy.
    pub uncertain: bool,
    pub connections: Vec<Connection>,
}

/// Closest approach of the stored geodesic to q after leaving p:
/// `(time, signed offset, distance)`. The sign is that of `v × (q − x)`.
fn closest_approach(rec: &GeodesicRecord, q: &[f64]) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    let mut y = [0.0; 4];
    let f = |y: &[f64; 4]| (y[0] - q[0]) * y[2] + (y[1] - q[1]) * y[3];
    let mut consider = |t: f64, y: &[f64; 4]| {
        let d = (y[0] - q[0]).hypot(y[1] - q[1]);
        if best.map_or(true, |b| d < b.2) {
            let cross = y[2] * (q[1] - y[1]) - y[3] * (q[0] - y[0]);
            best = Some((t, cross.signum() * d, d));
        }
    };
    for st in &rec.steps {
        const SUB: usize = 4;
        let mut tp = st.t0;
        st.eval(tp, &mut y);
        let mut fp = f(&y);
        for j in 1..=SUB {
            let t = (st.t0 + st.h * j as f64 / SUB as f64).min(rec.t_end);
            st.eval(t, &mut y);
            let fc = f(&y);
            if fp < 0.0 && fc >= 0.0 {
                // local minimum of |x − q| inside (tp, t)
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
                consider(0.5 * (lo + hi), &ym);
            }
            tp = t;
            fp = fc;
            if t >= rec.t_end {
                break;
            }
        }
    }
    best
}

/// Geodesics from p passing through q, found by bisection on the shooting
/// angle of the signed closest-approach offset.
pub fn connecting_geodesics(m: &Manifold, p: &[f64], q: &[f64], grid: usize) -> Result<(Vec<Connection>, bool)> {
    if m.dim() != 2 {
        return Err(Error::UnsupportedDimension(m.dim()));
    }
    let frame = metric::orthonormal_frame(m.metric.as_ref(), p);
    let frame = [frame[0].clone(), frame[1].clone()];
    let opts = FlowOptions::stored();
    let shoot = |a: f64| -> Result<Option<(f64, f64, f64)>> {
        let xi = direction(&frame, a);
        let rec = integrate_geodesic(m, &GeodesicState::new(p, &xi), &opts)?;
        Ok(closest_approach(&rec, q))
    };
    let angles = grid_angles(grid);
    let samples = angles.par_iter().map(|&a| shoot(a)).collect::<Result<Vec<_>>>()?;
    let mut found: Vec<Connection> = Vec::new();
    let mut uncertain = false;
    for k in 0..grid {
        let (Some(sa), Some(sb)) = (samples[k], samples[(k + 1) % grid]) else { continue };
        if sa.1 == 0.0 {
            found.push(Connection { angle: angles[k], length: sa.0, miss: 0.0 });
            continue;
        }
        if sa.1.signum() == sb.1.signum() {
            continue;
        }
        let (mut lo, mut hi) = (angles[k], angles[k] + 2.0 * PI / grid as f64);
        let mut flo = sa.1;
        let mut last = None;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let Some(sm) = shoot(mid)? else { break };
            last = Some((mid, sm));
            if sm.2 < 1e-9 {
                break;
            }
            if sm.1.signum() == flo.signum() {
                lo = mid;
                flo = sm.1;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        match last {
            Some((a, sm)) if sm.2 < 1e-9 => found.push(Connection { angle: a, length: sm.0, miss: sm.2 }),
            // a jump of the closest-approach branch, not a passage through q
            Some((_, sm)) if sm.2 > 1e-6 => {}
            Some(_) | None => uncertain = true,
        }
    }
    // merge clusters closer than 1e−3 in angle
    found.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());
    let mut merged: Vec<Connection> = Vec::new();
    for c in found {
        match merged.last() {
            Some(l) if (c.angle - l.angle).abs() < 1e-3 => {}
            _ => merged.push(c),
        }
    }
    if merged.len() > 1 {
        let first = merged[0].angle;
        let last = merged[merged.len() - 1].angle;
        if first + 2.0 * PI - last < 1e-3 {
            merged.pop();
        }
    }
    Ok((merged, uncertain))
}

/// Number of geodesics of length `ell ± tol` joining p to q.
pub fn count_connecting_geodesics(m: &Manifold, p: &[f64], q: &[f64], ell: f64, tol: f64, grid: usize) -> Result<CountResult> {
    let (all, uncertain) = connecting_geodesics(m, p, q, grid)?;
    let connections: Vec<Connection> = all.into_iter().filter(|c| (c.length - ell).abs() <= tol).collect();
    Ok(CountResult { count: connections.len(), uncertain, connections })
}
