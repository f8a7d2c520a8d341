//! Domains `M = {b < 0}` inside a chart box, boundary parametrization and
//! convexity checks.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::metric::{self, inner_with, MetricField, SharedMetric};

/// Level-set description of the boundary.
#[derive(Debug, Clone)]
pub enum LevelSet {
    /// `|x − c|² − R²`.
    Ball { center: Vec<f64>, radius: f64 },
    /// Cassini oval `((x−a)²+y²)((x+a)²+y²) − c⁴`; non-convex for `a < c < a√2`.
    Cassini { a: f64, c: f64 },
    Expr(Expr),
}

impl LevelSet {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            LevelSet::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() - radius * radius
            }
            LevelSet::Cassini { a, c } => {
                let (x1, y) = (x[0], x[1]);
                ((x1 - a).powi(2) + y * y) * ((x1 + a).powi(2) + y * y) - c.powi(4)
            }
            LevelSet::Expr(e) => e.eval(x),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LevelSet::Ball { center, .. } => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = 2.0 * (x[k] - center[k]);
                }
            }
            LevelSet::Cassini { a, .. } => {
                let (x1, y) = (x[0], x[1]);
                let p = (x1 - a).powi(2) + y * y;
                let q = (x1 + a).powi(2) + y * y;
                out[0] = 2.0 * (x1 - a) * q + 2.0 * (x1 + a) * p;
                out[1] = 2.0 * y * (p + q);
            }
            LevelSet::Expr(e) => {
                let d = e.eval_dual(x);
                let n = out.len();
                out.copy_from_slice(&d.g[..n]);
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            LevelSet::Ball { radius, .. } => format!("circle({radius})"),
            LevelSet::Cassini { a, c } => format!("cassini({a},{c})"),
            LevelSet::Expr(e) => e.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub dim: usize,
    pub level: LevelSet,
    /// Per-axis `(lo, hi)` of the ambient chart box.
    pub bbox: Vec<(f64, f64)>,
    /// Reference point; the domain must be star-shaped with respect to it.
    pub center: Vec<f64>,
}

impl Domain {
    pub fn disk(radius: f64) -> Domain {
        let m = 0.5 * radius;
        Domain {
            dim: 2,
            level: LevelSet::Ball { center: vec![0.0, 0.0], radius },
            bbox: vec![(-radius - m, radius + m); 2],
            center: vec![0.0, 0.0],
        }
    }

    pub fn b(&self, x: &[f64]) -> f64 {
        self.level.value(x)
    }

    pub fn grad_b(&self, x: &[f64], out: &mut [f64]) {
        self.level.grad(x, out)
    }

    pub fn in_bbox(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bbox).all(|(v, (lo, hi))| *v > *lo && *v < *hi)
    }

    fn bbox_diag(&self) -> f64 {
        self.bbox.iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt()
    }

    /// Distance from `center` to the boundary along the unit direction `u`.
    pub fn radial(&self, u: &[f64], guess: f64) -> Result<f64> {
        let n = self.dim;
        let mut x = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let eval = |r: f64, x: &mut Vec<f64>| {
            for k in 0..n {
                x[k] = self.center[k] + r * u[k];
            }
            self.b(x)
        };
        if eval(0.0, &mut x) >= 0.0 {
            return Err(Error::Domain("reference center is not inside the domain".into()));
        }
        let rmax = self.bbox_diag();
        let (mut lo, mut hi) = (0.0, f64::NAN);
        let mut r = if guess > 0.0 { guess } else { 0.5 * rmax };
        while hi.is_nan() {
            if eval(r, &mut x) > 0.0 {
                hi = r;
            } else {
                lo = r;
                r *= 1.25;
                if r > rmax {
                    return Err(Error::Domain("boundary not found along a ray inside the chart box".into()));
                }
            }
        }
        let mut r = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
        for _ in 0..200 {
            let f = eval(r, &mut x);
            if f == 0.0 {
                return Ok(r);
            }
            if f < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            self.grad_b(&x, &mut grad);
            let df: f64 = grad.iter().zip(u).map(|(a, b)| a * b).sum();
            let mut next = r - f / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 1e-15 * r.max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            r = next;
        }
        Ok(r)
    }
}

// 8-point Gauss–Legendre on [-1, 1]
const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

const PANELS: usize = 256;
const RTABLE: usize = 1024;

/// Arclength parametrization of a planar star-shaped boundary curve in the
/// induced metric, anchored at the point of maximal first coordinate and
/// oriented counterclockwise.
#[derive(Debug, Clone)]
pub struct BoundaryChart {
    theta0: f64,
    len: f64,
    /// Cumulative arclength at panel starts, `PANELS + 1` entries.
    cum: Vec<f64>,
    rtab: Vec<f64>,
}

/// Position and polar-angle derivative of the boundary curve.
struct CurvePoint {
    x: [f64; 2],
    dx: [f64; 2],
}

impl BoundaryChart {
    fn build(domain: &Domain, metric: &dyn MetricField) -> Result<BoundaryChart> {
        if domain.dim != 2 {
            return Err(Error::UnsupportedDimension(domain.dim));
        }
        let mut rtab = Vec::with_capacity(RTABLE);
        let mut guess = 0.0;
        for k in 0..RTABLE {
            let t = 2.0 * PI * k as f64 / RTABLE as f64;
            guess = domain.radial(&[t.cos(), t.sin()], guess)?;
            rtab.push(guess);
        }
        let mut chart = BoundaryChart { theta0: 0.0, len: 0.0, cum: vec![], rtab };

        // anchor: zero of d x₁ / dθ where x₁ is maximal
        let x1 = |c: &BoundaryChart, t: f64| c.curve(domain, t).map(|p| p.x[0]);
        let mut kbest = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..RTABLE {
            let t = 2.0 * PI * k as f64 / RTABLE as f64;
            let v = x1(&chart, t)?;
            if v > best {
                best = v;
                kbest = k;
            }
        }
        let step = 2.0 * PI / RTABLE as f64;
        let tk = step * kbest as f64;
        let (mut lo, mut hi) = (tk - step, tk + step);
        let dx1 = |c: &BoundaryChart, t: f64| c.curve(domain, t).map(|p| p.dx[0]);
        if dx1(&chart, lo)? <= 0.0 || dx1(&chart, hi)? >= 0.0 {
            return Err(Error::Domain("could not bracket the boundary anchor point".into()));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if dx1(&chart, mid)? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        chart.theta0 = 0.5 * (lo + hi);

        let h = 2.0 * PI / PANELS as f64;
        let mut cum = Vec::with_capacity(PANELS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for k in 0..PANELS {
            let a = chart.theta0 + h * k as f64;
            acc += chart.speed_integral(domain, metric, a, a + h)?;
            cum.push(acc);
        }
        chart.len = acc;
        chart.cum = cum;
        Ok(chart)
    }

    fn r_guess(&self, theta: f64) -> f64 {
        let u = theta.rem_euclid(2.0 * PI) / (2.0 * PI) * RTABLE as f64;
        let k = (u.floor() as usize).min(RTABLE - 1);
        let f = u - k as f64;
        self.rtab[k] * (1.0 - f) + self.rtab[(k + 1) % RTABLE] * f
    }

    fn curve(&self, domain: &Domain, theta: f64) -> Result<CurvePoint> {
        let u = [theta.cos(), theta.sin()];
        let up = [-u[1], u[0]];
        let r = domain.radial(&u, self.r_guess(theta))?;
        let c = &domain.center;
        let x = [c[0] + r * u[0], c[1] + r * u[1]];
        let mut g = [0.0; 2];
        domain.grad_b(&x, &mut g);
        let fr = g[0] * u[0] + g[1] * u[1];
        let ft = r * (g[0] * up[0] + g[1] * up[1]);
        let dr = -ft / fr;
        Ok(CurvePoint { x, dx: [dr * u[0] + r * up[0], dr * u[1] + r * up[1]] })
    }

    fn speed(&self, domain: &Domain, metric: &dyn MetricField, theta: f64) -> Result<f64> {
        let p = self.curve(domain, theta)?;
        let mut g = [0.0; 4];
        metric.eval(&p.x, &mut g);
        Ok(inner_with(&g, 2, &p.dx, &p.dx).sqrt())
    }

    fn speed_integral(&self, domain: &Domain, metric: &dyn MetricField, a: f64, b: f64) -> Result<f64> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (x, w) in GL_X.iter().zip(&GL_W) {
            s += w * self.speed(domain, metric, mid + half * x)?;
        }
        Ok(s * half)
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.len);
        if w >= self.len {
            0.0
        } else {
            w
        }
    }

    /// Shortest signed periodic difference `s1 − s2`.
    pub fn periodic_diff(&self, s1: f64, s2: f64) -> f64 {
        let d = (s1 - s2).rem_euclid(self.len);
        if d > 0.5 * self.len {
            d - self.len
        } else {
            d
        }
    }

    fn s_of_theta(&self, domain: &Domain, metric: &dyn MetricField, theta: f64) -> Result<f64> {
        let rel = (theta - self.theta0).rem_euclid(2.0 * PI);
        let h = 2.0 * PI / PANELS as f64;
        let k = ((rel / h).floor() as usize).min(PANELS - 1);
        let a = self.theta0 + h * k as f64;
        let part = self.speed_integral(domain, metric, a, self.theta0 + rel)?;
        Ok(self.wrap(self.cum[k] + part))
    }

    fn theta_of_s(&self, domain: &Domain, metric: &dyn MetricField, s: f64) -> Result<f64> {
        let s = self.wrap(s);
        let k = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(k) => k.min(PANELS - 1),
            Err(k) => k.saturating_sub(1).min(PANELS - 1),
        };
        let h = 2.0 * PI / PANELS as f64;
        let a = self.theta0 + h * k as f64;
        let frac = (s - self.cum[k]) / (self.cum[k + 1] - self.cum[k]);
        let mut t = a + frac * h;
        for _ in 0..20 {
            let rel = t - a;
            let si = self.cum[k] + self.speed_integral(domain, metric, a, a + rel)?;
            let dt = (si - s) / self.speed(domain, metric, t)?;
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        Ok(t)
    }
}

/// g-orthonormal frame at a boundary point: tangent vectors then outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFrame {
    pub tangent: Vec<Vec<f64>>,
    pub normal: Vec<f64>,
}

/// Choice of tangent basis for the boundary metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TangentFrame {
    /// g-orthonormal frame: the boundary metric is the identity.
    Orthonormal,
    /// Euclidean unit tangent of the chart curve (n = 2).
    Euclidean,
}

/// A metric, a domain and (for n = 2) the boundary arclength chart.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub metric: SharedMetric,
    pub domain: Domain,
    chart: Option<BoundaryChart>,
    diam: f64,
}

pub const EPS_CONVEX: f64 = 1e-8;

impl Manifold {
    pub fn new(metric: SharedMetric, domain: Domain) -> Result<Manifold> {
        let n = metric.dim();
        if n < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
        }
        if domain.dim != n || domain.bbox.len() != n || domain.center.len() != n {
            return Err(Error::Domain("metric and domain dimensions differ".into()));
        }
        if domain.bbox.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Domain("empty chart box".into()));
        }
        metric::check_metric(metric.as_ref(), &domain.center)?;
        let chart = if n == 2 { Some(BoundaryChart::build(&domain, metric.as_ref())?) } else { None };
        let mut m = Manifold { metric, domain, chart, diam: 0.0 };
        m.diam = m.estimate_diam()?;
        m.validate()?;
        Ok(m)
    }

    pub fn shared(self) -> Arc<Manifold> {
        Arc::new(self)
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn boundary_ring(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        if self.dim() != 2 {
            return Err(Error::UnsupportedDimension(self.dim()));
        }
        let c = &self.domain.center;
        (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                let u = [t.cos(), t.sin()];
                let r = self.domain.radial(&u, 0.0)?;
                Ok(vec![c[0] + r * u[0], c[1] + r * u[1]])
            })
            .collect()
    }

    /// Upper estimate of the g-diameter: Euclidean diameter times the
    /// largest metric stretch seen on a sample grid.
    fn estimate_diam(&self) -> Result<f64> {
        let ring = self.boundary_ring(128)?;
        let mut de: f64 = 0.0;
        for a in &ring {
            for b in &ring {
                de = de.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        let mut stretch: f64 = 0.0;
        let mut g = [0.0; 4];
        let c = &self.domain.center;
        for p in &ring {
            for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let x = [c[0] + f * (p[0] - c[0]), c[1] + f * (p[1] - c[1])];
                self.metric.eval(&x, &mut g);
                let tr = g[0] + g[3];
                let det = g[0] * g[3] - g[1] * g[2];
                let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
                stretch = stretch.max(lmax.sqrt());
            }
        }
        Ok(de * stretch)
    }

    fn validate(&self) -> Result<()> {
        let ring = self.boundary_ring(256)?;
        let margin = 0.1 * ring
            .iter()
            .flat_map(|a| ring.iter().map(move |b| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()))
            .fold(0.0f64, f64::max);
        let mut grad = [0.0; 2];
        for p in &ring {
            for (k, (lo, hi)) in self.domain.bbox.iter().enumerate() {
                if p[k] - margin <= *lo || p[k] + margin >= *hi {
                    return Err(Error::Domain(format!(
                        "closure of the domain plus a collar of {margin:.3} does not fit the chart box"
                    )));
                }
            }
            let c = &self.domain.center;
            for f in [0.99, 1.0, 1.01] {
                let x = [c[0] + f * (p[0] - c[0]), c[1] + f * (p[1] - c[1])];
                self.domain.grad_b(&x, &mut grad);
                if grad[0].hypot(grad[1]) <= 1e-12 {
                    return Err(Error::Domain(format!("vanishing level-set gradient near {x:?}")));
                }
                metric::check_metric(self.metric.as_ref(), &x)?;
            }
        }
        Ok(())
    }

    pub fn diam_estimate(&self) -> f64 {
        self.diam
    }

    /// Default integration horizon, `50 · diam`.
    pub fn t_max(&self) -> f64 {
        50.0 * self.diam
    }

    pub fn chart(&self) -> Result<&BoundaryChart> {
        self.chart.as_ref().ok_or(Error::UnsupportedDimension(self.dim()))
    }

    pub fn boundary_len(&self) -> Result<f64> {
        Ok(self.chart()?.len())
    }

    /// Chart point at boundary parameter `s`.
    pub fn boundary_point(&self, s: f64) -> Result<Vec<f64>> {
        let ch = self.chart()?;
        let t = ch.theta_of_s(&self.domain, self.metric.as_ref(), s)?;
        Ok(ch.curve(&self.domain, t)?.x.to_vec())
    }

    /// `d(param)/ds` at `s`, a g-unit tangent vector.
    pub fn boundary_velocity(&self, s: f64) -> Result<Vec<f64>> {
        let ch = self.chart()?;
        let t = ch.theta_of_s(&self.domain, self.metric.as_ref(), s)?;
        let p = ch.curve(&self.domain, t)?;
        let sp = ch.speed(&self.domain, self.metric.as_ref(), t)?;
        Ok(vec![p.dx[0] / sp, p.dx[1] / sp])
    }

    /// Boundary parameter of a point on (or very near) the boundary, found
    /// through its polar angle about the domain center.
    pub fn boundary_param(&self, x: &[f64]) -> Result<f64> {
        let ch = self.chart()?;
        let c = &self.domain.center;
        let t = (x[1] - c[1]).atan2(x[0] - c[0]);
        ch.s_of_theta(&self.domain, self.metric.as_ref(), t)
    }

    /// Outward g-unit normal field `G⁻¹∇b / |∇b|_{g*}`, defined off the boundary as well.
    pub fn normal_at(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut g = vec![0.0; n * n];
        let mut l = vec![0.0; n * n];
        let mut db = vec![0.0; n];
        self.metric.eval(x, &mut g);
        self.domain.grad_b(x, &mut db);
        let mut nu = db.clone();
        metric::cholesky(n, &g, &mut l);
        metric::cholesky_solve(n, &l, &mut nu);
        let s: f64 = nu.iter().zip(&db).map(|(a, b)| a * b).sum::<f64>().sqrt();
        nu.iter_mut().for_each(|v| *v /= s);
        nu
    }

    /// Euclidean unit tangent, counterclockwise (n = 2).
    pub fn euclidean_tangent(&self, x: &[f64]) -> Vec<f64> {
        let mut db = [0.0; 2];
        self.domain.grad_b(x, &mut db);
        let r = db[0].hypot(db[1]);
        vec![-db[1] / r, db[0] / r]
    }

    pub fn frame_at(&self, x: &[f64]) -> BoundaryFrame {
        let n = self.dim();
        let normal = self.normal_at(x);
        let mut g = vec![0.0; n * n];
        self.metric.eval(x, &mut g);
        let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        if n == 2 {
            let mut t = self.euclidean_tangent(x);
            let nr = inner_with(&g, 2, &t, &t).sqrt();
            t.iter_mut().for_each(|v| *v /= nr);
            tangent.push(t);
        } else {
            let mut cands: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let mut e = vec![0.0; n];
                    e[i] = 1.0;
                    e
                })
                .collect();
            cands.sort_by(|a, b| {
                let pa = inner_with(&g, n, a, &normal).abs();
                let pb = inner_with(&g, n, b, &normal).abs();
                pa.partial_cmp(&pb).unwrap()
            });
            for mut e in cands.into_iter().take(n - 1) {
                let c = inner_with(&g, n, &e, &normal);
                e.iter_mut().zip(&normal).for_each(|(a, b)| *a -= c * b);
                for f in &tangent {
                    let c = inner_with(&g, n, &e, f);
                    e.iter_mut().zip(f).for_each(|(a, b)| *a -= c * b);
                }
                let nr = inner_with(&g, n, &e, &e).sqrt();
                e.iter_mut().for_each(|v| *v /= nr);
                tangent.push(e);
            }
        }
        BoundaryFrame { tangent, normal }
    }

    /// Matrix of `X ↦ ∇_X ν` in the tangent frame at a boundary point.
    pub fn shape_operator_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let frame = self.frame_at(x);
        let gam = metric::christoffel(self.metric.as_ref(), x)?;
        let mut g = vec![0.0; n * n];
        self.metric.eval(x, &mut g);
        let h = 1e-5 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt());
        let mut out = vec![vec![0.0; n - 1]; n - 1];
        let mut cov = vec![0.0; n];
        for (i, ei) in frame.tangent.iter().enumerate() {
            let xp: Vec<f64> = x.iter().zip(ei).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(ei).map(|(a, b)| a - h * b).collect();
            let np = self.normal_at(&xp);
            let nm = self.normal_at(&xm);
            gam.contract(ei, &frame.normal, &mut cov);
            let d: Vec<f64> = (0..n).map(|k| (np[k] - nm[k]) / (2.0 * h) + cov[k]).collect();
            for (j, ej) in frame.tangent.iter().enumerate() {
                out[i][j] = inner_with(&g, n, &d, ej);
            }
        }
        Ok(out)
    }

    pub fn shape_operator(&self, s: f64) -> Result<Vec<Vec<f64>>> {
        let x = self.boundary_point(s)?;
        self.shape_operator_at(&x)
    }

    /// Smallest shape-operator eigenvalue over `grid` boundary points.
    pub fn is_strictly_convex(&self, grid: usize) -> Result<(bool, f64)> {
        if grid < 16 {
            return Err(Error::Precondition(format!("convexity grid must be at least 16, got {grid}")));
        }
        let len = self.boundary_len()?;
        let mut min = f64::INFINITY;
        for k in 0..grid {
            let s = len * k as f64 / grid as f64;
            let sop = self.shape_operator(s)?;
            min = min.min(sop[0][0]);
        }
        Ok((min > EPS_CONVEX, min))
    }

    /// First fundamental form of the boundary at `s` in the chosen tangent basis.
    pub fn boundary_metric(&self, s: f64, frame: TangentFrame) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        match frame {
            TangentFrame::Orthonormal => {
                let mut id = vec![vec![0.0; n - 1]; n - 1];
                for (i, row) in id.iter_mut().enumerate() {
                    row[i] = 1.0;
                }
                Ok(id)
            }
            TangentFrame::Euclidean => {
                let x = self.boundary_point(s)?;
                Ok(vec![vec![self.g_tangent(&x)]])
            }
        }
    }

    /// `g(T_E, T_E)` for the Euclidean unit tangent at a boundary point.
    pub fn g_tangent(&self, x: &[f64]) -> f64 {
        let t = self.euclidean_tangent(x);
        metric::inner(self.metric.as_ref(), x, &t, &t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{Conformal, ConstField, Flat, GaussianBump};

    fn flat_disk(r: f64) -> Manifold {
        Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(r)).unwrap()
    }

    fn peanut() -> Manifold {
        let d = Domain {
            dim: 2,
            level: LevelSet::Cassini { a: 1.0, c: 1.1 },
            bbox: vec![(-2.5, 2.5), (-2.0, 2.0)],
            center: vec![0.0, 0.0],
        };
        Manifold::new(Arc::new(Flat { dim: 2 }), d).unwrap()
    }

    #[test]
    fn unit_disk_shape_operator_is_one() {
        let m = flat_disk(1.0);
        assert!((m.boundary_len().unwrap() - 2.0 * PI).abs() < 1e-12);
        for k in 0..16 {
            let s = m.shape_operator(k as f64 * 0.39).unwrap();
            assert!((s[0][0] - 1.0).abs() < 1e-8, "{}", s[0][0]);
        }
        let (ok, min) = m.is_strictly_convex(64).unwrap();
        assert!(ok && (min - 1.0).abs() < 1e-6);
    }

    #[test]
    fn radius_r_disk_has_curvature_one_over_r() {
        for r in [0.5, 2.0, 3.0] {
            let m = flat_disk(r);
            let s = m.shape_operator(0.7).unwrap();
            assert!((s[0][0] - 1.0 / r).abs() < 1e-7);
        }
    }

    #[test]
    fn peanut_is_not_convex() {
        let m = peanut();
        let (ok, min) = m.is_strictly_convex(128).unwrap();
        assert!(!ok && min < 0.0, "min = {min}");
    }

    #[test]
    fn convexity_grid_floor() {
        let m = flat_disk(1.0);
        assert!(matches!(m.is_strictly_convex(8), Err(Error::Precondition(_))));
    }

    #[test]
    fn anchor_and_orientation() {
        let m = flat_disk(1.0);
        let p0 = m.boundary_point(0.0).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-12 && p0[1].abs() < 1e-12);
        let p1 = m.boundary_point(PI / 2.0).unwrap();
        assert!(p1[0].abs() < 1e-12 && (p1[1] - 1.0).abs() < 1e-12);
        assert!((m.boundary_param(&[0.0, -1.0]).unwrap() - 1.5 * PI).abs() < 1e-12);
    }

    #[test]
    fn frame_is_orthonormal_and_outward() {
        let g = Arc::new(Conformal::new(
            2,
            GaussianBump { amplitude: 0.4, center: vec![0.3, 0.1], width: 0.5 },
            "bump",
        ));
        let m = Manifold::new(g.clone(), Domain::disk(1.0)).unwrap();
        for k in 0..40 {
            let s = m.boundary_len().unwrap() * k as f64 / 40.0;
            let x = m.boundary_point(s).unwrap();
            let f = m.frame_at(&x);
            let nn = metric::inner(g.as_ref(), &x, &f.normal, &f.normal);
            let nt = metric::inner(g.as_ref(), &x, &f.normal, &f.tangent[0]);
            assert!((nn - 1.0).abs() < 1e-10 && nt.abs() < 1e-10);
            let xo: Vec<f64> = x.iter().zip(&f.normal).map(|(a, b)| a + 1e-4 * b).collect();
            assert!(m.domain.b(&xo) > 0.0);
        }
    }

    #[test]
    fn arclength_parametrization_has_unit_speed() {
        let g = Arc::new(Conformal::new(
            2,
            GaussianBump { amplitude: 0.5, center: vec![0.6, 0.0], width: 0.4 },
            "bump",
        ));
        let m = Manifold::new(g.clone(), Domain::disk(1.0)).unwrap();
        let len = m.boundary_len().unwrap();
        for k in 0..500 {
            let s = len * k as f64 / 500.0;
            let v = m.boundary_velocity(s).unwrap();
            let x = m.boundary_point(s).unwrap();
            assert!((metric::norm(g.as_ref(), &x, &v) - 1.0).abs() < 1e-8);
            // finite-difference derivative of the parametrization
            let h = 1e-5;
            let xp = m.boundary_point(s + h).unwrap();
            let xm = m.boundary_point(s - h).unwrap();
            let d = [(xp[0] - xm[0]) / (2.0 * h), (xp[1] - xm[1]) / (2.0 * h)];
            assert!((metric::norm(g.as_ref(), &x, &d) - 1.0).abs() < 1e-7);
            assert!((m.boundary_param(&x).unwrap() - s).abs() < 1e-10 || (s == 0.0));
        }
    }

    #[test]
    fn boundary_metric_frames() {
        let m = flat_disk(1.0);
        assert_eq!(m.boundary_metric(0.3, TangentFrame::Orthonormal).unwrap(), vec![vec![1.0]]);
        assert!((m.boundary_metric(0.3, TangentFrame::Euclidean).unwrap()[0][0] - 1.0).abs() < 1e-14);
        let c = Manifold::new(Arc::new(Conformal::new(2, ConstField(0.3), "c")), Domain::disk(1.0)).unwrap();
        let gb = c.boundary_metric(1.1, TangentFrame::Euclidean).unwrap()[0][0];
        assert!((gb - 0.6f64.exp()).abs() < 1e-13);
    }

    #[test]
    fn peanut_boundary_parametrizes() {
        let m = peanut();
        let len = m.boundary_len().unwrap();
        for k in 0..64 {
            let x = m.boundary_point(len * k as f64 / 64.0).unwrap();
            assert!(m.domain.b(&x).abs() < 1e-12);
        }
    }

    #[test]
    fn bbox_too_small_is_rejected() {
        let mut d = Domain::disk(1.0);
        d.bbox = vec![(-1.05, 1.05); 2];
        assert!(matches!(Manifold::new(Arc::new(Flat { dim: 2 }), d), Err(Error::Domain(_))));
    }
}
