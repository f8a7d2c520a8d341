//! Coordinate charts built from boundary observations: the direction map
//! `Θ_q`, interior charts `(θ_q, ⟨v, Θ_q̃⟩)` and boundary charts `(Q̃, Π_W)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::{connecting_geodesics, direction, direction_frame, integrate_free, FlowOptions, GeodesicState};
use crate::jacobi::{classify_direction, Tag};
use crate::metric::{self, inner_with};

/// Charts with `|det|` at or below this are rejected.
pub const DET_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct ChartOptions {
    pub fd_step: f64,
    pub det_threshold: f64,
    /// Size of the random family of candidate vectors v.
    pub v_family: usize,
    pub seed: u64,
    /// Direction grid of the uniqueness scan in `theta_chart`.
    pub scan_grid: usize,
}

impl Default for ChartOptions {
    fn default() -> Self {
        ChartOptions { fd_step: 1e-5, det_threshold: DET_THRESHOLD, v_family: 16, seed: 0, scan_grid: 256 }
    }
}

fn free_exp(m: &Manifold, q: &[f64], dir: &[f64], t: f64) -> Result<GeodesicState> {
    if t.abs() < 1e-12 {
        let x: Vec<f64> = q.iter().zip(dir).map(|(a, b)| a + t * b).collect();
        return Ok(GeodesicState::new(&x, dir));
    }
    let (dir, t) = if t < 0.0 { (dir.iter().map(|c| -c).collect::<Vec<_>>(), -t) } else { (dir.to_vec(), t) };
    Ok(integrate_free(m.metric.as_ref(), &GeodesicState::new(q, &dir), t, &FlowOptions::default())?.end)
}

fn solve2(a: [[f64; 2]; 2], r: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([(r[0] * a[1][1] - a[0][1] * r[1]) / det, (a[0][0] * r[1] - a[1][0] * r[0]) / det])
}

/// The direction map `Θ_q(z) = exp_q⁻¹(z)/‖exp_q⁻¹(z)‖_g` in angle form.
#[derive(Debug, Clone)]
pub struct ThetaChart {
    pub q: Vec<f64>,
    /// g-orthonormal frame at q in which angles are measured.
    pub frame: [Vec<f64>; 2],
}

impl ThetaChart {
    pub fn new(m: &Manifold, q: &[f64]) -> Self {
        let f = metric::orthonormal_frame(m.metric.as_ref(), q);
        ThetaChart { q: q.to_vec(), frame: [f[0].clone(), f[1].clone()] }
    }

    pub fn direction(&self, angle: f64) -> Vec<f64> {
        direction(&self.frame, angle)
    }

    pub fn angle_of(&self, m: &Manifold, v: &[f64]) -> f64 {
        let mut g = [0.0; 4];
        m.metric.eval(&self.q, &mut g);
        inner_with(&g, 2, v, &self.frame[1]).atan2(inner_with(&g, 2, v, &self.frame[0]))
    }

    /// Solves `exp_q(t ξ(θ)) = z` by Newton iteration from `guess = (θ, t)`.
    pub fn solve(&self, m: &Manifold, z: &[f64], guess: (f64, f64)) -> Result<(f64, f64)> {
        let (mut th, mut t) = guess;
        let h = 1e-6;
        for _ in 0..40 {
            let e = free_exp(m, &self.q, &self.direction(th), t)?;
            let r = [e.x[0] - z[0], e.x[1] - z[1]];
            let ep = free_exp(m, &self.q, &self.direction(th + h), t)?;
            let em = free_exp(m, &self.q, &self.direction(th - h), t)?;
            let dth = [(ep.x[0] - em.x[0]) / (2.0 * h), (ep.x[1] - em.x[1]) / (2.0 * h)];
            let jac = [[dth[0], e.v[0]], [dth[1], e.v[1]]];
            let det = dth[0] * e.v[1] - dth[1] * e.v[0];
            if det.abs() < 1e-6 * t.abs().max(1e-3) {
                return Err(Error::SingularChart(format!("exp_q is degenerate toward ({:.6}, {:.6}): det {det:.3e}", z[0], z[1])));
            }
            let d = solve2(jac, [-r[0], -r[1]]).expect("nonsingular");
            th += d[0];
            t += d[1];
            if d[0].abs() + d[1].abs() < 1e-13 && r[0].hypot(r[1]) < 1e-11 {
                return Ok((th, t));
            }
        }
        let e = free_exp(m, &self.q, &self.direction(th), t)?;
        if (e.x[0] - z[0]).hypot(e.x[1] - z[1]) < 1e-9 {
            return Ok((th, t));
        }
        Err(Error::ChartFailure(format!("shooting from q did not converge toward ({:.6}, {:.6})", z[0], z[1])))
    }
}

/// `Θ_q(z)` for every z in the region, with uniqueness of the connecting
/// geodesic checked by a shooting scan.
pub fn theta_chart(m: &Manifold, q: &[f64], region: &[Vec<f64>], opts: &ChartOptions) -> Result<Vec<Vec<f64>>> {
    let chart = ThetaChart::new(m, q);
    region
        .iter()
        .map(|z| {
            let (conns, _) = connecting_geodesics(m, q, z, opts.scan_grid)?;
            match conns.len() {
                0 => Err(Error::ChartFailure(format!("no geodesic from q reaches ({:.6}, {:.6})", z[0], z[1]))),
                1 => {
                    let (th, _) = chart.solve(m, z, (conns[0].angle, conns[0].length))?;
                    Ok(chart.direction(th))
                }
                _ => Err(Error::NotInjective(conns.iter().map(|c| c.angle).collect())),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Interior,
    Boundary,
}

impl ChartKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChartKind::Interior => "interior",
            ChartKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChartCandidate {
    pub kind: ChartKind,
    pub p: Vec<f64>,
    /// Exit samples `(q, η)` (and `(q̃, η̃)` for interior charts).
    pub anchors: Vec<(Vec<f64>, Vec<f64>)>,
    pub v: Vec<f64>,
    /// Inward field value `W(p)` for boundary charts.
    pub w: Option<Vec<f64>>,
    /// Determinant of the finite-difference Jacobian in chart coordinates.
    pub det: f64,
    pub jacobian_ok: bool,
}

// ---------------------------------------------------------------------------
// interior charts

/// `z ↦ (θ_q(z), ⟨v, Θ_q̃(z)⟩_g)`.
#[derive(Debug, Clone)]
pub struct InteriorChart {
    pub p: Vec<f64>,
    pub theta_q: ThetaChart,
    pub theta_qt: ThetaChart,
    pub v: Vec<f64>,
    guess_q: (f64, f64),
    guess_qt: (f64, f64),
}

impl InteriorChart {
    /// Both solves as `((θ, t), (θ̃, t̃))`.
    fn solves(&self, m: &Manifold, z: &[f64]) -> Result<((f64, f64), (f64, f64))> {
        Ok((self.theta_q.solve(m, z, self.guess_q)?, self.theta_qt.solve(m, z, self.guess_qt)?))
    }

    fn second(&self, m: &Manifold, angle: f64) -> f64 {
        metric::inner(m.metric.as_ref(), &self.theta_qt.q, &self.v, &self.theta_qt.direction(angle))
    }

    pub fn coords(&self, m: &Manifold, z: &[f64]) -> Result<[f64; 2]> {
        let ((a, _), (b, _)) = self.solves(m, z)?;
        Ok([a, self.second(m, b)])
    }

    /// Central-difference Jacobian `∂(coords)/∂z`, rows = coordinates.
    pub fn jacobian(&self, m: &Manifold, z: &[f64], h: f64) -> Result<[[f64; 2]; 2]> {
        let mut jac = [[0.0; 2]; 2];
        for i in 0..2 {
            let mut zp = z.to_vec();
            let mut zm = z.to_vec();
            zp[i] += h;
            zm[i] -= h;
            let (cp, cm) = (self.coords(m, &zp)?, self.coords(m, &zm)?);
            for r in 0..2 {
                jac[r][i] = (cp[r] - cm[r]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// Point with the given chart coordinates, by Newton iteration from `guess`.
    pub fn invert(&self, m: &Manifold, c: [f64; 2], guess: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut z = guess.to_vec();
        for _ in 0..30 {
            let cz = self.coords(m, &z)?;
            let r = [cz[0] - c[0], cz[1] - c[1]];
            if r[0].abs() + r[1].abs() < 1e-13 {
                return Ok(z);
            }
            let d = solve2(self.jacobian(m, &z, h)?, [-r[0], -r[1]])
                .ok_or_else(|| Error::SingularChart("chart Jacobian vanished during inversion".into()))?;
            z[0] += d[0];
            z[1] += d[1];
        }
        Ok(z)
    }
}

fn det2(j: [[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

fn g_unit_random(m: &Manifold, x: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a: f64 = rng.gen_range(0.0..2.0 * PI);
    crate::flow::unit(m.metric.as_ref(), x, &[a.cos(), a.sin()])
}

/// Interior chart from two given directions at p. Without `v`, the best
/// conditioned vector of a seeded random family is used.
pub fn interior_chart_with(m: &Manifold, p: &[f64], xi: &[f64], xi_t: &[f64], v: Option<&[f64]>, opts: &ChartOptions) -> Result<(ChartCandidate, InteriorChart)> {
    let metric = m.metric.as_ref();
    let xi = crate::flow::unit(metric, p, xi);
    let xi_t = crate::flow::unit(metric, p, xi_t);
    let e1 = classify_direction(m, p, &xi)?;
    let e2 = classify_direction(m, p, &xi_t)?;
    let (q, eta) = (e1.exit.x_exit.clone(), e1.exit.v_exit.clone());
    let (qt, eta_t) = (e2.exit.x_exit.clone(), e2.exit.v_exit.clone());
    if (q[0] - qt[0]).hypot(q[1] - qt[1]) < 1e-6 {
        return Err(Error::ChartFailure("both directions exit at the same boundary point".into()));
    }
    let theta_q = ThetaChart::new(m, &q);
    let theta_qt = ThetaChart::new(m, &qt);
    let back = |e: &[f64]| e.iter().map(|c| -c).collect::<Vec<_>>();
    let guess_q = (theta_q.angle_of(m, &back(&eta)), e1.exit.t_exit);
    let guess_qt = (theta_qt.angle_of(m, &back(&eta_t)), e2.exit.t_exit);
    let mut chart = InteriorChart { p: p.to_vec(), theta_q, theta_qt, v: vec![0.0, 0.0], guess_q, guess_qt };

    let h = opts.fd_step;
    // derivatives of θ_q and of the unit vector Θ_q̃ at p
    let mut dth = [0.0; 2];
    let mut dvec = [[0.0; 2]; 2];
    for i in 0..2 {
        let mut zp = p.to_vec();
        let mut zm = p.to_vec();
        zp[i] += h;
        zm[i] -= h;
        let ((ap, _), (bp, _)) = chart.solves(m, &zp)?;
        let ((am, _), (bm, _)) = chart.solves(m, &zm)?;
        dth[i] = (ap - am) / (2.0 * h);
        let (up, um) = (chart.theta_qt.direction(bp), chart.theta_qt.direction(bm));
        for k in 0..2 {
            dvec[k][i] = (up[k] - um[k]) / (2.0 * h);
        }
    }
    let mut g = [0.0; 4];
    metric.eval(&qt, &mut g);
    let det_for = |v: &[f64]| {
        let gv = [g[0] * v[0] + g[1] * v[1], g[2] * v[0] + g[3] * v[1]];
        let row = [gv[0] * dvec[0][0] + gv[1] * dvec[1][0], gv[0] * dvec[0][1] + gv[1] * dvec[1][1]];
        dth[0] * row[1] - dth[1] * row[0]
    };
    let v = match v {
        Some(v) => v.to_vec(),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            (0..opts.v_family.max(1))
                .map(|_| g_unit_random(m, &qt, &mut rng))
                .max_by(|a, b| det_for(a).abs().total_cmp(&det_for(b).abs()))
                .expect("nonempty family")
        }
    };
    chart.v = v.clone();
    let det = det2(chart.jacobian(m, p, h)?);
    let cand = ChartCandidate {
        kind: ChartKind::Interior,
        p: p.to_vec(),
        anchors: vec![(q, eta), (qt, eta_t)],
        v,
        w: None,
        det,
        jacobian_ok: det.abs() > opts.det_threshold,
    };
    Ok((cand, chart))
}

/// Interior chart at p from two good directions about a right angle apart.
pub fn interior_chart(m: &Manifold, p: &[f64], opts: &ChartOptions) -> Result<(ChartCandidate, InteriorChart)> {
    if m.domain.b(p) >= 0.0 {
        return Err(Error::Precondition("interior chart requested at a point outside the interior".into()));
    }
    let frame = direction_frame(m, p);
    const K: usize = 8;
    let angles: Vec<f64> = (0..K).map(|k| 0.1 + 2.0 * PI * k as f64 / K as f64).collect();
    let mut tags: Vec<Option<Tag>> = vec![None; K];
    let mut tag = |k: usize| -> Result<Tag> {
        if let Some(t) = tags[k] {
            return Ok(t);
        }
        let t = classify_direction(m, p, &direction(&frame, angles[k]))?.tag;
        tags[k] = Some(t);
        Ok(t)
    };
    // pairs ordered by separation: right angles first, then 45° and 135°
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for sep in [2usize, 6, 1, 3, 5, 7] {
        for i in 0..K {
            pairs.push((i, (i + sep) % K));
        }
    }
    let mut last_err = None;
    for (i, j) in pairs {
        if tag(i)? != Tag::Good || tag(j)? != Tag::Good {
            continue;
        }
        match interior_chart_with(m, p, &direction(&frame, angles[i]), &direction(&frame, angles[j]), None, opts) {
            Ok((c, ch)) if c.jacobian_ok => return Ok((c, ch)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    let good = tags.iter().filter(|t| **t == Some(Tag::Good)).count();
    let probed = tags.iter().filter(|t| t.is_some()).count();
    Err(Error::ChartFailure(format!(
        "no certified interior chart at ({:.6}, {:.6}): {good} of {probed} probed directions good{}",
        p[0],
        p[1],
        last_err.map_or(String::new(), |e| format!(", last error: {e}"))
    )))
}

// ---------------------------------------------------------------------------
// boundary charts

/// Boundary chart `x ↦ (Q̃_{q,v}(x), Π_W(x))` near a boundary point, with
/// `W = cos α·(−ν) + sin α·e₁`.
#[derive(Debug, Clone)]
pub struct BoundaryChartMap {
    pub s_p: f64,
    pub tilt: f64,
    pub theta_q: ThetaChart,
    pub v: Vec<f64>,
    sign: f64,
    guess_q: (f64, f64),
}

impl BoundaryChartMap {
    pub fn w_at(&self, m: &Manifold, z: &[f64]) -> Vec<f64> {
        let f = m.frame_at(z);
        let (s, c) = self.tilt.sin_cos();
        (0..2).map(|k| -c * f.normal[k] + s * f.tangent[0][k]).collect()
    }

    /// `E_W(z(s), t) = exp_{z(s)}(t W)`.
    pub fn e_w(&self, m: &Manifold, s: f64, t: f64) -> Result<Vec<f64>> {
        let z = m.boundary_point(s)?;
        let w = self.w_at(m, &z);
        Ok(free_exp(m, &z, &w, t)?.x)
    }

    /// `Π_W(x)` as `(s, t)` with `E_W(z(s), t) = x`.
    pub fn pi(&self, m: &Manifold, x: &[f64]) -> Result<(f64, f64)> {
        let (mut s, mut t) = (self.s_p, 0.0);
        let h = 1e-6;
        for _ in 0..40 {
            let z = m.boundary_point(s)?;
            let w = self.w_at(m, &z);
            let e = free_exp(m, &z, &w, t)?;
            let r = [e.x[0] - x[0], e.x[1] - x[1]];
            if r[0].hypot(r[1]) < 1e-13 {
                break;
            }
            let (ep, em) = (self.e_w(m, s + h, t)?, self.e_w(m, s - h, t)?);
            let ds = [(ep[0] - em[0]) / (2.0 * h), (ep[1] - em[1]) / (2.0 * h)];
            let d = solve2([[ds[0], e.v[0]], [ds[1], e.v[1]]], [-r[0], -r[1]])
                .ok_or_else(|| Error::SingularChart("E_W is degenerate".into()))?;
            s += d[0];
            t += d[1];
            if d[0].abs() + d[1].abs() < 1e-14 {
                break;
            }
        }
        Ok((m.chart()?.wrap(s), t))
    }

    fn q_of(&self, m: &Manifold, x: &[f64]) -> Result<f64> {
        let (th, _) = self.theta_q.solve(m, x, self.guess_q)?;
        Ok(metric::inner(m.metric.as_ref(), &self.theta_q.q, &self.v, &self.theta_q.direction(th)))
    }

    /// `Q̃(x) = ±(Q(Π_W(x)) − Q(x))`, signed to be nonnegative in M.
    pub fn q_tilde(&self, m: &Manifold, x: &[f64]) -> Result<f64> {
        let (s, _) = self.pi(m, x)?;
        let foot = m.boundary_point(s)?;
        Ok(self.sign * (self.q_of(m, &foot)? - self.q_of(m, x)?))
    }

    pub fn coords(&self, m: &Manifold, x: &[f64]) -> Result<[f64; 2]> {
        Ok([self.q_tilde(m, x)?, self.pi(m, x)?.0])
    }
}

/// Boundary chart at the boundary point with parameter `s_p`.
pub fn boundary_chart(m: &Manifold, s_p: f64, opts: &ChartOptions) -> Result<(ChartCandidate, BoundaryChartMap)> {
    let metric = m.metric.as_ref();
    let p = m.boundary_point(s_p)?;
    let f = m.frame_at(&p);
    // W(p) must not generate a self-intersecting geodesic
    let mut tilt = None;
    for a in [0.0, 0.2, -0.2, 0.4, -0.4, 0.6, -0.6] {
        let (s, c) = f64::sin_cos(a);
        let w: Vec<f64> = (0..2).map(|k| -c * f.normal[k] + s * f.tangent[0][k]).collect();
        if classify_direction(m, &p, &w)?.tag != Tag::SelfIntersecting {
            tilt = Some(a);
            break;
        }
    }
    let tilt = tilt.ok_or_else(|| Error::ChartFailure("every tried inward field self-intersects at p".into()))?;
    let mut map = BoundaryChartMap {
        s_p,
        tilt,
        theta_q: ThetaChart::new(m, &p),
        v: vec![0.0, 0.0],
        sign: 1.0,
        guess_q: (0.0, 0.0),
    };
    let wp = map.w_at(m, &p);
    let wperp = crate::jacobi::rotate90(metric, &p, &wp);
    // a good direction from p, transversal to W(p)
    let mut chosen = None;
    for b in [PI / 4.0, -PI / 4.0, PI / 3.0, -PI / 3.0, PI / 6.0, -PI / 6.0] {
        let (s, c) = f64::sin_cos(b);
        let xi: Vec<f64> = (0..2).map(|k| c * wp[k] + s * wperp[k]).collect();
        let cls = classify_direction(m, &p, &xi)?;
        if cls.tag == Tag::Good {
            chosen = Some(cls);
            break;
        }
    }
    let cls = chosen.ok_or_else(|| Error::ChartFailure("no good direction transversal to W at p".into()))?;
    let (q, eta) = (cls.exit.x_exit.clone(), cls.exit.v_exit.clone());
    map.theta_q = ThetaChart::new(m, &q);
    let back: Vec<f64> = eta.iter().map(|c| -c).collect();
    map.guess_q = (map.theta_q.angle_of(m, &back), cls.exit.t_exit);

    // one-sided derivative of Θ_q along W(p)
    let h = opts.fd_step;
    let dir_at = |map: &BoundaryChartMap, t: f64| -> Result<Vec<f64>> {
        let x = map.e_w(m, s_p, t)?;
        let (th, _) = map.theta_q.solve(m, &x, map.guess_q)?;
        Ok(map.theta_q.direction(th))
    };
    let (u0, u1, u2) = (dir_at(&map, 0.0)?, dir_at(&map, h)?, dir_at(&map, 2.0 * h)?);
    let dw: Vec<f64> = (0..2).map(|k| (-3.0 * u0[k] + 4.0 * u1[k] - u2[k]) / (2.0 * h)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let v = (0..opts.v_family.max(1))
        .map(|_| g_unit_random(m, &q, &mut rng))
        .max_by(|a, b| {
            let ca = metric::inner(metric, &q, a, &dw).abs();
            let cb = metric::inner(metric, &q, b, &dw).abs();
            ca.total_cmp(&cb)
        })
        .expect("nonempty family");
    let c = metric::inner(metric, &q, &v, &dw);
    map.v = v.clone();
    map.sign = if c > 0.0 { -1.0 } else { 1.0 };

    // Jacobian in (s, t), then converted to chart coordinates x
    let at = |s: f64, t: f64| -> Result<[f64; 2]> {
        let x = map.e_w(m, s, t)?;
        let mut c = map.coords(m, &x)?;
        c[1] = s_p + m.chart()?.periodic_diff(c[1], s_p);
        Ok(c)
    };
    let (cp, cm) = (at(s_p + h, 0.0)?, at(s_p - h, 0.0)?);
    let (c0, c1, c2) = (at(s_p, 0.0)?, at(s_p, h)?, at(s_p, 2.0 * h)?);
    let jst = [
        [(cp[0] - cm[0]) / (2.0 * h), (-3.0 * c0[0] + 4.0 * c1[0] - c2[0]) / (2.0 * h)],
        [(cp[1] - cm[1]) / (2.0 * h), (-3.0 * c0[1] + 4.0 * c1[1] - c2[1]) / (2.0 * h)],
    ];
    let xs = m.boundary_velocity(s_p)?;
    let dx = xs[0] * wp[1] - xs[1] * wp[0];
    let det = det2(jst) / dx;
    let cand = ChartCandidate {
        kind: ChartKind::Boundary,
        p,
        anchors: vec![(q, eta)],
        v,
        w: Some(wp),
        det,
        jacobian_ok: det.abs() > opts.det_threshold,
    };
    Ok((cand, map))
}

/// Chart certification rows `p..., kind, det, ok`.
pub fn charts_to_csv(charts: &[ChartCandidate]) -> String {
    let mut s = String::from("p1,p2,kind,det,ok\n");
    for c in charts {
        s.push_str(&format!("{:.16e},{:.16e},{},{:.16e},{}\n", c.p[0], c.p[1], c.kind.as_str(), c.det, c.jacobian_ok));
    }
    s
}
