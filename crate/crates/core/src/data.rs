//! Scattering sets of point sources, datasets and their text format,
//! tangential-data lifting, boundary-norm recovery and Σ-set queries.
//!
//! Sample conventions (n = 2):
//! - complete samples carry `eta_t`, the component of the unit exit
//!   direction along the g-unit tangent `e₁`, and `eta_nu ≥ 0`, the outward
//!   normal component;
//! - tangential samples carry the coefficient c of the tangential part along
//!   the chart's Euclidean unit tangent `T_E`, so that `η^T = c·T_E`. The
//!   dataset header stores `g(T_E, T_E)` along the boundary.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::{shoot_fan, ExitRecord};
use crate::metric::inner_with;

/// Number of `#gbdry` samples written to dataset headers.
pub const GBDRY_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub s: f64,
    pub eta_t: Vec<f64>,
    pub eta_nu: Option<f64>,
}

impl BoundarySample {
    pub fn is_complete(&self) -> bool {
        self.eta_nu.is_some()
    }

    /// Direction angle `atan2(η_t, η_ν)` of a complete planar sample,
    /// in `[−π/2, π/2]`.
    pub fn angle(&self) -> f64 {
        self.eta_t[0].atan2(self.eta_nu.unwrap_or(0.0))
    }

    pub fn from_angle(s: f64, angle: f64) -> Self {
        BoundarySample { s, eta_t: vec![angle.sin()], eta_nu: Some(angle.cos()) }
    }

    pub fn is_tangential(&self) -> bool {
        self.eta_nu.map_or(false, |v| v < 1e-9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringSet {
    pub id: String,
    pub samples: Vec<BoundarySample>,
}

impl ScatteringSet {
    pub fn is_complete(&self) -> bool {
        self.samples.iter().all(|s| s.is_complete())
    }

    /// `(s, angle)` coordinates of the samples.
    pub fn points(&self) -> Vec<[f64; 2]> {
        self.samples.iter().map(|s| [s.s, s.angle()]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub metric_id: String,
    pub dim: usize,
    pub grid: usize,
    pub boundary_len: f64,
    /// `(s, g(T_E, T_E))` at uniformly spaced boundary parameters.
    pub gbdry: Vec<(f64, f64)>,
    pub sets: Vec<ScatteringSet>,
}

/// Sample of a unit exit vector in the boundary frame at its exit point.
pub fn exit_sample(m: &Manifold, e: &ExitRecord, complete: bool) -> BoundarySample {
    let f = m.frame_at(&e.x_exit);
    let mut g = [0.0; 4];
    m.metric.eval(&e.x_exit, &mut g);
    let t = inner_with(&g, 2, &e.v_exit, &f.tangent[0]);
    let nu = inner_with(&g, 2, &e.v_exit, &f.normal).max(0.0);
    let r = t.hypot(nu);
    let s = e.s_exit.expect("planar exit");
    if complete {
        BoundarySample { s, eta_t: vec![t / r], eta_nu: Some(nu / r) }
    } else {
        // e₁ = T_E / √g11, so the T_E coefficient is (t/r)/√g11
        let g11 = m.g_tangent(&e.x_exit);
        BoundarySample { s, eta_t: vec![t / r / g11.sqrt()], eta_nu: None }
    }
}

fn dedup(samples: &mut Vec<BoundarySample>) {
    let mut out: Vec<BoundarySample> = Vec::with_capacity(samples.len());
    for smp in samples.drain(..) {
        let dup = out.iter().rev().take(4).any(|o| {
            (o.s - smp.s).abs() < 1e-9
                && o.eta_t.iter().zip(&smp.eta_t).all(|(a, b)| (a - b).abs() < 1e-9)
                && match (o.eta_nu, smp.eta_nu) {
                    (Some(a), Some(b)) => (a - b).abs() < 1e-9,
                    (None, None) => true,
                    _ => false,
                }
        });
        if !dup {
            out.push(smp);
        }
    }
    *samples = out;
}

/// Exit samples of the uniform direction fan from p, in grid order.
pub fn scattering_set(m: &Manifold, p: &[f64], grid: usize, complete: bool, id: &str) -> Result<ScatteringSet> {
    if grid < 64 {
        return Err(Error::Precondition(format!("direction grid must be at least 64, got {grid}")));
    }
    let exits = shoot_fan(m, p, grid)?;
    let mut samples: Vec<BoundarySample> = exits.iter().map(|e| exit_sample(m, e, complete)).collect();
    dedup(&mut samples);
    Ok(ScatteringSet { id: id.to_string(), samples })
}

/// Boundary metric samples for the dataset header.
pub fn boundary_metric_samples(m: &Manifold) -> Result<Vec<(f64, f64)>> {
    let len = m.boundary_len()?;
    (0..GBDRY_SAMPLES)
        .map(|k| {
            let s = len * k as f64 / GBDRY_SAMPLES as f64;
            Ok((s, m.g_tangent(&m.boundary_point(s)?)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub id: String,
    pub x: Vec<f64>,
}

pub fn generate_dataset(m: &Manifold, sources: &[Source], grid: usize, complete: bool) -> Result<Dataset> {
    let sets = sources
        .par_iter()
        .map(|src| scattering_set(m, &src.x, grid, complete, &src.id))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        metric_id: m.metric.id(),
        dim: m.dim(),
        grid,
        boundary_len: m.boundary_len()?,
        gbdry: boundary_metric_samples(m)?,
        sets,
    })
}

impl Dataset {
    pub fn is_complete(&self) -> bool {
        self.sets.iter().all(|s| s.is_complete())
    }

    pub fn find(&self, id: &str) -> Result<&ScatteringSet> {
        self.sets.iter().find(|s| s.id == id).ok_or_else(|| Error::IdNotFound(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.sets.iter().map(|s| s.id.clone()).collect()
    }

    /// Direction-grid spacing `2π / grid`.
    pub fn grid_spacing(&self) -> f64 {
        2.0 * PI / self.grid as f64
    }

    /// Default Σ-matching radius `4 · 2π / grid`.
    pub fn eps_match(&self) -> f64 {
        4.0 * self.grid_spacing()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("#geoscatter-dataset v1\n");
        let _ = writeln!(
            out,
            "#metric {}  dim {}  grid {}  boundary_len {:.16e}",
            self.metric_id, self.dim, self.grid, self.boundary_len
        );
        for (s, g) in &self.gbdry {
            let _ = writeln!(out, "#gbdry {s:.16e} {g:.16e}");
        }
        for set in &self.sets {
            let _ = writeln!(out, "source {}", set.id);
            for smp in &set.samples {
                let _ = write!(out, "{:.16e}", smp.s);
                for t in &smp.eta_t {
                    let _ = write!(out, " {t:.16e}");
                }
                if let Some(nu) = smp.eta_nu {
                    let _ = write!(out, " {nu:.16e}");
                }
                out.push('\n');
            }
            out.push_str("end\n");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Dataset> {
        Dataset::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Dataset> {
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == "#geoscatter-dataset v1" => {}
            _ => return Err(perr(1, "missing `#geoscatter-dataset v1` header")),
        }
        let (hl, header) = lines.next().ok_or_else(|| perr(2, "missing #metric header"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 8 || toks[0] != "#metric" || toks[2] != "dim" || toks[4] != "grid" || toks[6] != "boundary_len" {
            return Err(perr(hl, "malformed #metric header"));
        }
        let num = |s: &str, line: usize| s.parse::<f64>().map_err(|_| perr(line, &format!("bad number `{s}`")));
        let int = |s: &str, line: usize| s.parse::<usize>().map_err(|_| perr(line, &format!("bad integer `{s}`")));
        let dim = int(toks[3], hl)?;
        if dim < 2 {
            return Err(perr(hl, "dimension must be at least 2"));
        }
        let mut ds = Dataset {
            metric_id: toks[1].to_string(),
            dim,
            grid: int(toks[5], hl)?,
            boundary_len: num(toks[7], hl)?,
            gbdry: vec![],
            sets: vec![],
        };
        let mut current: Option<ScatteringSet> = None;
        let mut columns: Option<usize> = None;
        for (ln, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#gbdry") {
                if current.is_some() || !ds.sets.is_empty() {
                    return Err(perr(ln, "#gbdry after source blocks"));
                }
                let v: Vec<&str> = rest.split_whitespace().collect();
                if v.len() != 2 {
                    return Err(perr(ln, "#gbdry needs `<s> <g11>`"));
                }
                ds.gbdry.push((num(v[0], ln)?, num(v[1], ln)?));
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if let Some(id) = line.strip_prefix("source ") {
                if current.is_some() {
                    return Err(perr(ln, "nested source block (missing `end`)"));
                }
                let id = id.trim();
                if id.is_empty() || id.contains(char::is_whitespace) {
                    return Err(perr(ln, "bad source id"));
                }
                current = Some(ScatteringSet { id: id.to_string(), samples: vec![] });
                continue;
            }
            if line == "end" {
                let set = current.take().ok_or_else(|| perr(ln, "`end` without source"))?;
                ds.sets.push(set);
                continue;
            }
            let set = current.as_mut().ok_or_else(|| perr(ln, "sample outside a source block"))?;
            let vals = line.split_whitespace().map(|t| num(t, ln)).collect::<Result<Vec<f64>>>()?;
            match columns {
                None => columns = Some(vals.len()),
                Some(c) if c != vals.len() => return Err(perr(ln, "inconsistent column count")),
                _ => {}
            }
            let nt = dim - 1;
            let sample = if vals.len() == 1 + nt {
                BoundarySample { s: vals[0], eta_t: vals[1..].to_vec(), eta_nu: None }
            } else if vals.len() == 2 + nt {
                BoundarySample { s: vals[0], eta_t: vals[1..1 + nt].to_vec(), eta_nu: Some(vals[1 + nt]) }
            } else {
                return Err(perr(ln, &format!("expected {} or {} columns", 1 + nt, 2 + nt)));
            };
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(perr(ln, "non-finite value"));
            }
            set.samples.push(sample);
        }
        if current.is_some() {
            return Err(perr(text.lines().count(), "unterminated source block"));
        }
        Ok(ds)
    }
}

/// Trigonometric interpolant of `g(T_E, T_E)` from the header samples.
#[derive(Debug, Clone)]
pub struct BoundaryMetricTable {
    len: f64,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl BoundaryMetricTable {
    pub fn new(ds: &Dataset) -> Result<Self> {
        let n = ds.gbdry.len();
        if n < 4 {
            return Err(Error::InsufficientData { reason: "boundary metric samples missing from dataset".into(), achieved: n as f64 });
        }
        let len = ds.boundary_len;
        let h = n / 2;
        let mut a = vec![0.0; h + 1];
        let mut b = vec![0.0; h + 1];
        for k in 0..=h {
            for (j, (_, g)) in ds.gbdry.iter().enumerate() {
                let th = 2.0 * PI * (k * j) as f64 / n as f64;
                a[k] += g * th.cos();
                b[k] += g * th.sin();
            }
            a[k] *= 2.0 / n as f64;
            b[k] *= 2.0 / n as f64;
        }
        if n % 2 == 0 {
            a[h] *= 0.5;
            b[h] = 0.0;
        }
        a[0] *= 0.5;
        Ok(BoundaryMetricTable { len, a, b })
    }

    pub fn g11(&self, s: f64) -> f64 {
        let w = 2.0 * PI * s / self.len;
        let mut v = 0.0;
        for k in 0..self.a.len() {
            let (sn, cs) = (k as f64 * w).sin_cos();
            v += self.a[k] * cs + self.b[k] * sn;
        }
        v
    }
}

/// Lifts tangential samples to complete ones: `η_ν = √(1 − ‖η^T‖²_g)`.
pub fn lift_tangential(ds: &Dataset) -> Result<Dataset> {
    if ds.dim != 2 {
        return Err(Error::UnsupportedDimension(ds.dim));
    }
    let table = BoundaryMetricTable::new(ds)?;
    let mut out = ds.clone();
    for set in &mut out.sets {
        for smp in &mut set.samples {
            if smp.eta_nu.is_some() {
                continue;
            }
            let t = smp.eta_t[0] * table.g11(smp.s).sqrt();
            let n2 = t * t;
            if n2 > 1.0 + 1e-9 {
                return Err(Error::CorruptData(format!(
                    "tangential sample of `{}` at s = {} has g-norm {} > 1",
                    set.id,
                    smp.s,
                    n2.sqrt()
                )));
            }
            smp.eta_t = vec![t];
            smp.eta_nu = Some((1.0 - n2).max(0.0).sqrt());
        }
    }
    Ok(out)
}

/// Recovers `‖u·T_E‖_g` at boundary parameter s from tangential data: the
/// largest observed coefficient along the ray near s is the reciprocal of
/// `‖T_E‖_g`. `window` bounds `|s' − s|` for contributing samples.
pub fn recover_boundary_norm(ds: &Dataset, s: f64, u: f64, window: f64) -> Result<f64> {
    if ds.dim != 2 {
        return Err(Error::UnsupportedDimension(ds.dim));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    let len = ds.boundary_len;
    let mut sup: f64 = 0.0;
    let mut count = 0usize;
    for set in &ds.sets {
        for smp in &set.samples {
            if smp.eta_nu.is_some() {
                continue;
            }
            let d = (smp.s - s).rem_euclid(len);
            let d = d.min(len - d);
            let c = smp.eta_t[0];
            if d <= window && c * u > 0.0 {
                sup = sup.max(c.abs());
                count += 1;
            }
        }
    }
    if count == 0 || sup == 0.0 {
        return Err(Error::InsufficientData {
            reason: format!("no tangential samples within {window} of s = {s} along the ray"),
            achieved: sup,
        });
    }
    Ok(u.abs() / sup)
}

/// Inner product of two tangent coefficients from recovered norms via the
/// parallelogram rule.
pub fn recover_boundary_inner(ds: &Dataset, s: f64, a: f64, b: f64, window: f64) -> Result<f64> {
    let p = recover_boundary_norm(ds, s, a + b, window)?;
    let m = recover_boundary_norm(ds, s, a - b, window)?;
    Ok(0.25 * (p * p - m * m))
}

// ---------------------------------------------------------------------------
// Σ-sets

/// Spatial hash of all complete samples of a dataset in `(s, angle)`.
#[derive(Debug, Clone)]
pub struct SampleIndex {
    cell: f64,
    len: f64,
    ncell_s: i64,
    map: HashMap<(i64, i64), Vec<(u32, u32)>>,
}

impl SampleIndex {
    pub fn new(ds: &Dataset, radius: f64) -> Self {
        let len = ds.boundary_len;
        let ncell_s = ((len / radius).floor() as i64).max(1);
        let cell = len / ncell_s as f64;
        let mut map: HashMap<(i64, i64), Vec<(u32, u32)>> = HashMap::new();
        for (i, set) in ds.sets.iter().enumerate() {
            for (j, smp) in set.samples.iter().enumerate() {
                if smp.eta_nu.is_none() {
                    continue;
                }
                let key = (((smp.s.rem_euclid(len)) / cell).floor() as i64 % ncell_s, (smp.angle() / cell).floor() as i64);
                map.entry(key).or_default().push((i as u32, j as u32));
            }
        }
        SampleIndex { cell, len, ncell_s, map }
    }

    /// `(set, sample)` indices within `radius` (≤ the build radius) of `(s, angle)`.
    pub fn query(&self, ds: &Dataset, s: f64, angle: f64, radius: f64) -> Vec<(usize, usize)> {
        let cs = ((s.rem_euclid(self.len)) / self.cell).floor() as i64;
        let ca = (angle / self.cell).floor() as i64;
        let mut out = Vec::new();
        let span = if self.ncell_s < 3 { 0..self.ncell_s } else { -1..2 };
        for di in span.clone() {
            let key_s = if self.ncell_s < 3 { di } else { (cs + di).rem_euclid(self.ncell_s) };
            for dj in -1..2 {
                if let Some(v) = self.map.get(&(key_s, ca + dj)) {
                    for &(i, j) in v {
                        let smp = &ds.sets[i as usize].samples[j as usize];
                        if sample_distance(self.len, s, angle, smp.s, smp.angle()) <= radius {
                            out.push((i as usize, j as usize));
                        }
                    }
                }
            }
            if self.ncell_s < 3 {
                continue;
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Product distance `√(d_∂M(s₁,s₂)² + angle²)` between two exit samples.
#[inline]
pub fn sample_distance(len: f64, s1: f64, a1: f64, s2: f64, a2: f64) -> f64 {
    let d = (s1 - s2).rem_euclid(len);
    let d = d.min(len - d);
    d.hypot(a1 - a2)
}

/// Σ(q, η): ids of sources whose scattering set has a sample within `eps`
/// of the exit sample. Empty for tangential samples.
pub fn sigma_set(ds: &Dataset, sample: &BoundarySample, eps: f64) -> Vec<String> {
    let index = SampleIndex::new(ds, eps);
    sigma_set_indexed(ds, &index, sample, eps).into_iter().map(|i| ds.sets[i].id.clone()).collect()
}

/// Σ as set indices, using a prebuilt index.
pub fn sigma_set_indexed(ds: &Dataset, index: &SampleIndex, sample: &BoundarySample, eps: f64) -> Vec<usize> {
    if sample.eta_nu.is_none() || sample.is_tangential() {
        return vec![];
    }
    let mut ids: Vec<usize> = index.query(ds, sample.s, sample.angle(), eps).into_iter().map(|(i, _)| i).collect();
    ids.dedup();
    ids
}

/// Whether some chord through p (a grid direction and its opposite) misses q.
pub fn separates(ds: &Dataset, id_p: &str, id_q: &str) -> Result<bool> {
    let p = ds.find(id_p)?;
    let qi = ds.sets.iter().position(|s| s.id == id_q).ok_or_else(|| Error::IdNotFound(id_q.to_string()))?;
    if id_p == id_q {
        return Ok(false);
    }
    let eps = ds.eps_match();
    let index = SampleIndex::new(ds, eps);
    let n = p.samples.len();
    let paired = n == ds.grid && n % 2 == 0;
    for (k, smp) in p.samples.iter().enumerate() {
        if smp.is_tangential() {
            continue;
        }
        let mut on_chord = sigma_set_indexed(ds, &index, smp, eps).contains(&qi);
        if paired && !on_chord {
            on_chord = sigma_set_indexed(ds, &index, &p.samples[(k + n / 2) % n], eps).contains(&qi);
        }
        if !on_chord {
            return Ok(true);
        }
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// source layouts

/// Square lattice of spacing h inside the domain, at least `margin` inside
/// in level-set terms (`b < −margin`).
pub fn lattice_points(m: &Manifold, h: f64, margin: f64) -> Vec<Vec<f64>> {
    let bb = &m.domain.bbox;
    let mut pts = Vec::new();
    let i0 = (bb[0].0 / h).ceil() as i64;
    let i1 = (bb[0].1 / h).floor() as i64;
    let j0 = (bb[1].0 / h).ceil() as i64;
    let j1 = (bb[1].1 / h).floor() as i64;
    for j in j0..=j1 {
        for i in i0..=i1 {
            let x = vec![i as f64 * h, j as f64 * h];
            if m.domain.b(&x) < -margin {
                pts.push(x);
            }
        }
    }
    pts
}

/// Uniform random points in the domain (rejection sampling in the box).
pub fn random_points(m: &Manifold, count: usize, margin: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bb = &m.domain.bbox;
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let x = vec![rng.gen_range(bb[0].0..bb[0].1), rng.gen_range(bb[1].0..bb[1].1)];
        if m.domain.b(&x) < -margin {
            pts.push(x);
        }
    }
    pts
}

/// `count` points at g-independent radial fraction `frac` of the
/// centre-to-boundary distance, evenly spaced in polar angle.
pub fn ring_points(m: &Manifold, count: usize, frac: f64) -> Result<Vec<Vec<f64>>> {
    let c = &m.domain.center;
    (0..count)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / count as f64;
            let u = [t.cos(), t.sin()];
            let r = m.domain.radial(&u, 0.0)?;
            Ok(vec![c[0] + frac * r * u[0], c[1] + frac * r * u[1]])
        })
        .collect()
}

/// Points at Euclidean depth `depth` below the boundary along the radial ray.
pub fn boundary_layer_points(m: &Manifold, count: usize, depth: f64) -> Result<Vec<Vec<f64>>> {
    let c = &m.domain.center;
    (0..count)
        .map(|k| {
            let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
            let u = [t.cos(), t.sin()];
            let r = m.domain.radial(&u, 0.0)? - depth;
            Ok(vec![c[0] + r * u[0], c[1] + r * u[1]])
        })
        .collect()
}

/// Assigns ids. Blind ids come from a seeded permutation and the sources are
/// returned sorted by id, so neither ids nor order reveal the layout.
pub fn assign_ids(points: Vec<Vec<f64>>, blind: bool, seed: u64) -> Vec<Source> {
    let n = points.len();
    let width = n.max(1).to_string().len().max(4);
    if !blind {
        return points.into_iter().enumerate().map(|(i, x)| Source { id: format!("p{i:0width$}"), x }).collect();
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1d5));
    let mut out: Vec<Source> =
        points.into_iter().zip(perm).map(|(x, k)| Source { id: format!("src{k:0width$}"), x }).collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// Truth sidecar: one `id x1 x2 …` line per source.
pub fn truth_text(sources: &[Source]) -> String {
    let mut out = String::from("#geoscatter-truth v1\n");
    for s in sources {
        out.push_str(&s.id);
        for v in &s.x {
            let _ = write!(out, " {v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_truth(text: &str) -> Result<Vec<Source>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let id = it.next().unwrap().to_string();
        let x = it
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line: i + 1, msg: format!("bad number `{t}`") }))
            .collect::<Result<Vec<_>>>()?;
        out.push(Source { id, x });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn centre_source_exits_radially() {
        let m = bundled::flat_disk();
        let set = scattering_set(&m, &[0.0, 0.0], 64, true, "c").unwrap();
        assert_eq!(set.samples.len(), 64);
        for s in &set.samples {
            assert!(s.eta_t[0].abs() < 1e-9 && (s.eta_nu.unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn chord_sample_decomposition() {
        let m = bundled::flat_disk();
        let set = scattering_set(&m, &[0.5, 0.0], 64, true, "c").unwrap();
        // grid index 16 is the direction (0, 1)
        let s = &set.samples[16];
        assert!((s.s - PI / 3.0).abs() < 1e-9);
        assert!((s.eta_nu.unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-9);
        assert!((s.eta_t[0].abs() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn boundary_source_has_tangential_samples_at_own_parameter() {
        let m = bundled::flat_disk();
        let p = m.boundary_point(1.0).unwrap();
        let set = scattering_set(&m, &p, 64, true, "b").unwrap();
        let tang: Vec<_> = set.samples.iter().filter(|s| s.is_tangential()).collect();
        assert!(!tang.is_empty());
        for s in tang {
            assert!((s.s - 1.0).abs() < 1e-9);
        }
        let inner = scattering_set(&m, &[0.3, 0.1], 64, true, "i").unwrap();
        assert!(inner.samples.iter().all(|s| !s.is_tangential()));
    }

    #[test]
    fn lift_round_trip() {
        let m = bundled::bump_disk();
        let src = assign_ids(vec![vec![0.2, -0.3], vec![-0.5, 0.1]], false, 0);
        let full = generate_dataset(&m, &src, 64, true).unwrap();
        let tang = generate_dataset(&m, &src, 64, false).unwrap();
        let lifted = lift_tangential(&tang).unwrap();
        for (a, b) in full.sets.iter().zip(&lifted.sets) {
            assert_eq!(a.samples.len(), b.samples.len());
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert!((x.eta_t[0] - y.eta_t[0]).abs() < 1e-9);
                assert!((x.eta_nu.unwrap() - y.eta_nu.unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lift_edge_cases() {
        let mut ds = Dataset {
            metric_id: "flat".into(),
            dim: 2,
            grid: 64,
            boundary_len: 2.0 * PI,
            gbdry: (0..16).map(|k| (2.0 * PI * k as f64 / 16.0, 1.0)).collect(),
            sets: vec![ScatteringSet {
                id: "a".into(),
                samples: vec![
                    BoundarySample { s: 0.1, eta_t: vec![0.0], eta_nu: None },
                    BoundarySample { s: 0.2, eta_t: vec![1.0], eta_nu: None },
                ],
            }],
        };
        let l = lift_tangential(&ds).unwrap();
        assert!((l.sets[0].samples[0].eta_nu.unwrap() - 1.0).abs() < 1e-15);
        assert!(l.sets[0].samples[1].eta_nu.unwrap().abs() < 1e-7);
        ds.sets[0].samples[1].eta_t = vec![1.1];
        assert!(matches!(lift_tangential(&ds), Err(Error::CorruptData(_))));
    }

    #[test]
    fn text_round_trip_is_exact() {
        let m = bundled::bump_disk();
        let src = assign_ids(vec![vec![0.2, -0.3]], true, 7);
        for complete in [true, false] {
            let ds = generate_dataset(&m, &src, 64, complete).unwrap();
            let back = Dataset::parse(&ds.to_text()).unwrap();
            assert_eq!(ds, back);
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let txt = "#geoscatter-dataset v1\n#metric flat  dim 2  grid 64  boundary_len 6.28\nsource a\n0.1 zero 1\nend\n";
        match Dataset::parse(txt) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Dataset::parse("hello"), Err(Error::Parse { line: 1, .. })));
        let txt = "#geoscatter-dataset v1\n#metric flat  dim 2  grid 64  boundary_len 6.28\nsource a\n0.1 0 1\n";
        assert!(matches!(Dataset::parse(txt), Err(Error::Parse { .. })));
    }

    #[test]
    fn sigma_of_diameter_sources() {
        let m = bundled::flat_disk();
        let pts: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.2 * i as f64, 0.0]).collect();
        let src = assign_ids(pts, false, 0);
        let ds = generate_dataset(&m, &src, 64, true).unwrap();
        let q = BoundarySample::from_angle(0.0, 0.0);
        let mut sig = sigma_set(&ds, &q, 1e-6);
        sig.sort();
        assert_eq!(sig, ds.ids());
        assert!(sigma_set(&ds, &BoundarySample::from_angle(0.0, PI / 2.0), 1e-6).is_empty());
        assert!(sigma_set(&ds, &BoundarySample::from_angle(1.0, 0.3), 1e-6).is_empty());
    }

    #[test]
    fn separation() {
        let m = bundled::flat_disk();
        let src = assign_ids(vec![vec![0.1, 0.2], vec![-0.3, 0.0], vec![0.4, -0.4]], false, 0);
        let ds = generate_dataset(&m, &src, 128, true).unwrap();
        assert!(separates(&ds, "p0000", "p0001").unwrap());
        assert!(!separates(&ds, "p0000", "p0000").unwrap());
        let one = Dataset { sets: vec![ds.sets[0].clone()], ..ds.clone() };
        assert!(matches!(separates(&one, "p0000", "p0001"), Err(Error::IdNotFound(_))));
    }

    #[test]
    fn boundary_norm_flat_and_empty() {
        let m = bundled::flat_disk();
        let pts = random_points(&m, 500, 0.0, 3);
        let ds = generate_dataset(&m, &assign_ids(pts, true, 1), 720, false).unwrap();
        for s in [0.0, 1.3, 4.0] {
            let n1 = recover_boundary_norm(&ds, s, 1.0, 0.1).unwrap();
            assert!((n1 - 1.0).abs() < 2e-2, "{n1}");
            let n2 = recover_boundary_norm(&ds, s, 2.0, 0.1).unwrap();
            assert!((n2 - 2.0).abs() < 4e-2, "{n2}");
        }
        let empty = Dataset { sets: vec![], ..ds };
        assert!(matches!(recover_boundary_norm(&empty, 0.0, 1.0, 0.1), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn blind_ids_hide_order() {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, 0.0]).collect();
        let a = assign_ids(pts.clone(), true, 5);
        let b = assign_ids(pts, true, 5);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].id < w[1].id));
        assert!(a.iter().enumerate().any(|(i, s)| s.x[0] != i as f64));
    }
}
