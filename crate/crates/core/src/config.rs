//! Key-value run configuration.
//!
//! ```text
//! # comment
//! metric   = flat | conformal | matrix_expr
//! phi_expr = 0.3*exp(-(x1^2+x2^2)/0.16)      # conformal: g = e^{2φ} δ
//! g11 = 1+x2^2 ; g12 = 0 ; g22 = 1            # matrix_expr (one key per line)
//! preset   = flat | sphere_cap | bump | focus | bump5 | peanut
//! boundary = circle(R) | cassini(a, c) | <level-set expression>
//! bbox     = [-1.5..1.5, -1.5..1.5]
//! center   = [0, 0]
//! sources  = lattice(h) | random(N) | ring(N, frac) | layer(N, depth) | list(x, y; x, y; ...)
//! grid = 360 ; seed = 0 ; blind = true ; complete = true ; margin = 0.02
//! ```
//!
//! Numeric values accept constant expressions such as `pi/4`.

use std::path::Path;
use std::sync::Arc;

use crate::bundled;
use crate::data::{assign_ids, boundary_layer_points, lattice_points, random_points, ring_points, Source};
use crate::domain::{Domain, LevelSet, Manifold};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::metric::{Conformal, ExprField, ExprMetric, Flat, SharedMetric};

#[derive(Debug, Clone)]
pub enum MetricSpec {
    Flat,
    Conformal(Expr),
    Matrix(Vec<Expr>),
}

#[derive(Debug, Clone)]
pub enum BoundarySpec {
    Circle(f64),
    Cassini(f64, f64),
    Level(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Lattice(f64),
    Random(usize),
    Ring(usize, f64),
    Layer(usize, f64),
    List(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub preset: Option<String>,
    pub metric: MetricSpec,
    pub boundary: BoundarySpec,
    pub bbox: Option<Vec<(f64, f64)>>,
    pub center: Vec<f64>,
    pub sources: SourceSpec,
    pub grid: usize,
    pub seed: u64,
    pub blind: bool,
    pub complete: bool,
    /// Minimum depth of lattice and random sources below `b = 0`.
    pub margin: f64,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "flat".into(),
            preset: None,
            metric: MetricSpec::Flat,
            boundary: BoundarySpec::Circle(1.0),
            bbox: None,
            center: vec![0.0, 0.0],
            sources: SourceSpec::Lattice(0.1),
            grid: 360,
            seed: 0,
            blind: false,
            complete: true,
            margin: 0.02,
            workers: None,
            out: None,
        }
    }
}

fn number(v: &str) -> std::result::Result<f64, String> {
    let e = Expr::parse(v.trim()).map_err(|e| match e {
        Error::Parse { msg, .. } => msg,
        other => other.to_string(),
    })?;
    if e.max_var() > 0 {
        return Err(format!("`{v}` is not a constant"));
    }
    let x = e.eval(&[]);
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn count(v: &str) -> std::result::Result<usize, String> {
    v.trim().parse::<usize>().map_err(|_| format!("expected a nonnegative integer, got `{}`", v.trim()))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

/// `name(args)` → `(name, args)`.
fn call(v: &str) -> Option<(&str, &str)> {
    let v = v.trim();
    let open = v.find('(')?;
    if !v.ends_with(')') {
        return None;
    }
    let name = v[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((name, &v[open + 1..v.len() - 1]))
}

fn bracketed(v: &str) -> std::result::Result<&str, String> {
    let v = v.trim();
    v.strip_prefix('[').and_then(|r| r.strip_suffix(']')).ok_or_else(|| format!("expected `[...]`, got `{v}`"))
}

fn expr(v: &str) -> std::result::Result<Expr, String> {
    Expr::parse(v.trim()).map_err(|e| match e {
        Error::Parse { msg, .. } => msg,
        other => other.to_string(),
    })
}

fn parse_sources(v: &str) -> std::result::Result<SourceSpec, String> {
    let (name, args) = call(v).ok_or_else(|| format!("unknown source layout `{}`", v.trim()))?;
    let parts: Vec<&str> = args.split(',').collect();
    let want = |k: usize| {
        if parts.len() == k {
            Ok(())
        } else {
            Err(format!("{name}(...) takes {k} argument(s)"))
        }
    };
    Ok(match name {
        "lattice" => {
            want(1)?;
            let h = number(parts[0])?;
            if h <= 0.0 {
                return Err("lattice spacing must be positive".into());
            }
            SourceSpec::Lattice(h)
        }
        "random" => {
            want(1)?;
            SourceSpec::Random(count(parts[0])?)
        }
        "ring" => {
            want(2)?;
            SourceSpec::Ring(count(parts[0])?, number(parts[1])?)
        }
        "layer" => {
            want(2)?;
            SourceSpec::Layer(count(parts[0])?, number(parts[1])?)
        }
        "list" => {
            let pts = args
                .split(';')
                .filter(|p| !p.trim().is_empty())
                .map(|p| p.split(',').map(number).collect::<std::result::Result<Vec<f64>, String>>())
                .collect::<std::result::Result<Vec<_>, String>>()?;
            if pts.iter().any(|p| p.len() != 2) {
                return Err("list points need two coordinates".into());
            }
            SourceSpec::List(pts)
        }
        other => return Err(format!("unknown source layout `{other}`")),
    })
}

fn parse_boundary(v: &str) -> std::result::Result<BoundarySpec, String> {
    if let Some((name, args)) = call(v) {
        match name {
            "circle" => {
                let r = number(args)?;
                if r <= 0.0 {
                    return Err("circle radius must be positive".into());
                }
                return Ok(BoundarySpec::Circle(r));
            }
            "cassini" => {
                let p: Vec<&str> = args.split(',').collect();
                if p.len() != 2 {
                    return Err("cassini(a, c) takes 2 arguments".into());
                }
                return Ok(BoundarySpec::Cassini(number(p[0])?, number(p[1])?));
            }
            _ => {}
        }
    }
    Ok(BoundarySpec::Level(expr(v)?))
}

fn parse_bbox(v: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    bracketed(v)?
        .split(',')
        .map(|axis| {
            let (lo, hi) = axis.split_once("..").ok_or_else(|| format!("expected `lo..hi`, got `{}`", axis.trim()))?;
            Ok((number(lo)?, number(hi)?))
        })
        .collect()
}

impl RunConfig {
    pub fn read(path: &Path) -> Result<RunConfig> {
        RunConfig::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        let mut kind: Option<(usize, String)> = None;
        let mut phi: Option<Expr> = None;
        let mut entries: [Option<Expr>; 3] = [None, None, None];
        let mut named = false;
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| Error::Parse { line, msg: format!("expected `key = value`, got `{body}`") })?;
            let (key, value) = (key.trim(), value.trim());
            let fail = |msg: String| Error::Parse { line, msg: format!("{key}: {msg}") };
            match key {
                "metric" => match value {
                    "flat" | "conformal" | "matrix_expr" => kind = Some((line, value.to_string())),
                    other => return Err(fail(format!("unknown metric kind `{other}`"))),
                },
                "phi_expr" => phi = Some(expr(value).map_err(fail)?),
                "g11" | "g12" | "g22" => {
                    let i = ["g11", "g12", "g22"].iter().position(|s| *s == key).expect("listed key");
                    entries[i] = Some(expr(value).map_err(fail)?);
                }
                "preset" => {
                    if !["flat", "sphere_cap", "bump", "focus", "bump5", "peanut"].contains(&value) {
                        return Err(fail(format!("unknown preset `{value}`")));
                    }
                    c.preset = Some(value.to_string());
                }
                "name" => {
                    c.name = value.to_string();
                    named = true;
                }
                "boundary" => c.boundary = parse_boundary(value).map_err(fail)?,
                "bbox" => c.bbox = Some(parse_bbox(value).map_err(fail)?),
                "center" => {
                    c.center = bracketed(value)
                        .and_then(|v| v.split(',').map(number).collect::<std::result::Result<Vec<_>, _>>())
                        .map_err(fail)?
                }
                "sources" => c.sources = parse_sources(value).map_err(fail)?,
                "grid" => c.grid = count(value).map_err(fail)?,
                "seed" => c.seed = value.parse().map_err(|_| fail(format!("expected an unsigned integer, got `{value}`")))?,
                "blind" => c.blind = boolean(value).map_err(fail)?,
                "complete" => c.complete = boolean(value).map_err(fail)?,
                "margin" => c.margin = number(value).map_err(fail)?,
                "workers" => c.workers = Some(count(value).map_err(fail)?),
                "out" => c.out = Some(value.to_string()),
                other => return Err(Error::Parse { line, msg: format!("unknown key `{other}`") }),
            }
        }
        if let Some((line, kind)) = kind {
            c.metric = match kind.as_str() {
                "flat" => MetricSpec::Flat,
                "conformal" => MetricSpec::Conformal(
                    phi.ok_or_else(|| Error::Parse { line, msg: "conformal metric needs phi_expr".into() })?,
                ),
                _ => {
                    let [a, b, d] = entries;
                    match (a, b, d) {
                        (Some(a), Some(b), Some(d)) => MetricSpec::Matrix(vec![a, b, d]),
                        _ => return Err(Error::Parse { line, msg: "matrix_expr needs g11, g12 and g22".into() }),
                    }
                }
            };
            if !named {
                c.name = kind;
            }
        } else if phi.is_some() || entries.iter().any(Option::is_some) {
            return Err(Error::Parse { line: 0, msg: "metric expressions given without `metric = ...`".into() });
        }
        if let (Some(p), false) = (&c.preset, named) {
            c.name = p.clone();
        }
        if c.center.len() != 2 {
            return Err(Error::Parse { line: 0, msg: "center needs two coordinates".into() });
        }
        Ok(c)
    }

    pub fn build_manifold(&self) -> Result<Manifold> {
        if let Some(p) = &self.preset {
            return match p.as_str() {
                "flat" => Ok(bundled::flat_disk()),
                "sphere_cap" => Ok(bundled::sphere_cap()),
                "bump" => Ok(bundled::bump_disk()),
                "focus" => Ok(bundled::focusing_disk()),
                "bump5" => Ok(bundled::weak_bump_disk()),
                "peanut" => bundled::peanut(),
                other => Err(Error::Usage(format!("unknown preset `{other}`"))),
            };
        }
        let metric: SharedMetric = match &self.metric {
            MetricSpec::Flat => Arc::new(Flat { dim: 2 }),
            MetricSpec::Conformal(e) => Arc::new(Conformal::new(2, ExprField(e.clone()), self.name.clone())),
            MetricSpec::Matrix(es) => Arc::new(ExprMetric::new(2, es.clone())?),
        };
        let c = self.center.clone();
        let (level, default_box) = match &self.boundary {
            BoundarySpec::Circle(r) => {
                let h = 1.5 * r;
                (LevelSet::Ball { center: c.clone(), radius: *r }, Some(vec![(c[0] - h, c[0] + h), (c[1] - h, c[1] + h)]))
            }
            BoundarySpec::Cassini(a, cc) => {
                let h = 1.5 * (a * a + cc * cc).sqrt();
                (LevelSet::Cassini { a: *a, c: *cc }, Some(vec![(-h, h), (-h, h)]))
            }
            BoundarySpec::Level(e) => (LevelSet::Expr(e.clone()), None),
        };
        let bbox = self
            .bbox
            .clone()
            .or(default_box)
            .ok_or_else(|| Error::Usage("a level-set boundary needs an explicit bbox".into()))?;
        if bbox.len() != 2 {
            return Err(Error::Usage("bbox needs one range per axis (2)".into()));
        }
        Manifold::new(metric, Domain { dim: 2, level, bbox, center: c })
    }

    pub fn source_points(&self, m: &Manifold) -> Result<Vec<Vec<f64>>> {
        let pts = match &self.sources {
            SourceSpec::Lattice(h) => lattice_points(m, *h, self.margin),
            SourceSpec::Random(n) => random_points(m, *n, self.margin, self.seed),
            SourceSpec::Ring(n, f) => ring_points(m, *n, *f)?,
            SourceSpec::Layer(n, d) => boundary_layer_points(m, *n, *d)?,
            SourceSpec::List(p) => p.clone(),
        };
        if let Some(p) = pts.iter().find(|p| m.domain.b(p) > 0.0) {
            return Err(Error::Domain(format!("source {p:?} lies outside M")));
        }
        if pts.is_empty() {
            return Err(Error::Usage("the source layout is empty".into()));
        }
        Ok(pts)
    }

    /// Sources with ids; blind ids are derived from the seed.
    pub fn sources(&self, m: &Manifold) -> Result<Vec<Source>> {
        Ok(assign_ids(self.source_points(m)?, self.blind, self.seed))
    }
}
