//! The geodesic-equivalence invariant
//! `I₀(x, v) = (det g / det g̃)^{2/(n+1)} · g̃(v, v)`.

use crate::domain::Manifold;
use crate::error::{Error, Result};
use crate::flow::GeodesicRecord;
use crate::metric::{inner, metric_at, MetricField};

pub fn i0(g: &dyn MetricField, gt: &dyn MetricField, x: &[f64], v: &[f64]) -> f64 {
    let n = g.dim();
    let ratio = metric_at(g, x).determinant() / metric_at(gt, x).determinant();
    ratio.powf(2.0 / (n as f64 + 1.0)) * inner(gt, x, v, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct I0Trace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(max − min) / |mean|`.
    pub max_rel_var: f64,
}

/// `I₀` along a stored g-geodesic at `samples + 1` uniform times.
pub fn i0_trace(g: &dyn MetricField, gt: &dyn MetricField, rec: &GeodesicRecord, samples: usize) -> Result<I0Trace> {
    if !rec.has_dense_output() && rec.t_end > 0.0 {
        return Err(Error::Usage("I0 trace needs a geodesic record with stored steps".into()));
    }
    if g.dim() != gt.dim() {
        return Err(Error::Usage("metrics of different dimension".into()));
    }
    let samples = samples.max(1);
    let mut times = Vec::with_capacity(samples + 1);
    let mut values = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let t = rec.t_end * k as f64 / samples as f64;
        let s = rec.state_at(t).ok_or_else(|| Error::Usage("time outside the geodesic record".into()))?;
        times.push(t);
        values.push(i0(g, gt, &s.x, &s.v));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(I0Trace { times, values, max_rel_var: (hi - lo) / mean.abs() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct I0Report {
    pub traces: Vec<I0Trace>,
    pub max_rel_var: f64,
    /// `(x, f(x) = det g / det g̃)` on a grid of interior points.
    pub f_grid: Vec<(Vec<f64>, f64)>,
    /// `max |f − 1|` over the grid.
    pub f_deviation: f64,
}

/// `I₀` traces along the given g-geodesics and the volume ratio f on a
/// `f_grid × f_grid` lattice of interior points.
pub fn i0_invariant(m: &Manifold, gt: &dyn MetricField, geodesics: &[GeodesicRecord], f_grid: usize) -> Result<I0Report> {
    let g = m.metric.as_ref();
    let traces = geodesics.iter().map(|r| i0_trace(g, gt, r, 200)).collect::<Result<Vec<_>>>()?;
    let max_rel_var = traces.iter().map(|t| t.max_rel_var).fold(0.0, f64::max);
    let bb = &m.domain.bbox;
    let mut grid = Vec::new();
    for i in 0..f_grid {
        for j in 0..f_grid {
            let x = vec![
                bb[0].0 + (bb[0].1 - bb[0].0) * (i as f64 + 0.5) / f_grid as f64,
                bb[1].0 + (bb[1].1 - bb[1].0) * (j as f64 + 0.5) / f_grid as f64,
            ];
            if m.domain.b(&x) < 0.0 {
                let f = metric_at(g, &x).determinant() / metric_at(gt, &x).determinant();
                grid.push((x, f));
            }
        }
    }
    let f_deviation = grid.iter().map(|(_, f)| (f - 1.0).abs()).fold(0.0, f64::max);
    Ok(I0Report { traces, max_rel_var, f_grid: grid, f_deviation })
}

/// I₀ table rows `geodesic_id, max_rel_var`.
pub fn i0_to_csv(report: &I0Report) -> String {
    let mut s = String::from("geodesic_id,max_rel_var\n");
    for (k, t) in report.traces.iter().enumerate() {
        s.push_str(&format!("{k},{:.16e}\n", t.max_rel_var));
    }
    s
}
