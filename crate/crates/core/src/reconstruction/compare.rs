//! Equivalence of two datasets under a boundary correspondence φ.

use rayon::prelude::*;

use super::hausdorff::{hausdorff_cutoff, PreparedSet};
use crate::data::{lift_tangential, BoundaryMetricTable, Dataset};
use crate::error::{Error, Result};

/// Boundary correspondence `φ: ∂M₁ → ∂M₂` in boundary parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryMap {
    /// Arclength identification from the canonical anchor.
    Identity,
    /// `s ↦ s + shift` (mod length).
    Shift(f64),
    /// `s ↦ len − s + shift`, orientation reversing.
    Reflect(f64),
    /// Tabulated `(s, φ(s), φ'(s))`, sorted in s; linear interpolation.
    Table(Vec<(f64, f64, f64)>),
}

impl BoundaryMap {
    /// `(φ(s), φ'(s))`.
    pub fn eval(&self, s: f64, len: f64) -> (f64, f64) {
        match self {
            BoundaryMap::Identity => (s, 1.0),
            BoundaryMap::Shift(d) => ((s + d).rem_euclid(len), 1.0),
            BoundaryMap::Reflect(d) => ((len - s + d).rem_euclid(len), -1.0),
            BoundaryMap::Table(t) => {
                let s = s.rem_euclid(len);
                let k = t.partition_point(|r| r.0 <= s).clamp(1, t.len().max(2) - 1);
                let (a, b) = (t[k - 1], t[k]);
                let w = if b.0 > a.0 { (s - a.0) / (b.0 - a.0) } else { 0.0 };
                ((a.1 + w * (b.1 - a.1)).rem_euclid(len), a.2 + w * (b.2 - a.2))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchReport {
    /// `max(max_A min_B d_H, max_B min_A d_H)`.
    pub cost: f64,
    /// `(id in d1, id in d2, distance)` attaining the cost.
    pub worst: (String, String, f64),
    /// Best partner in d2 for every set of d1.
    pub forward: Vec<(String, String, f64)>,
    /// Best partner in d1 for every set of d2.
    pub backward: Vec<(String, String, f64)>,
    /// Largest relative mismatch of `g₁(T,T)` and `φ^*g₂(T,T)` on the boundary.
    pub boundary_metric_mismatch: f64,
}

/// Pushes every set of `d1` through `Dφ`, keeping unit length: the tangential
/// component is rescaled by `‖Dφ e₁‖_{g₂}` and the normal one re-lifted.
pub fn push_forward(d1: &Dataset, d2: &Dataset, phi: &BoundaryMap) -> Result<(Dataset, f64)> {
    let d1 = lift_tangential(d1)?;
    let t1 = BoundaryMetricTable::new(&d1)?;
    let t2 = BoundaryMetricTable::new(d2)?;
    let len = d1.boundary_len;
    let mut mismatch: f64 = 0.0;
    let mut out = d1.clone();
    for set in &mut out.sets {
        for smp in &mut set.samples {
            let (s2, dphi) = phi.eval(smp.s, len);
            let ratio = (dphi * dphi * t2.g11(s2) / t1.g11(smp.s)).sqrt();
            mismatch = mismatch.max((ratio - 1.0).abs());
            let t = (smp.eta_t[0] * dphi.signum() * ratio).clamp(-1.0, 1.0);
            smp.s = s2;
            if t != smp.eta_t[0] {
                smp.eta_t = vec![t];
                smp.eta_nu = Some((1.0 - t * t).max(0.0).sqrt());
            }
        }
    }
    out.metric_id = d2.metric_id.clone();
    Ok((out, mismatch))
}

fn best_partners(a: &[PreparedSet], a_ids: &[String], b: &[PreparedSet], b_ids: &[String]) -> Vec<(String, String, f64)> {
    a.par_iter()
        .zip(a_ids.par_iter())
        .map(|(x, id)| {
            let mut best = (f64::INFINITY, 0usize);
            for (j, y) in b.iter().enumerate() {
                let d = hausdorff_cutoff(x, y, best.0).value;
                if d < best.0 {
                    best = (d, j);
                }
            }
            (id.clone(), b_ids[best.1].clone(), best.0)
        })
        .collect()
}

/// Bidirectional Hausdorff matching cost between the collections of
/// scattering sets, after transporting `d1` by φ.
pub fn compare_datasets(d1: &Dataset, d2: &Dataset, phi: &BoundaryMap) -> Result<MatchReport> {
    if (d1.boundary_len - d2.boundary_len).abs() > 1e-6 {
        return Err(Error::IncompatibleBoundary(d1.boundary_len, d2.boundary_len));
    }
    if d1.sets.is_empty() || d2.sets.is_empty() {
        return Err(Error::InsufficientData { reason: "cannot compare an empty dataset".into(), achieved: 0.0 });
    }
    let (pushed, mismatch) = push_forward(d1, d2, phi)?;
    let d2 = lift_tangential(d2)?;
    let len = d2.boundary_len;
    let pa = pushed.sets.iter().map(|s| PreparedSet::new(s, len)).collect::<Result<Vec<_>>>()?;
    let pb = d2.sets.iter().map(|s| PreparedSet::new(s, len)).collect::<Result<Vec<_>>>()?;
    let (ia, ib) = (pushed.ids(), d2.ids());
    let forward = best_partners(&pa, &ia, &pb, &ib);
    let backward: Vec<(String, String, f64)> =
        best_partners(&pb, &ib, &pa, &ia).into_iter().map(|(b, a, d)| (a, b, d)).collect();
    let worst = forward
        .iter()
        .chain(&backward)
        .max_by(|x, y| x.2.total_cmp(&y.2))
        .cloned()
        .expect("nonempty");
    Ok(MatchReport { cost: worst.2, worst, forward, backward, boundary_metric_mismatch: mismatch })
}
