//! Hausdorff distance between sampled scattering sets under the product
//! distance `√(d_∂M(s₁,s₂)² + ∠(η₁,η₂)²)` on the boundary sphere bundle.

use crate::data::{sample_distance, ScatteringSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetDistance {
    pub value: f64,
    /// `(index in a, index in b)` of the pair attaining the value.
    pub witness: (usize, usize),
}

/// Samples sorted by boundary parameter, for nearest-neighbour pruning.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    len: f64,
    pts: Vec<[f64; 2]>,
    order: Vec<usize>,
}

impl PreparedSet {
    pub fn new(set: &ScatteringSet, len: f64) -> Result<Self> {
        if set.samples.is_empty() {
            return Err(Error::Usage(format!("scattering set `{}` is empty", set.id)));
        }
        if !set.is_complete() {
            return Err(Error::Usage(format!("scattering set `{}` is not complete; lift it first", set.id)));
        }
        Ok(Self::from_points(set.points(), len))
    }

    pub fn from_points(points: Vec<[f64; 2]>, len: f64) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let wrapped: Vec<[f64; 2]> = points.iter().map(|p| [p[0].rem_euclid(len), p[1]]).collect();
        idx.sort_by(|&a, &b| wrapped[a][0].total_cmp(&wrapped[b][0]).then(a.cmp(&b)));
        let pts = idx.iter().map(|&i| wrapped[i]).collect();
        PreparedSet { len, pts, order: idx }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }

    /// Nearest sample to `x`, searching outward in s until the s-gap alone
    /// exceeds the best distance, or the distance drops to `enough`.
    fn nearest(&self, x: [f64; 2], enough: f64) -> (f64, usize) {
        let n = self.pts.len();
        let start = self.pts.partition_point(|p| p[0] < x[0]);
        let mut best = (f64::INFINITY, 0);
        let half = self.len * 0.5;
        // forward
        for k in 0..n {
            let j = (start + k) % n;
            let p = self.pts[j];
            let ds = (p[0] - x[0]).rem_euclid(self.len);
            if ds > best.0 || ds > half {
                break;
            }
            let d = sample_distance(self.len, x[0], x[1], p[0], p[1]);
            if d < best.0 {
                best = (d, j);
                if d <= enough {
                    return best;
                }
            }
        }
        // backward
        for k in 1..=n {
            let j = (start + n - k) % n;
            let p = self.pts[j];
            let ds = (x[0] - p[0]).rem_euclid(self.len);
            if ds > best.0 || ds > half {
                break;
            }
            let d = sample_distance(self.len, x[0], x[1], p[0], p[1]);
            if d < best.0 {
                best = (d, j);
                if d <= enough {
                    return best;
                }
            }
        }
        best
    }
}

/// `sup_{a∈A} inf_{b∈B} d(a,b)`; stops early once the running value exceeds
/// `cutoff` (the result is then only a lower bound above the cutoff).
fn directed(a: &PreparedSet, b: &PreparedSet, cutoff: f64) -> SetDistance {
    let mut worst = SetDistance { value: 0.0, witness: (a.order[0], b.order[0]) };
    for (i, &x) in a.pts.iter().enumerate() {
        // a nearest distance ≤ the running max cannot change the max
        let (d, j) = b.nearest(x, worst.value);
        if d > worst.value {
            worst = SetDistance { value: d, witness: (a.order[i], b.order[j]) };
            if d > cutoff {
                break;
            }
        }
    }
    worst
}

pub fn hausdorff_prepared(a: &PreparedSet, b: &PreparedSet) -> SetDistance {
    hausdorff_cutoff(a, b, f64::INFINITY)
}

/// Hausdorff distance, exact when ≤ `cutoff`; otherwise some value > cutoff.
pub fn hausdorff_cutoff(a: &PreparedSet, b: &PreparedSet, cutoff: f64) -> SetDistance {
    let ab = directed(a, b, cutoff);
    if ab.value > cutoff {
        return ab;
    }
    let ba = directed(b, a, cutoff);
    if ba.value > ab.value {
        SetDistance { value: ba.value, witness: (ba.witness.1, ba.witness.0) }
    } else {
        ab
    }
}

/// Hausdorff distance between two complete scattering sets on a boundary of
/// length `len`.
pub fn hausdorff(a: &ScatteringSet, b: &ScatteringSet, len: f64) -> Result<SetDistance> {
    Ok(hausdorff_prepared(&PreparedSet::new(a, len)?, &PreparedSet::new(b, len)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BoundarySample;

    fn set(pts: &[(f64, f64)]) -> ScatteringSet {
        ScatteringSet { id: "x".into(), samples: pts.iter().map(|&(s, a)| BoundarySample::from_angle(s, a)).collect() }
    }

    #[test]
    fn identical_and_singletons() {
        let a = set(&[(0.1, 0.2), (3.0, -0.4), (6.0, 0.0)]);
        assert_eq!(hausdorff(&a, &a, 6.5).unwrap().value, 0.0);
        let d = hausdorff(&set(&[(0.1, 0.3)]), &set(&[(6.4, -0.1)]), 6.5).unwrap();
        assert!((d.value - (0.2f64).hypot(0.4)).abs() < 1e-12);
    }

    #[test]
    fn three_by_three_exhaustive() {
        let a = set(&[(0.0, 0.0), (1.0, 0.5), (2.0, -0.5)]);
        let b = set(&[(0.2, 0.1), (1.5, 0.4), (5.9, -0.2)]);
        let len = 6.0;
        let da: Vec<f64> = a.points().iter().map(|x| b.points().iter().map(|y| sample_distance(len, x[0], x[1], y[0], y[1])).fold(f64::INFINITY, f64::min)).collect();
        let db: Vec<f64> = b.points().iter().map(|y| a.points().iter().map(|x| sample_distance(len, x[0], x[1], y[0], y[1])).fold(f64::INFINITY, f64::min)).collect();
        let want = da.iter().chain(&db).cloned().fold(0.0, f64::max);
        let got = hausdorff(&a, &b, len).unwrap();
        assert_eq!(got.value, want);
        let (i, j) = got.witness;
        let (x, y) = (a.points()[i], b.points()[j]);
        assert_eq!(sample_distance(len, x[0], x[1], y[0], y[1]), want);
    }

    #[test]
    fn cutoff_only_overestimates_beyond_cutoff() {
        let a = PreparedSet::from_points(vec![[0.0, 0.0], [1.0, 0.0]], 10.0);
        let b = PreparedSet::from_points(vec![[0.0, 0.0], [4.0, 0.0]], 10.0);
        let exact = hausdorff_prepared(&a, &b).value;
        assert!((exact - 3.0).abs() < 1e-15);
        assert!(hausdorff_cutoff(&a, &b, 0.5).value > 0.5);
        assert_eq!(hausdorff_cutoff(&a, &b, 3.5).value, exact);
    }

    #[test]
    fn rejects_incomplete_or_empty() {
        let t = ScatteringSet { id: "t".into(), samples: vec![BoundarySample { s: 0.0, eta_t: vec![0.1], eta_nu: None }] };
        assert!(matches!(hausdorff(&t, &t, 1.0), Err(Error::Usage(_))));
        let e = ScatteringSet { id: "e".into(), samples: vec![] };
        assert!(matches!(hausdorff(&e, &e, 1.0), Err(Error::Usage(_))));
    }
}
