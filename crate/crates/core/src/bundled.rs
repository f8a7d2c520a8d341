//! Ready-made metric/domain pairs used by the verification suites.

use std::sync::Arc;

use crate::domain::{Domain, LevelSet, Manifold};
use crate::error::Result;
use crate::metric::{Conformal, ConstField, Flat, GaussianBump, StereographicSphere};

/// Radius of the stereographic cap; well inside a hemisphere (radius 1).
pub const SPHERE_CAP_RADIUS: f64 = 0.6;

pub fn flat_disk() -> Manifold {
    Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(1.0)).expect("flat disk")
}

/// Flat disk of radius r centred at the origin.
pub fn flat_disk_radius(r: f64) -> Manifold {
    Manifold::new(Arc::new(Flat { dim: 2 }), Domain::disk(r)).expect("flat disk")
}

/// Spherical cap through the stereographic chart `4/(1+|x|²)² δ`.
pub fn sphere_cap() -> Manifold {
    Manifold::new(Arc::new(Conformal::new(2, StereographicSphere, "sphere")), Domain::disk(SPHERE_CAP_RADIUS))
        .expect("sphere cap")
}

pub fn bump(amplitude: f64, center: [f64; 2], width: f64) -> GaussianBump {
    GaussianBump { amplitude, center: center.to_vec(), width }
}

/// Unit disk with a mild off-centre Gaussian bump in the conformal exponent.
pub fn bump_disk() -> Manifold {
    conformal_disk(bump(0.3, [0.1, -0.05], 0.4), "bump")
}

/// Unit disk with a strong slow-speed region that focuses geodesics and
/// produces conjugate points while staying non-trapping.
pub fn focusing_disk() -> Manifold {
    conformal_disk(bump(1.0, [0.05, -0.03], 0.35), "focus")
}

/// Uniformly scaled flat disk whose metric is 1.05² times the Euclidean one.
pub fn scaled_disk(factor: f64) -> Manifold {
    Manifold::new(Arc::new(Conformal::new(2, ConstField(factor.ln()), format!("scaled{factor}"))), Domain::disk(1.0))
        .expect("scaled disk")
}

/// Weak bump: conformal factor up to 5% above the flat one. It is below
/// 1e-7 on the boundary, so the boundary length is the flat one.
pub fn weak_bump_disk() -> Manifold {
    conformal_disk(bump(1.05f64.ln(), [0.1, 0.05], 0.25), "bump5")
}

pub fn conformal_disk(phi: GaussianBump, name: &str) -> Manifold {
    Manifold::new(Arc::new(Conformal::new(2, phi, name)), Domain::disk(1.0)).expect("conformal disk")
}

/// Non-convex Cassini oval.
pub fn peanut() -> Result<Manifold> {
    let d = Domain {
        dim: 2,
        level: LevelSet::Cassini { a: 1.0, c: 1.1 },
        bbox: vec![(-2.5, 2.5), (-2.0, 2.0)],
        center: vec![0.0, 0.0],
    };
    Manifold::new(Arc::new(Flat { dim: 2 }), d)
}

/// The strictly convex bundled manifolds with their names.
pub fn convex_suite() -> Vec<(&'static str, Manifold)> {
    vec![
        ("flat", flat_disk()),
        ("sphere_cap", sphere_cap()),
        ("bump", bump_disk()),
        ("focus", focusing_disk()),
        ("bump5", weak_bump_disk()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_domains_are_strictly_convex() {
        for (name, m) in convex_suite() {
            let (ok, min) = m.is_strictly_convex(64).unwrap();
            assert!(ok, "{name}: {min}");
        }
        assert!(!peanut().unwrap().is_strictly_convex(64).unwrap().0);
    }

    #[test]
    fn weak_bump_keeps_the_boundary_length() {
        let d = weak_bump_disk().boundary_len().unwrap() - flat_disk().boundary_len().unwrap();
        assert!(d.abs() < 1e-6, "{d}");
    }
}
