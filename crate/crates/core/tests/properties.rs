use std::f64::consts::{FRAC_PI_2, TAU};

use proptest::prelude::*;

use geoscatter::bundled;
use geoscatter::data::sample_distance;
use geoscatter::domain::Manifold;
use geoscatter::expr::Expr;
use geoscatter::flow::{entry_vector, exit_angle, integrate_geodesic, scattering_relation, unit, FlowOptions, GeodesicState};
use geoscatter::metric::{christoffel, christoffel_fd, inner};
use geoscatter::reconstruction::hausdorff::{hausdorff_prepared, PreparedSet};

fn brute_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]], len: f64) -> f64 {
    let one = |x: &[[f64; 2]], y: &[[f64; 2]]| {
        x.iter()
            .map(|p| y.iter().map(|q| sample_distance(len, p[0], p[1], q[0], q[1])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

fn point_set() -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec((0.0..TAU, -1.5..1.5f64).prop_map(|(s, a)| [s, a]), 1..40)
}

fn interior_point(m: &Manifold) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> + '_ {
    (0.0..0.9f64, 0.0..TAU, 0.0..TAU).prop_map(move |(r, t, a)| {
        let x = vec![r * t.cos(), r * t.sin()];
        let v = unit(m.metric.as_ref(), &x, &[a.cos(), a.sin()]);
        (x, v)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hausdorff_matches_brute_force(a in point_set(), b in point_set()) {
        let (pa, pb) = (PreparedSet::from_points(a.clone(), TAU), PreparedSet::from_points(b.clone(), TAU));
        let d = hausdorff_prepared(&pa, &pb).value;
        prop_assert!((d - brute_hausdorff(&a, &b, TAU)).abs() <= 1e-15);
        prop_assert_eq!(d, hausdorff_prepared(&pb, &pa).value);
        prop_assert_eq!(hausdorff_prepared(&pa, &pa).value, 0.0);
    }

    #[test]
    fn hausdorff_triangle_inequality(a in point_set(), b in point_set(), c in point_set()) {
        let [pa, pb, pc] = [a, b, c].map(|x| PreparedSet::from_points(x, TAU));
        let ac = hausdorff_prepared(&pa, &pc).value;
        let ab = hausdorff_prepared(&pa, &pb).value;
        let bc = hausdorff_prepared(&pb, &pc).value;
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn christoffel_symbols_are_symmetric(r in 0.0..0.95f64, t in 0.0..TAU) {
        let x = [r * t.cos(), r * t.sin()];
        for m in [bundled::bump_disk(), bundled::sphere_cap(), bundled::focusing_disk()] {
            let c = christoffel(m.metric.as_ref(), &x).unwrap();
            let fd = christoffel_fd(m.metric.as_ref(), &x).unwrap();
            for k in 0..2 {
                prop_assert!((c.get(k, 0, 1) - c.get(k, 1, 0)).abs() <= 1e-14);
                for i in 0..2 {
                    for j in 0..2 {
                        prop_assert!((c.get(k, i, j) - fd.get(k, i, j)).abs() <= 1e-6);
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn geodesics_are_reversible(start in interior_point(&BUMP)) {
        let m = &*BUMP;
        let (p, xi) = start;
        let ex = integrate_geodesic(m, &GeodesicState::new(&p, &xi), &FlowOptions::default()).unwrap();
        let ex = ex.exit();
        let back = integrate_geodesic(m, &GeodesicState::new(&ex.x_exit, &ex.v_exit).reversed(), &FlowOptions::stored()).unwrap();
        let s = back.state_at(ex.t_exit).unwrap();
        prop_assert!((s.x[0] - p[0]).hypot(s.x[1] - p[1]) < 1e-6);
        prop_assert!((s.v[0] + xi[0]).hypot(s.v[1] + xi[1]) < 1e-6);
        prop_assert!((inner(m.metric.as_ref(), &s.x, &s.v, &s.v) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lens_relation_is_an_involution(s in 0.0..TAU, a in -1.4..1.4f64) {
        let m = &*BUMP;
        let len = m.boundary_len().unwrap();
        let s = s * len / TAU;
        let (x, xi) = entry_vector(m, s, a).unwrap();
        let e = scattering_relation(m, &x, &xi).unwrap();
        let b = exit_angle(m, &e.x_exit, &e.v_exit);
        prop_assume!(b.abs() < FRAC_PI_2 - 1e-3);
        let (y, eta) = entry_vector(m, e.s_exit.unwrap(), -b).unwrap();
        let back = scattering_relation(m, &y, &eta).unwrap();
        let c = exit_angle(m, &back.x_exit, &back.v_exit);
        prop_assert!(sample_distance(len, back.s_exit.unwrap(), c, s, -a) < 1e-7);
    }

    #[test]
    fn expression_derivatives_match_differences(x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let e = Expr::parse("0.3*exp(-((x1-0.1)^2+x2^2)/0.16) + sin(x1*x2) - x2^3/7").unwrap();
        let d = e.eval_dual(&[x, y]);
        let h = 1e-6;
        let fx = (e.eval(&[x + h, y]) - e.eval(&[x - h, y])) / (2.0 * h);
        let fy = (e.eval(&[x, y + h]) - e.eval(&[x, y - h])) / (2.0 * h);
        prop_assert!((d.v - e.eval(&[x, y])).abs() <= 1e-15);
        prop_assert!((d.g[0] - fx).abs() < 1e-8 && (d.g[1] - fy).abs() < 1e-8);
    }
}

static BUMP: std::sync::LazyLock<Manifold> = std::sync::LazyLock::new(bundled::bump_disk);
