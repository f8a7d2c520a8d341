//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; exits nonzero if any fails.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use geoscatter::bundled;
use geoscatter::data::{
    assign_ids, boundary_layer_points, generate_dataset, random_points, recover_boundary_norm, sample_distance,
    scattering_set,
};
use geoscatter::domain::{Domain, Manifold};
use geoscatter::flow::{
    connecting_geodesics, integrate_free, integrate_geodesic, unit, FlowOptions, GeodesicState,
};
use geoscatter::jacobi::{
    classify_direction, classify_directions, conjugate_variational_direction, jacobi_field, rotate90, Tag, EPS_CONJ,
    VAR_RATE_TOL,
};
use geoscatter::metric::{inner, norm, Conformal, LinearField, Scaled};
use geoscatter::reconstruction::charts::interior_chart_with;
use geoscatter::reconstruction::{
    agreement_with_model, boundary_chart, compare_datasets, extract_lens_data, i0_invariant, interior_chart, refine,
    BoundaryMap, ChartOptions, LocalizeIndex, RefineOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_interior(m: &Manifold, rng: &mut ChaCha8Rng, margin: f64) -> (Vec<f64>, Vec<f64>) {
    let bb = &m.domain.bbox;
    loop {
        let x = vec![rng.gen_range(bb[0].0..bb[0].1), rng.gen_range(bb[1].0..bb[1].1)];
        if m.domain.b(&x) < -margin {
            let a: f64 = rng.gen_range(0.0..TAU);
            let v = unit(m.metric.as_ref(), &x, &[a.cos(), a.sin()]);
            return (x, v);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// 1 -------------------------------------------------------------------------

fn flat_forward_oracle() -> Outcome {
    let start = Instant::now();
    let m = bundled::flat_disk();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (p, xi) = random_interior(&m, &mut rng, 1e-6);
        let e = integrate_geodesic(&m, &GeodesicState::new(&p, &xi), &FlowOptions::default()).unwrap();
        let e = e.exit();
        // line–circle intersection |p + tξ| = 1
        let b = dot(&p, &xi);
        let t = -b + (b * b - dot(&p, &p) + 1.0).sqrt();
        let x = [p[0] + t * xi[0], p[1] + t * xi[1]];
        let err = (e.t_exit - t)
            .abs()
            .max((e.x_exit[0] - x[0]).hypot(e.x_exit[1] - x[1]))
            .max((e.v_exit[0] - xi[0]).hypot(e.v_exit[1] - xi[1]));
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 10.0, format!("max error {worst:.2e}, {secs:.2} s"))
}

// 2 -------------------------------------------------------------------------

fn conservation() -> Outcome {
    let mut drift: f64 = 0.0;
    let mut round: f64 = 0.0;
    for (k, (_, m)) in bundled::convex_suite().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(20 + k as u64);
        let g = m.metric.as_ref();
        for _ in 0..20 {
            let (p, xi) = random_interior(&m, &mut rng, 0.01);
            let st = GeodesicState::new(&p, &xi);
            drift = drift.max(integrate_free(g, &st, 10.0, &FlowOptions::default()).unwrap().max_drift);
            let fwd = integrate_geodesic(&m, &st, &FlowOptions::default()).unwrap();
            let ex = fwd.exit();
            let back_start = GeodesicState::new(&ex.x_exit, &ex.v_exit).reversed();
            let back = integrate_geodesic(&m, &back_start, &FlowOptions::stored()).unwrap();
            let s = back.state_at(ex.t_exit).unwrap();
            let err = (s.x[0] - p[0]).hypot(s.x[1] - p[1]).max((s.v[0] + xi[0]).hypot(s.v[1] + xi[1]));
            round = round.max(err);
        }
    }
    outcome(drift < 1e-7 && round < 1e-6, format!("speed drift {drift:.2e}, round trip {round:.2e}"))
}

// 3 -------------------------------------------------------------------------

fn jacobi_oracle() -> Outcome {
    let metrics = [bundled::flat_disk(), bundled::sphere_cap(), bundled::bump_disk()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let m = &metrics[k % 3];
        let g = m.metric.as_ref();
        let (p, xi) = random_interior(m, &mut rng, 0.05);
        let a: f64 = rng.gen_range(0.0..TAU);
        let w = [a.cos(), a.sin()];
        let rec = integrate_geodesic(m, &GeodesicState::new(&p, &xi), &FlowOptions::stored()).unwrap();
        let t = rng.gen_range(0.2..0.95) * rec.t_end;
        let sol = jacobi_field(g, &rec, &[0.0, 0.0], &w).unwrap();
        let (j, _) = sol.at(g, t).unwrap();
        // central difference of the geodesic family exp_p(t(ξ + δw))
        let fine = FlowOptions { rtol: 1e-12, atol: 1e-12, ..FlowOptions::default() };
        let d = 1e-4;
        let end = |sg: f64| {
            let v = [xi[0] + sg * d * w[0], xi[1] + sg * d * w[1]];
            integrate_free(g, &GeodesicState::new(&p, &v), t, &fine).unwrap().end.x
        };
        let (a, b) = (end(1.0), end(-1.0));
        let fd = [(a[0] - b[0]) / (2.0 * d), (a[1] - b[1]) / (2.0 * d)];
        worst = worst.max((fd[0] - j[0]).hypot(fd[1] - j[1]) / j[0].hypot(j[1]));
    }
    // unit curvature: ‖J(t)‖ = sin t for J(0) = 0, D_t J(0) ⟂ γ̇ unit
    let s = bundled::sphere_cap();
    let g = s.metric.as_ref();
    let mut sine: f64 = 0.0;
    for (x, d) in [([0.1, -0.2], [1.0, 0.3]), ([-0.3, 0.25], [-0.2, 1.0]), ([0.0, 0.0], [0.6, -0.8])] {
        let v = unit(g, &x, &d);
        let opts = FlowOptions::stored();
        let rec = integrate_free(g, &GeodesicState::new(&x, &v), 3.0, &opts).unwrap();
        let sol = jacobi_field(g, &rec, &[0.0, 0.0], &rotate90(g, &x, &v)).unwrap();
        for (i, t) in sol.times.iter().enumerate() {
            let at = rec.state_at(*t).unwrap_or_else(|| rec.end.clone());
            sine = sine.max((norm(g, &at.x, &sol.j[i]) - t.sin()).abs());
        }
    }
    outcome(worst < 1e-4 && sine < 1e-6, format!("max relative error {worst:.2e}, |‖J‖ − sin t| {sine:.2e}"))
}

// 4 -------------------------------------------------------------------------

fn conjugate_agreement() -> Outcome {
    let start = Instant::now();
    let m = bundled::focusing_disk();
    let g = m.metric.as_ref();
    let frame_dir = |p: &[f64], a: f64| {
        let f = geoscatter::flow::direction_frame(&m, p);
        geoscatter::flow::direction(&f, a)
    };
    // directions at and around refined conjugate directions, then random ones
    let mut jobs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for p in [[0.45, 0.1], [-0.3, -0.5], [0.1, 0.6], [-0.6, 0.2]] {
        for c in classify_directions(&m, &p, 64).unwrap().iter().filter(|c| c.tag == Tag::Conjugate) {
            for off in [0.0, 1e-6, -1e-6, 1e-4, -1e-4, 1e-3, -1e-3, 1e-2, -1e-2, 5e-2, -5e-2] {
                jobs.push((p.to_vec(), frame_dir(&p, c.angle + off)));
            }
        }
    }
    let seeded = jobs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    while jobs.len() < 500 {
        let (p, xi) = random_interior(&m, &mut rng, 0.05);
        jobs.push((p, xi));
    }
    jobs.truncate(500);
    let (mut agree, mut conj, mut outside, mut inconclusive) = (0usize, 0usize, 0usize, 0usize);
    for (p, xi) in &jobs {
        let xi = unit(g, p, xi);
        let sv = classify_direction(&m, p, &xi).unwrap();
        let by_sv = sv.smin_ratio < EPS_CONJ;
        let (by_var, rate) = match conjugate_variational_direction(&m, p, &xi) {
            Ok(r) => (r.fired, r.rate),
            Err(_) => {
                inconclusive += 1;
                (false, f64::NAN)
            }
        };
        conj += usize::from(by_sv);
        if by_sv == by_var {
            agree += 1;
        } else {
            // declared margin band: a decade either side of the thresholds
            let band = |x: f64| x.is_finite() && (EPS_CONJ / 10.0..=VAR_RATE_TOL * 10.0).contains(&x);
            if !(band(sv.smin_ratio) || band(rate)) {
                outside += 1;
            }
        }
    }
    let frac = agree as f64 / jobs.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        frac >= 0.99 && outside == 0 && secs < 120.0,
        format!(
            "agreement {agree}/{} ({seeded} near conjugate, {conj} conjugate by singular values, {inconclusive} grazing), \
             {outside} outside the margin band, {secs:.1} s",
            jobs.len()
        ),
    )
}

// 5 -------------------------------------------------------------------------

fn localization() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m) in [("flat", bundled::flat_disk()), ("bump", bundled::bump_disk())] {
        let sources = assign_ids(random_points(&m, 400, 0.02, 5), true, 55);
        let ds = generate_dataset(&m, &sources, 720, true).unwrap();
        let index = LocalizeIndex::new(&ds).unwrap();
        let recovered = ds
            .sets
            .iter()
            .filter(|s| index.localize(&index.prepare(s).unwrap()).map(|l| l.id == s.id).unwrap_or(false))
            .count();
        let mut worst: f64 = 0.0;
        for (k, x) in random_points(&m, 50, 0.02, 500).iter().enumerate() {
            let target = scattering_set(&m, x, 720, true, &format!("t{k}")).unwrap();
            let r = refine(&m, &target, None, &RefineOptions::new(720)).unwrap();
            worst = worst.max((r.x[0] - x[0]).hypot(r.x[1] - x[1]));
        }
        pass &= recovered == 400 && worst < 1e-3;
        lines.push(format!("{name}: {recovered}/400 self-queries, refined error {worst:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 300.0, format!("{}, {secs:.1} s", lines.join("; ")))
}

// 6 -------------------------------------------------------------------------

fn boundary_metric_recovery() -> Outcome {
    let conformal = Manifold::new(
        Arc::new(Conformal::new(2, LinearField { coeffs: vec![0.2, 0.0], offset: 0.0 }, "linear")),
        Domain::disk(1.0),
    )
    .unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m) in [("flat", bundled::flat_disk()), ("conformal", conformal)] {
        let len = m.boundary_len().unwrap();
        let mut errs = Vec::new();
        for k in 0..3 {
            let f = (1usize << k) as f64;
            let (count, grid) = (128 << k, 360 << k);
            let depth = 0.008 / f;
            let sources = assign_ids(boundary_layer_points(&m, count, depth).unwrap(), false, 0);
            let ds = generate_dataset(&m, &sources, grid, false).unwrap();
            let window = TAU / count as f64;
            let mut worst: f64 = 0.0;
            for j in 0..32 {
                let s = len * (j as f64 + 0.25) / 32.0;
                let truth = m.g_tangent(&m.boundary_point(s).unwrap()).sqrt();
                for u in [1.0, -1.0] {
                    let r = recover_boundary_norm(&ds, s, u, window).unwrap();
                    worst = worst.max((r - truth).abs() / truth);
                }
            }
            errs.push(worst);
        }
        let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
        pass &= errs[0] <= 0.02 && ratios.iter().all(|r| *r <= 0.6);
        lines.push(format!(
            "{name}: errors {} ratios {}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join("/"),
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/")
        ));
    }
    outcome(pass, lines.join("; "))
}

// 7 -------------------------------------------------------------------------

/// Closed-form flat-disk relation: the chord is symmetric, so the exit
/// angle equals the entry angle and the exit point is the reflection.
fn flat_lens_oracle(s_in: f64, a_in: f64) -> (f64, f64) {
    let (x, nu) = ([s_in.cos(), s_in.sin()], [s_in.cos(), s_in.sin()]);
    let e1 = [-s_in.sin(), s_in.cos()];
    let xi = [-a_in.cos() * nu[0] + a_in.sin() * e1[0], -a_in.cos() * nu[1] + a_in.sin() * e1[1]];
    let l = -2.0 * dot(&x, &xi);
    let y = [x[0] + l * xi[0], x[1] + l * xi[1]];
    (y[1].atan2(y[0]).rem_euclid(TAU), a_in)
}

fn lens_extraction() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, m) in [("flat", bundled::flat_disk()), ("bump", bundled::bump_disk())] {
        let sources = assign_ids(random_points(&m, 400, 0.0, 7), true, 77);
        let ds = generate_dataset(&m, &sources, 360, true).unwrap();
        let eps = ds.eps_match();
        let ex = extract_lens_data(&ds, None).unwrap();
        let non_tangential =
            ds.sets.iter().flat_map(|s| &s.samples).filter(|s| !s.is_tangential()).count();
        let good = if name == "flat" {
            ex.lens
                .entries
                .iter()
                .filter(|e| e.angle_out.abs() < FRAC_PI_2 - 1e-6)
                .filter(|e| {
                    let (s, a) = flat_lens_oracle(e.s_in, e.angle_in);
                    sample_distance(ds.boundary_len, s, a, e.s_out, e.angle_out) <= eps
                })
                .count()
        } else {
            agreement_with_model(&m, &ex, eps).unwrap().0
        };
        // orphans count against the fraction
        let frac = good as f64 / non_tangential as f64;
        pass &= frac >= 0.99;
        lines.push(format!("{name}: {good}/{non_tangential} ({:.4}), {} orphans", frac, ex.orphans.len()));
    }
    outcome(pass, lines.join("; "))
}

// 8 -------------------------------------------------------------------------

/// Discriminability floor of the 5% bump against the flat disk at grid
/// 4096 (measured 0.0367 with these 40 sources, 11.9 times the threshold).
/// The deflection of a 5% bump is small, so coarser grids cannot reach 10x.
const BUMP5_FLOOR: f64 = 0.03;

fn dataset_equivalence() -> Outcome {
    let start = Instant::now();
    let grid = 4096;
    let flat = bundled::flat_disk();
    let pts = random_points(&flat, 40, 0.1, 8);
    let a: f64 = 0.9;
    let rot: Vec<Vec<f64>> = pts.iter().map(|p| vec![a.cos() * p[0] - a.sin() * p[1], a.sin() * p[0] + a.cos() * p[1]]).collect();
    let d1 = generate_dataset(&flat, &assign_ids(pts.clone(), false, 0), grid, true).unwrap();
    let d2 = generate_dataset(&flat, &assign_ids(rot, false, 0), grid, true).unwrap();
    let d3 = generate_dataset(&bundled::weak_bump_disk(), &assign_ids(pts, false, 0), grid, true).unwrap();
    let threshold = 2.0 * d1.grid_spacing();
    let same = compare_datasets(&d1, &d1, &BoundaryMap::Identity).unwrap().cost;
    let rotated = compare_datasets(&d1, &d2, &BoundaryMap::Shift(a)).unwrap().cost;
    let bump = compare_datasets(&d1, &d3, &BoundaryMap::Identity).unwrap().cost;
    let pass = same <= threshold && rotated <= threshold && bump >= 10.0 * threshold && bump >= BUMP5_FLOOR;
    outcome(
        pass,
        format!(
            "threshold {threshold:.3e}: identical {same:.2e}, rotated {rotated:.2e}, 5% bump {bump:.3e} ({:.1}x), {:.1} s",
            bump / threshold,
            start.elapsed().as_secs_f64()
        ),
    )
}

// 9 -------------------------------------------------------------------------

/// Lower bound on the I₀ variation of the non-equivalent pairs below. The
/// smallest measured value is 3.0e-2 (flat against the 5% bump).
const I0_VIOLATION_FLOOR: f64 = 1e-2;

fn i0_certificate() -> Outcome {
    let fine = FlowOptions { rtol: 1e-12, atol: 1e-12, ..FlowOptions::stored() };
    let chords = |m: &Manifold| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..12)
            .map(|_| {
                let (p, xi) = random_interior(m, &mut rng, 0.05);
                integrate_geodesic(m, &GeodesicState::new(&p, &xi), &fine).unwrap()
            })
            .collect::<Vec<_>>()
    };
    let bump = bundled::bump_disk();
    let equal = i0_invariant(&bump, bump.metric.as_ref(), &chords(&bump), 10).unwrap().max_rel_var;
    let c: f64 = 2.5;
    let scaled = Scaled { inner: bump.metric.clone(), factor: c };
    let r = i0_invariant(&bump, &scaled, &chords(&bump), 10).unwrap();
    let g = bump.metric.as_ref();
    let mut scale_err: f64 = 0.0;
    let recs = chords(&bump);
    for (t, rec) in r.traces.iter().zip(&recs) {
        for (tt, v) in t.times.iter().zip(&t.values) {
            let s = rec.state_at(*tt).unwrap();
            scale_err = scale_err.max((v - c.powf(-1.0 / 3.0) * inner(g, &s.x, &s.v, &s.v)).abs());
        }
    }
    let pairs = [
        ("flat/bump", bundled::flat_disk(), bundled::bump_disk()),
        ("flat/bump5", bundled::flat_disk(), bundled::weak_bump_disk()),
        ("bump/focus", bundled::bump_disk(), bundled::focusing_disk()),
    ];
    let mut min_violation = f64::INFINITY;
    let mut parts = Vec::new();
    for (name, a, b) in &pairs {
        let v = i0_invariant(a, b.metric.as_ref(), &chords(a), 10).unwrap().max_rel_var;
        min_violation = min_violation.min(v);
        parts.push(format!("{name} {v:.2e}"));
    }
    outcome(
        equal < 1e-9 && scale_err < 1e-8 && min_violation > I0_VIOLATION_FLOOR,
        format!("equal {equal:.2e}, scaled {scale_err:.2e}, non-equivalent {}", parts.join(", ")),
    )
}

// 10 ------------------------------------------------------------------------

fn geodesic_count() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (name, m)) in bundled::convex_suite().into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let mut worst = 0usize;
        let mut not_one = 0usize;
        for _ in 0..200 {
            let (p, _) = random_interior(&m, &mut rng, 0.05);
            let (q, _) = random_interior(&m, &mut rng, 0.05);
            let (conns, _) = connecting_geodesics(&m, &p, &q, 128).unwrap();
            // I(g, p, q, ℓ) for every length ℓ that occurs
            for c in &conns {
                let n = conns.iter().filter(|d| (d.length - c.length).abs() <= 1e-6 * (1.0 + c.length)).count();
                worst = worst.max(n);
            }
            not_one += usize::from(conns.len() != 1);
        }
        pass &= worst <= 6;
        if name == "flat" {
            pass &= not_one == 0;
        }
        parts.push(format!("{name} max {worst}{}", if name == "flat" { format!(", {not_one} pairs without exactly 1") } else { String::new() }));
    }
    outcome(pass, format!("{}, {:.1} s", parts.join("; "), start.elapsed().as_secs_f64()))
}

// 11 ------------------------------------------------------------------------

fn chart_certification() -> Outcome {
    let opts = ChartOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, m) in [("flat", bundled::flat_disk()), ("bump", bundled::bump_disk())] {
        let mut interior = (0usize, 0usize);
        for i in 0..20 {
            for j in 0..20 {
                let p = [-1.0 + (i as f64 + 0.5) / 10.0, -1.0 + (j as f64 + 0.5) / 10.0];
                if m.domain.b(&p) >= 0.0 {
                    continue;
                }
                interior.1 += 1;
                if interior_chart(&m, &p, &opts).map(|c| c.0.jacobian_ok).unwrap_or(false) {
                    interior.0 += 1;
                }
            }
        }
        let len = m.boundary_len().unwrap();
        let boundary =
            (0..32).filter(|k| boundary_chart(&m, len * *k as f64 / 32.0, &opts).map(|c| c.0.jacobian_ok).unwrap_or(false)).count();
        pass &= interior.0 == interior.1 && boundary == 32;
        parts.push(format!("{name}: interior {}/{}, boundary {boundary}/32", interior.0, interior.1));
    }
    // v along Θ_q̃(p) kills the Jacobian
    let m = bundled::bump_disk();
    let g = m.metric.as_ref();
    let p = [0.2, -0.1];
    let (xi, xt) = (unit(g, &p, &[1.0, 0.2]), unit(g, &p, &[-0.1, 1.0]));
    let (good, _) = interior_chart_with(&m, &p, &xi, &xt, None, &opts).unwrap();
    let (qt, eta) = &good.anchors[1];
    let v: Vec<f64> = eta.iter().map(|c| -c).collect();
    let v = unit(g, qt, &v);
    let degenerate = interior_chart_with(&m, &p, &xi, &xt, Some(&v), &opts).map(|c| (c.0.jacobian_ok, c.0.det));
    let fails = matches!(degenerate, Ok((false, _)) | Err(_));
    pass &= good.jacobian_ok && fails;
    parts.push(format!("degenerate v: {}", match degenerate {
        Ok((_, d)) => format!("det {d:.2e}"),
        Err(e) => e.to_string(),
    }));
    outcome(pass, parts.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("flat-disk forward oracle", flat_forward_oracle),
        ("conservation and reversibility", conservation),
        ("Jacobi field oracle", jacobi_oracle),
        ("conjugate detector agreement", conjugate_agreement),
        ("injectivity and localization", localization),
        ("boundary metric recovery", boundary_metric_recovery),
        ("lens extraction", lens_extraction),
        ("dataset equivalence", dataset_equivalence),
        ("I0 certificate", i0_certificate),
        ("geodesic count bound", geodesic_count),
        ("chart certification", chart_certification),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!r.pass);
        println!(
            "criterion {:>2} {:<32} {}  {} [{:.1} s]",
            k + 1,
            name,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}

