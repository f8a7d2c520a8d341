use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use geoscatter::config::RunConfig;
use geoscatter::data::{generate_dataset, lift_tangential, truth_text, Dataset};
use geoscatter::domain::Manifold;
use geoscatter::flow::forward_lens_data;
use geoscatter::reconstruction::{
    agreement_with_model, boundary_chart, compare_datasets, extract_lens_data, interior_chart, refine, BoundaryMap,
    ChartOptions, LocalizeIndex, RefineOptions,
};
use geoscatter::suites::{results_to_csv, run_suites, SuiteOptions};
use geoscatter::{Error, Result};

use crate::{usage, Global, Mode};

/// Lens CSV written by `forward`: entry parameters × entry angles.
const LENS_S: usize = 64;
const LENS_ANGLES: usize = 32;

pub struct ReconstructArgs {
    pub dataset: PathBuf,
    pub mode: Mode,
    pub config: Option<PathBuf>,
    pub against: Option<PathBuf>,
    pub phi: String,
    pub queries: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub chart_grid: usize,
    pub boundary_points: usize,
}

fn load_config(g: &Global, path: &Path) -> Result<RunConfig> {
    let mut c = RunConfig::read(path).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })?;
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(n) = g.grid {
        c.grid = n;
    }
    Ok(c)
}

fn out_dir(g: &Global, c: Option<&RunConfig>) -> Result<PathBuf> {
    let dir = g.out.clone().or_else(|| c.and_then(|c| c.out.clone()).map(PathBuf::from)).unwrap_or_else(|| ".".into());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn convex_manifold(c: &RunConfig) -> Result<Manifold> {
    let m = c.build_manifold()?;
    let (ok, min) = m.is_strictly_convex(256)?;
    if !ok {
        return Err(Error::Domain(format!("boundary is not strictly convex: smallest shape-operator eigenvalue {min:.6e}")));
    }
    Ok(m)
}

pub fn forward(g: &Global, config: &Path) -> Result<bool> {
    let c = load_config(g, config)?;
    let m = convex_manifold(&c)?;
    let sources = c.sources(&m)?;
    let ds = generate_dataset(&m, &sources, c.grid, c.complete)?;
    let lens = forward_lens_data(&m, LENS_S, LENS_ANGLES)?;
    let dir = out_dir(g, Some(&c))?;
    ds.write(&dir.join("dataset.txt"))?;
    fs::write(dir.join("truth.txt"), truth_text(&sources))?;
    fs::write(dir.join("lens.csv"), lens.to_csv())?;
    println!("forward: {} sources, grid {}, written to {}", ds.sets.len(), ds.grid, dir.display());
    Ok(true)
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let ds = Dataset::read(path).map_err(|e| match e {
        Error::Parse { line, msg } => Error::Parse { line, msg: format!("{}: {msg}", path.display()) },
        other => other,
    })?;
    if ds.is_complete() {
        Ok(ds)
    } else {
        lift_tangential(&ds)
    }
}

fn parse_phi(s: &str) -> Result<BoundaryMap> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| usage(format!("bad number `{v}` in --phi")));
    match s.split_once(':') {
        None if s == "identity" => Ok(BoundaryMap::Identity),
        Some(("shift", v)) => Ok(BoundaryMap::Shift(num(v)?)),
        Some(("reflect", v)) => Ok(BoundaryMap::Reflect(num(v)?)),
        _ => Err(usage(format!("unknown --phi `{s}` (identity | shift:<d> | reflect:<d>)"))),
    }
}

pub fn reconstruct(g: &Global, a: &ReconstructArgs) -> Result<bool> {
    let ds = read_dataset(&a.dataset)?;
    let cfg = a.config.as_deref().map(|p| load_config(g, p)).transpose()?;
    let model = cfg.as_ref().map(convex_manifold).transpose()?;
    let dir = out_dir(g, cfg.as_ref())?;
    match a.mode {
        Mode::Localize => localize_mode(&ds, model.as_ref(), a, &dir),
        Mode::Charts => {
            let m = model.ok_or_else(|| usage("charts mode needs --config for the forward model"))?;
            charts_mode(&m, cfg.as_ref().map_or(0, |c| c.seed), a, &dir)
        }
        Mode::Lens => lens_mode(&ds, model.as_ref(), a, &dir),
        Mode::Compare => {
            let other = a.against.as_deref().ok_or_else(|| usage("compare mode needs --against <dataset>"))?;
            let d2 = read_dataset(other)?;
            let r = compare_datasets(&ds, &d2, &parse_phi(&a.phi)?)?;
            let threshold = a.tolerance.unwrap_or(2.0 * ds.grid_spacing());
            let mut csv = String::from("id_a,id_b,distance\n");
            for (x, y, d) in &r.forward {
                let _ = writeln!(csv, "{x},{y},{d:.16e}");
            }
            fs::write(dir.join("compare.csv"), csv)?;
            let pass = r.cost <= threshold;
            println!(
                "compare: cost {:.16e} threshold {:.16e} worst {} {} boundary_metric_mismatch {:.6e} {}",
                r.cost,
                threshold,
                r.worst.0,
                r.worst.1,
                r.boundary_metric_mismatch,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(pass)
        }
    }
}

fn localize_mode(ds: &Dataset, model: Option<&Manifold>, a: &ReconstructArgs, dir: &Path) -> Result<bool> {
    let index = LocalizeIndex::new(ds)?;
    let rows: Vec<(String, std::result::Result<(String, f64), String>)> = ds
        .sets
        .par_iter()
        .map(|s| {
            let r = index.prepare(s).and_then(|p| index.localize(&p));
            (s.id.clone(), r.map(|l| (l.id, l.distance.value)).map_err(|e| e.code().to_string()))
        })
        .collect();
    let mut csv = String::from("id,match,distance\n");
    let mut correct = 0;
    for (id, r) in &rows {
        match r {
            Ok((m, d)) => {
                correct += usize::from(m == id);
                let _ = writeln!(csv, "{id},{m},{d:.16e}");
            }
            Err(code) => {
                let _ = writeln!(csv, "{id},{code},nan");
            }
        }
    }
    fs::write(dir.join("localize.csv"), csv)?;
    let mut pass = correct == rows.len();
    println!("localize: {correct}/{} self-queries recovered", rows.len());
    if let Some(qpath) = &a.queries {
        let q = read_dataset(qpath)?;
        if q.grid != ds.grid {
            return Err(usage("query dataset must use the same direction grid"));
        }
        let out: Vec<Result<String>> = q
            .sets
            .par_iter()
            .map(|s| {
                let l = index.localize(&index.prepare(s)?)?;
                let mut line = format!("{},{},{:.16e}", s.id, l.id, l.distance.value);
                if let Some(m) = model {
                    let r = refine(m, s, None, &RefineOptions::new(q.grid))?;
                    let _ = write!(line, ",{:.16e},{:.16e},{:.16e}", r.x[0], r.x[1], r.distance);
                } else {
                    line.push_str(",nan,nan,nan");
                }
                Ok(line)
            })
            .collect();
        let mut csv = String::from("query,nearest,distance,x1,x2,refined_distance\n");
        let mut failed = 0;
        for (s, r) in q.sets.iter().zip(out) {
            match r {
                Ok(l) => {
                    csv.push_str(&l);
                    csv.push('\n');
                }
                Err(e) => {
                    failed += 1;
                    let _ = writeln!(csv, "{},{},nan,nan,nan,nan", s.id, e.code());
                }
            }
        }
        fs::write(dir.join("queries.csv"), csv)?;
        println!("localize: {}/{} queries resolved", q.sets.len() - failed, q.sets.len());
        pass &= failed == 0;
    }
    Ok(pass)
}

fn charts_mode(m: &Manifold, seed: u64, a: &ReconstructArgs, dir: &Path) -> Result<bool> {
    let mut opts = ChartOptions { seed, ..ChartOptions::default() };
    if let Some(t) = a.tolerance {
        opts.det_threshold = t;
    }
    let len = m.boundary_len()?;
    // lattice over the extent of the domain, not the whole chart box
    let mut bb = [(f64::INFINITY, f64::NEG_INFINITY); 2];
    for k in 0..512 {
        let z = m.boundary_point(len * k as f64 / 512.0)?;
        for (b, x) in bb.iter_mut().zip(&z) {
            *b = (b.0.min(*x), b.1.max(*x));
        }
    }
    let n = a.chart_grid.max(1);
    let mut points = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let x = vec![
                bb[0].0 + (bb[0].1 - bb[0].0) * (i as f64 + 0.5) / n as f64,
                bb[1].0 + (bb[1].1 - bb[1].0) * (j as f64 + 0.5) / n as f64,
            ];
            if m.domain.b(&x) < -0.05 {
                points.push(x);
            }
        }
    }
    let svals: Vec<f64> = (0..a.boundary_points).map(|k| len * k as f64 / a.boundary_points as f64).collect();
    let interior: Vec<String> = points
        .par_iter()
        .map(|p| match interior_chart(m, p, &opts) {
            Ok((c, _)) => format!("{:.16e},{:.16e},interior,{:.16e},{},", p[0], p[1], c.det, c.jacobian_ok),
            Err(e) => format!("{:.16e},{:.16e},interior,nan,false,{}", p[0], p[1], e.code()),
        })
        .collect();
    let boundary: Vec<String> = svals
        .par_iter()
        .map(|&s| {
            let p = m.boundary_point(s).unwrap_or_default();
            match boundary_chart(m, s, &opts) {
                Ok((c, _)) => format!("{:.16e},{:.16e},boundary,{:.16e},{},", p[0], p[1], c.det, c.jacobian_ok),
                Err(e) => format!("{:.16e},{:.16e},boundary,nan,false,{}", p[0], p[1], e.code()),
            }
        })
        .collect();
    let mut csv = String::from("p1,p2,kind,det,ok,error\n");
    let mut ok = 0;
    for line in interior.iter().chain(&boundary) {
        ok += usize::from(line.contains(",true,"));
        csv.push_str(line);
        csv.push('\n');
    }
    fs::write(dir.join("charts.csv"), csv)?;
    let total = interior.len() + boundary.len();
    println!("charts: {ok}/{total} certified ({} interior, {} boundary)", interior.len(), boundary.len());
    Ok(ok == total)
}

fn lens_mode(ds: &Dataset, model: Option<&Manifold>, a: &ReconstructArgs, dir: &Path) -> Result<bool> {
    let ex = extract_lens_data(ds, None)?;
    fs::write(dir.join("lens_extracted.csv"), ex.lens.to_csv())?;
    let total = ex.lens.entries.len() + ex.orphans.len();
    let orphan_frac = ex.orphans.len() as f64 / total.max(1) as f64;
    print!("lens: {} entries, {} orphans", ex.lens.entries.len(), ex.orphans.len());
    let pass = if let Some(m) = model {
        let (good, checked) = agreement_with_model(m, &ex, ds.eps_match())?;
        let frac = good as f64 / checked.max(1) as f64;
        let need = a.tolerance.unwrap_or(0.99);
        println!(", {good}/{checked} agree with the model ({frac:.4})");
        frac >= need
    } else {
        println!();
        orphan_frac < a.tolerance.unwrap_or(0.05)
    };
    Ok(pass)
}

pub fn verify(g: &Global, config: &Path, suite: &str, tolerance: Option<f64>, samples: usize) -> Result<bool> {
    let c = load_config(g, config)?;
    let m = c.build_manifold()?;
    let opts = SuiteOptions { tolerance, seed: c.seed, samples };
    let r = run_suites(&m, suite, &opts)?;
    let csv = results_to_csv(&r);
    if g.out.is_some() || c.out.is_some() {
        fs::write(out_dir(g, Some(&c))?.join("verify.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(r.iter().all(|p| p.pass))
}
