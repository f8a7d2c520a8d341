use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoscatter")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn single_line_error(o: &Output, code: &str) {
    assert_eq!(o.status.code(), Some(2), "{}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "{err}");
}

#[test]
fn forward_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("flat.cfg"), "preset = flat\nsources = random(100)\ngrid = 360\nseed = 11\nblind = true\n").unwrap();
    for out in ["a", "b"] {
        let o = run(&["forward", "--config", "flat.cfg", "--out", out, "--workers", "1"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["dataset.txt", "truth.txt", "lens.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between runs");
    }
    let text = fs::read_to_string(dir.path().join("a/dataset.txt")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("source ")).count(), 100);

    let o = run(&["reconstruct", "a/dataset.txt", "--mode", "localize", "--out", "rep"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("100/100"));
    let rows = fs::read_to_string(dir.path().join("rep/localize.csv")).unwrap();
    assert!(rows.lines().skip(1).all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f[0] == f[1]
    }));
}

#[test]
fn non_convex_domain_aborts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.cfg"), "preset = peanut\nsources = random(4)\n").unwrap();
    let o = run(&["forward", "--config", "p.cfg"], dir.path());
    single_line_error(&o, "E_DOMAIN");
    assert!(stderr(&o).contains("convex"));
}

#[test]
fn compare_rotated_copy_and_different_metric() {
    let dir = tempfile::tempdir().unwrap();
    let pts = [(0.1, 0.2), (-0.3, 0.05), (0.4, -0.4), (0.0, 0.6), (-0.5, -0.3)];
    let a: f64 = 0.9;
    let list = |rot: f64| {
        pts.iter()
            .map(|&(x, y)| format!("{:.17}, {:.17}", rot.cos() * x - rot.sin() * y, rot.sin() * x + rot.cos() * y))
            .collect::<Vec<_>>()
            .join("; ")
    };
    fs::write(dir.path().join("a.cfg"), format!("preset = flat\ngrid = 128\nsources = list({})\n", list(0.0))).unwrap();
    fs::write(dir.path().join("b.cfg"), format!("preset = flat\ngrid = 128\nsources = list({})\n", list(a))).unwrap();
    fs::write(dir.path().join("c.cfg"), format!("metric = conformal\nphi_expr = 0.5*exp(-(x1^2+x2^2)/0.04)\nboundary = circle(1)\ngrid = 128\nsources = list({})\n", list(0.0))).unwrap();
    for n in ["a", "b", "c"] {
        let o = run(&["forward", "--config", &format!("{n}.cfg"), "--out", n], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let shift = format!("shift:{a}");
    let o = run(&["reconstruct", "a/dataset.txt", "--mode", "compare", "--against", "b/dataset.txt", "--phi", &shift], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let o = run(&["reconstruct", "a/dataset.txt", "--mode", "compare", "--against", "c/dataset.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("cost") && stdout(&o).contains("FAIL"));
}

#[test]
fn verify_suites() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("flat.cfg"), "preset = flat\n").unwrap();
    let o = run(&["verify", "--config", "flat.cfg", "--suite", "all", "--samples", "4"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let s = stdout(&o);
    assert!(s.starts_with("suite,property,measured,tolerance,status"));
    assert!(s.lines().skip(1).all(|l| l.ends_with(",PASS")));

    let o = run(&["verify", "--config", "flat.cfg", "--suite", "conservation", "--tolerance", "0", "--samples", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().skip(1).all(|l| l.ends_with(",FAIL")));

    let o = run(&["verify", "--config", "flat.cfg", "--suite", "torsion"], dir.path());
    single_line_error(&o, "E_USAGE");
}

#[test]
fn usage_and_parse_errors_are_single_line() {
    let dir = tempfile::tempdir().unwrap();
    single_line_error(&run(&["transmogrify"], dir.path()), "E_USAGE");
    single_line_error(&run(&["forward"], dir.path()), "E_USAGE");

    fs::write(dir.path().join("bad.cfg"), "preset = flat\n\ngrid = lots\n").unwrap();
    let o = run(&["forward", "--config", "bad.cfg"], dir.path());
    single_line_error(&o, "E_PARSE");
    assert!(stderr(&o).contains("line 3"));

    fs::write(dir.path().join("bad.txt"), "#geoscatter-dataset v1\n#metric flat  dim 2  grid 64  boundary_len 6.28\nsource a\n0.1 zebra 0.3\nend\n").unwrap();
    let o = run(&["reconstruct", "bad.txt", "--mode", "localize"], dir.path());
    single_line_error(&o, "E_PARSE");
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));

    let o = run(&["reconstruct", "missing.txt", "--mode", "lens"], dir.path());
    single_line_error(&o, "E_IO");
}

#[test]
fn charts_and_lens_on_the_flat_disk() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("flat.cfg"), "preset = flat\nsources = random(60)\ngrid = 180\nseed = 2\n").unwrap();
    assert!(run(&["forward", "--config", "flat.cfg", "--out", "d"], dir.path()).status.success());
    let o = run(
        &["reconstruct", "d/dataset.txt", "--mode", "charts", "--config", "flat.cfg", "--chart-grid", "4", "--boundary-points", "4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stdout(&o));
    let rows = fs::read_to_string(dir.path().join("charts.csv")).unwrap();
    assert!(rows.lines().filter(|l| l.contains(",boundary,")).count() == 4);

    let o = run(&["reconstruct", "d/dataset.txt", "--mode", "lens", "--config", "flat.cfg"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(dir.path().join("lens_extracted.csv").exists());

    let o = run(&["reconstruct", "d/dataset.txt", "--mode", "charts"], dir.path());
    single_line_error(&o, "E_USAGE");
}
