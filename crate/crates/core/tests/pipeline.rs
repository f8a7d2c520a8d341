use geoscatter::config::RunConfig;
use geoscatter::data::{lift_tangential, parse_truth, truth_text, Dataset};
use geoscatter::reconstruction::{compare_datasets, localize, BoundaryMap};

const CFG: &str = "\
name = lumpy
metric = conformal
phi_expr = 0.2*exp(-((x1-0.2)^2 + (x2+0.1)^2)/0.09)
boundary = circle(1)
sources = ring(24, 0.5)
grid = 96
seed = 5
blind = true
";

#[test]
fn config_dataset_text_round_trip() {
    let cfg = RunConfig::parse(CFG).unwrap();
    let m = cfg.build_manifold().unwrap();
    let sources = cfg.sources(&m).unwrap();
    assert_eq!(sources.len(), 24);
    let ds = geoscatter::data::generate_dataset(&m, &sources, cfg.grid, true).unwrap();
    let back = Dataset::parse(&ds.to_text()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(parse_truth(&truth_text(&sources)).unwrap(), sources);

    // every source finds itself, and a dataset matches itself at zero cost
    for set in &back.sets {
        assert_eq!(localize(&back, set).unwrap().id, set.id);
    }
    assert_eq!(compare_datasets(&ds, &back, &BoundaryMap::Identity).unwrap().cost, 0.0);
}

#[test]
fn tangential_data_lifts_to_the_complete_data() {
    let cfg = RunConfig::parse(CFG).unwrap();
    let m = cfg.build_manifold().unwrap();
    let sources = cfg.sources(&m).unwrap();
    let full = geoscatter::data::generate_dataset(&m, &sources, cfg.grid, true).unwrap();
    let tang = geoscatter::data::generate_dataset(&m, &sources, cfg.grid, false).unwrap();
    assert!(!tang.is_complete());
    let lifted = lift_tangential(&tang).unwrap();
    let r = compare_datasets(&full, &lifted, &BoundaryMap::Identity).unwrap();
    assert!(r.cost < 1e-6, "lifted cost {}", r.cost);
}
