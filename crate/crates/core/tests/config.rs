use std::path::Path;

use nullctl::config::RunConfig;
use nullctl::pipeline::PipelineMode;
use nullctl::Error;

fn shipped(name: &str) -> RunConfig {
    RunConfig::from_path(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)).unwrap()
}

#[test]
fn shipped_configs_parse() {
    let t1 = shipped("theorem1.toml");
    let spec = t1.spec().unwrap();
    assert_eq!(t1.pipeline_mode(&spec).unwrap(), PipelineMode::Theorem1);
    assert_eq!(t1.sweep.as_ref().unwrap().ks.len(), 3);
    let c2 = shipped("case_ii.toml");
    let spec = c2.spec().unwrap();
    assert_eq!(c2.pipeline_mode(&spec).unwrap().label(), "theorem2_case_ii");
    assert_eq!(c2.weights.p, 9);
    let grid = c2.grid(&spec).unwrap();
    let y0 = c2.y0(&spec, &grid).unwrap();
    let x = grid.x(10);
    assert!((y0.component(1)[9] - (std::f64::consts::PI * x).sin().powi(3)).abs() < 1e-14);
    let d = shipped("decoupled.toml");
    let spec = d.spec().unwrap();
    let mode = d.pipeline_mode(&spec).unwrap();
    let err = mode.operator(&spec, &d.grid(&spec).unwrap()).unwrap_err();
    assert!(matches!(err, Error::ConditionUnsatisfied(_)));
}

#[test]
fn errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "[problem]\ndomain = [0.0, 1.0]\nhorizon = 1.0\nomega = [0.3, 0.7]\n\n[grid]\nnx = 10\nnt = 10\nbogus = 3\n").unwrap();
    match RunConfig::from_path(&p) {
        Err(e @ Error::Config(_)) => {
            let msg = e.to_string();
            assert!(msg.contains("line 9") && msg.contains("bogus"), "{msg}");
            assert_eq!(e.exit_code(), 1);
        }
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn invalid_geometry_is_a_config_error() {
    let cfg = RunConfig::parse("[problem]\ndomain = [0.0, 1.0]\nhorizon = 1.0\nomega = [0.3, 1.7]\nm = 2\n\n[grid]\nnx = 10\nnt = 10\n").unwrap();
    assert!(cfg.spec().is_err());
}
