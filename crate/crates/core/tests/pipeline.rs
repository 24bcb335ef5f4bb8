mod common;

use nullctl::hum::HumConfig;
use nullctl::pipeline::{approximate_control, run_pipeline, standard_weights, PipelineMode, PipelineOutput};
use nullctl::{Error, Grid, GridFunction, ProblemSpec};

fn run(spec: &ProblemSpec, mode: PipelineMode, grid: &Grid, y0: &GridFunction) -> nullctl::Result<PipelineOutput> {
    let p = if mode == PipelineMode::Theorem1 { 7 } else { 9 };
    let profile = standard_weights(spec, grid, 1.0, p)?;
    let theta = mode.default_cutoff(spec, grid)?;
    let cfg = HumConfig { cg_tol: 1e-12, ..HumConfig::new(1e6, nullctl::hum::HumMode::Theorem2) };
    run_pipeline(spec, grid, mode, y0, &cfg, &profile, &theta)
}

fn grid(spec: &ProblemSpec) -> Grid {
    Grid::new(spec.domain, spec.horizon, 49, 100).unwrap()
}

fn modes() -> Vec<(ProblemSpec, PipelineMode)> {
    let t1 = common::theorem1_benchmark();
    let c2 = common::case_ii_benchmark();
    let w1 = t1.control_region();
    let w2 = c2.control_region();
    vec![
        (t1.clone(), PipelineMode::Theorem1),
        (t1, PipelineMode::Theorem2CaseI { window: w1 }),
        (c2, PipelineMode::Theorem2CaseII { window: w2, c_bound: 1.0 }),
    ]
}

#[test]
fn every_mode_yields_a_supported_control() {
    for (spec, mode) in modes() {
        let g = grid(&spec);
        let out = run(&spec, mode, &g, &common::sine_power(2, &g, 3)).unwrap();
        let r = &out.report;
        assert_eq!(r.support_violation, 0.0, "{}", r.mode);
        assert_eq!(r.boundary_violation, 0.0, "{}", r.mode);
        assert!(r.endpoint_zhat <= 1e-12, "{}", r.mode);
        assert!(r.terminal_norm < 1e-3 && r.terminal_norm == r.terminal_norm_z, "{}", r.mode);
        assert_eq!(out.u.m, 1);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["mode"], mode.label());
    }
}

#[test]
fn doubling_the_initial_state_doubles_state_and_control() {
    for (spec, mode) in modes() {
        let g = grid(&spec);
        let y0 = common::sine_power(2, &g, 3);
        let (a, b) = (run(&spec, mode, &g, &y0).unwrap(), run(&spec, mode, &g, &y0.scaled(2.0)).unwrap());
        let ratio = |p: &nullctl::Trajectory, q: &nullctl::Trajectory| {
            let k = (0..p.values().len()).max_by(|&i, &j| p.values()[i].abs().total_cmp(&p.values()[j].abs())).unwrap();
            q.values()[k] / p.values()[k]
        };
        assert!((ratio(&a.u, &b.u) - 2.0).abs() < 1e-5, "{}", a.report.mode);
        assert!((ratio(&a.y, &b.y) - 2.0).abs() < 1e-5, "{}", a.report.mode);
    }
}

#[test]
fn case_ii_rejects_a_bound_above_det_h() {
    let spec = common::case_ii_benchmark();
    let g = grid(&spec);
    let mode = PipelineMode::Theorem2CaseII { window: spec.control_region(), c_bound: 100.0 };
    let err = run(&spec, mode, &g, &common::sine_power(2, &g, 3)).unwrap_err();
    assert!(matches!(err, Error::ConditionUnsatisfied(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn approximate_control_reaches_a_target() {
    let spec = common::theorem1_benchmark();
    let g = grid(&spec);
    let y0 = common::sine_power(2, &g, 1);
    let target = GridFunction::from_fn(2, &g, |c, x| 0.1 * (2.0 * std::f64::consts::PI * x).sin() * (1.0 - c as f64));
    let profile = standard_weights(&spec, &g, 1.0, 7).unwrap();
    let theta = PipelineMode::Theorem1.default_cutoff(&spec, &g).unwrap();
    let cfg = HumConfig::new(1e2, nullctl::hum::HumMode::Theorem2);
    let out = approximate_control(&spec, &g, PipelineMode::Theorem1, &y0, &target, 1e-6, &cfg, &profile, &theta).unwrap();
    assert!(out.achieved_error <= 1e-6 && out.k >= 1e2);
    let mut err = out.output.y.terminal();
    err.axpy(-1.0, &target);
    assert!((err.dot(&err, g.h) - out.achieved_error).abs() <= 1e-15);
    let miss = approximate_control(&spec, &g, PipelineMode::Theorem1, &y0, &target, 1e-300, &cfg, &profile, &theta);
    assert!(matches!(miss, Err(Error::Unreachable { .. })));
}
