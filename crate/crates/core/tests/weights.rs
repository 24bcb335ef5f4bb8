use nullctl::weights::{gaussian_samples, observability_ratio, Eta0, Observation};
use nullctl::pipeline::standard_weights;
use nullctl::{CoefficientField, CoefficientSet, Grid, Interval, ProblemSpec, Propagator};
use proptest::prelude::*;

fn spec() -> ProblemSpec {
    let c = CoefficientSet::identity_diffusion(2).with_a(1, 0, CoefficientField::constant(1.0));
    ProblemSpec::new(Interval::new(0.0, 1.0), 0.25, Interval::new(0.3, 0.7), c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eta0_peaks_inside_its_window_and_vanishes_at_the_boundary(lo in 0.3f64..0.6, width in 0.02f64..0.1) {
        let d = Interval::new(0.0, 1.0);
        let w = Interval::new(lo, (lo + width).min(0.69));
        let eta = Eta0::build(d, w).unwrap();
        prop_assert!(eta.eval(0.0).abs() < 1e-15 && eta.eval(1.0).abs() < 1e-15);
        prop_assert!((eta.eval(w.mid()) - eta.sup_norm()).abs() < 1e-12);
        prop_assert!(eta.derivative(w.mid()).abs() < 1e-12);
        prop_assert!(eta.kappa > 0.0);
        for k in 1..100 {
            let x = k as f64 / 100.0;
            prop_assert!(eta.eval(x) > 0.0 && eta.eval(x) <= eta.sup_norm() + 1e-15);
        }
    }

    #[test]
    fn weights_are_ordered(n in 1usize..40, i in 0usize..41) {
        let s = spec();
        let grid = Grid::new(s.domain, s.horizon, 39, 40).unwrap();
        let p = standard_weights(&s, &grid, 1.0, 7).unwrap();
        prop_assert!(p.alpha(n, i) > 0.0 && p.xi(n, i) > 0.0);
        prop_assert!(p.alpha(n, i) <= p.alpha_star(n) && p.xi(n, i) >= p.xi_star(n));
        prop_assert!(p.rho_normalized(n, i) <= 1.0);
        prop_assert!((p.log_rho(n, i) - (7.0 * p.xi(n, i).ln() - 2.0 * p.s * p.alpha(n, i))).abs() < 1e-9 * p.log_rho(n, i).abs().max(1.0));
    }
}

#[test]
fn rho_vanishes_at_the_time_ends_and_peaks_mid_horizon() {
    let s = spec();
    let grid = Grid::new(s.domain, s.horizon, 39, 40).unwrap();
    let p = standard_weights(&s, &grid, 1.0, 7).unwrap();
    for i in 0..=grid.nx + 1 {
        assert_eq!(p.rho(0, i), 0.0);
        assert_eq!(p.rho(grid.nt, i), 0.0);
        let best = (1..grid.nt).max_by(|&a, &b| p.log_rho(a, i).total_cmp(&p.log_rho(b, i))).unwrap();
        assert!(best.abs_diff(grid.nt / 2) <= 1, "node {i}: peak at level {best}");
    }
    assert!(p.alpha_at(0.0, 0.5).is_err());
}

#[test]
fn eta0_rejects_off_centre_windows() {
    assert!(Eta0::build(Interval::new(0.0, 1.0), Interval::new(0.05, 0.15)).is_err());
    assert!(Eta0::build(Interval::new(0.0, 1.0), Interval::new(0.0, 0.5)).is_err());
}

#[test]
fn observability_ratios_are_finite_and_seeded() {
    let s = spec();
    let grid = Grid::new(s.domain, s.horizon, 39, 40).unwrap();
    let p = standard_weights(&s, &grid, 1.0, 7).unwrap();
    let prop = Propagator::new(&s, &grid).unwrap();
    let samples = gaussian_samples(2, grid.nx, 6, 3);
    assert_eq!(samples, gaussian_samples(2, grid.nx, 6, 3));
    assert_ne!(samples, gaussian_samples(2, grid.nx, 6, 4));
    let obs = Observation::Adjoint { g: 0.0, a: 1.0, window: s.omega0 };
    let a = observability_ratio(&prop, &p, obs, &samples).unwrap();
    let b = nullctl::par::with_threads(1, || observability_ratio(&prop, &p, obs, &samples).unwrap());
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.ratio().is_some_and(f64::is_finite)));
}
