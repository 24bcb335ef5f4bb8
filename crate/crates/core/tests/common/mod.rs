#![allow(dead_code)]

use nullctl::{CoefficientField, CoefficientSet, Grid, GridFunction, Interval, ProblemSpec};

/// `m = 2`, `Ω = (0, 1)`, `T = 0.25`, `ω = (0.3, 0.7)`, `d = 1`, `a₂₁ = 1`.
pub fn theorem1_benchmark() -> ProblemSpec {
    let c = CoefficientSet::identity_diffusion(2).with_a(1, 0, CoefficientField::constant(1.0));
    ProblemSpec::new(Interval::new(0.0, 1.0), 0.25, Interval::new(0.3, 0.7), c)
}

/// Same geometry with `g₂₁ ≡ 2`, `a₂₂ = x`.
pub fn case_ii_benchmark() -> ProblemSpec {
    let c = CoefficientSet::identity_diffusion(2)
        .with_g(1, 0, CoefficientField::constant(2.0))
        .with_a(1, 1, CoefficientField::parse("x").unwrap());
    ProblemSpec::new(Interval::new(0.0, 1.0), 0.25, Interval::new(0.3, 0.7), c)
}

/// `sin(πx)^power` in every component.
pub fn sine_power(m: usize, grid: &Grid, power: i32) -> GridFunction {
    GridFunction::from_fn(m, grid, |_, x| (std::f64::consts::PI * x).sin().powi(power))
}
