//! Fictitious control: `(y, u) := (z − ẑ, −v̂)` with `(ẑ, v̂) = 𝓜(θv)`.

use serde::Serialize;

use crate::algebraic::{MOperator, StField, StGrid};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Trajectory};
use crate::hum::{HumConfig, HumMode, HumSolution, HumSolver};
use crate::model::{check_condition_case_ii, find_i0_for, Interval, ProblemSpec, SampleOptions, SpaceTimeWindow};
use crate::weights::{centred_s, Eta0, WeightProfile};

/// Transition profile between the inner and support windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `6u⁵ − 15u⁴ + 10u³`, C².
    Quintic,
    /// `e^{−1/u} / (e^{−1/u} + e^{−1/(1−u)})`, C^∞.
    Smooth,
}

impl CutoffKind {
    fn step(self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match self {
            CutoffKind::Quintic => u * u * u * (10.0 + u * (-15.0 + 6.0 * u)),
            CutoffKind::Smooth => {
                let (a, b) = ((-1.0 / u).exp(), (-1.0 / (1.0 - u)).exp());
                a / (a + b)
            }
        }
    }
}

/// `θ(x)` at nodes `0..=nx+1`.
#[derive(Clone, Debug)]
pub struct CutoffTheta {
    pub inner: Interval,
    pub support: Interval,
    pub kind: CutoffKind,
    pub values: Vec<f64>,
}

impl CutoffTheta {
    pub fn eval(&self, x: f64) -> f64 {
        let (s, i) = (self.support, self.inner);
        if x <= s.lo || x >= s.hi {
            0.0
        } else if x < i.lo {
            self.kind.step((x - s.lo) / (i.lo - s.lo))
        } else if x > i.hi {
            self.kind.step((s.hi - x) / (s.hi - i.hi))
        } else {
            1.0
        }
    }
}

/// Quintic cutoff with `θ ≡ 1` on `inner` and `θ ≡ 0` outside `support`.
pub fn build_cutoff(inner: Interval, support: Interval, grid: &Grid) -> Result<CutoffTheta> {
    build_cutoff_with(inner, support, grid, CutoffKind::Quintic)
}

pub fn build_cutoff_with(inner: Interval, support: Interval, grid: &Grid, kind: CutoffKind) -> Result<CutoffTheta> {
    if inner.is_empty() || !inner.compactly_inside(&support) {
        return Err(Error::InvalidArgument(format!(
            "cutoff windows not nested: ({}, {}) in ({}, {})",
            inner.lo, inner.hi, support.lo, support.hi
        )));
    }
    let mut theta = CutoffTheta { inner, support, kind, values: Vec::new() };
    theta.values = (0..=grid.nx + 1).map(|i| theta.eval(grid.x(i))).collect();
    Ok(theta)
}

/// Which algebraic reduction eliminates the fictitious control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PipelineMode {
    /// Constant coefficients, pivot from `find_i0`.
    Theorem1,
    /// `m = 2`, `g₂₁ = 0`, `a₂₁ ≠ 0` on `window`.
    Theorem2CaseI { window: SpaceTimeWindow },
    /// `m = 2`, `|det H| > c_bound` on `window`.
    Theorem2CaseII { window: SpaceTimeWindow, c_bound: f64 },
}

impl PipelineMode {
    pub fn label(&self) -> &'static str {
        match self {
            PipelineMode::Theorem1 => "theorem1",
            PipelineMode::Theorem2CaseI { .. } => "theorem2_case_i",
            PipelineMode::Theorem2CaseII { .. } => "theorem2_case_ii",
        }
    }

    /// Verify the mode condition and build `𝓜` on `grid`.
    pub fn operator(&self, spec: &ProblemSpec, grid: &Grid) -> Result<(HumMode, MOperator)> {
        match *self {
            PipelineMode::Theorem1 => {
                let i0 = find_i0_for(&spec.coefficients)?.ok_or_else(|| {
                    Error::ConditionUnsatisfied("the last equation is decoupled from the controlled ones".into())
                })?;
                Ok((HumMode::Theorem1 { i0 }, MOperator::theorem1(i0, &spec.coefficients)?))
            }
            PipelineMode::Theorem2CaseI { window } => {
                Ok((HumMode::Theorem2, MOperator::case_i(spec, &window, SampleOptions::default())?))
            }
            PipelineMode::Theorem2CaseII { window, c_bound } => {
                if !check_condition_case_ii(spec, &window, c_bound, SampleOptions::default())? {
                    return Err(Error::ConditionUnsatisfied(format!("min |det H| <= {c_bound} on the window")));
                }
                Ok((HumMode::Theorem2, MOperator::case_ii(spec, &window, &StGrid::from_grid(grid))?))
            }
        }
    }

    /// `(inner, support)`: `ω₀` and halfway to `ω` for Theorem 1, `ω₁` and `ω₀` otherwise.
    pub fn cutoff_windows(&self, spec: &ProblemSpec) -> (Interval, Interval) {
        match self {
            PipelineMode::Theorem1 => {
                let (o, o0) = (spec.omega, spec.omega0);
                (o0, Interval::new(0.5 * (o.lo + o0.lo), 0.5 * (o.hi + o0.hi)))
            }
            _ => (spec.omega1, spec.omega0),
        }
    }

    /// Mode-default cutoff: quintic for Theorem 1, C^∞ for Theorem 2.
    pub fn default_cutoff(&self, spec: &ProblemSpec, grid: &Grid) -> Result<CutoffTheta> {
        let (inner, support) = self.cutoff_windows(spec);
        let kind = match self {
            PipelineMode::Theorem1 => CutoffKind::Quintic,
            _ => CutoffKind::Smooth,
        };
        build_cutoff_with(inner, support, grid, kind)
    }
}

/// Weights with `η⁰` centred in `ω₂` and `s` from [`centred_s`].
pub fn standard_weights(spec: &ProblemSpec, grid: &Grid, lambda: f64, p: i32) -> Result<WeightProfile> {
    let eta = Eta0::build(spec.domain, spec.omega2)?;
    WeightProfile::build(&eta, lambda, centred_s(lambda, spec.horizon, p), grid, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub mode: String,
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub tau: f64,
    pub k: f64,
    pub cg_iterations: usize,
    /// Discrete `L²(Q_T)` residual of the original system for `(y, u)`.
    pub pde_residual: f64,
    pub pde_residual_max: f64,
    /// `‖𝓛(ẑ, v̂) − F‖`, `F` the fictitious source.
    pub consistency_residual: f64,
    pub terminal_norm: f64,
    pub terminal_norm_z: f64,
    /// Max `|u|` at nodes outside `ω`.
    pub support_violation: f64,
    /// Max `|y|` at the boundary nodes.
    pub boundary_violation: f64,
    /// Max `|ẑ|` at `t ∈ {0, T}`.
    pub endpoint_zhat: f64,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub y: Trajectory,
    /// `m − 1` components.
    pub u: Trajectory,
    pub zhat: Trajectory,
    pub hum: HumSolution,
    pub report: VerificationReport,
}

/// Centred-in-time residual `Dₜy − (d y_xx + d_x y_x) − G y_x − A y − 1_ω B u − F`
/// at levels `1..nt` and interior nodes, with zero Dirichlet values.
///
/// Returns `(discrete L², max)`.
pub fn system_residual(spec: &ProblemSpec, y: &Trajectory, u: &Trajectory, source: Option<&Trajectory>) -> Result<(f64, f64)> {
    let g = y.grid;
    let (m, nx) = (y.m, g.nx);
    if m != spec.m || u.m + 1 != m || u.grid != g {
        return Err(Error::InvalidArgument("residual needs m state and m - 1 control components on one grid".into()));
    }
    let c = &spec.coefficients;
    let dx: Vec<_> = (0..m).map(|l| c.d(l).partial(0, 1)).collect::<Result<_>>()?;
    let rows = crate::par::map_range(g.nt.saturating_sub(1), |k| {
        let n = k + 1;
        let t = g.t(n);
        let (prev, cur, next) = (y.slice(n - 1), y.slice(n), y.slice(n + 1));
        let at = |c: usize, i: isize| {
            if i < 1 || i > nx as isize {
                0.0
            } else {
                cur[c * nx + i as usize - 1]
            }
        };
        let (mut sq, mut mx) = (0.0f64, 0.0f64);
        for i in 1..=nx {
            let x = g.x(i);
            let ii = i as isize;
            for l in 0..m {
                let idx = l * nx + i - 1;
                let d2 = (at(l, ii + 1) - 2.0 * at(l, ii) + at(l, ii - 1)) / (g.h * g.h);
                let d1 = (at(l, ii + 1) - at(l, ii - 1)) / (2.0 * g.h);
                let mut r = (next[idx] - prev[idx]) / (2.0 * g.tau) - c.d(l).eval(t, x) * d2 - dx[l].eval(t, x) * d1;
                for j in 0..m {
                    let dj = (at(j, ii + 1) - at(j, ii - 1)) / (2.0 * g.h);
                    r -= c.g(l, j).eval(t, x) * dj + c.a(l, j).eval(t, x) * at(j, ii);
                }
                if l + 1 < m && spec.omega.contains(x) {
                    r -= u.get(n, l, i);
                }
                if let Some(f) = source {
                    r -= f.get(n, l, i);
                }
                sq += r * r;
                mx = mx.max(r.abs());
            }
        }
        (sq, mx)
    });
    let sq: f64 = rows.iter().map(|r| r.0).sum();
    let mx = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(((g.tau * g.h * sq).sqrt(), mx))
}

/// Run HUM then the algebraic step with a prepared solver and operator.
fn assemble(
    spec: &ProblemSpec,
    solver: &HumSolver,
    mop: &MOperator,
    label: &str,
    y0: &GridFunction,
    target: Option<&GridFunction>,
) -> Result<PipelineOutput> {
    let grid = *solver.propagator().grid();
    let m = spec.m;
    let hum = solver.solve(y0, target, None)?;
    let tv = solver.theta_times(&hum.control);
    let (zhat_st, vhat_st) = mop.apply_m(&StField::from_trajectory(&tv))?;
    let zhat = zhat_st.to_trajectory(&grid, 0, m);
    let mut u = vhat_st.to_trajectory(&grid, 0, m - 1);
    u = u.scaled(-1.0);
    let y = hum.state.minus(&zhat);

    let mut endpoint = 0.0f64;
    let mut boundary = 0.0f64;
    for c in 0..m {
        for i in 0..=grid.nx + 1 {
            endpoint = endpoint.max(zhat_st.get(c, 0, i).abs()).max(zhat_st.get(c, grid.nt, i).abs());
        }
        for n in 0..=grid.nt {
            boundary = boundary.max(zhat_st.get(c, n, 0).abs()).max(zhat_st.get(c, n, grid.nx + 1).abs());
        }
    }
    let scale = y0.norm(grid.h) + target.map_or(0.0, |t| t.norm(grid.h));
    if endpoint > 1e-8 * scale {
        return Err(Error::Pipeline(format!("zhat does not vanish at t = 0, T: {endpoint:e}")));
    }
    let mut support = 0.0f64;
    for c in 0..m - 1 {
        for n in 0..=grid.nt {
            for i in 0..=grid.nx + 1 {
                if !spec.omega.contains(grid.x(i)) {
                    support = support.max(vhat_st.get(c, n, i).abs());
                }
            }
        }
    }
    let (pde, pde_max) = system_residual(spec, &y, &u, None)?;
    let vhat = u.scaled(-1.0);
    let (consistency, _) = system_residual(spec, &zhat, &vhat, Some(&solver.source(&hum.control)))?;
    let report = VerificationReport {
        mode: label.to_string(),
        nx: grid.nx,
        nt: grid.nt,
        h: grid.h,
        tau: grid.tau,
        k: hum.k,
        cg_iterations: hum.cg_iterations,
        pde_residual: pde,
        pde_residual_max: pde_max,
        consistency_residual: consistency,
        terminal_norm: y.terminal().norm(grid.h),
        terminal_norm_z: hum.terminal_norm,
        support_violation: support,
        boundary_violation: boundary,
        endpoint_zhat: endpoint,
    };
    Ok(PipelineOutput { y, u, zhat, hum, report })
}

/// Null control of the underactuated system.
pub fn run_pipeline(
    spec: &ProblemSpec,
    grid: &Grid,
    mode: PipelineMode,
    y0: &GridFunction,
    hum_config: &HumConfig,
    profile: &WeightProfile,
    cutoff: &CutoffTheta,
) -> Result<PipelineOutput> {
    let (hum_mode, mop) = mode.operator(spec, grid)?;
    let config = HumConfig { mode: hum_mode, ..hum_config.clone() };
    let solver = HumSolver::new(spec, grid, config, profile, cutoff)?;
    assemble(spec, &solver, &mop, mode.label(), y0, None)
}

#[derive(Clone, Debug)]
pub struct ApproxOutcome {
    pub output: PipelineOutput,
    /// `‖y(T) − y_T‖²`.
    pub achieved_error: f64,
    pub k: f64,
}

/// Largest penalty tried by [`approximate_control`].
pub const K_MAX: f64 = 1e8;

/// Steer `y(T)` within `epsilon` (squared L²) of `target`, multiplying `k` by 100 per round.
#[allow(clippy::too_many_arguments)]
pub fn approximate_control(
    spec: &ProblemSpec,
    grid: &Grid,
    mode: PipelineMode,
    y0: &GridFunction,
    target: &GridFunction,
    epsilon: f64,
    hum_config: &HumConfig,
    profile: &WeightProfile,
    cutoff: &CutoffTheta,
) -> Result<ApproxOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    let (hum_mode, mop) = mode.operator(spec, grid)?;
    let config = HumConfig { mode: hum_mode, ..hum_config.clone() };
    let base = HumSolver::new(spec, grid, config, profile, cutoff)?;
    let mut k = hum_config.k;
    let mut best = f64::INFINITY;
    loop {
        let solver = base.with_k(k)?;
        let output = assemble(spec, &solver, &mop, mode.label(), y0, Some(target))?;
        let mut err = output.y.terminal();
        err.axpy(-1.0, target);
        let achieved = err.dot(&err, grid.h);
        log::info!("approximate control k = {k:e}: error {achieved:e}");
        if achieved <= epsilon {
            return Ok(ApproxOutcome { output, achieved_error: achieved, k });
        }
        best = best.min(achieved);
        if k >= K_MAX {
            return Err(Error::Unreachable { best, epsilon, k });
        }
        k = (k * 100.0).min(K_MAX);
    }
}
