//! Penalized HUM for the fully controlled system.
//!
//! Minimises
//!
//! ```text
//! J_k(v) = ½ τ Σₙ h Σᵢ |vⁿᵢ|² / (ρθ²)ⁿᵢ  +  k/2 ‖z^N − target‖²
//! ```
//!
//! over controls supported where `ρθ > 0`, with `z` the Crank–Nicolson
//! solution driven by `𝓝_h(θv)` (Theorem-1 mode) or `θv` (Theorem-2 mode).
//! Writing `wʲ = (χʲ⁻¹ + χʲ)/2` for the adjoint step multipliers started
//! from `φ^N`, the optimality system is
//!
//! ```text
//! v = −ρθ 𝓝_hᵀ w   (or −ρθ w),      φ^N = k (z^N − target),
//! ```
//!
//! which reduces to `(Λ + I/k) φ^N = z_free^N − target` with `Λ` symmetric
//! and positive semidefinite. That system is solved by conjugate gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dot, DiscreteNorms, Grid, GridFunction, Trajectory, W21Parts};
use crate::model::ProblemSpec;
use crate::pipeline::CutoffTheta;
use crate::solver::Propagator;
use crate::weights::WeightProfile;

/// How the control enters the state equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum HumMode {
    /// Source `𝓝(θv)`, `𝓝 = −g_{m,i₀}∂ₓ − a_{m,i₀}` (0-based `i0`).
    Theorem1 { i0: usize },
    /// Source `θv`.
    Theorem2,
}

#[derive(Clone, Debug, Serialize)]
pub struct HumConfig {
    pub k: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub mode: HumMode,
    /// Exponent fraction in `e^{K s₀ α*}` for the regularity diagnostic.
    pub big_k: f64,
    /// Divide `ρ` by its grid maximum.
    pub normalize_rho: bool,
}

impl HumConfig {
    pub fn new(k: f64, mode: HumMode) -> Self {
        HumConfig { k, cg_tol: 1e-8, cg_max_iter: 500, mode, big_k: 0.5, normalize_rho: true }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty k must be positive, got {}", self.k)));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::InvalidArgument(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HumSolution {
    /// `v`, `m` components.
    pub control: Trajectory,
    /// `z`.
    pub state: Trajectory,
    /// Nodal adjoint `φ` started from `φ^N = k (z^N − target)`.
    pub adjoint: Trajectory,
    /// Time-averaged adjoint multipliers `w`.
    pub multiplier: Trajectory,
    /// `φ^N`.
    pub terminal_adjoint: GridFunction,
    /// `‖z^N‖` (discrete L²).
    pub terminal_norm: f64,
    /// `‖z^N − target‖`.
    pub terminal_error: f64,
    pub cost: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub k: f64,
}

/// Precomputed data for repeated solves on one `(spec, grid)`.
#[derive(Clone)]
pub struct HumSolver {
    prop: Propagator,
    config: HumConfig,
    /// `ρθ` at `[n][i]`, `n ∈ 0..=nt`, interior `i`; zero at `n ∈ {0, nt}`.
    rho_theta: Vec<f64>,
    theta: Vec<f64>,
    n_coef: Option<(f64, f64)>,
}

impl HumSolver {
    pub fn new(spec: &ProblemSpec, grid: &Grid, config: HumConfig, profile: &WeightProfile, theta: &CutoffTheta) -> Result<Self> {
        config.validate()?;
        if profile.grid != *grid || theta.values.len() != grid.nx + 2 {
            return Err(Error::InvalidArgument("weights and cutoff must live on the solver grid".into()));
        }
        let n_coef = match config.mode {
            HumMode::Theorem1 { i0 } => {
                let m = spec.m;
                if i0 + 1 >= m {
                    return Err(Error::InvalidArgument(format!("i0 = {} out of range 1..{}", i0 + 1, m - 1)));
                }
                let c = &spec.coefficients;
                let g = c.g(m - 1, i0).as_constant().ok_or(Error::NotConstant)?;
                let a = c.a(m - 1, i0).as_constant().ok_or(Error::NotConstant)?;
                if g == 0.0 && a == 0.0 {
                    return Err(Error::ConditionUnsatisfied(format!("g_m,{0} = a_m,{0} = 0", i0 + 1)));
                }
                Some((g, a))
            }
            HumMode::Theorem2 => None,
        };
        let nx = grid.nx;
        let mut rho_theta = vec![0.0; (grid.nt + 1) * nx];
        for n in 1..grid.nt {
            for i in 1..=nx {
                let r = if config.normalize_rho { profile.rho_normalized(n, i) } else { profile.rho(n, i) };
                rho_theta[n * nx + i - 1] = r * theta.values[i];
            }
        }
        let prop = Propagator::new(spec, grid)?;
        Ok(HumSolver { prop, config, rho_theta, theta: theta.values[1..=nx].to_vec(), n_coef })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.prop
    }

    pub fn config(&self) -> &HumConfig {
        &self.config
    }

    pub fn with_k(&self, k: f64) -> Result<Self> {
        let mut s = self.clone();
        s.config.k = k;
        s.config.validate()?;
        Ok(s)
    }

    fn grid(&self) -> &Grid {
        self.prop.grid()
    }

    /// `wⁿ = (χⁿ⁻¹ + χⁿ)/2`.
    fn multiplier(&self, chi: &Trajectory) -> Trajectory {
        let g = *self.grid();
        let mut w = Trajectory::zeros(&g, chi.m);
        for n in 0..=g.nt {
            let cur = if n < g.nt { Some(chi.slice(n)) } else { None };
            let prev = if n > 0 { Some(chi.slice(n - 1)) } else { None };
            let out = w.slice_mut(n);
            for (k, o) in out.iter_mut().enumerate() {
                *o = 0.5 * (cur.map_or(0.0, |c| c[k]) + prev.map_or(0.0, |p| p[k]));
            }
        }
        w
    }

    /// `𝓝_hᵀ u = g D₁u − a u` (Theorem 1) or `u`, per component, Dirichlet zero ends.
    fn n_transpose(&self, u: &[f64], out: &mut [f64]) {
        let nx = self.grid().nx;
        let h = self.grid().h;
        match self.n_coef {
            None => out.copy_from_slice(u),
            Some((g, a)) => {
                for (cu, co) in u.chunks(nx).zip(out.chunks_mut(nx)) {
                    for i in 0..nx {
                        let l = if i > 0 { cu[i - 1] } else { 0.0 };
                        let r = if i + 1 < nx { cu[i + 1] } else { 0.0 };
                        co[i] = g * (r - l) / (2.0 * h) - a * cu[i];
                    }
                }
            }
        }
    }

    /// `𝓝_h u = −g D₁u − a u` (Theorem 1) or `u`.
    fn n_apply(&self, u: &[f64], out: &mut [f64]) {
        let nx = self.grid().nx;
        let h = self.grid().h;
        match self.n_coef {
            None => out.copy_from_slice(u),
            Some((g, a)) => {
                for (cu, co) in u.chunks(nx).zip(out.chunks_mut(nx)) {
                    for i in 0..nx {
                        let l = if i > 0 { cu[i - 1] } else { 0.0 };
                        let r = if i + 1 < nx { cu[i + 1] } else { 0.0 };
                        co[i] = -g * (r - l) / (2.0 * h) - a * cu[i];
                    }
                }
            }
        }
    }

    /// `v = −ρθ 𝓝_hᵀ w`.
    pub fn control_from_multiplier(&self, w: &Trajectory) -> Trajectory {
        let g = *self.grid();
        let nx = g.nx;
        let mut v = Trajectory::zeros(&g, w.m);
        let mut tmp = vec![0.0; w.m * nx];
        for n in 1..g.nt {
            self.n_transpose(w.slice(n), &mut tmp);
            let rt = &self.rho_theta[n * nx..(n + 1) * nx];
            for (c, chunk) in v.slice_mut(n).chunks_mut(nx).enumerate() {
                for i in 0..nx {
                    chunk[i] = -rt[i] * tmp[c * nx + i];
                }
            }
        }
        v
    }

    /// Source `𝓝_h(θv)` or `θv`.
    pub fn source(&self, v: &Trajectory) -> Trajectory {
        let g = *self.grid();
        let nx = g.nx;
        let mut f = Trajectory::zeros(&g, v.m);
        let mut tv = vec![0.0; v.m * nx];
        for n in 0..=g.nt {
            for (c, chunk) in v.slice(n).chunks(nx).enumerate() {
                for i in 0..nx {
                    tv[c * nx + i] = self.theta[i] * chunk[i];
                }
            }
            self.n_apply(&tv, f.slice_mut(n));
        }
        f
    }

    /// `θv` on all levels.
    pub fn theta_times(&self, v: &Trajectory) -> Trajectory {
        let nx = self.grid().nx;
        let mut out = v.clone();
        for n in 0..=self.grid().nt {
            for chunk in out.slice_mut(n).chunks_mut(nx) {
                chunk.iter_mut().zip(&self.theta).for_each(|(a, t)| *a *= t);
            }
        }
        out
    }

    /// Adjoint sweep from `φ^N`: `(φ, w, v)`.
    fn adjoint_chain(&self, phi_t: &GridFunction) -> Result<(Trajectory, Trajectory, Trajectory)> {
        let adj = self.prop.adjoint(phi_t)?;
        let w = self.multiplier(&adj.chi);
        let v = self.control_from_multiplier(&w);
        Ok((adj.psi, w, v))
    }

    /// `Λφ = Φ(ρθ𝓝ᵀw[φ])`, the terminal state of the zero-data solve.
    pub fn gramian(&self, phi_t: &GridFunction) -> Result<GridFunction> {
        let (_, _, v) = self.adjoint_chain(phi_t)?;
        let zero = GridFunction::zeros(self.prop.m(), self.grid().nx);
        let z = self.prop.forward(&zero, Some(&self.source(&v)))?;
        Ok(z.terminal().scaled(-1.0))
    }

    /// Solve the optimality system, optionally warm-started.
    pub fn solve(&self, y0: &GridFunction, target: Option<&GridFunction>, warm: Option<&GridFunction>) -> Result<HumSolution> {
        let m = self.prop.m();
        let g = *self.grid();
        let k = self.config.k;
        let free = self.prop.forward(y0, None)?.terminal();
        let mut b = free.clone();
        if let Some(t) = target {
            b.axpy(-1.0, t);
        }
        let apply = |p: &GridFunction| -> Result<GridFunction> {
            let mut out = self.gramian(p)?;
            out.axpy(1.0 / k, p);
            Ok(out)
        };
        let bnorm = dot(&b.values, &b.values).sqrt();
        let mut x = warm.cloned().unwrap_or_else(|| GridFunction::zeros(m, g.nx));
        let mut iterations = 0;
        let mut rel = 0.0;
        if bnorm > 0.0 {
            let ax = apply(&x)?;
            let mut r = b.clone();
            r.axpy(-1.0, &ax);
            let mut p = r.clone();
            let mut rr = dot(&r.values, &r.values);
            rel = rr.sqrt() / bnorm;
            while rel > self.config.cg_tol {
                if iterations >= self.config.cg_max_iter {
                    return Err(Error::CgNotConverged { iterations, residual: rel });
                }
                let ap = apply(&p)?;
                let pap = dot(&p.values, &ap.values);
                if !(pap > 0.0) {
                    return Err(Error::CgNotConverged { iterations, residual: rel });
                }
                let alpha = rr / pap;
                x.axpy(alpha, &p);
                r.axpy(-alpha, &ap);
                let rr_new = dot(&r.values, &r.values);
                let beta = rr_new / rr;
                rr = rr_new;
                for (pv, rv) in p.values.iter_mut().zip(&r.values) {
                    *pv = rv + beta * *pv;
                }
                iterations += 1;
                rel = rr.sqrt() / bnorm;
            }
        } else {
            x = GridFunction::zeros(m, g.nx);
        }
        log::debug!("hum k = {k:e}: {iterations} CG iterations, relative residual {rel:e}");
        let (adjoint, multiplier, control) = self.adjoint_chain(&x)?;
        let state = self.prop.forward(y0, Some(&self.source(&control)))?;
        let zt = state.terminal();
        let mut err = zt.clone();
        if let Some(t) = target {
            err.axpy(-1.0, t);
        }
        let cost = self.cost(&multiplier, &err);
        Ok(HumSolution {
            terminal_norm: zt.norm(g.h),
            terminal_error: err.norm(g.h),
            control,
            state,
            adjoint,
            multiplier,
            terminal_adjoint: x,
            cost,
            cg_iterations: iterations,
            cg_residual: rel,
            k,
        })
    }

    /// `½ τ Σ h ρθ² |𝓝ᵀw|² + k/2 ‖err‖²`.
    fn cost(&self, w: &Trajectory, err: &GridFunction) -> f64 {
        let g = *self.grid();
        let nx = g.nx;
        let mut tmp = vec![0.0; w.m * nx];
        let mut acc = 0.0;
        for n in 1..g.nt {
            self.n_transpose(w.slice(n), &mut tmp);
            let rt = &self.rho_theta[n * nx..(n + 1) * nx];
            for c in 0..w.m {
                for i in 0..nx {
                    let q = tmp[c * nx + i];
                    acc += rt[i] * self.theta[i] * q * q;
                }
            }
        }
        0.5 * g.tau * g.h * acc + 0.5 * self.config.k * err.dot(err, g.h)
    }

    /// Max `|v + ρθ𝓝ᵀw|` for a solution.
    pub fn characterization_residual(&self, sol: &HumSolution) -> f64 {
        let v = self.control_from_multiplier(&sol.multiplier);
        v.minus(&sol.control).max_abs()
    }

    /// `ρθ` at level `n`, interior node `i ∈ 1..=nx`.
    pub fn rho_theta(&self, n: usize, i: usize) -> f64 {
        self.rho_theta[n * self.grid().nx + i - 1]
    }
}

/// One-shot solve.
pub fn hum_solve(
    spec: &ProblemSpec,
    grid: &Grid,
    config: &HumConfig,
    profile: &WeightProfile,
    theta: &CutoffTheta,
    y0: &GridFunction,
    target: Option<&GridFunction>,
) -> Result<HumSolution> {
    HumSolver::new(spec, grid, config.clone(), profile, theta)?.solve(y0, target, None)
}

/// `|J_k − ½⟨y0, φ(0)⟩|`.
pub fn cost_identity_check(sol: &HumSolution, y0: &GridFunction) -> f64 {
    let h = sol.state.grid.h;
    let pairing = 0.5 * h * dot(&y0.values, sol.adjoint.slice(0));
    (sol.cost - pairing).abs()
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub k: f64,
    pub terminal_norm: f64,
    pub cost: f64,
    pub cg_iterations: usize,
}

/// One solve per `k`. Warm starts chain the rows sequentially; cold rows run in parallel.
pub fn penalty_sweep(solver: &HumSolver, y0: &GridFunction, ks: &[f64], warm_start: bool) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(Error::InvalidArgument("penalty sweep needs at least one k".into()));
    }
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("penalty sweep needs increasing k".into()));
    }
    let row = |s: &HumSolution| SweepRow { k: s.k, terminal_norm: s.terminal_norm, cost: s.cost, cg_iterations: s.cg_iterations };
    if warm_start {
        let mut rows = Vec::with_capacity(ks.len());
        let mut prev: Option<GridFunction> = None;
        for &k in ks {
            let sol = solver.with_k(k)?.solve(y0, None, prev.as_ref())?;
            rows.push(row(&sol));
            prev = Some(sol.terminal_adjoint);
        }
        Ok(rows)
    } else {
        crate::par::map(ks, |&k| solver.with_k(k)?.solve(y0, None, None).map(|s| row(&s))).into_iter().collect()
    }
}

/// Write sweep rows as CSV `k,terminal_norm,J_k,iterations`.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "k,terminal_norm,J_k,iterations")?;
    for r in rows {
        writeln!(w, "{:.16e},{:.16e},{:.16e},{}", r.k, r.terminal_norm, r.cost, r.cg_iterations)?;
    }
    Ok(())
}

/// Discrete `W^{2,1}₂` parts of `e^{K s₀ α*} v`, computed in log space.
pub fn control_regularity_report(sol: &HumSolution, profile: &WeightProfile, big_k: f64) -> Result<W21Parts> {
    if !(big_k > 0.0 && big_k < 1.0) {
        return Err(Error::InvalidArgument(format!("K must lie in (0, 1), got {big_k}")));
    }
    let v = &sol.control;
    let g = v.grid;
    let mut weighted = Trajectory::zeros(&g, v.m);
    for n in 1..g.nt {
        let e = big_k * profile.s0 * profile.alpha_star(n);
        for (o, &x) in weighted.slice_mut(n).iter_mut().zip(v.slice(n)) {
            *o = if x == 0.0 { 0.0 } else { x.signum() * (e + x.abs().ln()).exp() };
        }
    }
    Ok(DiscreteNorms::w21_like(&weighted))
}
