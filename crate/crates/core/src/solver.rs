//! Crank–Nicolson forward solver and its exact discrete adjoint.
//!
//! One step reads `(I − τ/2 A) yⁿ⁺¹ = (I + τ/2 A) yⁿ + τ Fₙ` with `A` frozen at
//! `t_{n+1/2}` and `Fₙ = (fⁿ + fⁿ⁺¹)/2`. Unknowns are ordered node-major
//! (`k = (i−1)·m + c`) so the coupled system has bandwidth `2m − 1`.
//!
//! The adjoint runs `χⁿ = L⁻ᵀ ψⁿ⁺¹`, `ψⁿ = Rᵀ χⁿ`, which gives
//! `⟨y^N, ψ^N⟩ − ⟨y⁰, ψ⁰⟩ = τ Σₙ ⟨Fₙ, χⁿ⟩` to rounding.

use std::sync::Arc;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{dot, Grid, GridFunction, Trajectory};
use crate::model::ProblemSpec;

struct Step {
    lhs: BandLu,
    rhs: BandMatrix,
}

/// Factored step matrices for one `(spec, grid)` pair.
#[derive(Clone)]
pub struct Propagator {
    spec: ProblemSpec,
    grid: Grid,
    steps: Arc<Vec<Step>>,
}

/// Output of the adjoint sweep.
#[derive(Clone, Debug)]
pub struct AdjointSolution {
    /// Nodal adjoint `ψⁿ`, `n = 0..=N`.
    pub psi: Trajectory,
    /// Step multipliers `χⁿ`, `n = 0..N` (level `N` is unused and zero).
    pub chi: Trajectory,
}

/// Which backward scheme `duality_residual` pairs with the forward solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdjointScheme {
    /// Exact transpose of the forward step.
    Transpose,
    /// Independent backward Euler for the continuous adjoint (consistent only).
    BackwardEuler,
}

/// Assemble the semi-discrete operator `A(t)` in node-major order.
pub fn assemble_operator(spec: &ProblemSpec, grid: &Grid, t: f64) -> BandMatrix {
    let m = spec.m;
    let nx = grid.nx;
    let bw = 2 * m - 1;
    let mut a = BandMatrix::zeros(m * nx, bw, bw);
    let h = grid.h;
    let c = &spec.coefficients;
    for i in 1..=nx {
        let x = grid.x(i);
        let row0 = (i - 1) * m;
        for comp in 0..m {
            let r = row0 + comp;
            let dl = c.d(comp).eval(t, x - 0.5 * h);
            let dr = c.d(comp).eval(t, x + 0.5 * h);
            a.add(r, r, -(dl + dr) / (h * h));
            if i > 1 {
                a.add(r, r - m, dl / (h * h));
            }
            if i < nx {
                a.add(r, r + m, dr / (h * h));
            }
            for j in 0..m {
                let g = c.g(comp, j).eval(t, x);
                if g != 0.0 {
                    if i > 1 {
                        a.add(r, row0 - m + j, -g / (2.0 * h));
                    }
                    if i < nx {
                        a.add(r, row0 + m + j, g / (2.0 * h));
                    }
                }
                let aij = c.a(comp, j).eval(t, x);
                if aij != 0.0 {
                    a.add(r, row0 + j, aij);
                }
            }
        }
    }
    a
}

fn to_node_major(src: &[f64], m: usize, nx: usize, dst: &mut [f64]) {
    for c in 0..m {
        for i in 0..nx {
            dst[i * m + c] = src[c * nx + i];
        }
    }
}

fn to_component_major(src: &[f64], m: usize, nx: usize, dst: &mut [f64]) {
    for c in 0..m {
        for i in 0..nx {
            dst[c * nx + i] = src[i * m + c];
        }
    }
}

impl Propagator {
    /// Assemble and factor the step matrices; time-independent coefficients share one step.
    pub fn new(spec: &ProblemSpec, grid: &Grid) -> Result<Self> {
        let count = if spec.coefficients.time_dependent() { grid.nt } else { 1 };
        let build = |n: usize| -> Result<Step> {
            let t = (n as f64 + 0.5) * grid.tau;
            let a = assemble_operator(spec, grid, t);
            let mut lhs = a.clone();
            lhs.scale_shift(-0.5 * grid.tau, 1.0);
            let mut rhs = a;
            rhs.scale_shift(0.5 * grid.tau, 1.0);
            let lhs = lhs.factor().map_err(|e| {
                Error::Singular(format!("Crank-Nicolson step {n} (tau = {}, h = {}): {e}", grid.tau, grid.h))
            })?;
            Ok(Step { lhs, rhs })
        };
        let steps = crate::par::map_range(count, build).into_iter().collect::<Result<Vec<_>>>()?;
        Ok(Propagator { spec: spec.clone(), grid: *grid, steps: Arc::new(steps) })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    fn step(&self, n: usize) -> &Step {
        &self.steps[if self.steps.len() == 1 { 0 } else { n }]
    }

    fn check_dims(&self, f: &GridFunction) -> Result<()> {
        if f.m != self.spec.m || f.nx != self.grid.nx {
            return Err(Error::InvalidArgument(format!(
                "grid function has shape ({}, {}), expected ({}, {})",
                f.m, f.nx, self.spec.m, self.grid.nx
            )));
        }
        Ok(())
    }

    /// Forward solve from `y0` with optional nodal source `fⁿ`.
    pub fn forward(&self, y0: &GridFunction, source: Option<&Trajectory>) -> Result<Trajectory> {
        self.check_dims(y0)?;
        let (m, nx, tau) = (self.spec.m, self.grid.nx, self.grid.tau);
        if let Some(f) = source {
            if f.m != m || f.grid.nx != nx || f.grid.nt != self.grid.nt {
                return Err(Error::InvalidArgument("source trajectory does not match the grid".into()));
            }
        }
        let len = m * nx;
        let mut out = Trajectory::zeros(&self.grid, m);
        out.set_level(0, y0);
        let mut y = vec![0.0; len];
        let mut rhs = vec![0.0; len];
        let mut src = vec![0.0; len];
        to_node_major(&y0.values, m, nx, &mut y);
        for n in 0..self.grid.nt {
            let st = self.step(n);
            st.rhs.matvec(&y, &mut rhs);
            if let Some(f) = source {
                let (a, b) = (f.slice(n), f.slice(n + 1));
                for (k, s) in src.iter_mut().enumerate() {
                    *s = 0.5 * (a[k] + b[k]);
                }
                for c in 0..m {
                    for i in 0..nx {
                        rhs[i * m + c] += tau * src[c * nx + i];
                    }
                }
            }
            st.lhs.solve(&mut rhs);
            std::mem::swap(&mut y, &mut rhs);
            to_component_major(&y, m, nx, out.slice_mut(n + 1));
        }
        Ok(out)
    }

    /// Exact discrete adjoint sweep from `ψ^N = psi_t`.
    pub fn adjoint(&self, psi_t: &GridFunction) -> Result<AdjointSolution> {
        self.adjoint_with(psi_t, AdjointScheme::Transpose)
    }

    pub fn adjoint_with(&self, psi_t: &GridFunction, scheme: AdjointScheme) -> Result<AdjointSolution> {
        self.check_dims(psi_t)?;
        let (m, nx, nt) = (self.spec.m, self.grid.nx, self.grid.nt);
        let len = m * nx;
        let mut psi = Trajectory::zeros(&self.grid, m);
        let mut chi = Trajectory::zeros(&self.grid, m);
        psi.set_level(nt, psi_t);
        let mut p = vec![0.0; len];
        let mut w = vec![0.0; len];
        to_node_major(&psi_t.values, m, nx, &mut p);
        let be_steps: Option<Vec<BandLu>> = match scheme {
            AdjointScheme::Transpose => None,
            AdjointScheme::BackwardEuler => Some(
                (0..nt)
                    .map(|n| {
                        let mut a = assemble_operator(&self.spec, &self.grid, self.grid.t(n));
                        a.scale_shift(-self.grid.tau, 1.0);
                        a.factor()
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        for n in (0..nt).rev() {
            match &be_steps {
                None => {
                    let st = self.step(n);
                    w.copy_from_slice(&p);
                    st.lhs.solve_transpose(&mut w);
                    st.rhs.matvec_t(&w, &mut p);
                }
                Some(be) => {
                    let prev = p.clone();
                    be[n].solve_transpose(&mut p);
                    for k in 0..len {
                        w[k] = 0.5 * (prev[k] + p[k]);
                    }
                }
            }
            to_component_major(&w, m, nx, chi.slice_mut(n));
            to_component_major(&p, m, nx, psi.slice_mut(n));
        }
        Ok(AdjointSolution { psi, chi })
    }

    /// `|⟨y^N, ψ^N⟩ − ⟨y⁰, ψ⁰⟩ − τ Σₙ ⟨Fₙ, χⁿ⟩|` with `h`-weighted pairings.
    pub fn duality_residual(
        &self,
        y0: &GridFunction,
        source: Option<&Trajectory>,
        psi_t: &GridFunction,
        scheme: AdjointScheme,
    ) -> Result<f64> {
        let y = self.forward(y0, source)?;
        let adj = self.adjoint_with(psi_t, scheme)?;
        let (h, tau, nt) = (self.grid.h, self.grid.tau, self.grid.nt);
        let lhs = h * (dot(y.slice(nt), psi_t.values.as_slice()) - dot(&y0.values, adj.psi.slice(0)));
        let mut rhs = 0.0;
        if let Some(f) = source {
            for n in 0..nt {
                let (a, b, c) = (f.slice(n), f.slice(n + 1), adj.chi.slice(n));
                rhs += a.iter().zip(b).zip(c).map(|((a, b), c)| 0.5 * (a + b) * c).sum::<f64>();
            }
            rhs *= tau * h;
        }
        Ok((lhs - rhs).abs())
    }
}

/// Forward solve convenience wrapper.
pub fn solve_forward(spec: &ProblemSpec, grid: &Grid, y0: &GridFunction, source: Option<&Trajectory>) -> Result<Trajectory> {
    Propagator::new(spec, grid)?.forward(y0, source)
}

/// Adjoint solve convenience wrapper.
pub fn solve_adjoint(spec: &ProblemSpec, grid: &Grid, psi_t: &GridFunction) -> Result<Trajectory> {
    Ok(Propagator::new(spec, grid)?.adjoint(psi_t)?.psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::CoefficientField;
    use crate::model::{CoefficientSet, Interval};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupled_spec() -> ProblemSpec {
        let c = CoefficientSet::identity_diffusion(2)
            .with_d(0, CoefficientField::parse("1 + 0.5*x*t").unwrap())
            .with_g(0, 1, CoefficientField::parse("0.3*sin(x)").unwrap())
            .with_g(1, 0, CoefficientField::constant(0.7))
            .with_a(1, 0, CoefficientField::parse("1 + t").unwrap())
            .with_a(0, 0, CoefficientField::constant(-0.4));
        ProblemSpec::new(Interval::new(0.0, 1.0), 0.3, Interval::new(0.3, 0.7), c)
    }

    fn random_fn(rng: &mut ChaCha8Rng, m: usize, nx: usize) -> GridFunction {
        GridFunction { m, nx, values: (0..m * nx).map(|_| rng.gen_range(-1.0..1.0)).collect() }
    }

    #[test]
    fn zero_data_gives_zero() {
        let spec = coupled_spec();
        let grid = Grid::new(spec.domain, spec.horizon, 20, 10).unwrap();
        let y = solve_forward(&spec, &grid, &GridFunction::zeros(2, 20), None).unwrap();
        assert_eq!(y.max_abs(), 0.0);
        let p = solve_adjoint(&spec, &grid, &GridFunction::zeros(2, 20)).unwrap();
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn transpose_duality_is_exact_and_backward_euler_is_not() {
        let spec = coupled_spec();
        let grid = Grid::new(spec.domain, spec.horizon, 30, 40).unwrap();
        let prop = Propagator::new(&spec, &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y0 = random_fn(&mut rng, 2, 30);
        let pt = random_fn(&mut rng, 2, 30);
        let mut f = Trajectory::zeros(&grid, 2);
        f.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        let exact = prop.duality_residual(&y0, Some(&f), &pt, AdjointScheme::Transpose).unwrap();
        assert!(exact < 1e-12, "{exact}");
        let loose = prop.duality_residual(&y0, Some(&f), &pt, AdjointScheme::BackwardEuler).unwrap();
        assert!(loose > 1e-9 && loose > 1e4 * exact, "{loose}");
    }
}
