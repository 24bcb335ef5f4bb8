//! Linear differential operators with stencil application.
//!
//! A `DiffOperator` is a finite sum of terms `c(t,x) ∂ₜᵃ∂ₓᵇ u_in → out`.
//! Application uses centered stencils on a space-time node grid with zero
//! extension past its edges:
//!
//! | order | x stencil                                   | t stencil          |
//! |-------|---------------------------------------------|--------------------|
//! | 1     | `(u₊₁ − u₋₁)/2h`                            | `(u⁺ − u⁻)/2τ`     |
//! | 2     | `(u₊₁ − 2u + u₋₁)/h²`                       | `(u⁺ − 2u + u⁻)/τ²`|
//! | 3     | `(−u₋₂ + 2u₋₁ − 2u₊₁ + u₊₂)/2h³`            |                    |
//! | 4     | `(u₋₂ − 4u₋₁ + 6u − 4u₊₁ + u₊₂)/h⁴`         |                    |
//!
//! Odd stencils are antisymmetric and even ones symmetric, so
//! `apply_adjoint` (`Σ (−1)^{a+b} ∂ₜᵃ∂ₓᵇ(c·v)`) is the exact transpose of
//! `apply` for the plain node-sum pairing.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{CoefficientField, ScalarFn};
use crate::grid::{Grid, Trajectory};
use crate::model::Interval;

/// Node grid `t₀ + nτ` (`n ∈ 0..=nt`) × `x₀ + ih` (`i ∈ 0..=nx+1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StGrid {
    pub nt: usize,
    pub nx: usize,
    pub tau: f64,
    pub h: f64,
    pub t0: f64,
    pub x0: f64,
}

impl StGrid {
    /// All nodes of a solver grid, boundary columns included.
    pub fn from_grid(g: &Grid) -> Self {
        StGrid { nt: g.nt, nx: g.nx, tau: g.tau, h: g.h, t0: 0.0, x0: g.x_lo }
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.tau
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.h
    }

    pub fn cols(&self) -> usize {
        self.nx + 2
    }

    pub fn len(&self) -> usize {
        (self.nt + 1) * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// `m` scalar fields on an `StGrid`, stored `[component][n][i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StField {
    pub grid: StGrid,
    pub m: usize,
    data: Vec<f64>,
}

impl StField {
    pub fn zeros(grid: &StGrid, m: usize) -> Self {
        StField { grid: *grid, m, data: vec![0.0; m * grid.len()] }
    }

    pub fn from_fn(grid: &StGrid, m: usize, f: impl Fn(usize, f64, f64) -> f64 + Sync) -> Self {
        let mut out = Self::zeros(grid, m);
        let cols = grid.cols();
        let g = *grid;
        crate::par::for_each_chunk_mut(&mut out.data, cols, |k, row| {
            let (c, n) = (k / (g.nt + 1), k % (g.nt + 1));
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(c, g.t(n), g.x(i));
            }
        });
        out
    }

    /// Sample expressions, one per component.
    pub fn from_exprs(grid: &StGrid, exprs: &[Expr]) -> Self {
        Self::from_fn(grid, exprs.len(), |c, t, x| exprs[c].eval(t, x))
    }

    /// Embed a trajectory; boundary columns are zero.
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let grid = StGrid::from_grid(&traj.grid);
        let mut out = Self::zeros(&grid, traj.m);
        for c in 0..traj.m {
            for n in 0..=grid.nt {
                for i in 1..=grid.nx {
                    out.set(c, n, i, traj.get(n, c, i));
                }
            }
        }
        out
    }

    /// Interior columns of components `first..first+count` as a trajectory.
    pub fn to_trajectory(&self, grid: &Grid, first: usize, count: usize) -> Trajectory {
        let mut out = Trajectory::zeros(grid, count);
        for c in 0..count {
            for n in 0..=grid.nt {
                for i in 1..=grid.nx {
                    out.set(n, c, i, self.get(first + c, n, i));
                }
            }
        }
        out
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let l = self.grid.len();
        &self.data[c * l..(c + 1) * l]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let l = self.grid.len();
        &mut self.data[c * l..(c + 1) * l]
    }

    pub fn get(&self, c: usize, n: usize, i: usize) -> f64 {
        self.data[c * self.grid.len() + n * self.grid.cols() + i]
    }

    pub fn set(&mut self, c: usize, n: usize, i: usize, v: f64) {
        let k = c * self.grid.len() + n * self.grid.cols() + i;
        self.data[k] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Components `first..first+count`.
    pub fn split(&self, first: usize, count: usize) -> StField {
        let l = self.grid.len();
        StField { grid: self.grid, m: count, data: self.data[first * l..(first + count) * l].to_vec() }
    }

    /// Concatenate components.
    pub fn stack(parts: &[&StField]) -> StField {
        let grid = parts[0].grid;
        let mut data = Vec::new();
        for p in parts {
            assert_eq!(p.grid, grid, "stacked fields must share a grid");
            data.extend_from_slice(&p.data);
        }
        StField { grid, m: parts.iter().map(|p| p.m).sum(), data }
    }

    pub fn minus(&self, other: &StField) -> StField {
        assert_eq!((self.grid, self.m), (other.grid, other.m));
        StField { grid: self.grid, m: self.m, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    pub fn scale_component(&mut self, c: usize, s: f64) {
        self.component_mut(c).iter_mut().for_each(|v| *v *= s);
    }

    /// `Σ` over all nodes and components of `self · other` (no quadrature weights).
    pub fn node_dot(&self, other: &StField) -> f64 {
        crate::grid::dot(&self.data, &other.data)
    }

    /// Max `|value|` over nodes with `t ∈ tw`, `x ∈ xw` (closed), all components.
    pub fn max_abs_in(&self, tw: Interval, xw: Interval) -> f64 {
        let g = self.grid;
        let mut best = 0.0f64;
        for c in 0..self.m {
            for n in 0..=g.nt {
                let t = g.t(n);
                if t < tw.lo || t > tw.hi {
                    continue;
                }
                for i in 0..g.cols() {
                    let x = g.x(i);
                    if x >= xw.lo && x <= xw.hi {
                        best = best.max(self.get(c, n, i).abs());
                    }
                }
            }
        }
        best
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Coefficient of one term.
#[derive(Clone)]
pub enum Coef {
    Const(f64),
    Field(CoefficientField),
    Func(ScalarFn, String),
    /// Node values on one specific `StGrid`.
    Sampled(Arc<Vec<f64>>, String),
}

impl Coef {
    /// Structurally constant fields collapse to `Const`.
    pub fn field(f: CoefficientField) -> Coef {
        match f.as_constant() {
            Some(c) => Coef::Const(c),
            None => Coef::Field(f),
        }
    }

    /// `∂ₜᵃ∂ₓᵇ f` as a coefficient.
    pub fn partial(f: &CoefficientField, ot: usize, ox: usize) -> Result<Coef> {
        Ok(Coef::field(f.partial(ot, ox)?))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coef::Const(c) if *c == 0.0)
    }

    pub fn label(&self) -> String {
        match self {
            Coef::Const(c) => format!("{c}"),
            Coef::Field(f) => f.to_string(),
            Coef::Func(_, l) | Coef::Sampled(_, l) => l.clone(),
        }
    }

    fn expr(&self) -> Result<Expr> {
        match self {
            Coef::Const(c) => Ok(Expr::num(*c)),
            Coef::Field(f) => f
                .expr()
                .cloned()
                .ok_or_else(|| Error::InvalidArgument(format!("coefficient `{}` has no symbolic form", f.label()))),
            Coef::Func(_, l) | Coef::Sampled(_, l) => {
                Err(Error::InvalidArgument(format!("coefficient `{l}` has no symbolic form")))
            }
        }
    }

    fn sample(&self, g: &StGrid) -> Result<Sample> {
        let node_fn = |f: &(dyn Fn(f64, f64) -> f64 + Sync)| -> Vec<f64> {
            let cols = g.cols();
            let mut v = vec![0.0; g.len()];
            crate::par::for_each_chunk_mut(&mut v, cols, |n, row| {
                for (i, c) in row.iter_mut().enumerate() {
                    *c = f(g.t(n), g.x(i));
                }
            });
            v
        };
        Ok(match self {
            Coef::Const(c) => Sample::Const(*c),
            Coef::Field(f) => Sample::Nodes(Arc::new(node_fn(&|t, x| f.eval(t, x)))),
            Coef::Func(f, _) => Sample::Nodes(Arc::new(node_fn(&|t, x| f(t, x)))),
            Coef::Sampled(v, l) => {
                if v.len() != g.len() {
                    return Err(Error::InvalidArgument(format!("sampled coefficient `{l}` belongs to another grid")));
                }
                Sample::Nodes(v.clone())
            }
        })
    }
}

impl fmt::Debug for Coef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coef({})", self.label())
    }
}

impl From<f64> for Coef {
    fn from(c: f64) -> Self {
        Coef::Const(c)
    }
}

enum Sample {
    Const(f64),
    Nodes(Arc<Vec<f64>>),
}

impl Sample {
    fn at(&self, k: usize) -> f64 {
        match self {
            Sample::Const(c) => *c,
            Sample::Nodes(v) => v[k],
        }
    }
}

/// `coef · ∂ₜ^t_order ∂ₓ^x_order u[input]`, accumulated into `output`.
#[derive(Clone, Debug)]
pub struct Term {
    pub coef: Coef,
    pub t_order: usize,
    pub x_order: usize,
    pub input: usize,
    pub output: usize,
}

/// Finite sum of terms mapping `inputs` components to `outputs` components.
#[derive(Clone, Debug)]
pub struct DiffOperator {
    pub inputs: usize,
    pub outputs: usize,
    pub terms: Vec<Term>,
    pub label: String,
}

pub const MAX_T_ORDER: usize = 2;
pub const MAX_X_ORDER: usize = 4;

impl DiffOperator {
    pub fn new(inputs: usize, outputs: usize, label: &str) -> Self {
        DiffOperator { inputs, outputs, terms: Vec::new(), label: label.to_string() }
    }

    /// Add a term; zero constants are dropped.
    pub fn push(&mut self, coef: impl Into<Coef>, t_order: usize, x_order: usize, input: usize, output: usize) {
        assert!(input < self.inputs && output < self.outputs, "term index out of range");
        let coef = coef.into();
        if !coef.is_zero() {
            self.terms.push(Term { coef, t_order, x_order, input, output });
        }
    }

    pub fn with(mut self, coef: impl Into<Coef>, t_order: usize, x_order: usize, input: usize, output: usize) -> Self {
        self.push(coef, t_order, x_order, input, output);
        self
    }

    /// Highest `(t, x)` orders present.
    pub fn max_orders(&self) -> (usize, usize) {
        self.terms.iter().fold((0, 0), |(a, b), t| (a.max(t.t_order), b.max(t.x_order)))
    }

    fn check(&self) -> Result<()> {
        for t in &self.terms {
            if t.t_order > MAX_T_ORDER || t.x_order > MAX_X_ORDER {
                return Err(Error::UnsupportedOrder { t: t.t_order, x: t.x_order });
            }
        }
        Ok(())
    }

    /// Stencil application.
    pub fn apply(&self, u: &StField) -> Result<StField> {
        self.check()?;
        if u.m != self.inputs {
            return Err(Error::InvalidArgument(format!("{} expects {} inputs, got {}", self.label, self.inputs, u.m)));
        }
        let g = u.grid;
        let mut out = StField::zeros(&g, self.outputs);
        let mut cache: HashMap<(usize, usize, usize), Vec<f64>> = HashMap::new();
        for term in &self.terms {
            let key = (term.input, term.t_order, term.x_order);
            cache.entry(key).or_insert_with(|| {
                let d = derivative(u.component(term.input), &g, term.t_order, term.x_order);
                d
            });
            let d = &cache[&key];
            let c = term.coef.sample(&g)?;
            let dst = out.component_mut(term.output);
            for (k, v) in dst.iter_mut().enumerate() {
                *v += c.at(k) * d[k];
            }
        }
        Ok(out)
    }

    /// Exact transpose of `apply`.
    pub fn apply_adjoint(&self, v: &StField) -> Result<StField> {
        self.check()?;
        if v.m != self.outputs {
            return Err(Error::InvalidArgument(format!(
                "adjoint of {} expects {} inputs, got {}",
                self.label, self.outputs, v.m
            )));
        }
        let g = v.grid;
        let mut out = StField::zeros(&g, self.inputs);
        let mut weighted = vec![0.0; g.len()];
        for term in &self.terms {
            let c = term.coef.sample(&g)?;
            let src = v.component(term.output);
            for (k, w) in weighted.iter_mut().enumerate() {
                *w = c.at(k) * src[k];
            }
            let d = derivative(&weighted, &g, term.t_order, term.x_order);
            let sign = if (term.t_order + term.x_order) % 2 == 0 { 1.0 } else { -1.0 };
            let dst = out.component_mut(term.input);
            for (k, v) in dst.iter_mut().enumerate() {
                *v += sign * d[k];
            }
        }
        Ok(out)
    }

    /// Exact symbolic application; fails on non-symbolic coefficients.
    pub fn apply_expr(&self, u: &[Expr]) -> Result<Vec<Expr>> {
        if u.len() != self.inputs {
            return Err(Error::InvalidArgument(format!("{} expects {} inputs, got {}", self.label, self.inputs, u.len())));
        }
        let mut out = vec![Expr::num(0.0); self.outputs];
        for term in &self.terms {
            let d = u[term.input].partial(term.t_order, term.x_order);
            let piece = Expr::mul(term.coef.expr()?, d);
            out[term.output] = Expr::add(out[term.output].clone(), piece);
        }
        Ok(out)
    }

    /// One line per term, grouped by output.
    pub fn report(&self) -> String {
        let mut s = format!("{} ({} -> {})\n", self.label, self.inputs, self.outputs);
        for o in 0..self.outputs {
            for t in self.terms.iter().filter(|t| t.output == o) {
                s.push_str(&format!(
                    "  out[{}] += ({}) * dt^{} dx^{} in[{}]\n",
                    o + 1,
                    t.coef.label(),
                    t.t_order,
                    t.x_order,
                    t.input + 1
                ));
            }
        }
        s
    }
}

impl fmt::Display for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}

/// Composition `stages[k−1] ∘ … ∘ stages[0]`.
#[derive(Clone, Debug)]
pub struct OperatorChain {
    pub stages: Vec<DiffOperator>,
}

impl OperatorChain {
    pub fn new(stages: Vec<DiffOperator>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidArgument("empty operator chain".into()));
        }
        for w in stages.windows(2) {
            if w[0].outputs != w[1].inputs {
                return Err(Error::InvalidArgument(format!(
                    "chain arity mismatch: {} -> {} then {} -> {}",
                    w[0].inputs, w[0].outputs, w[1].inputs, w[1].outputs
                )));
            }
        }
        Ok(OperatorChain { stages })
    }

    pub fn inputs(&self) -> usize {
        self.stages[0].inputs
    }

    pub fn outputs(&self) -> usize {
        self.stages[self.stages.len() - 1].outputs
    }

    pub fn apply(&self, u: &StField) -> Result<StField> {
        let mut cur = self.stages[0].apply(u)?;
        for s in &self.stages[1..] {
            cur = s.apply(&cur)?;
        }
        Ok(cur)
    }

    pub fn apply_adjoint(&self, v: &StField) -> Result<StField> {
        let last = self.stages.len() - 1;
        let mut cur = self.stages[last].apply_adjoint(v)?;
        for s in self.stages[..last].iter().rev() {
            cur = s.apply_adjoint(&cur)?;
        }
        Ok(cur)
    }

    pub fn apply_expr(&self, u: &[Expr]) -> Result<Vec<Expr>> {
        let mut cur = u.to_vec();
        for s in &self.stages {
            cur = s.apply_expr(&cur)?;
        }
        Ok(cur)
    }

    pub fn report(&self) -> String {
        self.stages.iter().enumerate().map(|(k, s)| format!("stage {}: {}", k + 1, s.report())).collect()
    }
}

#[inline]
fn at(row: &[f64], i: isize) -> f64 {
    if i < 0 {
        0.0
    } else {
        row.get(i as usize).copied().unwrap_or(0.0)
    }
}

fn x_derivative(row: &[f64], out: &mut [f64], order: usize, h: f64) {
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let u = |k: isize| at(row, i + k);
        *o = match order {
            0 => u(0),
            1 => (u(1) - u(-1)) / (2.0 * h),
            2 => (u(1) - 2.0 * u(0) + u(-1)) / (h * h),
            3 => (-u(-2) + 2.0 * u(-1) - 2.0 * u(1) + u(2)) / (2.0 * h * h * h),
            4 => (u(-2) - 4.0 * u(-1) + 6.0 * u(0) - 4.0 * u(1) + u(2)) / (h * h * h * h),
            _ => unreachable!("orders are checked before application"),
        };
    }
}

/// `∂ₜᵃ∂ₓᵇ` of one node field with zero extension.
pub(crate) fn derivative(src: &[f64], g: &StGrid, ot: usize, ox: usize) -> Vec<f64> {
    let cols = g.cols();
    let mut dx = vec![0.0; g.len()];
    if ox == 0 {
        dx.copy_from_slice(src);
    } else {
        crate::par::for_each_chunk_mut(&mut dx, cols, |n, row| {
            x_derivative(&src[n * cols..(n + 1) * cols], row, ox, g.h);
        });
    }
    if ot == 0 {
        return dx;
    }
    let rows = g.nt + 1;
    let tau = g.tau;
    let mut out = vec![0.0; g.len()];
    let zero = vec![0.0; cols];
    let row = |n: isize| -> &[f64] {
        if n < 0 || n as usize >= rows {
            &zero
        } else {
            &dx[n as usize * cols..(n as usize + 1) * cols]
        }
    };
    crate::par::for_each_chunk_mut(&mut out, cols, |n, o| {
        let n = n as isize;
        let (a, b, c) = (row(n - 1), row(n), row(n + 1));
        for i in 0..cols {
            o[i] = match ot {
                1 => (c[i] - a[i]) / (2.0 * tau),
                2 => (c[i] - 2.0 * b[i] + a[i]) / (tau * tau),
                _ => unreachable!("orders are checked before application"),
            };
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> StGrid {
        StGrid { nt: 12, nx: 9, tau: 0.05, h: 0.1, t0: 0.0, x0: 0.0 }
    }

    fn random_field(g: &StGrid, m: usize, seed: u64) -> StField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = StField::zeros(g, m);
        f.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        f
    }

    fn sample_op() -> DiffOperator {
        let c = CoefficientField::parse("1 + x*t").unwrap();
        let mut op = DiffOperator::new(2, 2, "sample");
        for (ot, ox) in [(0, 0), (1, 0), (2, 0), (0, 1), (0, 2), (0, 3), (0, 4), (1, 1), (1, 2), (2, 4)] {
            op.push(Coef::field(c.clone()), ot, ox, (ot + ox) % 2, ox % 2);
        }
        op.push(Coef::Func(Arc::new(|t, x| (t - x).sin()), "sin(t-x)".into()), 1, 3, 1, 0);
        op
    }

    #[test]
    fn adjoint_is_exact_transpose() {
        let g = grid();
        let op = sample_op();
        let u = random_field(&g, 2, 1);
        let v = random_field(&g, 2, 2);
        let lhs = op.apply(&u).unwrap().node_dot(&v);
        let rhs = u.node_dot(&op.apply_adjoint(&v).unwrap());
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn stencils_are_exact_on_polynomials() {
        let g = StGrid { nt: 10, nx: 10, tau: 0.1, h: 0.1, t0: 0.0, x0: 0.0 };
        let cases = [
            ("x^2*t + 3*x - t^2", 0, 1),
            ("x^2*t + 3*x - t^2", 1, 0),
            ("x^2*t + 3*x - t^2", 2, 0),
            ("x^3 - 2*x^2*t + t^2*x", 0, 2),
            ("x^3 - 2*x^2*t + t^2*x", 1, 2),
            ("x^4 - x^2*t", 0, 3),
            ("x^5 - 2*x^3*t", 0, 4),
        ];
        for (src, ot, ox) in cases {
            let p = Expr::parse(src).unwrap();
            let u = StField::from_exprs(&g, std::slice::from_ref(&p));
            let d = DiffOperator::new(1, 1, "d").with(1.0, ot, ox, 0, 0).apply(&u).unwrap();
            let exact = p.partial(ot, ox);
            for n in 2..=8 {
                for i in 2..=9 {
                    let want = exact.eval(g.t(n), g.x(i));
                    assert!((d.get(0, n, i) - want).abs() < 1e-8, "{src}: order ({ot},{ox})");
                }
            }
        }
    }

    #[test]
    fn linearity_and_zero() {
        let g = grid();
        let op = sample_op();
        let z = StField::zeros(&g, 2);
        assert_eq!(op.apply(&z).unwrap().max_abs(), 0.0);
        let (u, v) = (random_field(&g, 2, 3), random_field(&g, 2, 4));
        let mut w = u.clone();
        w.values_mut().iter_mut().zip(v.values()).for_each(|(a, b)| *a = 2.0 * *a - 3.0 * b);
        let lhs = op.apply(&w).unwrap();
        let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
        for k in 0..lhs.values().len() {
            let want = 2.0 * au.values()[k] - 3.0 * av.values()[k];
            assert!((lhs.values()[k] - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        let g = grid();
        let op = DiffOperator::new(1, 1, "d").with(1.0, 3, 0, 0, 0);
        assert!(matches!(op.apply(&StField::zeros(&g, 1)), Err(Error::UnsupportedOrder { .. })));
        let op = DiffOperator::new(1, 1, "d").with(1.0, 0, 5, 0, 0);
        assert!(op.apply_adjoint(&StField::zeros(&g, 1)).is_err());
    }

    #[test]
    fn symbolic_application() {
        let op = DiffOperator::new(1, 1, "d")
            .with(Coef::field(CoefficientField::parse("x").unwrap()), 0, 1, 0, 0)
            .with(2.0, 1, 0, 0, 0);
        let out = op.apply_expr(&[Expr::parse("x^2*t").unwrap()]).unwrap();
        assert!((out[0].eval(0.5, 3.0) - (3.0 * 2.0 * 3.0 * 0.5 + 2.0 * 9.0)).abs() < 1e-12);
        let bad = DiffOperator::new(1, 1, "d").with(Coef::Func(Arc::new(|_, _| 1.0), "one".into()), 0, 0, 0, 0);
        assert!(bad.apply_expr(&[Expr::x()]).is_err());
    }

    #[test]
    fn chain_adjoint_matches_transpose() {
        let g = grid();
        let a = DiffOperator::new(2, 3, "a").with(1.0, 0, 1, 0, 0).with(2.0, 1, 0, 1, 2).with(-1.0, 0, 2, 0, 1);
        let b = DiffOperator::new(3, 1, "b").with(1.0, 1, 1, 0, 0).with(0.5, 0, 0, 1, 0).with(1.0, 0, 3, 2, 0);
        let ch = OperatorChain::new(vec![a, b]).unwrap();
        let u = random_field(&g, 2, 7);
        let v = random_field(&g, 1, 8);
        let lhs = ch.apply(&u).unwrap().node_dot(&v);
        let rhs = u.node_dot(&ch.apply_adjoint(&v).unwrap());
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0));
        assert!(OperatorChain::new(vec![DiffOperator::new(1, 2, "x"), DiffOperator::new(3, 1, "y")]).is_err());
    }
}
