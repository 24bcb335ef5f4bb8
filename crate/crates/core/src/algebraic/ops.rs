//! The operators `𝓝`, `𝓛`, `𝓛*`, `𝓜*` and `𝓜`.
//!
//! `𝓛(z, v) = ∂ₜz − ∂ₓ(D∂ₓz) − G∂ₓz − Az − Bv` maps `2m − 1` components
//! to `m`. `op_l_star` keeps the trailing rows `+φ₁ … +φ_{m−1}` of the
//! published adjoint, so it is `diag(I_m, −I_{m−1})` times the formal
//! transpose of `𝓛`, and every `𝓜*` below satisfies `𝓜* ∘ op_l_star = 𝓝*`
//! (or `Id`). The operator acting on controls is therefore
//! `𝓜 = diag(I_m, −I_{m−1}) (𝓜*)ᵀ`, which gives `𝓛 ∘ 𝓜 = 𝓝`.

use std::sync::Arc;

use super::hmatrix::{pm_inverse, HInputs};
use super::operator::{Coef, DiffOperator, OperatorChain, StField, StGrid};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::CoefficientField;
use crate::model::{check_condition_case_i, CoefficientSet, ProblemSpec, SampleOptions, SpaceTimeWindow};

/// `s · ∂ₜᵃ∂ₓᵇ f` as a coefficient.
fn coef(f: &CoefficientField, ot: usize, ox: usize, s: f64) -> Result<Coef> {
    let p = f.partial(ot, ox)?;
    if let Some(c) = p.as_constant() {
        return Ok(Coef::Const(s * c));
    }
    if s == 1.0 {
        return Ok(Coef::Field(p));
    }
    Ok(match p.expr() {
        Some(e) => Coef::Field(CoefficientField::from_expr(Expr::mul(Expr::num(s), e.clone()))),
        None => {
            let label = format!("{s}*{}", p.label());
            Coef::Func(Arc::new(move |t, x| s * p.eval(t, x)), label)
        }
    })
}

fn constant(f: &CoefficientField) -> Result<f64> {
    f.as_constant().ok_or(Error::NotConstant)
}

/// `𝓝f = (−g ∂ₓ − a) f` componentwise, `g = g_{m,i₀}`, `a = a_{m,i₀}`.
pub fn op_n(i0: usize, coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let m = coeffs.m();
    if i0 + 1 >= m {
        return Err(Error::InvalidArgument(format!("i0 = {} out of range 1..{}", i0 + 1, m - 1)));
    }
    let g = constant(coeffs.g(m - 1, i0))?;
    let a = constant(coeffs.a(m - 1, i0))?;
    let mut op = DiffOperator::new(m, m, "N");
    for c in 0..m {
        op.push(-g, 0, 1, c, c);
        op.push(-a, 0, 0, c, c);
    }
    Ok(op)
}

/// `𝓝*f = (g ∂ₓ − a) f` componentwise.
pub fn op_n_star(i0: usize, coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let n = op_n(i0, coeffs)?;
    let m = n.inputs;
    let (g, a) = (constant(coeffs.g(m - 1, i0))?, constant(coeffs.a(m - 1, i0))?);
    let mut op = DiffOperator::new(m, m, "N*");
    for c in 0..m {
        op.push(g, 0, 1, c, c);
        op.push(-a, 0, 0, c, c);
    }
    Ok(op)
}

/// `𝓛(z, v)`: inputs `(z₁..z_m, v₁..v_{m−1})`, non-conservative diffusion form.
pub fn op_l(coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let m = coeffs.m();
    let mut op = DiffOperator::new(2 * m - 1, m, "L");
    for i in 0..m {
        op.push(1.0, 1, 0, i, i);
        op.push(coef(coeffs.d(i), 0, 0, -1.0)?, 0, 2, i, i);
        op.push(coef(coeffs.d(i), 0, 1, -1.0)?, 0, 1, i, i);
        for j in 0..m {
            op.push(coef(coeffs.g(i, j), 0, 0, -1.0)?, 0, 1, j, i);
            op.push(coef(coeffs.a(i, j), 0, 0, -1.0)?, 0, 0, j, i);
        }
        if i + 1 < m {
            op.push(-1.0, 0, 0, m + i, i);
        }
    }
    Ok(op)
}

/// `𝓛*φ`: rows `−∂ₜφᵢ − ∂ₓ(dᵢ∂ₓφᵢ) + Σⱼ (∂ₓ(gⱼᵢφⱼ) − aⱼᵢφⱼ)`, then `φ₁ … φ_{m−1}`.
pub fn op_l_star(coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let m = coeffs.m();
    let mut op = DiffOperator::new(m, 2 * m - 1, "L*");
    for i in 0..m {
        op.push(-1.0, 1, 0, i, i);
        op.push(coef(coeffs.d(i), 0, 0, -1.0)?, 0, 2, i, i);
        op.push(coef(coeffs.d(i), 0, 1, -1.0)?, 0, 1, i, i);
        for j in 0..m {
            op.push(coef(coeffs.g(j, i), 0, 0, 1.0)?, 0, 1, j, i);
            op.push(coef(coeffs.g(j, i), 0, 1, 1.0)?, 0, 0, j, i);
            op.push(coef(coeffs.a(j, i), 0, 0, -1.0)?, 0, 0, j, i);
        }
    }
    for r in 0..m - 1 {
        op.push(1.0, 0, 0, r, m + r);
    }
    Ok(op)
}

/// `𝓜*` for constant coefficients (`2m − 1 → m`).
pub fn build_mstar_thm1(i0: usize, coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let m = coeffs.m();
    op_n(i0, coeffs)?;
    let g = constant(coeffs.g(m - 1, i0))?;
    let a = constant(coeffs.a(m - 1, i0))?;
    let mut op = DiffOperator::new(2 * m - 1, m, "M*");
    for r in 0..m - 1 {
        op.push(g, 0, 1, m + r, r);
        op.push(-a, 0, 0, m + r, r);
    }
    let last = m - 1;
    op.push(1.0, 0, 0, i0, last);
    op.push(1.0, 1, 0, m + i0, last);
    op.push(constant(coeffs.d(i0))?, 0, 2, m + i0, last);
    for j in 0..m - 1 {
        op.push(-constant(coeffs.g(j, i0))?, 0, 1, m + j, last);
        op.push(constant(coeffs.a(j, i0))?, 0, 0, m + j, last);
    }
    Ok(op)
}

/// Closed-form `𝓜` (`m → 2m − 1`): `ẑ_{i₀} = f_m` and
/// `v̂ⱼ = (g∂ₓ + a)fⱼ − (g_{j,i₀}∂ₓ + a_{j,i₀})f_m`, plus `(∂ₜ − d_{i₀}∂ₓₓ)f_m` in row `i₀`.
pub fn build_m_thm1(i0: usize, coeffs: &CoefficientSet) -> Result<DiffOperator> {
    let m = coeffs.m();
    op_n(i0, coeffs)?;
    let g = constant(coeffs.g(m - 1, i0))?;
    let a = constant(coeffs.a(m - 1, i0))?;
    let mut op = DiffOperator::new(m, 2 * m - 1, "M");
    op.push(1.0, 0, 0, m - 1, i0);
    for j in 0..m - 1 {
        let out = m + j;
        op.push(g, 0, 1, j, out);
        op.push(a, 0, 0, j, out);
        op.push(-constant(coeffs.g(j, i0))?, 0, 1, m - 1, out);
        op.push(-constant(coeffs.a(j, i0))?, 0, 0, m - 1, out);
        if j == i0 {
            op.push(1.0, 1, 0, m - 1, out);
            op.push(-constant(coeffs.d(i0))?, 0, 2, m - 1, out);
        }
    }
    Ok(op)
}

fn require_two(coeffs: &CoefficientSet) -> Result<()> {
    if coeffs.m() != 2 {
        return Err(Error::InvalidArgument(format!("the two-equation construction needs m = 2, got {}", coeffs.m())));
    }
    Ok(())
}

/// `𝓡₁ = ∂ₜ + ∂ₓ(d₁∂ₓ·) − ∂ₓ(g₁₁·) + a₁₁` from `input` into `output`.
fn push_r1(op: &mut DiffOperator, c: &CoefficientSet, input: usize, output: usize) -> Result<()> {
    op.push(1.0, 1, 0, input, output);
    op.push(coef(c.d(0), 0, 0, 1.0)?, 0, 2, input, output);
    op.push(coef(c.d(0), 0, 1, 1.0)?, 0, 1, input, output);
    op.push(coef(c.g(0, 0), 0, 0, -1.0)?, 0, 1, input, output);
    op.push(coef(c.g(0, 0), 0, 1, -1.0)?, 0, 0, input, output);
    op.push(coef(c.a(0, 0), 0, 0, 1.0)?, 0, 0, input, output);
    Ok(())
}

/// `𝓜*ψ = (ψ₃, −(ψ₁ + 𝓡₁ψ₃)/a₂₁)` on `window`; the `1/a₂₁` factor is zero outside it.
pub fn build_mstar_case_i(spec: &ProblemSpec, window: &SpaceTimeWindow, opts: SampleOptions) -> Result<OperatorChain> {
    let c = &spec.coefficients;
    require_two(c)?;
    if !check_condition_case_i(spec, window, opts)? {
        return Err(Error::ConditionUnsatisfied(
            "case (i) needs g21 = 0 and |a21| bounded below on the window".into(),
        ));
    }
    let mut first = DiffOperator::new(3, 2, "M* (i) stage 1");
    first.push(1.0, 0, 0, 2, 0);
    first.push(1.0, 0, 0, 0, 1);
    push_r1(&mut first, c, 2, 1)?;
    let a21 = c.a(1, 0).clone();
    let (w, tol) = (*window, opts.tol_pos);
    let inv = move |t: f64, x: f64| {
        let v = a21.eval(t, x);
        if w.contains(t, x) && v.abs() >= tol {
            -1.0 / v
        } else {
            0.0
        }
    };
    let second = DiffOperator::new(2, 2, "M* (i) stage 2")
        .with(1.0, 0, 0, 0, 0)
        .with(Coef::Func(Arc::new(inv), "-1/a21 on window".into()), 0, 0, 1, 1);
    OperatorChain::new(vec![first, second])
}

/// `𝓢` as two stages, `3 → 5 → 7`.
pub fn build_s(coeffs: &CoefficientSet) -> Result<OperatorChain> {
    require_two(coeffs)?;
    let mut first = DiffOperator::new(3, 5, "S stage 1");
    for k in 0..3 {
        first.push(1.0, 0, 0, k, k);
    }
    push_r1(&mut first, coeffs, 2, 3)?;
    // 𝓡₂ = a₁₂ − ∂ₓ(g₁₂·)
    first.push(coef(coeffs.a(0, 1), 0, 0, 1.0)?, 0, 0, 2, 4);
    first.push(coef(coeffs.g(0, 1), 0, 1, -1.0)?, 0, 0, 2, 4);
    first.push(coef(coeffs.g(0, 1), 0, 0, -1.0)?, 0, 1, 2, 4);
    let mut second = DiffOperator::new(5, 7, "S stage 2");
    second.push(1.0, 0, 0, 2, 0);
    for (out, ot, ox) in [(1, 0, 0), (2, 0, 1), (3, 1, 0), (4, 0, 2)] {
        second.push(1.0, ot, ox, 0, out);
        second.push(1.0, ot, ox, 3, out);
    }
    for (out, ox) in [(5, 0), (6, 1)] {
        second.push(1.0, 0, ox, 1, out);
        second.push(1.0, 0, ox, 4, out);
    }
    OperatorChain::new(vec![first, second])
}

/// `𝓠 = 𝓢 ∘ 𝓛*` (`2 → 7`).
pub fn build_q(coeffs: &CoefficientSet) -> Result<OperatorChain> {
    let mut stages = vec![op_l_star(coeffs)?];
    stages.extend(build_s(coeffs)?.stages);
    OperatorChain::new(stages)
}

/// `𝓜* = P M⁻¹ 𝓢` with `P M⁻¹` sampled at every node of `grid` inside `window`.
pub fn build_mstar_case_ii(spec: &ProblemSpec, window: &SpaceTimeWindow, grid: &StGrid) -> Result<OperatorChain> {
    let c = &spec.coefficients;
    require_two(c)?;
    let nodes = grid.len();
    let cols = grid.cols();
    let rows = crate::par::map_range(nodes, |k| -> Result<[f64; 14]> {
        let (t, x) = (grid.t(k / cols), grid.x(k % cols));
        if !window.contains(t, x) {
            return Ok([0.0; 14]);
        }
        pm_inverse(&HInputs::at(c, t, x)?)
            .map_err(|e| Error::Singular(format!("M at (t, x) = ({t:.6}, {x:.6}): {e}")))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut third = DiffOperator::new(7, 2, "P M^-1");
    for r in 0..2 {
        for k in 0..7 {
            let v: Vec<f64> = rows.iter().map(|p| p[r * 7 + k]).collect();
            if v.iter().any(|&x| x != 0.0) {
                third.push(Coef::Sampled(Arc::new(v), format!("(PM^-1)[{},{}]", r + 1, k + 1)), 0, 0, k, r);
            }
        }
    }
    let mut stages = build_s(c)?.stages;
    stages.push(third);
    OperatorChain::new(stages)
}

/// The operator eliminating the extra control.
#[derive(Clone, Debug)]
pub enum MOperator {
    /// Constant coefficients, `𝓛 ∘ 𝓜 = 𝓝`.
    Theorem1 { i0: usize, mstar: DiffOperator, m: DiffOperator },
    /// Two equations, `𝓛 ∘ 𝓜 = Id`.
    Theorem2(OperatorChain),
}

impl MOperator {
    pub fn theorem1(i0: usize, coeffs: &CoefficientSet) -> Result<Self> {
        Ok(MOperator::Theorem1 { i0, mstar: build_mstar_thm1(i0, coeffs)?, m: build_m_thm1(i0, coeffs)? })
    }

    pub fn case_i(spec: &ProblemSpec, window: &SpaceTimeWindow, opts: SampleOptions) -> Result<Self> {
        Ok(MOperator::Theorem2(build_mstar_case_i(spec, window, opts)?))
    }

    pub fn case_ii(spec: &ProblemSpec, window: &SpaceTimeWindow, grid: &StGrid) -> Result<Self> {
        Ok(MOperator::Theorem2(build_mstar_case_ii(spec, window, grid)?))
    }

    /// Equation count `m`.
    pub fn equations(&self) -> usize {
        match self {
            MOperator::Theorem1 { mstar, .. } => mstar.outputs,
            MOperator::Theorem2(ch) => ch.outputs(),
        }
    }

    pub fn apply_mstar(&self, psi: &StField) -> Result<StField> {
        match self {
            MOperator::Theorem1 { mstar, .. } => mstar.apply(psi),
            MOperator::Theorem2(ch) => ch.apply(psi),
        }
    }

    /// `(ẑ, v̂) = 𝓜 f`.
    pub fn apply_m(&self, f: &StField) -> Result<(StField, StField)> {
        let m = self.equations();
        let out = match self {
            MOperator::Theorem1 { m: op, .. } => op.apply(f)?,
            MOperator::Theorem2(ch) => {
                let mut o = ch.apply_adjoint(f)?;
                for c in m..2 * m - 1 {
                    o.scale_component(c, -1.0);
                }
                o
            }
        };
        Ok((out.split(0, m), out.split(m, m - 1)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interval;

    fn thm1_coeffs() -> CoefficientSet {
        CoefficientSet::identity_diffusion(3)
            .with_a(2, 0, CoefficientField::constant(1.0))
            .with_g(2, 0, CoefficientField::constant(0.5))
            .with_g(0, 0, CoefficientField::constant(0.3))
            .with_a(1, 0, CoefficientField::constant(-0.7))
            .with_d(0, CoefficientField::constant(1.4))
    }

    #[test]
    fn n_on_zero_order_case() {
        let c = CoefficientSet::identity_diffusion(2).with_a(1, 0, CoefficientField::constant(1.0));
        let n = op_n(0, &c).unwrap();
        let out = n.apply_expr(&[Expr::parse("sin(x)").unwrap(), Expr::x()]).unwrap();
        assert!((out[0].eval(0.0, 0.4) + 0.4f64.sin()).abs() < 1e-15);
        assert!(op_n(1, &c).is_err());
    }

    #[test]
    fn symbolic_mstar_lstar_is_nstar() {
        let c = thm1_coeffs();
        let phi: Vec<Expr> = ["sin(x)*t", "x^3 + t^2", "exp(x*t)"].iter().map(|s| Expr::parse(s).unwrap()).collect();
        let ls = op_l_star(&c).unwrap().apply_expr(&phi).unwrap();
        let lhs = build_mstar_thm1(0, &c).unwrap().apply_expr(&ls).unwrap();
        let rhs = op_n_star(0, &c).unwrap().apply_expr(&phi).unwrap();
        for k in 0..3 {
            for (t, x) in [(0.1, 0.2), (0.7, -0.3)] {
                assert!((lhs[k].eval(t, x) - rhs[k].eval(t, x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symbolic_lm_is_n() {
        let c = thm1_coeffs();
        let f: Vec<Expr> = ["sin(x)*t", "x^3 + t^2", "exp(x*t)"].iter().map(|s| Expr::parse(s).unwrap()).collect();
        let mf = build_m_thm1(0, &c).unwrap().apply_expr(&f).unwrap();
        let lhs = op_l(&c).unwrap().apply_expr(&mf).unwrap();
        let rhs = op_n(0, &c).unwrap().apply_expr(&f).unwrap();
        for k in 0..3 {
            for (t, x) in [(0.1, 0.2), (0.7, -0.3)] {
                assert!((lhs[k].eval(t, x) - rhs[k].eval(t, x)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn closed_form_m_is_signed_transpose() {
        let c = thm1_coeffs();
        let op = MOperator::theorem1(0, &c).unwrap();
        let MOperator::Theorem1 { mstar, m, .. } = &op else { unreachable!() };
        let g = StGrid { nt: 8, nx: 9, tau: 0.1, h: 0.1, t0: 0.0, x0: 0.0 };
        let f = StField::from_fn(&g, 3, |c, t, x| ((c + 1) as f64 * x + t).sin());
        let direct = m.apply(&f).unwrap();
        let mut via = mstar.apply_adjoint(&f).unwrap();
        for k in 3..5 {
            via.scale_component(k, -1.0);
        }
        assert!(direct.minus(&via).max_abs() < 1e-10);
    }

    #[test]
    fn case_i_substitution() {
        let c = CoefficientSet::identity_diffusion(2).with_a(1, 0, CoefficientField::constant(1.0));
        let spec = ProblemSpec::new(Interval::new(0.0, 1.0), 1.0, Interval::new(0.2, 0.8), c);
        let w = SpaceTimeWindow::new(Interval::new(0.0, 1.0), Interval::new(0.2, 0.8));
        let ch = build_mstar_case_i(&spec, &w, SampleOptions::default()).unwrap();
        let psi: Vec<Expr> = ["x^2*t", "3", "t^2*x^3"].iter().map(|s| Expr::parse(s).unwrap()).collect();
        let g = StGrid { nt: 10, nx: 9, tau: 0.1, h: 0.1, t0: 0.0, x0: 0.0 };
        let out = ch.apply(&StField::from_exprs(&g, &psi)).unwrap();
        let (n, i) = (5, 5);
        let (t, x) = (g.t(n), g.x(i));
        assert!((out.get(0, n, i) - t * t * x * x * x).abs() < 1e-12);
        let want = -(x * x * t + 2.0 * t * x * x * x + 6.0 * t * t * x);
        assert!((out.get(1, n, i) - want).abs() < 1e-10);
    }

    #[test]
    fn case_ii_q_matches_m_times_jet() {
        let c = CoefficientSet::identity_diffusion(2)
            .with_g(1, 0, CoefficientField::parse("2 + 0.3*sin(x)*t").unwrap())
            .with_a(1, 0, CoefficientField::parse("0.5*x*t").unwrap())
            .with_a(1, 1, CoefficientField::parse("x + 0.2*t").unwrap())
            .with_g(1, 1, CoefficientField::parse("0.4*cos(x)").unwrap())
            .with_d(1, CoefficientField::parse("1 + 0.1*x^2").unwrap())
            .with_d(0, CoefficientField::parse("1 + 0.2*x").unwrap())
            .with_g(0, 1, CoefficientField::parse("0.3*x").unwrap());
        let phi: Vec<Expr> = ["sin(2*x)*t", "exp(x)*cos(t)"].iter().map(|s| Expr::parse(s).unwrap()).collect();
        let q = build_q(&c).unwrap().apply_expr(&phi).unwrap();
        let p2 = &phi[1];
        let jet = [phi[0].clone(), p2.clone(), p2.partial(0, 1), p2.partial(1, 0), p2.partial(0, 2), p2.partial(1, 1), p2.partial(0, 3)];
        for (t, x) in [(0.3, 0.4), (0.8, -0.2)] {
            let m = super::super::hmatrix::build_m(&HInputs::at(&c, t, x).unwrap());
            for r in 0..7 {
                let want: f64 = (0..7).map(|k| m[r][k] * jet[k].eval(t, x)).sum();
                assert!((q[r].eval(t, x) - want).abs() < 1e-10 * want.abs().max(1.0), "row {r}");
            }
        }
    }
}
