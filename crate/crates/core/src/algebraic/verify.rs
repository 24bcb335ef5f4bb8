//! Refinement studies for `𝓛 ∘ 𝓜 = 𝓝` and `𝓜* ∘ 𝓛* = Id`.
//!
//! The inner operator is applied exactly (symbolically) and the outer one by
//! stencils, so the residual is the truncation error of the outer stencils
//! and vanishes on low-degree polynomials. The fully discrete composition is
//! reported alongside.

use serde::Serialize;

use super::operator::{StField, StGrid};
use super::ops::{build_m_thm1, op_l, op_l_star, op_n, MOperator};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{Interval, ProblemSpec, SpaceTimeWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum IdentityKind {
    /// `𝓛 ∘ 𝓜 = 𝓝`.
    LmEqualsN,
    /// `𝓜* ∘ 𝓛* = Id`.
    MstarLstarIsId,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResidual {
    pub nx: usize,
    pub nt: usize,
    pub h: f64,
    pub tau: f64,
    /// Max residual over the measurement window and all samples.
    pub residual: f64,
    /// `residual` divided by the max of the reference values.
    pub relative: f64,
    /// Residual of the fully discrete composition.
    pub discrete_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub kind: IdentityKind,
    pub levels: Vec<LevelResidual>,
    /// Least-squares slope of `log residual` against `log h`.
    pub order: Option<f64>,
}

/// Slope of `log r` vs `log h` over levels with `r > 0`.
pub fn fit_order(hs: &[f64], rs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = hs.iter().zip(rs).filter(|(_, &r)| r > 0.0).map(|(&h, &r)| (h.ln(), r.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Window shrunk by `max(10%, 6 steps)` on each side.
fn measurement_window(w: &SpaceTimeWindow, g: &StGrid) -> Result<(Interval, Interval)> {
    let dt = (0.1 * w.t.len()).max(6.0 * g.tau);
    let dx = (0.1 * w.x.len()).max(6.0 * g.h);
    let (t, x) = (w.t.shrink(dt), w.x.shrink(dx));
    if t.is_empty() || x.is_empty() {
        return Err(Error::InvalidArgument("measurement window is empty at this resolution".into()));
    }
    Ok((t, x))
}

fn st_grid(spec: &ProblemSpec, nx: usize, nt: usize) -> StGrid {
    StGrid {
        nt,
        nx,
        tau: spec.horizon / nt as f64,
        h: spec.domain.len() / (nx + 1) as f64,
        t0: 0.0,
        x0: spec.domain.lo,
    }
}

fn finish(kind: IdentityKind, levels: Vec<LevelResidual>) -> IdentityReport {
    let scale = levels.iter().map(|l| l.residual).fold(0.0, f64::max);
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    // Roundoff-level residuals carry no order information.
    let rs: Vec<f64> = levels.iter().map(|l| if l.relative > 1e-13 { l.residual } else { 0.0 }).collect();
    let order = if scale > 0.0 { fit_order(&hs, &rs) } else { None };
    IdentityReport { kind, levels, order }
}

/// `‖𝓛_h(𝓜f) − 𝓝f‖` for constant coefficients and pivot `i0`.
pub fn verify_lm_identity(
    spec: &ProblemSpec,
    i0: usize,
    samples: &[Vec<Expr>],
    levels: &[(usize, usize)],
    window: &SpaceTimeWindow,
) -> Result<IdentityReport> {
    let c = &spec.coefficients;
    let l = op_l(c)?;
    let n = op_n(i0, c)?;
    let m_op = build_m_thm1(i0, c)?;
    let exact: Vec<(Vec<Expr>, Vec<Expr>)> = samples
        .iter()
        .map(|f| Ok((m_op.apply_expr(f)?, n.apply_expr(f)?)))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &(nx, nt) in levels {
        let g = st_grid(spec, nx, nt);
        let (tw, xw) = measurement_window(window, &g)?;
        let (mut res, mut reference, mut disc) = (0.0f64, 0.0f64, 0.0f64);
        for (f, (mf, nf)) in samples.iter().zip(&exact) {
            let target = StField::from_exprs(&g, nf);
            let r = l.apply(&StField::from_exprs(&g, mf))?.minus(&target);
            res = res.max(r.max_abs_in(tw, xw));
            reference = reference.max(target.max_abs_in(tw, xw));
            let fh = StField::from_exprs(&g, f);
            let rd = l.apply(&m_op.apply(&fh)?)?.minus(&n.apply(&fh)?);
            disc = disc.max(rd.max_abs_in(tw, xw));
        }
        let relative = if reference > 0.0 { res / reference } else { res };
        out.push(LevelResidual { nx, nt, h: g.h, tau: g.tau, residual: res, relative, discrete_residual: disc });
    }
    Ok(finish(IdentityKind::LmEqualsN, out))
}

/// How to build `𝓜*` on each level.
#[derive(Clone, Copy, Debug)]
pub enum Theorem2Case {
    /// `g₂₁ = 0`, `a₂₁ ≠ 0` on the window.
    I,
    /// `|det H| > C` on the window.
    II,
}

/// `‖𝓜*_h(𝓛*φ) − φ‖` for a two-equation system.
pub fn verify_ml_identity(
    spec: &ProblemSpec,
    case: Theorem2Case,
    samples: &[Vec<Expr>],
    levels: &[(usize, usize)],
    window: &SpaceTimeWindow,
) -> Result<IdentityReport> {
    let c = &spec.coefficients;
    let ls = op_l_star(c)?;
    let exact: Vec<Vec<Expr>> = samples.iter().map(|p| ls.apply_expr(p)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for &(nx, nt) in levels {
        let g = st_grid(spec, nx, nt);
        let (tw, xw) = measurement_window(window, &g)?;
        let mop = match case {
            Theorem2Case::I => MOperator::case_i(spec, window, Default::default())?,
            Theorem2Case::II => MOperator::case_ii(spec, window, &g)?,
        };
        let (mut res, mut reference, mut disc) = (0.0f64, 0.0f64, 0.0f64);
        for (phi, lphi) in samples.iter().zip(&exact) {
            let target = StField::from_exprs(&g, phi);
            let r = mop.apply_mstar(&StField::from_exprs(&g, lphi))?.minus(&target);
            res = res.max(r.max_abs_in(tw, xw));
            reference = reference.max(target.max_abs_in(tw, xw));
            let rd = mop.apply_mstar(&ls.apply(&target)?)?.minus(&target);
            disc = disc.max(rd.max_abs_in(tw, xw));
        }
        let relative = if reference > 0.0 { res / reference } else { res };
        out.push(LevelResidual { nx, nt, h: g.h, tau: g.tau, residual: res, relative, discrete_residual: disc });
    }
    Ok(finish(IdentityKind::MstarLstarIsId, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit_recovers_slope() {
        let hs = [0.1, 0.05, 0.025];
        let rs: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&hs, &rs).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_order(&hs, &[0.0, 0.0, 1.0]).is_none());
    }
}
