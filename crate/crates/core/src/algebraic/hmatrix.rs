//! The 6×6 matrix `H`, the 7×7 matrix `M = diag(1, H)` and their determinants.
//!
//! `M` maps the jet `(φ₁, φ₂, ∂ₓφ₂, ∂ₜφ₂, ∂ₓₓφ₂, ∂ₓₜφ₂, ∂ₓₓₓφ₂)` to the seven
//! rows of `S ∘ 𝓛*φ`; `H` is its lower-right block.

use serde::Serialize;

use crate::dense::{self, DenseLu};
use crate::error::{Error, Result};
use crate::model::CoefficientSet;

/// Coefficient jet entering `H`, evaluated at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct HInputs {
    pub a21: f64,
    pub a21_x: f64,
    pub a21_t: f64,
    pub a21_xx: f64,
    pub g21: f64,
    pub g21_x: f64,
    pub g21_xx: f64,
    pub g21_xxx: f64,
    pub g21_t: f64,
    pub g21_tx: f64,
    pub a22: f64,
    pub a22_x: f64,
    pub g22: f64,
    pub g22_x: f64,
    pub g22_xx: f64,
    pub d2: f64,
    pub d2_x: f64,
    pub d2_xx: f64,
}

impl HInputs {
    /// Evaluate the jet of a two-equation coefficient set at `(t, x)`.
    pub fn at(c: &CoefficientSet, t: f64, x: f64) -> Result<Self> {
        if c.m() != 2 {
            return Err(Error::InvalidArgument(format!("H needs m = 2, got m = {}", c.m())));
        }
        let (a21, g21, a22, g22, d2) = (c.a(1, 0), c.g(1, 0), c.a(1, 1), c.g(1, 1), c.d(1));
        Ok(HInputs {
            a21: a21.eval(t, x),
            a21_x: a21.partial_at(0, 1, t, x)?,
            a21_t: a21.partial_at(1, 0, t, x)?,
            a21_xx: a21.partial_at(0, 2, t, x)?,
            g21: g21.eval(t, x),
            g21_x: g21.partial_at(0, 1, t, x)?,
            g21_xx: g21.partial_at(0, 2, t, x)?,
            g21_xxx: g21.partial_at(0, 3, t, x)?,
            g21_t: g21.partial_at(1, 0, t, x)?,
            g21_tx: g21.partial_at(1, 1, t, x)?,
            a22: a22.eval(t, x),
            a22_x: a22.partial_at(0, 1, t, x)?,
            g22: g22.eval(t, x),
            g22_x: g22.partial_at(0, 1, t, x)?,
            g22_xx: g22.partial_at(0, 2, t, x)?,
            d2: d2.eval(t, x),
            d2_x: d2.partial_at(0, 1, t, x)?,
            d2_xx: d2.partial_at(0, 2, t, x)?,
        })
    }
}

/// Row-major `H`; columns act on `(φ₂, ∂ₓφ₂, ∂ₜφ₂, ∂ₓₓφ₂, ∂ₓₜφ₂, ∂ₓₓₓφ₂)`.
pub fn build_h(p: &HInputs) -> [[f64; 6]; 6] {
    [
        [-p.a21 + p.g21_x, p.g21, 0.0, 0.0, 0.0, 0.0],
        [-p.a21_x + p.g21_xx, -p.a21 + 2.0 * p.g21_x, 0.0, p.g21, 0.0, 0.0],
        [-p.a21_t + p.g21_tx, p.g21_t, -p.a21 + p.g21_x, 0.0, p.g21, 0.0],
        [-p.a21_xx + p.g21_xxx, -2.0 * p.a21_x + 3.0 * p.g21_xx, 0.0, -p.a21 + 3.0 * p.g21_x, 0.0, p.g21],
        [-p.a22 + p.g22_x, p.g22 - p.d2_x, -1.0, -p.d2, 0.0, 0.0],
        [-p.a22_x + p.g22_xx, -p.a22 + 2.0 * p.g22_x - p.d2_xx, 0.0, p.g22 - 2.0 * p.d2_x, -1.0, -p.d2],
    ]
}

/// Row-major `M = diag(1, H)`.
pub fn build_m(p: &HInputs) -> [[f64; 7]; 7] {
    let h = build_h(p);
    let mut m = [[0.0; 7]; 7];
    m[0][0] = 1.0;
    for i in 0..6 {
        m[i + 1][1..].copy_from_slice(&h[i]);
    }
    m
}

/// `det H` by LU with partial pivoting.
pub fn det_h_numeric(p: &HInputs) -> f64 {
    let h = build_h(p);
    dense::det(6, h.as_flattened())
}

/// Closed-form polynomial expansion of `det H / g₂₁` (28 monomials).
pub fn det_h_expansion(p: &HInputs) -> f64 {
    let HInputs {
        a21, a21_x, a21_t, a21_xx, g21, g21_x, g21_xx, g21_xxx, g21_t, g21_tx, a22_x, g22, g22_x, g22_xx, d2, d2_x,
        d2_xx, ..
    } = *p;
    let g2 = g21 * g21;
    2.0 * a21_x * d2_x * g2 - 4.0 * a21_x * d2 * g21_x * g21 + a21_xx * d2 * g2 + 2.0 * a21 * a21_x * d2 * g21
        - a21_x * g2 * g22
        + a21_t * g2
        - 4.0 * a21 * d2_x * g21_x * g21
        + a21 * d2_xx * g2
        + a21 * a21 * d2_x * g21
        - 3.0 * a21 * d2 * g21_xx * g21
        + 6.0 * a21 * d2 * g21_x * g21_x
        - 2.0 * a21 * a21 * d2 * g21_x
        + a21 * g21_x * g21 * g22
        - a21 * g21_t * g21
        - a21 * g2 * g22_x
        + a22_x * g2 * g21
        - d2_xx * g21_x * g2
        - 2.0 * d2_x * g21_xx * g2
        + 3.0 * d2_x * g21_x * g21_x * g21
        - d2 * g21_xxx * g2
        + 5.0 * d2 * g21_x * g21_xx * g21
        - 4.0 * d2 * g21_x * g21_x * g21_x
        + g21_x * g2 * g22_x
        + g21_xx * g2 * g22
        - g21_x * g21_x * g21 * g22
        - g21_tx * g2
        + g21_x * g21_t * g21
        - g2 * g21 * g22_xx
}

/// Closed-form `det H = g₂₁ · det_h_expansion`.
pub fn det_h_explicit(p: &HInputs) -> f64 {
    p.g21 * det_h_expansion(p)
}

/// Rows `P M⁻¹` (2×7, row-major), rejecting `|det M| < 1e-12 ‖M‖⁶`.
pub fn pm_inverse(p: &HInputs) -> Result<[f64; 14]> {
    let m = build_m(p);
    let flat = m.as_flattened();
    let norm = flat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let lu = DenseLu::factor_unchecked(7, flat);
    let det = lu.det();
    if !(det.abs() >= 1e-12 * norm.powi(6)) || det == 0.0 {
        return Err(Error::Singular(format!("|det M| = {:e} below threshold", det.abs())));
    }
    let inv = lu.inverse();
    let mut out = [0.0; 14];
    out.copy_from_slice(&inv[..14]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kappa_case() -> HInputs {
        HInputs { g21: 2.0, a22: 0.3, a22_x: 1.0, d2: 1.0, ..Default::default() }
    }

    #[test]
    fn template_entries() {
        let p = HInputs { a21: 1.0, g21_x: 10.0, g21: 100.0, d2: 7.0, ..Default::default() };
        let h = build_h(&p);
        assert_eq!(h[0][0], 9.0);
        assert_eq!(h[0][1], 100.0);
        assert_eq!(h[3][3], 29.0);
        assert_eq!(h[4][2], -1.0);
        assert_eq!(h[5][5], -7.0);
        let m = build_m(&p);
        assert_eq!(m[0][0], 1.0);
        assert_eq!(m[6][6], -7.0);
    }

    #[test]
    fn kappa_reduction() {
        let p = kappa_case();
        assert!((det_h_expansion(&p) - 8.0).abs() < 1e-12);
        assert!((det_h_numeric(&p) - 16.0).abs() < 1e-12);
        assert!((det_h_explicit(&p) - det_h_numeric(&p)).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_is_singular() {
        let p = HInputs { d2: 1.0, ..Default::default() };
        assert_eq!(det_h_numeric(&p), 0.0);
        assert!(pm_inverse(&p).is_err());
    }

    #[test]
    fn pm_inverse_recovers_jet() {
        let p = kappa_case();
        let pm = pm_inverse(&p).unwrap();
        let jet = [0.3, -1.2, 0.7, 2.0, -0.4, 0.9, 1.5];
        let m = build_m(&p);
        let q: Vec<f64> = (0..7).map(|i| (0..7).map(|j| m[i][j] * jet[j]).sum()).collect();
        for r in 0..2 {
            let v: f64 = (0..7).map(|j| pm[r * 7 + j] * q[j]).sum();
            assert!((v - jet[r]).abs() < 1e-12);
        }
    }
}
