//! Smallest Rayleigh quotient of `∫|g u′ − a u|² / ∫|u|²` over `H¹₀`.
//!
//! For Dirichlet data the cross term `−2ga∫u u′` vanishes, so the quotient
//! equals `(g²∫|u′|² + a²∫|u|²)/∫|u|²`. It is discretised with the standard
//! three-point Laplacian and minimised by inverse power iteration.

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Smallest eigenvalue of `g²(−Δ_h) + a² I` on the interior nodes of `grid`.
pub fn poincare_rayleigh(g: f64, a: f64, grid: &Grid) -> Result<f64> {
    if g == 0.0 && a == 0.0 {
        return Err(Error::InvalidArgument("the Rayleigh quotient needs g != 0 or a != 0".into()));
    }
    let n = grid.nx;
    let h2 = grid.h * grid.h;
    let mut k = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        k.set(i, i, 2.0 * g * g / h2 + a * a);
        if i > 0 {
            k.set(i, i - 1, -g * g / h2);
        }
        if i + 1 < n {
            k.set(i, i + 1, -g * g / h2);
        }
    }
    let lu = k.clone().factor()?;
    // Start from the smooth mode so a symmetric iteration converges quickly.
    let mut u: Vec<f64> = (1..=n).map(|i| (std::f64::consts::PI * i as f64 / (n + 1) as f64).sin() + 1e-3).collect();
    let mut lambda = f64::NAN;
    let mut ku = vec![0.0; n];
    for _ in 0..500 {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v /= norm);
        k.matvec(&u, &mut ku);
        let rq: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        if (rq - lambda).abs() <= 1e-15 * rq.abs() {
            lambda = rq;
            break;
        }
        lambda = rq;
        lu.solve(&mut u);
    }
    Ok(lambda)
}
