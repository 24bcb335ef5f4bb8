//! Carleman weights and observability diagnostics.
//!
//! With `‖η⁰‖∞ = M`,
//!
//! ```text
//! α(t,x) = (e^{12λM} − e^{λ(10M + η⁰(x))}) / (t⁵(T−t)⁵)
//! ξ(t,x) =  e^{λ(10M + η⁰(x))}            / (t⁵(T−t)⁵)
//! ρ      =  ξ^p e^{−2 s₀ α}
//! ```
//!
//! Weights exist only at interior time levels `1..nt`; the endpoint slices
//! are never materialised. Exponentials are taken in log space and
//! `e^{−2sα} < 1e−300` is flushed to zero.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Trajectory};
use crate::model::Interval;
use crate::solver::Propagator;

/// Smallest representable weight factor; anything below is set to zero.
pub const FLUSH: f64 = 1e-300;

/// Quartic `η⁰ = φ(1 − φ)`, `φ(s) = (s + βs²)/(1 + β)`, `s = (x − x_lo)/L`.
///
/// `β` places the unique critical point at the midpoint of `ω₂`. The
/// construction needs the scaled midpoint `s_c` in `(1 − 1/√2, 1/√2)`.
#[derive(Clone, Debug, Serialize)]
pub struct Eta0 {
    pub domain: Interval,
    pub beta: f64,
    pub reflected: bool,
    pub critical_point: f64,
    pub kappa: f64,
}

impl Eta0 {
    pub fn build(domain: Interval, omega2: Interval) -> Result<Self> {
        if !omega2.compactly_inside(&domain) {
            return Err(Error::InvalidArgument("omega2 must lie strictly inside the domain".into()));
        }
        let sc = (omega2.mid() - domain.lo) / domain.len();
        let reflected = sc > 0.5;
        let s = if reflected { 1.0 - sc } else { sc };
        let beta = if (s - 0.5).abs() < 1e-15 { 0.0 } else { (0.5 - s) / (s * s - 0.5) };
        if !(beta > -0.5) {
            return Err(Error::InvalidArgument(format!(
                "quartic weight cannot centre its critical point at scaled position {sc:.4}; \
                 need it within (0.2929, 0.7071)"
            )));
        }
        let mut eta = Eta0 { domain, beta, reflected, critical_point: omega2.mid(), kappa: 0.0 };
        let outside = [Interval::new(domain.lo, omega2.lo), Interval::new(omega2.hi, domain.hi)];
        let mut kappa = f64::INFINITY;
        for piece in outside {
            let n = 4096;
            for k in 0..=n {
                let x = piece.lo + piece.len() * k as f64 / n as f64;
                kappa = kappa.min(eta.derivative(x).abs());
            }
        }
        eta.kappa = kappa;
        Ok(eta)
    }

    fn scaled(&self, x: f64) -> (f64, f64) {
        let s = (x - self.domain.lo) / self.domain.len();
        if self.reflected {
            (1.0 - s, -1.0 / self.domain.len())
        } else {
            (s, 1.0 / self.domain.len())
        }
    }

    fn phi(&self, s: f64) -> (f64, f64) {
        let b = self.beta;
        ((s + b * s * s) / (1.0 + b), (1.0 + 2.0 * b * s) / (1.0 + b))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (s, _) = self.scaled(x);
        let (p, _) = self.phi(s);
        p * (1.0 - p)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (s, ds) = self.scaled(x);
        let (p, dp) = self.phi(s);
        (1.0 - 2.0 * p) * dp * ds
    }

    /// `‖η⁰‖∞`, attained where `φ = 1/2`.
    pub fn sup_norm(&self) -> f64 {
        0.25
    }

    /// Values at nodes `0..=nx+1`.
    pub fn on_grid(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.nx + 2)
            .map(|i| if i == 0 || i == grid.nx + 1 { 0.0 } else { self.eval(grid.x(i)) })
            .collect()
    }
}

/// `(η⁰, κ)` for the domain and innermost window.
pub fn build_eta0(domain: Interval, omega2: Interval) -> Result<(Eta0, f64)> {
    let eta = Eta0::build(domain, omega2)?;
    let kappa = eta.kappa;
    Ok((eta, kappa))
}

/// `(s₀, λ) = (C (T⁵ + T¹⁰), C)`.
pub fn default_s_lambda(horizon: f64, calibration: f64) -> (f64, f64) {
    (calibration * (horizon.powi(5) + horizon.powi(10)), calibration)
}

/// `s` for which `ρ(·, x)` peaks at `t = T/2` at every `x`.
///
/// Solves `d/dt log ρ = 0` at `t = T/2` for the smallest `α` numerator,
/// `e^{12λM} − e^{11λM}` with `M = 1/4`.
pub fn centred_s(lambda: f64, horizon: f64, p: i32) -> f64 {
    let m = 0.25;
    let c2 = (12.0 * lambda * m).exp() - (11.0 * lambda * m).exp();
    p as f64 * (0.5 * horizon).powi(10) / (2.0 * c2)
}

/// Sampled Carleman weights on one grid.
#[derive(Clone, Debug)]
pub struct WeightProfile {
    pub eta0: Eta0,
    pub kappa: f64,
    pub lambda: f64,
    pub s: f64,
    pub s0: f64,
    pub p: i32,
    pub grid: Grid,
    eta: Vec<f64>,
    alpha: Vec<f64>,
    xi: Vec<f64>,
    log_rho: Vec<f64>,
    alpha_star: Vec<f64>,
    xi_star: Vec<f64>,
    log_rho_max: f64,
}

fn theta(t: f64, horizon: f64) -> f64 {
    (t * (horizon - t)).powi(5)
}

impl WeightProfile {
    /// Weights with `s₀ = s` and exponent `p` (7 or 9).
    pub fn build(eta0: &Eta0, lambda: f64, s: f64, grid: &Grid, p: i32) -> Result<Self> {
        if !(lambda > 0.0 && s > 0.0) {
            return Err(Error::InvalidArgument(format!("need lambda, s > 0 (got {lambda}, {s})")));
        }
        if grid.nt < 2 {
            return Err(Error::InvalidArgument("weights need at least one interior time level".into()));
        }
        let nx2 = grid.nx + 2;
        let eta = eta0.on_grid(grid);
        let m = eta0.sup_norm();
        let top = (12.0 * lambda * m).exp();
        let levels = grid.nt - 1;
        let mut alpha = vec![0.0; levels * nx2];
        let mut xi = vec![0.0; levels * nx2];
        let mut log_rho = vec![0.0; levels * nx2];
        let mut alpha_star = vec![f64::NEG_INFINITY; levels];
        let mut xi_star = vec![f64::INFINITY; levels];
        for n in 1..grid.nt {
            let th = theta(grid.t(n), grid.horizon);
            for (i, &e) in eta.iter().enumerate() {
                let k = (n - 1) * nx2 + i;
                let inner = (lambda * (10.0 * m + e)).exp();
                alpha[k] = (top - inner) / th;
                xi[k] = inner / th;
                log_rho[k] = p as f64 * xi[k].ln() - 2.0 * s * alpha[k];
                alpha_star[n - 1] = alpha_star[n - 1].max(alpha[k]);
                xi_star[n - 1] = xi_star[n - 1].min(xi[k]);
            }
        }
        let log_rho_max = log_rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(WeightProfile {
            eta0: eta0.clone(),
            kappa: eta0.kappa,
            lambda,
            s,
            s0: s,
            p,
            grid: *grid,
            eta,
            alpha,
            xi,
            log_rho,
            alpha_star,
            xi_star,
            log_rho_max,
        })
    }

    fn k(&self, n: usize, i: usize) -> usize {
        assert!(n >= 1 && n < self.grid.nt, "weights exist only at interior time levels");
        (n - 1) * (self.grid.nx + 2) + i
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// `α` at interior level `n ∈ 1..nt`, node `i ∈ 0..=nx+1`.
    pub fn alpha(&self, n: usize, i: usize) -> f64 {
        self.alpha[self.k(n, i)]
    }

    pub fn xi(&self, n: usize, i: usize) -> f64 {
        self.xi[self.k(n, i)]
    }

    pub fn alpha_star(&self, n: usize) -> f64 {
        self.alpha_star[n - 1]
    }

    pub fn xi_star(&self, n: usize) -> f64 {
        self.xi_star[n - 1]
    }

    /// `e^{−2sα}` flushed below `FLUSH`.
    pub fn decay(&self, n: usize, i: usize) -> f64 {
        let v = (-2.0 * self.s * self.alpha(n, i)).exp();
        if v < FLUSH {
            0.0
        } else {
            v
        }
    }

    /// `log ρ` (never flushed).
    pub fn log_rho(&self, n: usize, i: usize) -> f64 {
        self.log_rho[self.k(n, i)]
    }

    /// `ρ = ξ^p e^{−2s₀α}`; zero wherever `e^{−2s₀α}` is flushed. Zero at `n ∈ {0, nt}`.
    pub fn rho(&self, n: usize, i: usize) -> f64 {
        if n == 0 || n >= self.grid.nt || self.decay(n, i) == 0.0 {
            return 0.0;
        }
        self.log_rho(n, i).exp()
    }

    /// `ρ / max ρ`, with the same zeros as `rho`.
    pub fn rho_normalized(&self, n: usize, i: usize) -> f64 {
        if n == 0 || n >= self.grid.nt || self.decay(n, i) == 0.0 {
            return 0.0;
        }
        (self.log_rho(n, i) - self.log_rho_max).exp()
    }

    pub fn log_rho_max(&self) -> f64 {
        self.log_rho_max
    }

    /// CSV rows `t,x,alpha,xi,rho` over interior levels and all nodes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,alpha,xi,rho")?;
        for n in 1..self.grid.nt {
            for i in 0..self.grid.nx + 2 {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.grid.t(n),
                    self.grid.x(i),
                    self.alpha(n, i),
                    self.xi(n, i),
                    self.rho(n, i)
                )?;
            }
        }
        Ok(())
    }

    /// Pointwise `α(t, x)`; singular at `t ∈ {0, T}`.
    pub fn alpha_at(&self, t: f64, x: f64) -> Result<f64> {
        let th = self.theta_checked(t)?;
        let m = self.eta0.sup_norm();
        Ok(((12.0 * self.lambda * m).exp() - (self.lambda * (10.0 * m + self.eta0.eval(x))).exp()) / th)
    }

    /// Pointwise `ξ(t, x)`; singular at `t ∈ {0, T}`.
    pub fn xi_at(&self, t: f64, x: f64) -> Result<f64> {
        let th = self.theta_checked(t)?;
        let m = self.eta0.sup_norm();
        Ok((self.lambda * (10.0 * m + self.eta0.eval(x))).exp() / th)
    }

    fn theta_checked(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < self.grid.horizon) {
            return Err(Error::InvalidArgument(format!("weights are singular at t = {t}")));
        }
        Ok(theta(t, self.grid.horizon))
    }
}

fn centred_dx(row: &[f64], i: usize, h: f64) -> f64 {
    let left = if i == 0 { 0.0 } else { row[i - 1] };
    let right = row.get(i + 1).copied().unwrap_or(0.0);
    (right - left) / (2.0 * h)
}

/// `I(s,λ;u) = s³λ⁴ ∬ e^{−2sα} ξ³ |u|² + sλ² ∬ e^{−2sα} ξ |∂ₓu|²` on interior levels.
pub fn carleman_functional(profile: &WeightProfile, u: &Trajectory) -> f64 {
    let g = profile.grid;
    let (s, l) = (profile.s, profile.lambda);
    let nx = g.nx;
    let mut acc = 0.0;
    for n in 1..g.nt {
        let slice = u.slice(n);
        for c in 0..u.m {
            let row = &slice[c * nx..(c + 1) * nx];
            for j in 0..nx {
                let i = j + 1;
                if profile.decay(n, i) == 0.0 {
                    continue;
                }
                let (a, x) = (profile.alpha(n, i), profile.xi(n, i));
                let w3 = (-2.0 * s * a + 3.0 * x.ln()).exp();
                let w1 = (-2.0 * s * a + x.ln()).exp();
                let d = centred_dx(row, j, g.h);
                acc += s.powi(3) * l.powi(4) * w3 * row[j] * row[j] + s * l * l * w1 * d * d;
            }
        }
    }
    acc * g.tau * g.h
}

/// Observed quantity in the observability ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Observation {
    /// `𝓝*ψ = (g∂ₓ − a)ψ` componentwise, observed on `ω₀`.
    Adjoint { g: f64, a: f64, window: Interval },
    /// `ψ` itself, observed on `ω₁`.
    Identity { window: Interval },
}

/// Outcome for one terminal datum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum RatioOutcome {
    Ratio { ratio: f64, log_ratio: f64 },
    ZeroDenominator,
}

impl RatioOutcome {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            RatioOutcome::Ratio { ratio, .. } => Some(*ratio),
            RatioOutcome::ZeroDenominator => None,
        }
    }
}

/// `‖ψ(0)‖² / ∬_window ρ |Oψ|²` for each terminal datum, in log space.
pub fn observability_ratio(
    prop: &Propagator,
    profile: &WeightProfile,
    obs: Observation,
    samples: &[GridFunction],
) -> Result<Vec<RatioOutcome>> {
    let outcomes = crate::par::map(samples, |psi_t| -> Result<RatioOutcome> {
        let adj = prop.adjoint(psi_t)?;
        Ok(ratio_for(&adj.psi, profile, obs))
    });
    outcomes.into_iter().collect()
}

fn ratio_for(psi: &Trajectory, profile: &WeightProfile, obs: Observation) -> RatioOutcome {
    let g = psi.grid;
    let nx = g.nx;
    let num = g.h * crate::grid::dot(psi.slice(0), psi.slice(0));
    let window = match obs {
        Observation::Adjoint { window, .. } | Observation::Identity { window } => window,
    };
    // Log-sum-exp of log ρ + log |Oψ|² over the observed nodes.
    let mut terms: Vec<f64> = Vec::new();
    for n in 1..g.nt {
        let slice = psi.slice(n);
        for j in 0..nx {
            let i = j + 1;
            if !window.contains(g.x(i)) {
                continue;
            }
            let mut sq = 0.0;
            for c in 0..psi.m {
                let row = &slice[c * nx..(c + 1) * nx];
                let v = match obs {
                    Observation::Adjoint { g: gc, a, .. } => gc * centred_dx(row, j, g.h) - a * row[j],
                    Observation::Identity { .. } => row[j],
                };
                sq += v * v;
            }
            if sq > 0.0 {
                terms.push(profile.log_rho(n, i) + sq.ln());
            }
        }
    }
    if terms.is_empty() || num == 0.0 {
        return RatioOutcome::ZeroDenominator;
    }
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + terms.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    let log_den = lse + (g.tau * g.h).ln();
    let log_ratio = num.ln() - log_den;
    RatioOutcome::Ratio { ratio: log_ratio.exp(), log_ratio }
}

/// `count` seeded standard-normal terminal data.
pub fn gaussian_samples(m: usize, nx: usize, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| GridFunction { m, nx, values: (0..m * nx).map(|_| StandardNormal.sample(&mut rng)).collect() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0)
    }

    #[test]
    fn symmetric_window_gives_parabola() {
        let (eta, kappa) = build_eta0(unit(), Interval::new(0.4, 0.6)).unwrap();
        for x in [0.1, 0.37, 0.5, 0.83] {
            assert!((eta.eval(x) - x * (1.0 - x)).abs() < 1e-15);
            assert!((eta.eval(x) - eta.eval(1.0 - x)).abs() < 1e-14);
        }
        assert!((kappa - 0.2).abs() < 1e-12);
        assert_eq!(eta.eval(0.0), 0.0);
        assert_eq!(eta.eval(1.0), 0.0);
    }

    #[test]
    fn off_centre_window_moves_the_critical_point() {
        for mid in [0.35, 0.62] {
            let w = Interval::new(mid - 0.03, mid + 0.03);
            let (eta, kappa) = build_eta0(Interval::new(-1.0, 1.0), Interval::new(2.0 * w.lo - 1.0, 2.0 * w.hi - 1.0)).unwrap();
            let xc = 2.0 * mid - 1.0;
            assert!(eta.derivative(xc).abs() < 1e-12);
            assert!((eta.eval(xc) - 0.25).abs() < 1e-12);
            assert!(kappa > 0.0);
            assert!(eta.eval(-1.0).abs() < 1e-15 && eta.eval(1.0).abs() < 1e-15);
        }
        assert!(build_eta0(unit(), Interval::new(0.05, 0.15)).is_err());
        assert!(build_eta0(unit(), Interval::new(0.0, 0.5)).is_err());
    }

    #[test]
    fn default_parameters() {
        assert_eq!(default_s_lambda(1.0, 1.0), (2.0, 1.0));
        let (s0, _) = default_s_lambda(0.5, 1.0);
        assert!((s0 - 0.0322265625).abs() < 1e-15);
    }

    #[test]
    fn endpoint_weights_are_rejected_and_vanish_nearby() {
        let (eta, _) = build_eta0(unit(), Interval::new(0.45, 0.55)).unwrap();
        let grid = Grid::new(unit(), 0.5, 20, 40).unwrap();
        let (s0, l) = default_s_lambda(0.5, 1.0);
        let w = WeightProfile::build(&eta, l, s0, &grid, 7).unwrap();
        assert!(w.alpha_at(0.0, 0.5).is_err());
        assert!(w.xi_at(0.5, 0.5).is_err());
        for i in 0..22 {
            assert!(w.decay(1, i) < 1e-30);
            assert!(w.decay(39, i) < 1e-30);
            assert_eq!(w.rho(0, i), 0.0);
        }
    }

    #[test]
    fn centred_s_puts_the_peak_mid_horizon() {
        let (eta, _) = build_eta0(unit(), Interval::new(0.45, 0.55)).unwrap();
        let grid = Grid::new(unit(), 0.25, 30, 200).unwrap();
        let s = centred_s(1.0, 0.25, 7);
        let w = WeightProfile::build(&eta, 1.0, s, &grid, 7).unwrap();
        let i = 15;
        let peak = (1..200).max_by(|&a, &b| w.log_rho(a, i).total_cmp(&w.log_rho(b, i))).unwrap();
        assert!((peak as i64 - 100).abs() <= 1);
    }
}
