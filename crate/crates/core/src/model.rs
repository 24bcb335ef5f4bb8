//! Control problems, coefficients and the algebraic controllability conditions.
//!
//! Component indices are 0-based throughout: `a(1, 0)` is the coupling
//! coefficient of the first unknown in the second equation.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebraic::hmatrix::{det_h_numeric, HInputs};
use crate::error::{Error, Result};
use crate::field::CoefficientField;

/// Open interval `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `x ∈ (lo, hi)`.
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Closure of `self` inside the open `other`.
    pub fn compactly_inside(&self, other: &Interval) -> bool {
        self.lo > other.lo && self.hi < other.hi && !self.is_empty()
    }

    /// `self ⊆ other` (closures allowed to touch).
    pub fn inside(&self, other: &Interval) -> bool {
        self.lo >= other.lo && self.hi <= other.hi && !self.is_empty()
    }

    /// Shrink by `d` on each side.
    pub fn shrink(&self, d: f64) -> Interval {
        Interval::new(self.lo + d, self.hi - d)
    }
}

/// Space-time rectangle `(t.lo, t.hi) × (x.lo, x.hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeWindow {
    pub t: Interval,
    pub x: Interval,
}

impl SpaceTimeWindow {
    pub fn new(t: Interval, x: Interval) -> Self {
        SpaceTimeWindow { t, x }
    }

    pub fn contains(&self, t: f64, x: f64) -> bool {
        self.t.contains(t) && self.x.contains(x)
    }

    /// Cell-centred `n × n` sample points.
    pub fn samples(&self, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..n).flat_map(move |i| {
            let t = self.t.lo + (i as f64 + 0.5) / n as f64 * self.t.len();
            (0..n).map(move |j| (t, self.x.lo + (j as f64 + 0.5) / n as f64 * self.x.len()))
        })
    }
}

/// Diffusion, drift and coupling coefficients of an `m`-equation system.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    d: Vec<CoefficientField>,
    g: Vec<Vec<CoefficientField>>,
    a: Vec<Vec<CoefficientField>>,
    is_constant: bool,
}

impl CoefficientSet {
    /// `d` of length `m`, `g` and `a` of shape `m × m`.
    pub fn new(
        d: Vec<CoefficientField>,
        g: Vec<Vec<CoefficientField>>,
        a: Vec<Vec<CoefficientField>>,
    ) -> Result<Self> {
        let m = d.len();
        if m < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 equations, got {m}")));
        }
        for (name, mat) in [("g", &g), ("a", &a)] {
            if mat.len() != m || mat.iter().any(|r| r.len() != m) {
                return Err(Error::InvalidArgument(format!("`{name}` must be {m}x{m}")));
            }
        }
        let is_constant = d.iter().chain(g.iter().flatten()).chain(a.iter().flatten()).all(|f| f.is_structurally_constant());
        Ok(CoefficientSet { d, g, a, is_constant })
    }

    /// Unit diffusion, no drift, no coupling.
    pub fn identity_diffusion(m: usize) -> Self {
        let zero = || CoefficientField::constant(0.0);
        CoefficientSet {
            d: (0..m).map(|_| CoefficientField::constant(1.0)).collect(),
            g: (0..m).map(|_| (0..m).map(|_| zero()).collect()).collect(),
            a: (0..m).map(|_| (0..m).map(|_| zero()).collect()).collect(),
            is_constant: true,
        }
    }

    pub fn with_d(mut self, l: usize, f: CoefficientField) -> Self {
        self.d[l] = f;
        self.refresh()
    }

    pub fn with_g(mut self, i: usize, j: usize, f: CoefficientField) -> Self {
        self.g[i][j] = f;
        self.refresh()
    }

    pub fn with_a(mut self, i: usize, j: usize, f: CoefficientField) -> Self {
        self.a[i][j] = f;
        self.refresh()
    }

    /// Declare constancy explicitly (spot-checked by `validate_spec`).
    pub fn with_constant_flag(mut self, flag: bool) -> Self {
        self.is_constant = flag;
        self
    }

    fn refresh(mut self) -> Self {
        let flag = self.fields().all(|f| f.is_structurally_constant());
        self.is_constant = flag;
        self
    }

    fn fields(&self) -> impl Iterator<Item = &CoefficientField> {
        self.d.iter().chain(self.g.iter().flatten()).chain(self.a.iter().flatten())
    }

    pub fn m(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self, l: usize) -> &CoefficientField {
        &self.d[l]
    }

    pub fn g(&self, i: usize, j: usize) -> &CoefficientField {
        &self.g[i][j]
    }

    pub fn a(&self, i: usize, j: usize) -> &CoefficientField {
        &self.a[i][j]
    }

    pub fn is_constant(&self) -> bool {
        self.is_constant
    }

    pub fn time_dependent(&self) -> bool {
        self.fields().any(|f| f.depends_on_t())
    }

    /// Constant `(G, A)` with each `g_ij` as a one-dimensional vector.
    pub fn constant_values(&self) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
        if !self.is_constant {
            return Err(Error::NotConstant);
        }
        let val = |f: &CoefficientField| f.as_constant().unwrap_or_else(|| f.eval(0.0, 0.0));
        let g = self.g.iter().map(|r| r.iter().map(|f| vec![val(f)]).collect()).collect();
        let a = self.a.iter().map(|r| r.iter().map(val).collect()).collect();
        Ok((g, a))
    }
}

/// One control problem: domain, horizon, windows and coefficients.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub m: usize,
    pub space_dim: usize,
    pub domain: Interval,
    pub horizon: f64,
    pub omega: Interval,
    pub omega0: Interval,
    pub omega1: Interval,
    pub omega2: Interval,
    pub coefficients: CoefficientSet,
}

impl ProblemSpec {
    /// Nested windows default to `ω` shrunk by `|ω|/8` per level.
    pub fn new(domain: Interval, horizon: f64, omega: Interval, coefficients: CoefficientSet) -> Self {
        let step = omega.len() / 8.0;
        ProblemSpec {
            m: coefficients.m(),
            space_dim: 1,
            domain,
            horizon,
            omega,
            omega0: omega.shrink(step),
            omega1: omega.shrink(2.0 * step),
            omega2: omega.shrink(3.0 * step),
            coefficients,
        }
    }

    pub fn with_nested(mut self, omega0: Interval, omega1: Interval, omega2: Interval) -> Self {
        self.omega0 = omega0;
        self.omega1 = omega1;
        self.omega2 = omega2;
        self
    }

    pub fn control_count(&self) -> usize {
        self.m - 1
    }

    /// `(0, T) × ω`.
    pub fn control_region(&self) -> SpaceTimeWindow {
        SpaceTimeWindow::new(Interval::new(0.0, self.horizon), self.omega)
    }
}

/// An invariant violated by a problem specification.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Domain { lo: f64, hi: f64 },
    Horizon(f64),
    EquationCount(usize),
    Ellipticity { component: usize, min: f64, t: f64, x: f64 },
    Nesting(String),
    ConstantFlag { t: f64, x: f64 },
}

impl Violation {
    /// Short category label.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Domain { .. } => "domain violated",
            Violation::Horizon(_) => "horizon violated",
            Violation::EquationCount(_) => "equation count violated",
            Violation::Ellipticity { .. } => "ellipticity violated",
            Violation::Nesting(_) => "window nesting violated",
            Violation::ConstantFlag { .. } => "constant flag violated",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind())?;
        match self {
            Violation::Domain { lo, hi } => write!(f, ": x_lo = {lo} is not below x_hi = {hi}"),
            Violation::Horizon(t) => write!(f, ": T = {t} must be positive"),
            Violation::EquationCount(m) => write!(f, ": m = {m} (need m >= 2 and a matching coefficient set)"),
            Violation::Ellipticity { component, min, t, x } => {
                write!(f, ": d_{} = {min} at (t, x) = ({t}, {x})", component + 1)
            }
            Violation::Nesting(s) => write!(f, ": {s}"),
            Violation::ConstantFlag { t, x } => write!(f, ": coefficients vary at (t, x) = ({t}, {x})"),
        }
    }
}

/// Sample density and zero tolerance used by the condition checks.
#[derive(Clone, Copy, Debug)]
pub struct SampleOptions {
    pub samples: usize,
    pub tol_pos: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { samples: 64, tol_pos: 1e-8 }
    }
}

/// Every violated invariant of `spec`; empty when valid.
pub fn validate_spec(spec: &ProblemSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(spec.domain.lo < spec.domain.hi) {
        out.push(Violation::Domain { lo: spec.domain.lo, hi: spec.domain.hi });
    }
    if !(spec.horizon > 0.0) {
        out.push(Violation::Horizon(spec.horizon));
    }
    if spec.m < 2 || spec.coefficients.m() != spec.m {
        out.push(Violation::EquationCount(spec.m));
    }
    let chain = [
        ("omega2", spec.omega2, "omega1", spec.omega1),
        ("omega1", spec.omega1, "omega0", spec.omega0),
        ("omega0", spec.omega0, "omega", spec.omega),
    ];
    if !spec.omega.inside(&spec.domain) {
        out.push(Violation::Nesting("omega is not inside the domain".into()));
    }
    for (inner_name, inner, outer_name, outer) in chain {
        if !inner.compactly_inside(&outer) {
            out.push(Violation::Nesting(format!("closure of {inner_name} is not inside {outer_name}")));
        }
    }
    if spec.horizon > 0.0 && spec.domain.lo < spec.domain.hi {
        let n = 64;
        for l in 0..spec.coefficients.m() {
            let d = spec.coefficients.d(l);
            let mut worst = (f64::INFINITY, 0.0, 0.0);
            for i in 0..=n {
                let t = spec.horizon * i as f64 / n as f64;
                for j in 0..=n {
                    let x = spec.domain.lo + spec.domain.len() * j as f64 / n as f64;
                    let v = d.eval(t, x);
                    if !(v >= worst.0) {
                        worst = (v, t, x);
                    }
                }
            }
            if !(worst.0 > 0.0) {
                out.push(Violation::Ellipticity { component: l, min: worst.0, t: worst.1, x: worst.2 });
            }
        }
        if spec.coefficients.is_constant() {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            let fields: Vec<&CoefficientField> = spec.coefficients.fields().collect();
            'spot: for _ in 0..16 {
                let t = rng.gen_range(0.0..spec.horizon);
                let x = rng.gen_range(spec.domain.lo..spec.domain.hi);
                for f in &fields {
                    if f.eval(t, x) != f.eval(0.0, spec.domain.lo) {
                        out.push(Violation::ConstantFlag { t, x });
                        break 'spot;
                    }
                }
            }
        }
    }
    out
}

/// Uniform ellipticity constant `d₀ = min d_l` over a sample grid of `Q_T`.
pub fn ellipticity_bound(spec: &ProblemSpec, samples: usize) -> f64 {
    let mut d0 = f64::INFINITY;
    for l in 0..spec.m {
        for i in 0..=samples {
            let t = spec.horizon * i as f64 / samples as f64;
            for j in 0..=samples {
                let x = spec.domain.lo + spec.domain.len() * j as f64 / samples as f64;
                d0 = d0.min(spec.coefficients.d(l).eval(t, x));
            }
        }
    }
    d0
}

/// Smallest 0-based `i₀ < m − 1` with `g_{m,i₀} ≠ 0` (any component) or `a_{m,i₀} ≠ 0`.
///
/// `None` means the last equation is decoupled from the controlled ones, so
/// the system is not null controllable.
pub fn find_i0(g: &[Vec<Vec<f64>>], a: &[Vec<f64>]) -> Result<Option<usize>> {
    let m = a.len();
    if m < 2 || g.len() != m || a.iter().any(|r| r.len() != m) || g.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("G and A must both be m x m with m >= 2".into()));
    }
    let last = m - 1;
    Ok((0..last).find(|&i| a[last][i] != 0.0 || g[last][i].iter().any(|&v| v != 0.0)))
}

/// `find_i0` on a constant coefficient set.
pub fn find_i0_for(coeffs: &CoefficientSet) -> Result<Option<usize>> {
    let (g, a) = coeffs.constant_values()?;
    find_i0(&g, &a)
}

fn check_window(spec: &ProblemSpec, window: &SpaceTimeWindow) -> Result<()> {
    let region = spec.control_region();
    if !window.t.inside(&region.t) || !window.x.inside(&region.x) {
        return Err(Error::InvalidArgument(format!(
            "window ({}, {}) x ({}, {}) is not inside (0, T) x omega",
            window.t.lo, window.t.hi, window.x.lo, window.x.hi
        )));
    }
    Ok(())
}

fn require_two(spec: &ProblemSpec) -> Result<()> {
    if spec.m != 2 {
        return Err(Error::InvalidArgument(format!("condition needs m = 2, got m = {}", spec.m)));
    }
    Ok(())
}

/// `g₂₁ ≡ 0` and `|a₂₁| ≥ tol_pos` with constant sign on the sampled window.
pub fn check_condition_case_i(spec: &ProblemSpec, window: &SpaceTimeWindow, opts: SampleOptions) -> Result<bool> {
    require_two(spec)?;
    check_window(spec, window)?;
    let (g21, a21) = (spec.coefficients.g(1, 0), spec.coefficients.a(1, 0));
    let mut sign = 0.0;
    for (t, x) in window.samples(opts.samples) {
        if g21.eval(t, x).abs() > opts.tol_pos {
            return Ok(false);
        }
        let v = a21.eval(t, x);
        if !(v.abs() >= opts.tol_pos) {
            return Ok(false);
        }
        if sign == 0.0 {
            sign = v.signum();
        } else if v.signum() != sign {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Summary of `det H` over a sampled window.
#[derive(Clone, Debug, Serialize)]
pub struct DetSummary {
    pub min_abs: f64,
    pub argmin: (f64, f64),
    pub max_abs: f64,
    pub samples: Vec<(f64, f64, f64)>,
}

/// Sample `det H` over `window`.
pub fn det_h_summary(spec: &ProblemSpec, window: &SpaceTimeWindow, samples: usize) -> Result<DetSummary> {
    require_two(spec)?;
    let mut out = DetSummary { min_abs: f64::INFINITY, argmin: (f64::NAN, f64::NAN), max_abs: 0.0, samples: Vec::new() };
    for (t, x) in window.samples(samples) {
        let det = det_h_numeric(&HInputs::at(&spec.coefficients, t, x)?);
        if !(det.abs() >= out.min_abs) {
            out.min_abs = det.abs();
            out.argmin = (t, x);
        }
        out.max_abs = out.max_abs.max(det.abs());
        out.samples.push((t, x, det));
    }
    Ok(out)
}

/// `min |det H| > c_bound` over the sampled window.
pub fn check_condition_case_ii(
    spec: &ProblemSpec,
    window: &SpaceTimeWindow,
    c_bound: f64,
    opts: SampleOptions,
) -> Result<bool> {
    require_two(spec)?;
    check_window(spec, window)?;
    if !(c_bound > 0.0) {
        return Err(Error::InvalidArgument(format!("C_bound must be positive, got {c_bound}")));
    }
    let summary = det_h_summary(spec, window, opts.samples)?;
    Ok(summary.min_abs > c_bound)
}
