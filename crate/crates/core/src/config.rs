//! TOML run configuration.
//!
//! ```toml
//! [problem]
//! domain = [0.0, 1.0]
//! horizon = 0.25
//! omega = [0.3, 0.7]
//!
//! [grid]
//! nx = 100
//! nt = 200
//!
//! [coefficients]
//! d = [1.0, 1.0]
//! a = [[0, 0], [1, 0]]
//! g = [[0, 0], ["2", 0]]
//! # entries: number, expression in t and x, or { kind = "affine_x", params = [c0, c1] }
//!
//! [mode]
//! kind = "theorem1"          # theorem2_case_i | theorem2_case_ii
//!
//! [initial]
//! y0 = ["sin(pi*x)", "sin(pi*x)"]
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::CoefficientField;
use crate::grid::{Grid, GridFunction};
use crate::hum::{HumConfig, HumMode};
use crate::model::{CoefficientSet, Interval, ProblemSpec, SpaceTimeWindow};
use crate::pipeline::{build_cutoff_with, CutoffKind, CutoffTheta, PipelineMode};
use crate::weights::{centred_s, default_s_lambda, Eta0, WeightProfile};

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CoefKind {
    Constant,
    AffineX,
    Polynomial,
}

/// One coefficient entry.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum CoefEntry {
    Number(f64),
    Expr(String),
    Table { kind: CoefKind, params: Vec<f64> },
}

impl CoefEntry {
    pub fn field(&self) -> Result<CoefficientField> {
        match self {
            CoefEntry::Number(v) => Ok(CoefficientField::constant(*v)),
            CoefEntry::Expr(s) => CoefficientField::parse(s),
            CoefEntry::Table { kind, params } => match kind {
                CoefKind::Constant if params.len() == 1 => Ok(CoefficientField::constant(params[0])),
                CoefKind::AffineX if params.len() == 2 => Ok(CoefficientField::affine_x(params[0], params[1])),
                CoefKind::Polynomial if !params.is_empty() => Ok(CoefficientField::polynomial(params)),
                _ => Err(Error::Config(format!("wrong parameter count {} for {kind:?}", params.len()))),
            },
        }
    }

    pub fn expr(&self) -> Result<Expr> {
        match self {
            CoefEntry::Number(v) => Ok(Expr::num(*v)),
            CoefEntry::Expr(s) => Expr::parse(s),
            CoefEntry::Table { .. } => self
                .field()?
                .expr()
                .cloned()
                .ok_or_else(|| Error::Config("table entry has no expression form".into())),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub m: Option<usize>,
    pub domain: [f64; 2],
    pub horizon: f64,
    pub omega: [f64; 2],
    pub omega0: Option<[f64; 2]>,
    pub omega1: Option<[f64; 2]>,
    pub omega2: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub nt: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    pub d: Option<Vec<CoefEntry>>,
    pub g: Option<Vec<Vec<CoefEntry>>>,
    pub a: Option<Vec<Vec<CoefEntry>>>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    #[default]
    Theorem1,
    Theorem2CaseI,
    #[serde(rename = "theorem2_case_ii")]
    Theorem2CaseII,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub t: [f64; 2],
    pub x: [f64; 2],
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSection {
    #[serde(default)]
    pub kind: ModeKind,
    /// Defaults to `(0, T) × ω`.
    pub window: Option<WindowSection>,
    /// Lower bound for `|det H|`; defaults to 1.
    pub c_bound: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HumSection {
    pub k: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub big_k: f64,
    pub normalize_rho: bool,
}

impl Default for HumSection {
    fn default() -> Self {
        HumSection { k: 1e6, cg_tol: 1e-8, cg_max_iter: 500, big_k: 0.5, normalize_rho: true }
    }
}

/// `s` choice: `"centred"`, `"calibrated"` or a number.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SChoice {
    Value(f64),
    Named(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub lambda: f64,
    pub p: i32,
    pub s: SChoice,
    /// `C` in `(s₀, λ) = (C(T⁵ + T¹⁰), C)` for `s = "calibrated"`.
    pub calibration: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        WeightsSection { lambda: 1.0, p: 7, s: SChoice::Named("centred".into()), calibration: 1.0 }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub kind: Option<CutoffKind>,
    pub inner: Option<[f64; 2]>,
    pub support: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub y0: Option<Vec<CoefEntry>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub ks: Vec<f64>,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSection {
    pub target: Vec<CoefEntry>,
    pub epsilon: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub levels: Vec<[usize; 2]>,
    /// Each sample lists `m` expressions in `t` and `x`.
    pub samples: Vec<Vec<CoefEntry>>,
    /// 1-based pivot; defaults to the smallest admissible one.
    pub i0: Option<usize>,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { levels: vec![[63, 64], [127, 128], [255, 256]], samples: Vec::new(), i0: None }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservabilitySection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        ObservabilitySection { samples: 50, seed: 0 }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSection {
    pub g: Option<f64>,
    pub a: Option<f64>,
    pub nx: usize,
}

impl Default for PoincareSection {
    fn default() -> Self {
        PoincareSection { g: None, a: None, nx: 200 }
    }
}

/// Trajectory file format.
#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryFormat {
    #[default]
    Csv,
    Binary,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub format: TrajectoryFormat,
}

/// A parsed configuration file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    #[serde(default)]
    pub coefficients: CoefficientsSection,
    #[serde(default)]
    pub mode: ModeSection,
    #[serde(default)]
    pub hum: HumSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub sweep: Option<SweepSection>,
    pub approx: Option<ApproxSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub observability: ObservabilitySection,
    #[serde(default)]
    pub poincare: PoincareSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn interval(v: [f64; 2], what: &str) -> Result<Interval> {
    if !(v[0] < v[1]) {
        return Err(Error::Config(format!("{what}: need lo < hi, got [{}, {}]", v[0], v[1])));
    }
    Ok(Interval::new(v[0], v[1]))
}

impl RunConfig {
    pub fn parse(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&src).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Equation count: `problem.m` or the length of `coefficients.d`, `a`, `g`.
    pub fn m(&self) -> Result<usize> {
        let c = &self.coefficients;
        let hints = [
            self.problem.m,
            c.d.as_ref().map(Vec::len),
            c.a.as_ref().map(Vec::len),
            c.g.as_ref().map(Vec::len),
            self.initial.y0.as_ref().map(Vec::len),
        ];
        let mut m = None;
        for h in hints.into_iter().flatten() {
            match m {
                None => m = Some(h),
                Some(v) if v != h => return Err(Error::Config(format!("inconsistent equation counts {v} and {h}"))),
                _ => {}
            }
        }
        let m = m.ok_or_else(|| Error::Config("cannot infer m: set problem.m".into()))?;
        if m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {m}")));
        }
        Ok(m)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let m = self.m()?;
        let mut set = CoefficientSet::identity_diffusion(m);
        let c = &self.coefficients;
        if let Some(d) = &c.d {
            for (l, e) in d.iter().enumerate() {
                set = set.with_d(l, e.field().map_err(|e| Error::Config(format!("coefficients.d[{l}]: {e}")))?);
            }
        }
        for (name, mat) in [("g", &c.g), ("a", &c.a)] {
            let Some(rows) = mat else { continue };
            for (i, row) in rows.iter().enumerate() {
                if row.len() != m {
                    return Err(Error::Config(format!("coefficients.{name}[{i}] has {} entries, expected {m}", row.len())));
                }
                for (j, e) in row.iter().enumerate() {
                    let f = e.field().map_err(|e| Error::Config(format!("coefficients.{name}[{i}][{j}]: {e}")))?;
                    set = if name == "g" { set.with_g(i, j, f) } else { set.with_a(i, j, f) };
                }
            }
        }
        let p = &self.problem;
        if !(p.horizon > 0.0) {
            return Err(Error::Config(format!("problem.horizon must be positive, got {}", p.horizon)));
        }
        let mut spec = ProblemSpec::new(interval(p.domain, "problem.domain")?, p.horizon, interval(p.omega, "problem.omega")?, set);
        if p.omega0.is_some() || p.omega1.is_some() || p.omega2.is_some() {
            let o0 = p.omega0.map(|v| interval(v, "problem.omega0")).transpose()?.unwrap_or(spec.omega0);
            let o1 = p.omega1.map(|v| interval(v, "problem.omega1")).transpose()?.unwrap_or(spec.omega1);
            let o2 = p.omega2.map(|v| interval(v, "problem.omega2")).transpose()?.unwrap_or(spec.omega2);
            spec = spec.with_nested(o0, o1, o2);
        }
        let violations = crate::model::validate_spec(&spec);
        if let Some(v) = violations.first() {
            return Err(Error::Config(format!("{}: {v:?}", v.kind())));
        }
        Ok(spec)
    }

    pub fn grid(&self, spec: &ProblemSpec) -> Result<Grid> {
        Grid::new(spec.domain, spec.horizon, self.grid.nx, self.grid.nt)
    }

    pub fn window(&self, spec: &ProblemSpec) -> Result<SpaceTimeWindow> {
        match &self.mode.window {
            None => Ok(spec.control_region()),
            Some(w) => Ok(SpaceTimeWindow::new(interval(w.t, "mode.window.t")?, interval(w.x, "mode.window.x")?)),
        }
    }

    pub fn pipeline_mode(&self, spec: &ProblemSpec) -> Result<PipelineMode> {
        Ok(match self.mode.kind {
            ModeKind::Theorem1 => PipelineMode::Theorem1,
            ModeKind::Theorem2CaseI => PipelineMode::Theorem2CaseI { window: self.window(spec)? },
            ModeKind::Theorem2CaseII => {
                PipelineMode::Theorem2CaseII { window: self.window(spec)?, c_bound: self.mode.c_bound.unwrap_or(1.0) }
            }
        })
    }

    /// HUM settings; the mode is replaced by the pipeline.
    pub fn hum_config(&self) -> HumConfig {
        let h = &self.hum;
        HumConfig {
            k: h.k,
            cg_tol: h.cg_tol,
            cg_max_iter: h.cg_max_iter,
            mode: HumMode::Theorem2,
            big_k: h.big_k,
            normalize_rho: h.normalize_rho,
        }
    }

    pub fn weights(&self, spec: &ProblemSpec, grid: &Grid) -> Result<WeightProfile> {
        let w = &self.weights;
        let eta = Eta0::build(spec.domain, spec.omega2)?;
        let (s, lambda) = match &w.s {
            SChoice::Value(s) => (*s, w.lambda),
            SChoice::Named(n) if n == "centred" => (centred_s(w.lambda, spec.horizon, w.p), w.lambda),
            SChoice::Named(n) if n == "calibrated" => default_s_lambda(spec.horizon, w.calibration),
            SChoice::Named(n) => return Err(Error::Config(format!("weights.s: unknown choice {n:?}"))),
        };
        WeightProfile::build(&eta, lambda, s, grid, w.p)
    }

    pub fn cutoff(&self, mode: &PipelineMode, spec: &ProblemSpec, grid: &Grid) -> Result<CutoffTheta> {
        let c = &self.cutoff;
        let mut th = mode.default_cutoff(spec, grid)?;
        if c.kind.is_none() && c.inner.is_none() && c.support.is_none() {
            return Ok(th);
        }
        if let Some(v) = c.inner {
            th.inner = interval(v, "cutoff.inner")?;
        }
        if let Some(v) = c.support {
            th.support = interval(v, "cutoff.support")?;
        }
        build_cutoff_with(th.inner, th.support, grid, c.kind.unwrap_or(th.kind))
    }

    fn sample(entries: &[CoefEntry], m: usize, grid: &Grid, what: &str) -> Result<GridFunction> {
        if entries.len() != m {
            return Err(Error::Config(format!("{what} has {} entries, expected {m}", entries.len())));
        }
        let exprs: Vec<Expr> = entries.iter().map(CoefEntry::expr).collect::<Result<_>>()?;
        Ok(GridFunction::from_fn(m, grid, |c, x| exprs[c].eval(0.0, x)))
    }

    /// `y0`, defaulting to `sin(πx)` rescaled to the domain in every component.
    pub fn y0(&self, spec: &ProblemSpec, grid: &Grid) -> Result<GridFunction> {
        match &self.initial.y0 {
            Some(e) => Self::sample(e, spec.m, grid, "initial.y0"),
            None => {
                let (lo, len) = (spec.domain.lo, spec.domain.len());
                Ok(GridFunction::from_fn(spec.m, grid, |_, x| (std::f64::consts::PI * (x - lo) / len).sin()))
            }
        }
    }

    pub fn approx_target(&self, spec: &ProblemSpec, grid: &Grid) -> Result<Option<(GridFunction, f64)>> {
        match &self.approx {
            None => Ok(None),
            Some(a) => Ok(Some((Self::sample(&a.target, spec.m, grid, "approx.target")?, a.epsilon))),
        }
    }

    /// Identity samples as expressions; defaults to one polynomial and one smooth input.
    pub fn verify_samples(&self, m: usize) -> Result<Vec<Vec<Expr>>> {
        if self.verify.samples.is_empty() {
            let poly = ["x*x*t + 2*x - t", "t*x*x - x + 3*t", "x*x + t*x + 1"];
            let smooth = ["sin(pi*x)*exp(t)", "cos(2*x)*(1 + t*t)", "exp(x - t)"];
            return [poly, smooth]
                .iter()
                .map(|s| (0..m).map(|c| Expr::parse(s[c % 3])).collect())
                .collect();
        }
        self.verify
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                if s.len() != m {
                    return Err(Error::Config(format!("verify.samples[{k}] has {} entries, expected {m}", s.len())));
                }
                s.iter().map(CoefEntry::expr).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCH: &str = r#"
[problem]
domain = [0.0, 1.0]
horizon = 0.25
omega = [0.3, 0.7]

[grid]
nx = 20
nt = 40

[coefficients]
d = [1, { kind = "constant", params = [1.0] }]
a = [[0, 0], [1, 0]]
g = [[0, 0], ["0", 0]]

[initial]
y0 = ["sin(pi*x)", "sin(pi*x)"]
"#;

    #[test]
    fn parses_benchmark() {
        let cfg = RunConfig::parse(BENCH).unwrap();
        let spec = cfg.spec().unwrap();
        assert_eq!(spec.m, 2);
        assert_eq!(spec.coefficients.a(1, 0).as_constant(), Some(1.0));
        assert_eq!(cfg.pipeline_mode(&spec).unwrap(), PipelineMode::Theorem1);
        let grid = cfg.grid(&spec).unwrap();
        assert_eq!(cfg.y0(&spec, &grid).unwrap().values.len(), 40);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_shapes() {
        let bad = BENCH.replace("horizon = 0.25", "horizon = 0.25\nhorizn = 1");
        assert!(matches!(RunConfig::parse(&bad), Err(Error::Config(_))));
        let bad = BENCH.replace("a = [[0, 0], [1, 0]]", "a = [[0, 0], [1]]");
        assert!(RunConfig::parse(&bad).unwrap().spec().is_err());
    }

    #[test]
    fn table_and_expression_entries() {
        let e: CoefEntry = toml::from_str::<toml::Value>("v = { kind = \"affine_x\", params = [1.0, 2.0] }")
            .unwrap()["v"]
            .clone()
            .try_into()
            .unwrap();
        assert_eq!(e.field().unwrap().eval(0.0, 0.5), 2.0);
        assert_eq!(CoefEntry::Expr("x*x".into()).field().unwrap().eval(0.0, 3.0), 9.0);
    }
}
