//! Scalar coefficient fields `c(t, x)` with bounded derivative access.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

/// Thread-safe scalar function of `(t, x)`.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default declared derivative orders `(t, x)`.
pub const DEFAULT_MAX_ORDERS: (usize, usize) = (3, 7);

/// Closure bundle: the function and whichever partials the caller can supply.
///
/// Missing partials are approximated by nested central differences of the
/// highest available lower-order partial, with a one-time warning.
pub struct CallbackBundle {
    partials: HashMap<(usize, usize), ScalarFn>,
    fd_scale: f64,
    warned: AtomicBool,
}

impl CallbackBundle {
    pub fn new(f: ScalarFn) -> Self {
        let mut partials = HashMap::new();
        partials.insert((0, 0), f);
        CallbackBundle { partials, fd_scale: 1.0, warned: AtomicBool::new(false) }
    }

    /// Register the analytic partial `∂t^ot ∂x^ox`.
    pub fn with_partial(mut self, ot: usize, ox: usize, f: ScalarFn) -> Self {
        self.partials.insert((ot, ox), f);
        self
    }

    /// Length scale for the finite-difference step `1e-5 * scale`.
    pub fn with_fd_scale(mut self, scale: f64) -> Self {
        self.fd_scale = scale;
        self
    }

    fn eval(&self, label: &str, ot: usize, ox: usize, t: f64, x: f64) -> f64 {
        if let Some(f) = self.partials.get(&(ot, ox)) {
            return f(t, x);
        }
        if !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("coefficient `{label}`: partial ({ot},{ox}) approximated by central differences");
        }
        let (bt, bx) = self
            .partials
            .keys()
            .filter(|&&(a, b)| a <= ot && b <= ox)
            .max_by_key(|&&(a, b)| (a + b, a))
            .copied()
            .unwrap_or((0, 0));
        let base = &self.partials[&(bt, bx)];
        let (dt, dx) = (ot - bt, ox - bx);
        // Step grows with the missing order to keep roundoff below truncation.
        let step = |k: usize| 1e-5 * self.fd_scale * 10f64.powi(k.saturating_sub(1) as i32);
        nested_central(&|tt, xx| base(tt, xx), t, x, dt, dx, step(dt.max(1)), step(dx.max(1)))
    }
}

fn nested_central(f: &dyn Fn(f64, f64) -> f64, t: f64, x: f64, dt: usize, dx: usize, ht: f64, hx: f64) -> f64 {
    if dt > 0 {
        let g = |tt: f64, xx: f64| nested_central(f, tt, xx, dt - 1, dx, ht, hx);
        return (g(t + ht, x) - g(t - ht, x)) / (2.0 * ht);
    }
    if dx > 0 {
        let g = |tt: f64, xx: f64| nested_central(f, tt, xx, 0, dx - 1, ht, hx);
        return (g(t, x + hx) - g(t, x - hx)) / (2.0 * hx);
    }
    f(t, x)
}

#[derive(Clone)]
enum Source {
    Expr(Expr),
    Callbacks { bundle: Arc<CallbackBundle>, shift: (usize, usize), time_dependent: bool },
}

/// Scalar field with partial-derivative access up to declared orders.
#[derive(Clone)]
pub struct CoefficientField {
    source: Source,
    max_orders: (usize, usize),
    label: String,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CoefficientField({}, max_orders={:?})", self.label, self.max_orders)
    }
}

impl fmt::Display for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl CoefficientField {
    pub fn constant(c: f64) -> Self {
        Self::from_expr(Expr::num(c))
    }

    /// `c0 + c1 x`.
    pub fn affine_x(c0: f64, c1: f64) -> Self {
        Self::from_expr(Expr::polynomial_x(&[c0, c1]))
    }

    /// `Σ c[k] x^k`.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Self::from_expr(Expr::polynomial_x(coeffs))
    }

    pub fn from_expr(e: Expr) -> Self {
        let label = e.to_string();
        CoefficientField { source: Source::Expr(e), max_orders: DEFAULT_MAX_ORDERS, label }
    }

    pub fn parse(src: &str) -> Result<Self> {
        Ok(Self::from_expr(Expr::parse(src)?))
    }

    /// Closure-backed field; `time_dependent = false` promises `∂t ≡ 0`.
    pub fn from_callbacks(bundle: CallbackBundle, max_orders: (usize, usize), time_dependent: bool, label: &str) -> Self {
        CoefficientField {
            source: Source::Callbacks { bundle: Arc::new(bundle), shift: (0, 0), time_dependent },
            max_orders,
            label: label.to_string(),
        }
    }

    pub fn with_max_orders(mut self, max_orders: (usize, usize)) -> Self {
        self.max_orders = max_orders;
        self
    }

    pub fn max_orders(&self) -> (usize, usize) {
        self.max_orders
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Underlying expression, if expression-backed.
    pub fn expr(&self) -> Option<&Expr> {
        match &self.source {
            Source::Expr(e) => Some(e),
            Source::Callbacks { .. } => None,
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match &self.source {
            Source::Expr(e) => e.eval(t, x),
            Source::Callbacks { bundle, shift, .. } => bundle.eval(&self.label, shift.0, shift.1, t, x),
        }
    }

    /// The partial `∂t^ot ∂x^ox` as a field; errors beyond the declared orders.
    pub fn partial(&self, ot: usize, ox: usize) -> Result<CoefficientField> {
        let (mt, mx) = self.max_orders;
        if ot > mt || ox > mx {
            return Err(Error::DerivativeOrder { field: self.label.clone(), t: ot, x: ox, max_t: mt, max_x: mx });
        }
        if ot == 0 && ox == 0 {
            return Ok(self.clone());
        }
        let label = format!("d^({ot},{ox})[{}]", self.label);
        let source = match &self.source {
            Source::Expr(e) => Source::Expr(e.partial(ot, ox)),
            Source::Callbacks { bundle, shift, time_dependent } => {
                if ot > 0 && !time_dependent {
                    Source::Expr(Expr::num(0.0))
                } else {
                    Source::Callbacks {
                        bundle: bundle.clone(),
                        shift: (shift.0 + ot, shift.1 + ox),
                        time_dependent: *time_dependent,
                    }
                }
            }
        };
        Ok(CoefficientField { source, max_orders: (mt - ot, mx - ox), label })
    }

    /// Evaluate `∂t^ot ∂x^ox c` at a point.
    pub fn partial_at(&self, ot: usize, ox: usize, t: f64, x: f64) -> Result<f64> {
        Ok(self.partial(ot, ox)?.eval(t, x))
    }

    pub fn depends_on_t(&self) -> bool {
        match &self.source {
            Source::Expr(e) => e.depends_on(Var::T),
            Source::Callbacks { time_dependent, .. } => *time_dependent,
        }
    }

    /// Structurally constant (expression without variables).
    pub fn is_structurally_constant(&self) -> bool {
        match &self.source {
            Source::Expr(e) => e.as_num().is_some(),
            Source::Callbacks { .. } => false,
        }
    }

    /// Literal value when structurally constant.
    pub fn as_constant(&self) -> Option<f64> {
        self.expr().and_then(Expr::as_num)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle_sin() -> CallbackBundle {
        CallbackBundle::new(Arc::new(|t: f64, x: f64| (2.0 * x).sin() * (1.0 + t * t)))
    }

    #[test]
    fn beyond_declared_orders_is_an_error() {
        let f = CoefficientField::parse("x^2").unwrap().with_max_orders((1, 2));
        assert!(f.partial(0, 2).is_ok());
        assert!(matches!(f.partial(0, 3), Err(Error::DerivativeOrder { .. })));
        assert!(matches!(f.partial(2, 0), Err(Error::DerivativeOrder { .. })));
        let g = f.partial(0, 1).unwrap();
        assert!(g.partial(0, 2).is_err());
    }

    #[test]
    fn finite_difference_fallback_is_second_order() {
        let analytic = |t: f64, x: f64| 2.0 * (2.0 * x).cos() * (1.0 + t * t);
        let fd = CoefficientField::from_callbacks(bundle_sin(), (2, 3), true, "c");
        let (t, x) = (0.3, 0.4);
        let dx = fd.partial_at(0, 1, t, x).unwrap();
        assert!((dx - analytic(t, x)).abs() < 1e-8);
        let dxx = fd.partial_at(0, 2, t, x).unwrap();
        assert!((dxx + 4.0 * (2.0 * x).sin() * (1.0 + t * t)).abs() < 1e-5);
        let dt = fd.partial_at(1, 0, t, x).unwrap();
        assert!((dt - (2.0 * x).sin() * 2.0 * t).abs() < 1e-8);
    }

    #[test]
    fn analytic_callbacks_take_precedence() {
        let b = bundle_sin().with_partial(0, 1, Arc::new(|_, _| 42.0));
        let f = CoefficientField::from_callbacks(b, (1, 2), true, "c");
        assert_eq!(f.partial_at(0, 1, 0.1, 0.2).unwrap(), 42.0);
        // Second x-derivative falls back to differencing the supplied first one.
        assert!(f.partial_at(0, 2, 0.1, 0.2).unwrap().abs() < 1e-6);
    }

    #[test]
    fn time_independent_bundle_has_zero_time_partials() {
        let f = CoefficientField::from_callbacks(bundle_sin(), (1, 1), false, "c");
        assert_eq!(f.partial_at(1, 1, 0.3, 0.2).unwrap(), 0.0);
    }
}
