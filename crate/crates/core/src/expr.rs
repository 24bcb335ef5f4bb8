//! Scalar expressions in `t` and `x` with symbolic differentiation.
//!
//! Grammar (usual precedence, `^` right associative):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := ('-' | '+') unary | power
//! power := atom ('^' unary)?
//! atom  := number | 't' | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func  := sin | cos | exp | ln | sqrt
//! ```

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Independent variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
}

/// Elementary function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Sqrt => v.sqrt(),
        }
    }
}

#[derive(Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Call(Func, Expr),
}

/// Immutable expression tree with shared subtrees.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn num(v: f64) -> Self {
        Expr::node(Node::Num(v))
    }

    pub fn var(v: Var) -> Self {
        Expr::node(Node::Var(v))
    }

    pub fn t() -> Self {
        Expr::var(Var::T)
    }

    pub fn x() -> Self {
        Expr::var(Var::X)
    }

    /// Value if the expression is a numeric literal.
    pub fn as_num(&self) -> Option<f64> {
        match *self.0 {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn neg(a: Expr) -> Expr {
        match &*a.0 {
            Node::Num(v) => Expr::num(-v),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::node(Node::Neg(a)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(p), Some(q)) => Expr::num(p + q),
            (Some(p), _) if p == 0.0 => b,
            (_, Some(q)) if q == 0.0 => a,
            _ => Expr::node(Node::Add(a, b)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(p), Some(q)) => Expr::num(p - q),
            (Some(p), _) if p == 0.0 => Expr::neg(b),
            (_, Some(q)) if q == 0.0 => a,
            _ => Expr::node(Node::Sub(a, b)),
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(p), Some(q)) => Expr::num(p * q),
            (Some(p), _) | (_, Some(p)) if p == 0.0 => Expr::num(0.0),
            (Some(p), _) if p == 1.0 => b,
            (_, Some(q)) if q == 1.0 => a,
            (Some(p), _) if p == -1.0 => Expr::neg(b),
            (_, Some(q)) if q == -1.0 => Expr::neg(a),
            _ => Expr::node(Node::Mul(a, b)),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(p), Some(q)) if q != 0.0 => Expr::num(p / q),
            (Some(p), _) if p == 0.0 => Expr::num(0.0),
            (_, Some(q)) if q == 1.0 => a,
            _ => Expr::node(Node::Div(a, b)),
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (a.as_num(), b.as_num()) {
            (Some(p), Some(q)) => Expr::num(p.powf(q)),
            (_, Some(q)) if q == 0.0 => Expr::num(1.0),
            (_, Some(q)) if q == 1.0 => a,
            _ => Expr::node(Node::Pow(a, b)),
        }
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        match a.as_num() {
            Some(v) => Expr::num(f.apply(v)),
            None => Expr::node(Node::Call(f, a)),
        }
    }

    /// Polynomial `c[0] + c[1] x + c[2] x^2 + ...` in Horner form.
    pub fn polynomial_x(coeffs: &[f64]) -> Expr {
        let mut acc = Expr::num(0.0);
        for &c in coeffs.iter().rev() {
            acc = Expr::add(Expr::mul(acc, Expr::x()), Expr::num(c));
        }
        acc
    }

    /// Parse an expression string.
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let e = p.expr()?;
        if p.pos < p.tokens.len() {
            let (col, _) = p.tokens[p.pos];
            return Err(Error::Parse { column: col + 1, message: "unexpected trailing input".into() });
        }
        Ok(e)
    }

    /// Evaluate at `(t, x)`.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match &*self.0 {
            Node::Num(v) => *v,
            Node::Var(Var::T) => t,
            Node::Var(Var::X) => x,
            Node::Neg(a) => -a.eval(t, x),
            Node::Add(a, b) => a.eval(t, x) + b.eval(t, x),
            Node::Sub(a, b) => a.eval(t, x) - b.eval(t, x),
            Node::Mul(a, b) => a.eval(t, x) * b.eval(t, x),
            Node::Div(a, b) => a.eval(t, x) / b.eval(t, x),
            Node::Pow(a, b) => {
                let base = a.eval(t, x);
                match b.as_num() {
                    Some(q) if q.fract() == 0.0 && q.abs() < 64.0 => base.powi(q as i32),
                    _ => base.powf(b.eval(t, x)),
                }
            }
            Node::Call(f, a) => f.apply(a.eval(t, x)),
        }
    }

    /// Whether the expression mentions `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match &*self.0 {
            Node::Num(_) => false,
            Node::Var(w) => *w == v,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Symbolic derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        if !self.depends_on(v) {
            return Expr::num(0.0);
        }
        match &*self.0 {
            Node::Num(_) => Expr::num(0.0),
            Node::Var(w) => Expr::num(if *w == v { 1.0 } else { 0.0 }),
            Node::Neg(a) => Expr::neg(a.diff(v)),
            Node::Add(a, b) => Expr::add(a.diff(v), b.diff(v)),
            Node::Sub(a, b) => Expr::sub(a.diff(v), b.diff(v)),
            Node::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(v), b.clone()),
                Expr::mul(a.clone(), b.diff(v)),
            ),
            Node::Div(a, b) => Expr::div(
                Expr::sub(Expr::mul(a.diff(v), b.clone()), Expr::mul(a.clone(), b.diff(v))),
                Expr::pow(b.clone(), Expr::num(2.0)),
            ),
            Node::Pow(a, b) => {
                if b.depends_on(Var::T) || b.depends_on(Var::X) {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    Expr::mul(
                        self.clone(),
                        Expr::add(
                            Expr::mul(b.diff(v), Expr::call(Func::Ln, a.clone())),
                            Expr::div(Expr::mul(b.clone(), a.diff(v)), a.clone()),
                        ),
                    )
                } else {
                    let q = b.eval(0.0, 0.0);
                    Expr::mul(
                        Expr::mul(Expr::num(q), Expr::pow(a.clone(), Expr::num(q - 1.0))),
                        a.diff(v),
                    )
                }
            }
            Node::Call(f, a) => {
                let da = a.diff(v);
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a.clone()),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a.clone())),
                    Func::Exp => self.clone(),
                    Func::Ln => Expr::div(Expr::num(1.0), a.clone()),
                    Func::Sqrt => Expr::div(Expr::num(0.5), self.clone()),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// Mixed partial `∂t^ot ∂x^ox`.
    pub fn partial(&self, ot: usize, ox: usize) -> Expr {
        let mut e = self.clone();
        for _ in 0..ot {
            e = e.diff(Var::T);
        }
        for _ in 0..ox {
            e = e.diff(Var::X);
        }
        e
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::num(v)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Node::Var(Var::T) => f.write_str("t"),
            Node::Var(Var::X) => f.write_str("x"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "{a}/({b})"),
            Node::Pow(a, b) => write!(f, "({a})^({b})"),
            Node::Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text
                .parse()
                .map_err(|_| Error::Parse { column: start + 1, message: format!("bad number `{text}`") })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { column: i + 1, message: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|(c, _)| *c).unwrap_or(self.len) + 1
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { column: self.column(), message: message.into() })
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat('-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = Expr::mul(acc, self.unary()?);
            } else if self.eat('/') {
                acc = Expr::div(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::neg(self.unary()?));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Expr::pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "t" => return Ok(Expr::t()),
                    "x" => return Ok(Expr::x()),
                    "pi" => return Ok(Expr::num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    "ln" => Func::Ln,
                    "sqrt" => Func::Sqrt,
                    _ => {
                        self.pos -= 1;
                        return self.err(format!("unknown identifier `{name}`"));
                    }
                };
                if !self.eat('(') {
                    return self.err(format!("expected `(` after `{name}`"));
                }
                let arg = self.expr()?;
                if !self.eat(')') {
                    return self.err("expected `)`");
                }
                Ok(Expr::call(func, arg))
            }
            Some(_) => self.err("unexpected token"),
            None => self.err("unexpected end of input"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*3^2^0.5 - -x").unwrap();
        let want = 1.0 + 2.0 * 3f64.powf(2f64.powf(0.5)) + 0.25;
        assert!((e.eval(0.0, 0.25) - want).abs() < 1e-14);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(0.0, 3.0), -9.0);
        assert_eq!(Expr::parse("8/4/2").unwrap().eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sin(pi*x)*exp(-t) + cos(0)").unwrap();
        let v = e.eval(0.5, 0.5);
        assert!((v - ((-0.5f64).exp() + 1.0)).abs() < 1e-15);
        assert!(Expr::parse("1e-3*x").unwrap().eval(0.0, 2.0) == 2e-3);
    }

    #[test]
    fn parse_errors_report_column() {
        match Expr::parse("x + y") {
            Err(Error::Parse { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("sin(x").is_err());
        assert!(Expr::parse("x $ 2").is_err());
        assert!(Expr::parse("(x))").is_err());
    }

    #[test]
    fn derivatives_match_closed_forms() {
        let e = Expr::parse("x^3*sin(t) + exp(2*x*t) / (1 + x^2)").unwrap();
        let (t, x) = (0.3f64, 0.7f64);
        let ex = 3.0 * x * x * t.sin()
            + (2.0 * t * (2.0 * x * t).exp() * (1.0 + x * x) - (2.0 * x * t).exp() * 2.0 * x)
                / (1.0 + x * x).powi(2);
        assert!((e.diff(Var::X).eval(t, x) - ex).abs() < 1e-12);
        let etx = e.partial(1, 1).eval(t, x);
        let h = 1e-4;
        let fd = (e.eval(t + h, x + h) - e.eval(t + h, x - h) - e.eval(t - h, x + h) + e.eval(t - h, x - h))
            / (4.0 * h * h);
        assert!((etx - fd).abs() < 1e-6);
    }

    #[test]
    fn variable_exponent() {
        let e = Expr::parse("x^x").unwrap();
        let x: f64 = 1.3;
        let want = x.powf(x) * (x.ln() + 1.0);
        assert!((e.diff(Var::X).eval(0.0, x) - want).abs() < 1e-12);
    }

    #[test]
    fn constant_folding() {
        let e = Expr::parse("2*3 + 0*x").unwrap();
        assert_eq!(e.as_num(), Some(6.0));
        assert!(!Expr::parse("sin(t)").unwrap().depends_on(Var::X));
        assert_eq!(Expr::polynomial_x(&[1.0, 2.0, 3.0]).eval(0.0, 2.0), 17.0);
    }
}
