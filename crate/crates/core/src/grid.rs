//! Uniform space-time grids, grid functions, trajectories and discrete norms.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::Interval;

/// Uniform grid on `[0, T] × [x_lo, x_hi]` with `nx` interior nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub horizon: f64,
    pub h: f64,
    pub tau: f64,
}

impl Grid {
    pub fn new(domain: Interval, horizon: f64, nx: usize, nt: usize) -> Result<Self> {
        if nx < 1 || nt < 1 {
            return Err(Error::InvalidArgument(format!("grid needs nx, nt >= 1 (got {nx}, {nt})")));
        }
        if !(domain.hi > domain.lo) || !(horizon > 0.0) {
            return Err(Error::InvalidArgument("grid needs a nonempty domain and T > 0".into()));
        }
        Ok(Grid {
            nx,
            nt,
            x_lo: domain.lo,
            x_hi: domain.hi,
            horizon,
            h: domain.len() / (nx + 1) as f64,
            tau: horizon / nt as f64,
        })
    }

    /// Node `i ∈ 0..=nx+1`; `0` and `nx+1` are the Dirichlet boundary.
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Interior node coordinates `x_1 .. x_nx`.
    pub fn interior(&self) -> Vec<f64> {
        (1..=self.nx).map(|i| self.x(i)).collect()
    }
}

/// `m`-component function on the interior nodes, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub m: usize,
    pub nx: usize,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(m: usize, nx: usize) -> Self {
        GridFunction { m, nx, values: vec![0.0; m * nx] }
    }

    /// Sample `f(component, x)` at interior nodes.
    pub fn from_fn(m: usize, grid: &Grid, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut out = Self::zeros(m, grid.nx);
        for c in 0..m {
            for j in 0..grid.nx {
                out.values[c * grid.nx + j] = f(c, grid.x(j + 1));
            }
        }
        out
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.values[c * self.nx..(c + 1) * self.nx]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.values[c * self.nx..(c + 1) * self.nx]
    }

    /// `h Σ a b`.
    pub fn dot(&self, other: &GridFunction, h: f64) -> f64 {
        h * dot(&self.values, &other.values)
    }

    pub fn norm(&self, h: f64) -> f64 {
        self.dot(self, h).sqrt()
    }

    pub fn scaled(&self, s: f64) -> GridFunction {
        GridFunction { m: self.m, nx: self.nx, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &GridFunction) {
        self.values.iter_mut().zip(&x.values).for_each(|(y, x)| *y += a * x);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Time-indexed family of `m`-component grid functions, `[n][component][node]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub grid: Grid,
    pub m: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(grid: &Grid, m: usize) -> Self {
        Trajectory { grid: *grid, m, values: vec![0.0; (grid.nt + 1) * m * grid.nx] }
    }

    /// Sample `f(component, t, x)` at all time levels and interior nodes.
    pub fn from_fn(grid: &Grid, m: usize, f: impl Fn(usize, f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid, m);
        for n in 0..=grid.nt {
            let slice = out.slice_mut(n);
            for c in 0..m {
                for j in 0..grid.nx {
                    slice[c * grid.nx + j] = f(c, grid.t(n), grid.x(j + 1));
                }
            }
        }
        out
    }

    fn stride(&self) -> usize {
        self.m * self.grid.nx
    }

    /// Time level `n`, component-major.
    pub fn slice(&self, n: usize) -> &[f64] {
        let s = self.stride();
        &self.values[n * s..(n + 1) * s]
    }

    pub fn slice_mut(&mut self, n: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.values[n * s..(n + 1) * s]
    }

    /// Value at time `n`, component `c`, interior node `i ∈ 1..=nx`.
    pub fn get(&self, n: usize, c: usize, i: usize) -> f64 {
        self.values[n * self.stride() + c * self.grid.nx + i - 1]
    }

    pub fn set(&mut self, n: usize, c: usize, i: usize, v: f64) {
        let s = self.stride();
        let nx = self.grid.nx;
        self.values[n * s + c * nx + i - 1] = v;
    }

    pub fn at(&self, n: usize) -> GridFunction {
        GridFunction { m: self.m, nx: self.grid.nx, values: self.slice(n).to_vec() }
    }

    pub fn set_level(&mut self, n: usize, f: &GridFunction) {
        self.slice_mut(n).copy_from_slice(&f.values);
    }

    pub fn terminal(&self) -> GridFunction {
        self.at(self.grid.nt)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Keep components `first..first+count`.
    pub fn components(&self, first: usize, count: usize) -> Trajectory {
        let nx = self.grid.nx;
        let mut out = Trajectory::zeros(&self.grid, count);
        for n in 0..=self.grid.nt {
            out.slice_mut(n).copy_from_slice(&self.slice(n)[first * nx..(first + count) * nx]);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Trajectory {
        Trajectory { grid: self.grid, m: self.m, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self − other`.
    pub fn minus(&self, other: &Trajectory) -> Trajectory {
        assert_eq!((self.m, self.values.len()), (other.m, other.values.len()));
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Trajectory { grid: self.grid, m: self.m, values }
    }

    /// One row per (time, node, component): `t,x,component,value`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,component,value")?;
        for n in 0..=self.grid.nt {
            for c in 0..self.m {
                for i in 1..=self.grid.nx {
                    writeln!(
                        w,
                        "{:.16e},{:.16e},{},{:.16e}",
                        self.grid.t(n),
                        self.grid.x(i),
                        c + 1,
                        self.get(n, c, i)
                    )?;
                }
            }
        }
        Ok(())
    }

    /// Little-endian dump: `u64 nx, u64 nt, u64 m`, then `f64` values in `[n][c][i]` order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        for v in [self.grid.nx as u64, self.grid.nt as u64, self.m as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Inverse of `write_binary` on a known grid.
    pub fn read_binary(bytes: &[u8], grid: &Grid) -> Result<Self> {
        let word = |k: usize| -> Result<[u8; 8]> {
            bytes
                .get(8 * k..8 * k + 8)
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| Error::InvalidArgument("truncated trajectory dump".into()))
        };
        let nx = u64::from_le_bytes(word(0)?) as usize;
        let nt = u64::from_le_bytes(word(1)?) as usize;
        let m = u64::from_le_bytes(word(2)?) as usize;
        if nx != grid.nx || nt != grid.nt {
            return Err(Error::InvalidArgument("dump does not match the grid".into()));
        }
        let count = (nt + 1) * m * nx;
        let values = (0..count).map(|k| word(3 + k).map(f64::from_le_bytes)).collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { grid: *grid, m, values })
    }
}

/// Discrete norms on interior nodes (boundary values are zero).
pub struct DiscreteNorms;

impl DiscreteNorms {
    /// `(h Σ u²)^{1/2}` over all components of one level.
    pub fn l2_space(u: &[f64], h: f64) -> f64 {
        (h * dot(u, u)).sqrt()
    }

    /// `(τ h Σ_n Σ u²)^{1/2}`.
    pub fn l2_spacetime(u: &Trajectory) -> f64 {
        (u.grid.tau * u.grid.h * dot(u.values(), u.values())).sqrt()
    }

    /// Discrete `H¹₀` norm of one level: `L²` plus forward-difference gradient.
    pub fn h1_space(u: &[f64], m: usize, h: f64) -> f64 {
        let nx = u.len() / m;
        let mut grad = 0.0;
        for c in 0..m {
            let s = &u[c * nx..(c + 1) * nx];
            let at = |i: isize| if i < 0 || i >= nx as isize { 0.0 } else { s[i as usize] };
            for i in -1..nx as isize {
                let d = (at(i + 1) - at(i)) / h;
                grad += d * d;
            }
        }
        (Self::l2_space(u, h).powi(2) + h * grad).sqrt()
    }

    /// `W^{2,1}_2`-type norm: value, `∂ₓ`, `∂ₓₓ` and `∂ₜ` in `L²(Q_T)`.
    pub fn w21_like(u: &Trajectory) -> W21Parts {
        let g = u.grid;
        let nx = g.nx;
        let (mut v, mut dx, mut dxx, mut dt) = (0.0, 0.0, 0.0, 0.0);
        for n in 0..=g.nt {
            let s = u.slice(n);
            for c in 0..u.m {
                let row = &s[c * nx..(c + 1) * nx];
                let at = |i: isize| if i < 0 || i >= nx as isize { 0.0 } else { row[i as usize] };
                for i in 0..nx as isize {
                    let x0 = at(i);
                    v += x0 * x0;
                    let d1 = (at(i + 1) - at(i - 1)) / (2.0 * g.h);
                    let d2 = (at(i + 1) - 2.0 * x0 + at(i - 1)) / (g.h * g.h);
                    dx += d1 * d1;
                    dxx += d2 * d2;
                }
            }
            if n < g.nt {
                let next = u.slice(n + 1);
                dt += s.iter().zip(next).map(|(a, b)| ((b - a) / g.tau).powi(2)).sum::<f64>();
            }
        }
        let w = g.tau * g.h;
        W21Parts { l2: (w * v).sqrt(), dx: (w * dx).sqrt(), dxx: (w * dxx).sqrt(), dt: (w * dt).sqrt() }
    }
}

/// Components of a discrete `W^{2,1}_2` norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct W21Parts {
    pub l2: f64,
    pub dx: f64,
    pub dxx: f64,
    pub dt: f64,
}

impl W21Parts {
    pub fn total(&self) -> f64 {
        (self.l2.powi(2) + self.dx.powi(2) + self.dxx.powi(2) + self.dt.powi(2)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(Interval::new(0.0, 1.0), 1.0, 9, 4).unwrap()
    }

    #[test]
    fn spacing_and_nodes() {
        let g = grid();
        assert!((g.h - 0.1).abs() < 1e-15);
        assert_eq!(g.x(10), 1.0);
        assert_eq!(g.interior().len(), 9);
        assert!(Grid::new(Interval::new(1.0, 0.0), 1.0, 3, 3).is_err());
    }

    #[test]
    fn binary_roundtrip() {
        let g = grid();
        let tr = Trajectory::from_fn(&g, 2, |c, t, x| c as f64 + t * x);
        let mut buf = Vec::new();
        tr.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 8 * 5 * 2 * 9);
        assert_eq!(Trajectory::read_binary(&buf, &g).unwrap(), tr);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = grid();
        let tr = Trajectory::zeros(&g, 1);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 9);
        assert!(text.starts_with("t,x,component,value\n"));
    }

    #[test]
    fn norms_vanish_only_at_zero() {
        let g = grid();
        let z = Trajectory::zeros(&g, 2);
        assert_eq!(DiscreteNorms::w21_like(&z).total(), 0.0);
        let u = Trajectory::from_fn(&g, 2, |_, t, x| t * (std::f64::consts::PI * x).sin());
        let w = DiscreteNorms::w21_like(&u);
        assert!(w.l2 > 0.0 && w.dx > 0.0 && w.dxx > 0.0 && w.dt > 0.0);
        assert!(DiscreteNorms::h1_space(u.slice(4), 2, g.h) > DiscreteNorms::l2_space(u.slice(4), g.h));
    }
}
