//! Banded matrices and LU with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` convention: column `j` holds rows
//! `j − ku − kl ..= j + kl`, with `kl` extra superdiagonals reserved for
//! fill-in from row interchanges.

use crate::error::{Error, Result};

/// Square banded matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, ld, data: vec![0.0; ld * n] }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut a = Self::zeros(n, kl, ku);
        for i in 0..n {
            a.set(i, i, 1.0);
        }
        a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i + self.ku >= j && j + self.kl >= i
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// `self = alpha·self + beta·I`.
    pub fn scale_shift(&mut self, alpha: f64, beta: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
        for i in 0..self.n {
            self.add(i, i, beta);
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            *yi = (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum();
        }
    }

    /// `y = Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate().take(self.n) {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            *yj = (lo..=hi).map(|i| self.data[self.idx(i, j)] * x[i]).sum();
        }
    }

    /// LU with partial pivoting; a zero pivot is an error.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = self.data[self.idx(j, j)].abs();
            for r in 1..=km {
                let v = self.data[self.idx(j + r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[j] = j + p;
            if best == 0.0 {
                return Err(Error::Singular(format!("banded LU: zero pivot in column {j}")));
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let (a, b) = (self.idx(j, c), self.idx(j + p, c));
                    self.data.swap(a, b);
                }
            }
            if km > 0 {
                let inv = 1.0 / self.data[self.idx(j, j)];
                for r in 1..=km {
                    let k = self.idx(j + r, j);
                    self.data[k] *= inv;
                }
                for c in j + 1..=ju {
                    let ujc = self.data[self.idx(j, c)];
                    if ujc != 0.0 {
                        for r in 1..=km {
                            let l = self.data[self.idx(j + r, j)];
                            let k = self.idx(j + r, c);
                            self.data[k] -= l * ujc;
                        }
                    }
                }
            }
        }
        Ok(BandLu { a: self, piv })
    }
}

/// Factored banded matrix.
#[derive(Clone, Debug)]
pub struct BandLu {
    a: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.a.n
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for r in 1..=km {
                    b[j + r] -= a.data[a.idx(j + r, j)] * bj;
                }
            }
        }
        let w = a.kl + a.ku;
        for j in (0..n).rev() {
            b[j] /= a.data[a.idx(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(w)..j {
                    b[i] -= a.data[a.idx(i, j)] * bj;
                }
            }
        }
    }

    /// Solve `Aᵀ x = b` in place.
    pub fn solve_transpose(&self, b: &mut [f64]) {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        let w = a.kl + a.ku;
        for j in 0..n {
            let s: f64 = (j.saturating_sub(w)..j).map(|i| a.data[a.idx(i, j)] * b[i]).sum();
            b[j] = (b[j] - s) / a.data[a.idx(j, j)];
        }
        for j in (0..n).rev() {
            let km = kl.min(n - 1 - j);
            let s: f64 = (1..=km).map(|r| a.data[a.idx(j + r, j)] * b[j + r]).sum();
            b[j] -= s;
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }
}
