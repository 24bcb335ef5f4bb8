//! Small dense LU with partial pivoting (row-major storage).

use crate::error::{Error, Result};

/// LU factors `PA = LU` of an `n x n` matrix.
#[derive(Clone, Debug)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl DenseLu {
    /// Factor; a zero pivot is an error.
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        let lu = Self::factor_unchecked(n, a);
        if let Some(k) = (0..n).find(|&k| lu.lu[k * n + k] == 0.0) {
            return Err(Error::Singular(format!("zero pivot in column {k}")));
        }
        Ok(lu)
    }

    /// Factor without rejecting zero pivots (for determinants).
    pub fn factor_unchecked(n: usize, a: &[f64]) -> Self {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .unwrap_or(k);
            if p != k {
                for c in 0..n {
                    lu.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let piv = lu[k * n + k];
            if piv == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let l = lu[i * n + k] / piv;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for c in k + 1..n {
                        lu[i * n + c] -= l * lu[k * n + c];
                    }
                }
            }
        }
        DenseLu { n, lu, perm, sign }
    }

    pub fn det(&self) -> f64 {
        (0..self.n).fold(self.sign, |acc, k| acc * self.lu[k * self.n + k])
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&x);
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}

/// Determinant by LU with partial pivoting.
pub fn det(n: usize, a: &[f64]) -> f64 {
    DenseLu::factor_unchecked(n, a).det()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_and_inverse() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        assert!((det(3, &a) + 5.0).abs() < 1e-14);
        let inv = DenseLu::factor(3, &a).unwrap().inverse();
        for i in 0..3 {
            for j in 0..3 {
                let p: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(det(2, &a), 0.0);
        assert!(DenseLu::factor(2, &a).is_err());
    }
}
