//! Weighted ridge regression on sparse feature rows.

use crate::error::{Error, Result};

/// A feature row as (index, value) pairs.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factor a symmetric positive-definite row-major `n x n` matrix.
    pub fn factor(a: &[f64], n: usize, ridge: f64) -> Result<Self> {
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(s > 1e-12 * a[i * n + i].abs().max(1e-300)) || !s.is_finite() {
                        return Err(Error::Singular { ridge });
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }
}

#[derive(Debug, Clone)]
enum Factor {
    /// One-hot design: the normal matrix is diagonal.
    Diagonal(Vec<f64>),
    Dense(Cholesky),
}

/// Factored normal equations `(X' W X + ridge I) w = X' W y` for a fixed
/// design, so repeated solves against new targets are cheap. In the one-hot
/// case a column with no data gets weight zero (the minimum-norm solution).
#[derive(Debug, Clone)]
pub struct RidgeSystem {
    dim: usize,
    factor: Factor,
}

impl RidgeSystem {
    pub fn new(rows: &[SparseRow], weights: Option<&[f64]>, dim: usize, ridge: f64, one_hot: bool) -> Result<Self> {
        if !(ridge >= 0.0) {
            return Err(Error::InvalidParam(format!("ridge must be >= 0, got {ridge}")));
        }
        let w = |i: usize| weights.map_or(1.0, |w| w[i]);
        let factor = if one_hot {
            let mut diag = vec![ridge; dim];
            for (i, row) in rows.iter().enumerate() {
                for &(j, v) in row {
                    diag[j] += w(i) * v * v;
                }
            }
            Factor::Diagonal(diag)
        } else {
            let mut a = vec![0.0; dim * dim];
            for (i, row) in rows.iter().enumerate() {
                let wi = w(i);
                if wi == 0.0 {
                    continue;
                }
                for &(j, vj) in row {
                    let base = j * dim;
                    for &(k, vk) in row {
                        if k <= j {
                            a[base + k] += wi * vj * vk;
                        }
                    }
                }
            }
            for j in 0..dim {
                for k in 0..j {
                    a[k * dim + j] = a[j * dim + k];
                }
                a[j * dim + j] += ridge;
            }
            Factor::Dense(Cholesky::factor(&a, dim, ridge)?)
        };
        Ok(RidgeSystem { dim, factor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve for one target column.
    pub fn solve(&self, rows: &[SparseRow], weights: Option<&[f64]>, targets: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.dim];
        for (i, row) in rows.iter().enumerate() {
            let wy = weights.map_or(1.0, |w| w[i]) * targets[i];
            for &(j, v) in row {
                b[j] += wy * v;
            }
        }
        match &self.factor {
            Factor::Diagonal(d) => b.iter().zip(d).map(|(bj, dj)| if *dj > 0.0 { bj / dj } else { 0.0 }).collect(),
            Factor::Dense(c) => c.solve(&b),
        }
    }
}

pub fn dot_sparse(row: &SparseRow, w: &[f64]) -> f64 {
    row.iter().map(|&(j, v)| v * w[j]).sum()
}
