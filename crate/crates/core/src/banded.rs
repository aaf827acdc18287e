//! Symmetric band matrices and their Cholesky factors.

use crate::error::{Error, Result};

/// Symmetric `n x n` matrix with half-bandwidth `p`, lower band stored by row.
///
/// Entry `(i, j)` with `i - p <= j <= i` lives at `i * (p + 1) + (i - j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, p, data: vec![0.0; n * (p + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.p);
        i * (self.p + 1) + (i - j)
    }

    /// Entry `(i, j)`, zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.p {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to `(i, j)` (and by symmetry to `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.p + 1)]
    }

    /// Largest `|i - j|` over nonzero entries.
    pub fn effective_bandwidth(&self) -> usize {
        let mut w = 0;
        for i in 0..self.n {
            for k in 1..=self.p.min(i) {
                if self.data[i * (self.p + 1) + k] != 0.0 {
                    w = w.max(k);
                }
            }
        }
        w
    }

    /// `self + diag(d)`.
    pub fn plus_diag(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for (i, v) in d.iter().enumerate() {
            m.data[i * (m.p + 1)] += v;
        }
        m
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * (self.p + 1)..(i + 1) * (self.p + 1)];
            y[i] += row[0] * x[i];
            for k in 1..=self.p.min(i) {
                let j = i - k;
                y[i] += row[k] * x[j];
                y[j] += row[k] * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Lower Cholesky factor `L` with `self = L L^T`.
    pub fn cholesky(&self, which: &'static str) -> Result<BandCholesky> {
        let (n, p) = (self.n, self.p);
        let w = p + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let mut sum = self.data[i * w + (i - j)];
                for k in j0.max(j.saturating_sub(p))..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::NotPositiveDefinite { which, pivot: i });
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(BandCholesky { n, p, data: l })
    }

    /// Cholesky with one retry after inflating the diagonal by a relative `1e-10`.
    pub fn cholesky_with_jitter(&self, which: &'static str) -> Result<BandCholesky> {
        self.cholesky(which).or_else(|_| {
            let bumped: Vec<f64> = (0..self.n).map(|i| 1e-10 * self.diag(i).abs().max(f64::MIN_POSITIVE)).collect();
            self.plus_diag(&bumped).cholesky(which)
        })
    }
}

/// Lower-triangular band factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCholesky {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.p {
            0.0
        } else {
            self.data[i * (self.p + 1) + (i - j)]
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * (self.p + 1)]
    }

    /// `sum_i ln L_ii`.
    pub fn log_diag_sum(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i).ln()).sum()
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let w = self.p + 1;
        let mut z = b.to_vec();
        for i in 0..self.n {
            let mut s = z[i];
            for k in 1..=self.p.min(i) {
                s -= self.data[i * w + k] * z[i - k];
            }
            z[i] = s / self.data[i * w];
        }
        z
    }

    /// Solves `L^T x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let w = self.p + 1;
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            x[i] /= self.data[i * w];
            let xi = x[i];
            for k in 1..=self.p.min(i) {
                x[i - k] -= self.data[i * w + k] * xi;
            }
        }
        x
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}
