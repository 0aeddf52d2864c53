//! Banded LU factorization and quadrature rules.

use nalgebra_sparse::CsrMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is singular at pivot {0}")]
pub struct SingularMatrix(pub usize);

/// LU factorization with partial pivoting of a banded matrix.
///
/// Storage follows the LAPACK `gbtrf` layout: row `i` keeps columns
/// `i - kl ..= i + ku + kl`, the extra `kl` superdiagonals absorbing fill-in
/// from row interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix<f64>) -> Result<Self, SingularMatrix> {
        let n = a.nrows();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.triplet_iter() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu { n, kl, ku, width, data: vec![0.0; n * width], pivots: vec![0; n] };
        for (i, j, v) in a.triplet_iter() {
            *lu.at_mut(i, j) += *v;
        }
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    fn eliminate(&mut self) -> Result<(), SingularMatrix> {
        let n = self.n;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.ku + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in (k + 1)..=last_row {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= scale * 1e-14 {
                return Err(SingularMatrix(k));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in (k + 1)..=last_row {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l == 0.0 {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let u = self.at(k, j);
                    *self.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let last_row = (k + self.kl).min(n - 1);
            let xk = x[k];
            for i in (k + 1)..=last_row {
                x[i] -= self.at(i, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.ku + self.kl).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=last_col {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}

/// Sparse matrix-vector product.
pub fn spmv(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (i, row) in a.row_iter().enumerate() {
        y[i] = row.col_indices().iter().zip(row.values()).map(|(&j, v)| v * x[j]).sum();
    }
    y
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite quadrature weights for samples `t` of a function that is smooth
/// between consecutive `breaks` (indices where a new smooth piece starts).
///
/// Uniformly spaced pieces use Simpson's rule, closing with the 3/8 rule when
/// the number of intervals is odd; other pieces fall back to the trapezoid
/// rule. The interval bridging two pieces gets trapezoid weights.
pub fn composite_weights(t: &[f64], breaks: &[usize]) -> Vec<f64> {
    let n = t.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let mut starts: Vec<usize> = std::iter::once(0).chain(breaks.iter().copied().filter(|&b| b > 0 && b < n)).collect();
    starts.dedup();
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(n); // piece is s..e
        piece_weights(&t[s..e], &mut w[s..e]);
        if e < n {
            let dt = t[e] - t[e - 1];
            w[e - 1] += 0.5 * dt;
            w[e] += 0.5 * dt;
        }
    }
    w
}

fn piece_weights(t: &[f64], w: &mut [f64]) {
    let n = t.len();
    if n < 2 {
        return;
    }
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    let uniform = t.windows(2).all(|p| ((p[1] - p[0]) - h).abs() <= 1e-9 * h.abs());
    let intervals = n - 1;
    if !uniform || intervals < 2 {
        for i in 0..intervals {
            let dt = t[i + 1] - t[i];
            w[i] += 0.5 * dt;
            w[i + 1] += 0.5 * dt;
        }
        return;
    }
    let simpson_intervals = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for i in (0..simpson_intervals).step_by(2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    if simpson_intervals < intervals {
        let s = simpson_intervals;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
}
