//! Minimal dense linear algebra: normal-equation least squares and a
//! power-iteration spectral norm. Row-major storage throughout.

use thiserror::Error;

/// Pivot threshold, relative to the largest pivot, below which the normal
/// matrix is declared rank deficient.
const PIVOT_RTOL: f64 = 1e-10;

/// Relative change in the Rayleigh quotient at which power iteration stops.
const POWER_RTOL: f64 = 1e-13;

const POWER_MAX_ITERS: usize = 10_000;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is rank deficient (pivot ratio below {PIVOT_RTOL:e})")]
    RankDeficient,
    #[error("power iteration did not converge within {POWER_MAX_ITERS} iterations")]
    NonConvergence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Self {
        assert_eq!(
            entries.len(),
            rows * cols,
            "entry count must match dimensions"
        );
        assert!(
            entries.iter().all(|v| v.is_finite()),
            "entries must be finite"
        );
        Self {
            rows,
            cols,
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::new(r, c, rows.concat())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// `A * v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^T * v`.
    pub fn matvec_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            for (acc, a) in out.iter_mut().zip(self.row(i)) {
                *acc += a * vi;
            }
        }
        out
    }

    /// Gram matrix `A^T A`.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut g = Self::zeros(n, n);
        for k in 0..self.rows {
            let row = self.row(k);
            for i in 0..n {
                for j in 0..n {
                    g.entries[i * n + j] += row[i] * row[j];
                }
            }
        }
        g
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Least-squares solution of `A x = b` through the normal equations
/// `A^T A x = A^T b`, solved by Gaussian elimination with partial pivoting.
///
/// Fails with [`LinalgError::RankDeficient`] when any pivot falls below
/// `1e-10` of the largest pivot encountered.
#[allow(clippy::needless_range_loop)]
pub fn least_squares(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} entries for {} rows",
            b.len(),
            a.rows
        )));
    }
    let n = a.cols;
    let mut g = a.gram();
    let mut rhs = a.matvec_transpose(b);

    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|i| (i, g.get(i, k).abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty pivot search");
        if pivot_abs == 0.0 {
            return Err(LinalgError::RankDeficient);
        }
        pivots.push(pivot_abs);
        if pivot_row != k {
            for j in 0..n {
                let tmp = g.get(k, j);
                g.set(k, j, g.get(pivot_row, j));
                g.set(pivot_row, j, tmp);
            }
            rhs.swap(k, pivot_row);
        }
        for i in k + 1..n {
            let factor = g.get(i, k) / g.get(k, k);
            if factor != 0.0 {
                for j in k..n {
                    let v = g.get(i, j) - factor * g.get(k, j);
                    g.set(i, j, v);
                }
                rhs[i] -= factor * rhs[k];
            }
        }
    }
    let max_pivot = pivots.iter().cloned().fold(0.0f64, f64::max);
    if pivots.iter().any(|p| *p <= PIVOT_RTOL * max_pivot) {
        return Err(LinalgError::RankDeficient);
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in k + 1..n {
            acc -= g.get(k, j) * x[j];
        }
        x[k] = acc / g.get(k, k);
    }
    Ok(x)
}

/// Largest singular value via power iteration on `A^T A`.
///
/// Uses a fixed pseudo-random starting vector so results are deterministic.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64, LinalgError> {
    if a.rows == 0 || a.cols == 0 {
        return Ok(0.0);
    }
    // fixed xorshift fill; any vector not orthogonal to the top
    // singular vector works
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut v: Vec<f64> = (0..a.cols)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 + 0.5
        })
        .collect();
    let norm_v = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm_v);

    let mut lambda_prev = f64::INFINITY;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.matvec(&v);
        let u = a.matvec_transpose(&w);
        let lambda = norm2(&u);
        if lambda == 0.0 {
            return Ok(0.0);
        }
        v = u.iter().map(|x| x / lambda).collect();
        if (lambda - lambda_prev).abs() <= POWER_RTOL * lambda {
            return Ok(lambda.sqrt());
        }
        lambda_prev = lambda;
    }
    Err(LinalgError::NonConvergence)
}
