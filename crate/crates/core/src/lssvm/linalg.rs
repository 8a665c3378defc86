//! Dense Cholesky factorization for the symmetric positive-definite block
//! `Ω + I/γ`, plus the Schur-complement elimination of the bias row.

use crate::{Error, Result};

/// Lower-triangular factor stored row-major in an `n × n` buffer.
pub(crate) struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the symmetric matrix `a` (row-major, lower triangle read).
    pub(crate) fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        debug_assert_eq!(a.len(), n * n);
        for j in 0..n {
            let (head, tail) = a.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..j * n + n];
            let d = row_j[j] - dot(&row_j[..j], &row_j[..j]);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver(format!(
                    "matrix not positive definite at pivot {j} (value {d:e})"
                )));
            }
            let ljj = d.sqrt();
            row_j[j] = ljj;
            let row_j = &head[j * n..j * n + j];
            for row_i in tail.chunks_exact_mut(n) {
                let s = row_i[j] - dot(&row_i[..j], row_j);
                row_i[j] = s / ljj;
            }
        }
        Ok(Self { n, l: a })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            y[i] /= self.l[i * n + i];
            let xi = y[i];
            let row = &self.l[i * n..i * n + i];
            for (yk, lik) in y[..i].iter_mut().zip(row) {
                *yk -= lik * xi;
            }
        }
        y
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = c * 4;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in chunks * 4..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Solves the bordered LS-SVM system given `H = Ω + I/γ` (row-major, full).
///
/// With `η = H⁻¹1` and `ν = H⁻¹y`: `b = 1ᵀν / 1ᵀη`, `α = ν − bη`.
pub(crate) fn solve_bordered(h: Vec<f64>, n: usize, targets: &[f64]) -> Result<(Vec<f64>, f64)> {
    let chol = Cholesky::factor(h, n)?;
    let eta = chol.solve(&vec![1.0; n]);
    let nu = chol.solve(targets);
    let s: f64 = eta.iter().sum();
    let bias = nu.iter().sum::<f64>() / s;
    let alphas = nu.iter().zip(&eta).map(|(v, e)| v - bias * e).collect();
    Ok((alphas, bias))
}
