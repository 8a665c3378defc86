#![allow(dead_code)]

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// z-scores each column with the population standard deviation; constant
/// columns keep unit scale.
pub fn zscore(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut out = x.to_vec();
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
        let sd = if v.sqrt() > 1e-12 * m.abs().max(1.0) { v.sqrt() } else { 1.0 };
        for r in out.iter_mut() {
            r[j] = (r[j] - m) / sd;
        }
    }
    out
}

/// `(α, b)` from the full `(N+1)×(N+1)` LS-SVM system, built and solved
/// without any library code.
pub fn lssvm_dense(x: &[Vec<f64>], y: &[f64], sigma: f64, gamma: f64) -> (Vec<f64>, f64) {
    let z = zscore(x);
    let n = y.len();
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        a[0][i + 1] = 1.0;
        a[i + 1][0] = 1.0;
        for j in 0..n {
            let d2: f64 = z[i].iter().zip(&z[j]).map(|(p, q)| (p - q).powi(2)).sum();
            a[i + 1][j + 1] = (-d2 / (sigma * sigma)).exp();
        }
        a[i + 1][i + 1] += 1.0 / gamma;
    }
    let mut rhs = vec![0.0];
    rhs.extend_from_slice(y);
    let sol = gauss_solve(a, rhs);
    (sol[1..].to_vec(), sol[0])
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
