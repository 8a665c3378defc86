use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::squared_distance;
use super::linalg::solve_bordered;
use super::model::Standardizer;
use super::rows::TrainingRow;
use crate::{Error, Result};

/// Actual values below this are left out of MAPE.
const MAPE_FLOOR_KW: f64 = 0.01;
/// MAPE differences (percentage points) below this count as ties.
const TIE_TOLERANCE: f64 = 1e-9;

/// `100 · mean(|pred − actual| / actual)` over slots with `actual ≥ 0.01` kW.
pub fn mape(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() {
        return Err(Error::DimensionMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    if actual.is_empty() {
        return Err(Error::InsufficientData("MAPE of an empty sequence".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (p, a) in pred.iter().zip(actual) {
        if *a >= MAPE_FLOOR_KW {
            sum += (p - a).abs() / a;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput(
            "MAPE undefined: every actual value is (near) zero".into(),
        ));
    }
    Ok(100.0 * sum / n as f64)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k_folds: usize,
    pub lag_grid: Vec<usize>,
    pub sigma_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k_folds: 5,
            lag_grid: vec![2, 4, 8, 16, 24, 48, 96],
            sigma_grid: log_grid(0.1, 100.0, 8),
            gamma_grid: log_grid(1.0, 1e4, 9),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_folds < 2 {
            return Err(Error::InvalidInput("k_folds must be at least 2".into()));
        }
        if self.lag_grid.is_empty() || self.sigma_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(Error::InvalidInput("cross-validation grids must be non-empty".into()));
        }
        if self.lag_grid.contains(&0) {
            return Err(Error::InvalidInput("lag candidates must be at least 1".into()));
        }
        if self
            .sigma_grid
            .iter()
            .chain(&self.gamma_grid)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidInput("σ and γ candidates must be positive".into()));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.lag_grid.iter().copied().max().unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub n_lag: usize,
    pub sigma: f64,
    pub gamma: f64,
    /// Mean validation MAPE (percent) across folds.
    pub mape: f64,
}

/// Contiguous block folds over `n` rows.
fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|f| (f * n / k, (f + 1) * n / k)).collect()
}

/// Grid search with k contiguous folds; returns the candidate with the lowest
/// mean validation MAPE (ties: smaller n_lag, then smaller γ, then smaller σ).
///
/// `rows` must carry at least `config.max_lag()` lags; each lag candidate uses
/// the most recent lags of the same rows. Inputs are standardized with the
/// statistics of all `rows`.
pub fn cross_validate(rows: &[TrainingRow], config: &CvConfig) -> Result<CvOutcome> {
    config.validate()?;
    let n = rows.len();
    let k = config.k_folds;
    if n < 2 * k {
        return Err(Error::InsufficientData(format!(
            "{n} rows cannot form {k} contiguous folds"
        )));
    }
    let available = rows.iter().map(|r| r.x.n_lag()).min().unwrap_or(0);
    if available < config.max_lag() {
        return Err(Error::InsufficientData(format!(
            "rows carry {available} lags but the grid asks for {}",
            config.max_lag()
        )));
    }
    let mut lags = config.lag_grid.clone();
    lags.sort_unstable();
    lags.dedup();
    let mut gammas = config.gamma_grid.clone();
    gammas.sort_by(f64::total_cmp);
    let mut sigmas = config.sigma_grid.clone();
    sigmas.sort_by(f64::total_cmp);

    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let folds = fold_bounds(n, k);
    let mut best: Option<CvOutcome> = None;

    for &n_lag in &lags {
        let scores = score_lag(rows, &targets, n_lag, &folds, &sigmas, &gammas)?;
        for (gi, &gamma) in gammas.iter().enumerate() {
            for (si, &sigma) in sigmas.iter().enumerate() {
                let Some(m) = scores[si][gi] else { continue };
                if best.map_or(true, |b| m < b.mape - TIE_TOLERANCE) {
                    best = Some(CvOutcome {
                        n_lag,
                        sigma,
                        gamma,
                        mape: m,
                    });
                }
            }
        }
    }
    best.ok_or_else(|| Error::InsufficientData("every cross-validation candidate failed".into()))
}

/// Mean fold MAPE for every (σ, γ) at a fixed lag; `None` marks a failed candidate.
fn score_lag(
    rows: &[TrainingRow],
    targets: &[f64],
    n_lag: usize,
    folds: &[(usize, usize)],
    sigmas: &[f64],
    gammas: &[f64],
) -> Result<Vec<Vec<Option<f64>>>> {
    let n = rows.len();
    let dim = n_lag + 1;
    let truncated: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let x = r.x.as_slice();
            let mut v = x[..n_lag].to_vec();
            v.push(r.x.temp());
            v
        })
        .collect();
    let st = Standardizer::fit(truncated.iter().map(Vec::as_slice))?;
    let mut z = Vec::with_capacity(n * dim);
    for x in &truncated {
        st.apply_into(x, &mut z);
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        let zi = &z[i * dim..(i + 1) * dim];
        for j in 0..i {
            let d = squared_distance(zi, &z[j * dim..(j + 1) * dim]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut sums = vec![vec![Some(0.0); gammas.len()]; sigmas.len()];
    for &(vs, ve) in folds {
        let train_idx: Vec<usize> = (0..vs).chain(ve..n).collect();
        let nt = train_idx.len();
        let nv = ve - vs;
        let mut d_tt = vec![0.0; nt * nt];
        for (a, &i) in train_idx.iter().enumerate() {
            for (b, &j) in train_idx.iter().enumerate() {
                d_tt[a * nt + b] = dist[i * n + j];
            }
        }
        let mut d_vt = vec![0.0; nv * nt];
        for v in 0..nv {
            for (b, &j) in train_idx.iter().enumerate() {
                d_vt[v * nt + b] = dist[(vs + v) * n + j];
            }
        }
        let y_train: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
        let y_val = &targets[vs..ve];

        let per_sigma: Vec<Vec<Option<f64>>> = sigmas
            .par_iter()
            .map(|&sigma| {
                let inv = 1.0 / (sigma * sigma);
                let omega: Vec<f64> = d_tt.iter().map(|d| (-d * inv).exp()).collect();
                let k_vt: Vec<f64> = d_vt.iter().map(|d| (-d * inv).exp()).collect();
                gammas
                    .iter()
                    .map(|&gamma| {
                        let mut h = omega.clone();
                        for i in 0..nt {
                            h[i * nt + i] += 1.0 / gamma;
                        }
                        let (alphas, bias) = solve_bordered(h, nt, &y_train).ok()?;
                        let pred: Vec<f64> = k_vt
                            .chunks_exact(nt)
                            .map(|row| row.iter().zip(&alphas).map(|(k, a)| k * a).sum::<f64>() + bias)
                            .collect();
                        mape(&pred, y_val).ok().filter(|m| m.is_finite())
                    })
                    .collect()
            })
            .collect();
        for (si, row) in per_sigma.into_iter().enumerate() {
            for (gi, m) in row.into_iter().enumerate() {
                sums[si][gi] = match (sums[si][gi], m) {
                    (Some(acc), Some(m)) => Some(acc + m),
                    _ => None,
                };
            }
        }
    }
    let k = folds.len() as f64;
    Ok(sums
        .into_iter()
        .map(|row| row.into_iter().map(|s| s.map(|v| v / k)).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lssvm::{train, ExplanatoryVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mape_definition() {
        let a = [1.0, 2.0, 4.0];
        assert_eq!(mape(&a, &a).unwrap(), 0.0);
        let p: Vec<f64> = a.iter().map(|v| v * 1.1).collect();
        assert!((mape(&p, &a).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mape_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<f64> = (0..50).map(|_| rng.random_range(0.5..10.0)).collect();
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.5..10.0)).collect();
        let mut total = 0.0;
        for i in 0..50 {
            let e = p[i] - a[i];
            total += if e < 0.0 { -e } else { e } / a[i];
        }
        let expected = total * 2.0; // 100 / 50
        assert!((mape(&p, &a).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn mape_errors() {
        assert!(mape(&[], &[]).is_err());
        assert!(mape(&[1.0], &[0.0]).is_err());
        assert!(mape(&[1.0], &[1.0, 2.0]).is_err());
        // Near-zero actuals are skipped, the rest still count.
        assert_eq!(mape(&[5.0, 2.0], &[0.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.1, 100.0, 8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 0.1).abs() < 1e-15 && (g[7] - 100.0).abs() < 1e-12);
        assert_eq!(log_grid(3.0, 9.0, 1), vec![3.0]);
    }

    fn noisy_rows(n: usize, n_lag: usize, seed: u64) -> Vec<TrainingRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut series = vec![100.0; n + n_lag];
        for t in n_lag..series.len() {
            series[t] = 60.0 + 0.4 * series[t - 1] + rng.random_range(-3.0..3.0);
        }
        (n_lag..series.len())
            .map(|t| {
                let lags: Vec<f64> = (1..=n_lag).map(|k| series[t - k]).collect();
                TrainingRow {
                    x: ExplanatoryVector::new(&lags, 25.0 + (t % 7) as f64),
                    target: series[t],
                    slot: t,
                }
            })
            .collect()
    }

    #[test]
    fn single_candidate_is_returned() {
        let rows = noisy_rows(60, 3, 1);
        let cfg = CvConfig {
            k_folds: 3,
            lag_grid: vec![2],
            sigma_grid: vec![1.7],
            gamma_grid: vec![42.0],
        };
        let out = cross_validate(&rows, &cfg).unwrap();
        assert_eq!((out.n_lag, out.sigma, out.gamma), (2, 1.7, 42.0));
    }

    #[test]
    fn self_consistent_kernel_model_is_recovered() {
        // Targets generated noise-free by a kernel model drawn from the grid.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis: Vec<TrainingRow> = noisy_rows(30, 2, 2);
        let generator = train(&basis, 2.0, 1e3).unwrap();
        let rows: Vec<TrainingRow> = (0..150)
            .map(|slot| {
                let lags = [rng.random_range(95.0..115.0), rng.random_range(95.0..115.0)];
                let x = ExplanatoryVector::new(&lags, rng.random_range(25.0..32.0));
                let target = generator.predict(&x).unwrap();
                TrainingRow { x, target, slot }
            })
            .collect();
        let cfg = CvConfig {
            k_folds: 5,
            lag_grid: vec![2],
            sigma_grid: log_grid(0.5, 8.0, 5),
            gamma_grid: log_grid(10.0, 1e5, 5),
        };
        let out = cross_validate(&rows, &cfg).unwrap();
        assert!(out.mape < 1.0, "validation MAPE {}", out.mape);
    }

    #[test]
    fn ties_prefer_smaller_lag_then_gamma() {
        // Constant targets: every candidate predicts perfectly.
        let rows: Vec<TrainingRow> = (0..40)
            .map(|slot| TrainingRow {
                x: ExplanatoryVector::new(&[5.0 + (slot % 3) as f64, 5.0, 5.0], 20.0),
                target: 5.0,
                slot,
            })
            .collect();
        let cfg = CvConfig {
            k_folds: 4,
            lag_grid: vec![3, 1],
            sigma_grid: vec![2.0, 1.0],
            gamma_grid: vec![100.0, 10.0],
        };
        let out = cross_validate(&rows, &cfg).unwrap();
        assert!(out.mape < 1e-9);
        assert_eq!(out.n_lag, 1);
        assert_eq!(out.gamma, 10.0);
        assert_eq!(out.sigma, 1.0);
    }

    #[test]
    fn too_few_rows() {
        let rows = noisy_rows(5, 2, 3);
        let cfg = CvConfig {
            k_folds: 5,
            lag_grid: vec![2],
            ..CvConfig::default()
        };
        assert!(matches!(cross_validate(&rows, &cfg), Err(Error::InsufficientData(_))));
    }
}
