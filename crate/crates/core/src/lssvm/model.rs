use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kernel::squared_distance;
use super::linalg::solve_bordered;
use super::rows::{ExplanatoryVector, TrainingRow};
use crate::stats;
use crate::{Error, Result};

/// Per-feature z-score statistics taken from the training inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(inputs: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sum_sq: Vec<f64> = Vec::new();
        for x in inputs {
            if sum.is_empty() {
                sum = vec![0.0; x.len()];
                sum_sq = vec![0.0; x.len()];
            } else if x.len() != sum.len() {
                return Err(Error::DimensionMismatch {
                    expected: sum.len(),
                    got: x.len(),
                });
            }
            for (j, v) in x.iter().enumerate() {
                sum[j] += v;
                sum_sq[j] += v * v;
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::InsufficientData("no inputs to standardize".into()));
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / nf - m * m).max(0.0);
                let sd = var.sqrt();
                // Constant features (e.g. a single training row) keep unit scale.
                if sd > 1e-12 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.extend(x.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s));
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out);
        out
    }
}

/// A trained LS-SVM regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct LssvmModel {
    n_lag: usize,
    sigma: f64,
    gamma: f64,
    bias: f64,
    alphas: Vec<f64>,
    standardizer: Standardizer,
    train_inputs: Vec<ExplanatoryVector>,
    /// Standardized training inputs, row-major `N × (n_lag + 1)`.
    z: Vec<f64>,
    residual_mean: f64,
    residual_std: f64,
}

/// On-disk form of [`LssvmModel`].
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    kind: String,
    n_lag: usize,
    sigma: f64,
    gamma: f64,
    bias: f64,
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
    alphas: Vec<f64>,
    train_inputs: Vec<ExplanatoryVector>,
    residual_mean: f64,
    residual_std: f64,
}

const DOCUMENT_KIND: &str = "lssvm-narx";

impl From<LssvmModel> for ModelDocument {
    fn from(m: LssvmModel) -> Self {
        Self {
            kind: DOCUMENT_KIND.into(),
            n_lag: m.n_lag,
            sigma: m.sigma,
            gamma: m.gamma,
            bias: m.bias,
            feature_mean: m.standardizer.mean,
            feature_std: m.standardizer.std,
            alphas: m.alphas,
            train_inputs: m.train_inputs,
            residual_mean: m.residual_mean,
            residual_std: m.residual_std,
        }
    }
}

impl TryFrom<ModelDocument> for LssvmModel {
    type Error = Error;

    fn try_from(d: ModelDocument) -> Result<Self> {
        if d.kind != DOCUMENT_KIND {
            return Err(Error::InvalidInput(format!("not an LS-SVM model document: {}", d.kind)));
        }
        let dim = d.n_lag + 1;
        if d.alphas.len() != d.train_inputs.len() || d.alphas.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} coefficients for {} training inputs",
                d.alphas.len(),
                d.train_inputs.len()
            )));
        }
        if d.feature_mean.len() != dim || d.feature_std.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: d.feature_mean.len(),
            });
        }
        if let Some(x) = d.train_inputs.iter().find(|x| x.as_slice().len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.as_slice().len(),
            });
        }
        if !(d.sigma > 0.0 && d.gamma > 0.0) {
            return Err(Error::InvalidInput("hyperparameters must be positive".into()));
        }
        let standardizer = Standardizer {
            mean: d.feature_mean,
            std: d.feature_std,
        };
        let z = standardize_all(&standardizer, &d.train_inputs);
        Ok(Self {
            n_lag: d.n_lag,
            sigma: d.sigma,
            gamma: d.gamma,
            bias: d.bias,
            alphas: d.alphas,
            standardizer,
            train_inputs: d.train_inputs,
            z,
            residual_mean: d.residual_mean,
            residual_std: d.residual_std,
        })
    }
}

fn standardize_all(st: &Standardizer, inputs: &[ExplanatoryVector]) -> Vec<f64> {
    let mut z = Vec::with_capacity(inputs.len() * st.dim());
    for x in inputs {
        st.apply_into(x.as_slice(), &mut z);
    }
    z
}

/// Row-major Gaussian kernel matrix over standardized inputs.
pub(crate) fn kernel_matrix(z: &[f64], n: usize, dim: usize, sigma: f64) -> Vec<f64> {
    let inv = 1.0 / (sigma * sigma);
    let mut omega = vec![0.0; n * n];
    for i in 0..n {
        omega[i * n + i] = 1.0;
        let zi = &z[i * dim..(i + 1) * dim];
        for j in 0..i {
            let k = (-squared_distance(zi, &z[j * dim..(j + 1) * dim]) * inv).exp();
            omega[i * n + j] = k;
            omega[j * n + i] = k;
        }
    }
    omega
}

/// Fits α and b for fixed (σ, γ) on `rows`.
pub fn train(rows: &[TrainingRow], sigma: f64, gamma: f64) -> Result<LssvmModel> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InsufficientData("no training rows".into()))?;
    if !(sigma > 0.0 && gamma > 0.0) || !sigma.is_finite() || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "hyperparameters must be positive and finite (σ = {sigma}, γ = {gamma})"
        )));
    }
    let n_lag = first.x.n_lag();
    if let Some(r) = rows.iter().find(|r| r.x.n_lag() != n_lag) {
        return Err(Error::DimensionMismatch {
            expected: n_lag + 1,
            got: r.x.as_slice().len(),
        });
    }
    let standardizer = Standardizer::fit(rows.iter().map(|r| r.x.as_slice()))?;
    let inputs: Vec<ExplanatoryVector> = rows.iter().map(|r| r.x.clone()).collect();
    let z = standardize_all(&standardizer, &inputs);
    let targets: Vec<f64> = rows.iter().map(|r| r.target).collect();
    let (alphas, bias) = fit_standardized(&z, n_lag + 1, &targets, sigma, gamma)?;
    Ok(LssvmModel {
        n_lag,
        sigma,
        gamma,
        bias,
        alphas,
        standardizer,
        train_inputs: inputs,
        z,
        residual_mean: 0.0,
        residual_std: 0.0,
    })
}

/// Solves for (α, b) given already-standardized inputs.
pub(crate) fn fit_standardized(
    z: &[f64],
    dim: usize,
    targets: &[f64],
    sigma: f64,
    gamma: f64,
) -> Result<(Vec<f64>, f64)> {
    let n = targets.len();
    let mut h = kernel_matrix(z, n, dim, sigma);
    for i in 0..n {
        h[i * n + i] += 1.0 / gamma;
    }
    solve_bordered(h, n, targets)
}

impl LssvmModel {
    pub fn n_lag(&self) -> usize {
        self.n_lag
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn train_inputs(&self) -> &[ExplanatoryVector] {
        &self.train_inputs
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn residual_mean(&self) -> f64 {
        self.residual_mean
    }

    pub fn residual_std(&self) -> f64 {
        self.residual_std
    }

    pub fn n_train(&self) -> usize {
        self.alphas.len()
    }

    /// Stores the held-out residual statistics used for the bias correction.
    pub fn with_residuals(mut self, mean: f64, std: f64) -> Self {
        self.residual_mean = mean;
        self.residual_std = std;
        self
    }

    /// `Σ_t α_t K(x_t, x) + b`.
    pub fn predict(&self, x: &ExplanatoryVector) -> Result<f64> {
        self.predict_slice(x.as_slice())
    }

    pub fn predict_slice(&self, x: &[f64]) -> Result<f64> {
        let dim = self.n_lag + 1;
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        let zx = self.standardizer.apply(x);
        let inv = 1.0 / (self.sigma * self.sigma);
        let s: f64 = self
            .z
            .chunks_exact(dim)
            .zip(&self.alphas)
            .map(|(zt, a)| a * (-squared_distance(zt, &zx) * inv).exp())
            .sum();
        Ok(s + self.bias)
    }

    pub fn predict_rows(&self, rows: &[TrainingRow]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(&r.x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Sample mean and standard deviation of `actual − predicted` on held-out rows.
pub fn residual_stats(model: &LssvmModel, rows: &[TrainingRow]) -> Result<(f64, f64)> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "residual statistics need at least 2 rows, got {}",
            rows.len()
        )));
    }
    let residuals: Vec<f64> = rows
        .iter()
        .map(|r| model.predict(&r.x).map(|p| r.target - p))
        .collect::<Result<_>>()?;
    Ok((stats::mean(&residuals), stats::sample_std(&residuals)))
}
