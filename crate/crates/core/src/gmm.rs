//! Bivariate Gaussian mixtures with full covariances, fitted by EM and
//! selected by BIC.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower bound on covariance eigenvalues.
pub const EIGEN_FLOOR: f64 = 1e-6;

pub type Point = [f64; 2];
pub type Cov = [[f64; 2]; 2];

/// Eigen-decomposition of a symmetric 2×2 matrix: eigenvalues ascending with
/// unit eigenvectors.
fn sym_eigen(c: &Cov) -> ([f64; 2], [Point; 2]) {
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let half_tr = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    let (lo, hi) = (half_tr - disc, half_tr + disc);
    let vec_for = |lambda: f64| -> Point {
        if b.abs() > 1e-300 {
            let (x, y) = (b, lambda - a);
            let n = x.hypot(y);
            [x / n, y / n]
        } else if (lambda - a).abs() <= (lambda - d).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    };
    let v_lo = vec_for(lo);
    let v_hi = [-v_lo[1], v_lo[0]];
    ([lo, hi], [v_lo, v_hi])
}

/// Raises eigenvalues below [`EIGEN_FLOOR`] to the floor; matrices already
/// above the floor are returned unchanged.
pub fn floor_covariance(c: &Cov) -> Cov {
    let sym = 0.5 * (c[0][1] + c[1][0]);
    let c = [[c[0][0], sym], [sym, c[1][1]]];
    let (vals, vecs) = sym_eigen(&c);
    if vals[0] >= EIGEN_FLOOR {
        return c;
    }
    let mut out = c;
    for (lambda, v) in vals.iter().zip(vecs) {
        let add = (EIGEN_FLOOR - lambda).max(0.0);
        out[0][0] += add * v[0] * v[0];
        out[0][1] += add * v[0] * v[1];
        out[1][1] += add * v[1] * v[1];
    }
    out[1][0] = out[0][1];
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Point,
    pub cov: Cov,
}

impl Component {
    pub fn std_dev(&self) -> Point {
        [self.cov[0][0].sqrt(), self.cov[1][1].sqrt()]
    }

    /// Correlation coefficient ρ between the two coordinates.
    pub fn correlation(&self) -> f64 {
        let s = self.std_dev();
        self.cov[0][1] / (s[0] * s[1])
    }
}

/// Precomputed quantities for evaluating a component density.
#[derive(Debug, Clone, Copy)]
struct Cached {
    log_norm: f64,
    inv: [f64; 3],
}

impl Cached {
    fn new(c: &Component) -> Self {
        let (a, b, d) = (c.cov[0][0], c.cov[0][1], c.cov[1][1]);
        let det = a * d - b * b;
        Self {
            log_norm: c.weight.ln() - (2.0 * PI).ln() - 0.5 * det.ln(),
            inv: [d / det, -b / det, a / det],
        }
    }

    fn log_density(&self, mean: &Point, z: &Point) -> f64 {
        let (dx, dy) = (z[0] - mean[0], z[1] - mean[1]);
        let q = self.inv[0] * dx * dx + 2.0 * self.inv[1] * dx * dy + self.inv[2] * dy * dy;
        self.log_norm - 0.5 * q
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GmmDocument", into = "GmmDocument")]
pub struct Gmm2D {
    components: Vec<Component>,
    cached: Vec<Cached>,
}

#[derive(Serialize, Deserialize)]
struct GmmDocument {
    kind: String,
    components: Vec<Component>,
}

impl From<Gmm2D> for GmmDocument {
    fn from(g: Gmm2D) -> Self {
        Self {
            kind: "gmm2d".into(),
            components: g.components,
        }
    }
}

impl TryFrom<GmmDocument> for Gmm2D {
    type Error = Error;

    fn try_from(doc: GmmDocument) -> Result<Self> {
        if doc.kind != "gmm2d" {
            return Err(Error::InvalidInput(format!("unexpected model kind {:?}", doc.kind)));
        }
        Gmm2D::new(doc.components)
    }
}

impl PartialEq for Gmm2D {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

impl Gmm2D {
    /// Validates weights (positive, summing to one) and covariances (symmetric,
    /// eigenvalues at or above the floor).
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput("mixture needs at least one component".into()));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
        }
        for (j, c) in components.iter().enumerate() {
            if !(c.weight > 0.0) {
                return Err(Error::InvalidInput(format!("component {j} has weight {}", c.weight)));
            }
            if c.mean.iter().chain(c.cov.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("component {j} has non-finite parameters")));
            }
            let scale = c.cov[0][0].abs().max(c.cov[1][1].abs()).max(1.0);
            if (c.cov[0][1] - c.cov[1][0]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!("component {j} covariance is not symmetric")));
            }
            let (vals, _) = sym_eigen(&c.cov);
            if vals[0] < EIGEN_FLOOR * (1.0 - 1e-6) {
                return Err(Error::InvalidInput(format!(
                    "component {j} covariance eigenvalue {} is below the floor {EIGEN_FLOOR}",
                    vals[0]
                )));
            }
        }
        let cached = components.iter().map(Cached::new).collect();
        Ok(Self { components, cached })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn log_pdf(&self, z: &Point) -> f64 {
        let mut terms = [0.0; 16];
        let mut heap;
        let buf: &mut [f64] = if self.components.len() <= terms.len() {
            &mut terms[..self.components.len()]
        } else {
            heap = vec![0.0; self.components.len()];
            &mut heap
        };
        for ((t, c), k) in buf.iter_mut().zip(&self.components).zip(&self.cached) {
            *t = k.log_density(&c.mean, z);
        }
        log_sum_exp(buf)
    }

    pub fn pdf(&self, z: &Point) -> f64 {
        self.components
            .iter()
            .zip(&self.cached)
            .map(|(c, k)| k.log_density(&c.mean, z).exp())
            .sum()
    }

    /// Total log-likelihood of `samples`.
    pub fn log_likelihood(&self, samples: &[Point]) -> f64 {
        samples.iter().map(|z| self.log_pdf(z)).sum()
    }

    /// Draws one point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (j, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = j;
                break;
            }
        }
        let c = &self.components[pick];
        let (a, b, d) = (c.cov[0][0], c.cov[0][1], c.cov[1][1]);
        let l11 = a.sqrt();
        let l21 = b / l11;
        let l22 = (d - l21 * l21).max(0.0).sqrt();
        let n1 = standard_normal(rng);
        let n2 = standard_normal(rng);
        [c.mean[0] + l11 * n1, c.mean[1] + l21 * n1 + l22 * n2]
    }

    /// Marginal density of the second coordinate.
    pub fn marginal_second_pdf(&self, c: f64) -> f64 {
        self.components
            .iter()
            .map(|k| {
                let var = k.cov[1][1];
                k.weight * (-(c - k.mean[1]).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            })
            .sum()
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

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub restarts: usize,
    /// Relative log-likelihood change that ends a run.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            tol: 1e-6,
            max_iter: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub log_likelihood: f64,
    pub iterations: usize,
    pub bic: f64,
    /// Index of the winning restart.
    pub restart: usize,
    /// Log-likelihood after every E-step of the winning run.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Free parameters of a bivariate full-covariance mixture.
pub fn parameter_count(s: usize) -> usize {
    6 * s - 1
}

pub fn bic(log_likelihood: f64, s: usize, n: usize) -> f64 {
    -2.0 * log_likelihood + parameter_count(s) as f64 * (n as f64).ln()
}

fn weighted_moments(samples: &[Point], weights: &[f64]) -> (f64, Point, Cov) {
    let total: f64 = weights.iter().sum();
    let mut mean = [0.0; 2];
    for (z, w) in samples.iter().zip(weights) {
        mean[0] += w * z[0];
        mean[1] += w * z[1];
    }
    mean[0] /= total;
    mean[1] /= total;
    let mut cov = [[0.0; 2]; 2];
    for (z, w) in samples.iter().zip(weights) {
        let (dx, dy) = (z[0] - mean[0], z[1] - mean[1]);
        cov[0][0] += w * dx * dx;
        cov[0][1] += w * dx * dy;
        cov[1][1] += w * dy * dy;
    }
    cov[0][0] /= total;
    cov[0][1] /= total;
    cov[1][1] /= total;
    cov[1][0] = cov[0][1];
    (total, mean, cov)
}

/// Maximum-likelihood mean and (floored) covariance of a single Gaussian.
pub fn single_gaussian(samples: &[Point]) -> Result<Gmm2D> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let (_, mean, cov) = weighted_moments(samples, &vec![1.0; samples.len()]);
    Gmm2D::new(vec![Component {
        weight: 1.0,
        mean,
        cov: floor_covariance(&cov),
    }])
}

/// k-means++ style seeding on per-axis scaled coordinates; returns initial components.
fn seed_components(samples: &[Point], s: usize, rng: &mut ChaCha8Rng) -> Vec<Component> {
    let n = samples.len();
    let (_, _, global) = weighted_moments(samples, &vec![1.0; n]);
    let scale = [
        1.0 / global[0][0].sqrt().max(1e-300),
        1.0 / global[1][1].sqrt().max(1e-300),
    ];
    let dist2 = |a: &Point, b: &Point| {
        let dx = (a[0] - b[0]) * scale[0];
        let dy = (a[1] - b[1]) * scale[1];
        dx * dx + dy * dy
    };
    let mut centers = vec![samples[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = samples.iter().map(|z| dist2(z, &centers[0])).collect();
    while centers.len() < s {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    idx = i;
                    break;
                }
                u -= d;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        centers.push(samples[next]);
        for (d, z) in d2.iter_mut().zip(samples) {
            *d = d.min(dist2(z, &centers[centers.len() - 1]));
        }
    }
    let mut members: Vec<Vec<Point>> = vec![Vec::new(); s];
    for z in samples {
        let j = (0..s)
            .min_by(|&a, &b| dist2(z, &centers[a]).total_cmp(&dist2(z, &centers[b])))
            .unwrap_or(0);
        members[j].push(*z);
    }
    let mut comps = Vec::with_capacity(s);
    for (j, m) in members.iter().enumerate() {
        let (mean, cov) = if m.len() >= 2 {
            let (_, mean, cov) = weighted_moments(m, &vec![1.0; m.len()]);
            (mean, cov)
        } else {
            (centers[j], global)
        };
        comps.push(Component {
            weight: (m.len().max(1)) as f64,
            mean,
            cov: floor_covariance(&cov),
        });
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in &mut comps {
        c.weight /= total;
    }
    comps
}

struct Run {
    model: Gmm2D,
    trace: Vec<f64>,
    converged: bool,
}

fn em_run(samples: &[Point], s: usize, config: &EmConfig, rng: &mut ChaCha8Rng) -> Option<Run> {
    let n = samples.len();
    let mut model = Gmm2D::new(seed_components(samples, s, rng)).ok()?;
    let mut resp = vec![0.0; n * s];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut terms = vec![0.0; s];
    for _ in 0..config.max_iter {
        let mut ll = 0.0;
        for (i, z) in samples.iter().enumerate() {
            for (j, t) in terms.iter_mut().enumerate() {
                *t = model.cached[j].log_density(&model.components[j].mean, z);
            }
            let lse = log_sum_exp(&terms);
            ll += lse;
            for j in 0..s {
                resp[i * s + j] = (terms[j] - lse).exp();
            }
        }
        if !ll.is_finite() {
            return None;
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(p) = prev {
            if (ll - p).abs() <= config.tol * ll.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        let mut comps = Vec::with_capacity(s);
        let mut w = vec![0.0; n];
        for j in 0..s {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = resp[i * s + j];
            }
            let (nk, mean, cov) = weighted_moments(samples, &w);
            if !(nk > 1e-10 * n as f64) {
                return None;
            }
            comps.push(Component {
                weight: nk / n as f64,
                mean,
                cov: floor_covariance(&cov),
            });
        }
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        for c in &mut comps {
            c.weight /= total;
        }
        model = Gmm2D::new(comps).ok()?;
    }
    Some(Run {
        model,
        trace,
        converged,
    })
}

fn is_degenerate(samples: &[Point]) -> bool {
    samples.iter().all(|z| z == &samples[0])
}

/// Fits an `s`-component mixture; the best of `config.restarts` seeded runs wins.
pub fn fit_em(samples: &[Point], s: usize, config: &EmConfig) -> Result<(Gmm2D, FitDiagnostics)> {
    if s == 0 {
        return Err(Error::InvalidInput("component count must be positive".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples contain non-finite values".into()));
    }
    let n = samples.len();
    if n < 5 * s {
        return Err(Error::InsufficientData(format!(
            "{n} samples are too few for {s} components"
        )));
    }
    if is_degenerate(samples) {
        log::warn!("all samples identical; returning a single floor-regularized component");
        let model = single_gaussian(samples)?;
        let ll = model.log_likelihood(samples);
        return Ok((
            model,
            FitDiagnostics {
                log_likelihood: ll,
                iterations: 0,
                bic: bic(ll, 1, n),
                restart: 0,
                trace: vec![ll],
                converged: true,
            },
        ));
    }
    let restarts = config.restarts.max(1);
    let runs: Vec<Option<Run>> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r as u64);
            em_run(samples, s, config, &mut rng)
        })
        .collect();
    let mut best: Option<(usize, Run)> = None;
    for (r, run) in runs.into_iter().enumerate() {
        let Some(run) = run else { continue };
        let ll = *run.trace.last().expect("non-empty trace");
        if best
            .as_ref()
            .map_or(true, |(_, b)| ll > *b.trace.last().expect("non-empty trace"))
        {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.ok_or_else(|| {
        Error::Solver(format!("every EM restart collapsed a component (S = {s})"))
    })?;
    let ll = *run.trace.last().expect("non-empty trace");
    Ok((
        run.model,
        FitDiagnostics {
            log_likelihood: ll,
            iterations: run.trace.len(),
            bic: bic(ll, s, n),
            restart,
            trace: run.trace,
            converged: run.converged,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub s: usize,
    pub bic: Option<f64>,
    /// Mean held-out log-likelihood per sample across folds.
    pub cv_log_likelihood: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub s: usize,
    pub model: Gmm2D,
    pub diagnostics: FitDiagnostics,
    pub candidates: Vec<CandidateScore>,
}

fn cv_score(samples: &[Point], s: usize, k_folds: usize, config: &EmConfig) -> Option<f64> {
    let n = samples.len();
    if k_folds < 2 {
        return None;
    }
    let mut total = 0.0;
    for f in 0..k_folds {
        let (lo, hi) = (f * n / k_folds, (f + 1) * n / k_folds);
        if hi == lo {
            return None;
        }
        let train: Vec<Point> = samples[..lo].iter().chain(&samples[hi..]).copied().collect();
        let (model, _) = fit_em(&train, s, config).ok()?;
        total += model.log_likelihood(&samples[lo..hi]) / (hi - lo) as f64;
    }
    Some(total / k_folds as f64)
}

/// Fits every `S` in `s_grid`, scores each by BIC on all samples (and by
/// k-fold held-out log-likelihood as a diagnostic) and keeps the lowest BIC,
/// ties going to the smaller `S`.
pub fn select_components(
    samples: &[Point],
    s_grid: &[usize],
    k_folds: usize,
    config: &EmConfig,
) -> Result<Selection> {
    if s_grid.is_empty() {
        return Err(Error::InvalidInput("component grid is empty".into()));
    }
    let mut grid = s_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if is_degenerate(samples) && !samples.is_empty() {
        let (model, diagnostics) = fit_em(samples, 1, config)?;
        return Ok(Selection {
            s: 1,
            candidates: vec![CandidateScore {
                s: 1,
                bic: Some(diagnostics.bic),
                cv_log_likelihood: None,
            }],
            model,
            diagnostics,
        });
    }
    let fits: Vec<(usize, Option<(Gmm2D, FitDiagnostics)>, Option<f64>)> = grid
        .par_iter()
        .map(|&s| {
            let fit = fit_em(samples, s, config).ok();
            let cv = if fit.is_some() {
                cv_score(samples, s, k_folds, config)
            } else {
                None
            };
            (s, fit, cv)
        })
        .collect();
    let candidates = fits
        .iter()
        .map(|(s, fit, cv)| CandidateScore {
            s: *s,
            bic: fit.as_ref().map(|(_, d)| d.bic),
            cv_log_likelihood: *cv,
        })
        .collect();
    let mut best: Option<(usize, Gmm2D, FitDiagnostics)> = None;
    for (s, fit, _) in fits {
        let Some((model, diag)) = fit else { continue };
        if best.as_ref().map_or(true, |(_, _, b)| diag.bic < b.bic) {
            best = Some((s, model, diag));
        }
    }
    let (s, model, diagnostics) =
        best.ok_or_else(|| Error::Solver("no component count could be fitted".into()))?;
    Ok(Selection {
        s,
        model,
        diagnostics,
        candidates,
    })
}
