use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::surface::{surface_terms, RatioSurface, SurfacePoint};
use crate::data::{aggregate_feeder, DemandSeries, HolidayCalendar, OutageRecord, TemperatureSeries};
use crate::lssvm::{cross_validate, mape, train, CvConfig, TrainingRow};
use crate::pipeline::{assess_case, train_for_date, PipelineConfig};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub k_m: Vec<f64>,
    /// Share of training targets that get contaminated.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            k_m: (0..=10).map(|i| 1.0 + 0.1 * i as f64).collect(),
            fraction: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub k_m: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub test_mape: f64,
    /// 100 · σ_ou / σ_or.
    pub k_sigma: f64,
    /// 100 · γ_ou / γ_or.
    pub k_gamma: f64,
    /// 100 · MAPE_ou / MAPE_or.
    pub k_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub n_lag: usize,
    pub contaminated_rows: Vec<usize>,
    pub baseline_sigma: f64,
    pub baseline_gamma: f64,
    pub baseline_mape: f64,
    pub points: Vec<RobustnessPoint>,
}

/// Multiplies a fixed random share of training targets by each `K_m`, re-runs
/// the (σ, γ) search and retrains, comparing hyperparameters and held-out MAPE
/// with the uncontaminated baseline.
///
/// The lag is chosen once by the full search on clean rows and then held
/// fixed. Only targets are scaled; lag inputs and the test rows stay
/// untouched. Rows must carry `cv.max_lag()` lags.
pub fn robustness_study(
    train_rows: &[TrainingRow],
    test_rows: &[TrainingRow],
    cv: &CvConfig,
    config: &RobustnessConfig,
) -> Result<RobustnessReport> {
    if !(config.fraction > 0.0 && config.fraction <= 1.0) {
        return Err(Error::InvalidInput("contamination fraction must lie in (0, 1]".into()));
    }
    let n_lag = if cv.lag_grid.len() == 1 {
        cv.lag_grid[0]
    } else {
        cross_validate(train_rows, cv)?.n_lag
    };
    let fixed = CvConfig {
        lag_grid: vec![n_lag],
        ..cv.clone()
    };
    let base_train: Vec<TrainingRow> = train_rows.iter().map(|r| r.truncated(n_lag)).collect();
    let test: Vec<TrainingRow> = test_rows.iter().map(|r| r.truncated(n_lag)).collect();
    let actual: Vec<f64> = test.iter().map(|r| r.target).collect();
    let n_bad = ((base_train.len() as f64) * config.fraction).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen = sample(&mut rng, base_train.len(), n_bad.min(base_train.len())).into_vec();
    chosen.sort_unstable();

    let run = |k_m: f64| -> Result<(f64, f64, f64)> {
        let mut rows = base_train.clone();
        for &i in &chosen {
            rows[i].target *= k_m;
        }
        let out = cross_validate(&rows, &fixed)?;
        let model = train(&rows, out.sigma, out.gamma)?;
        let pred = model.predict_rows(&test)?;
        Ok((out.sigma, out.gamma, mape(&pred, &actual)?))
    };
    let (s0, g0, m0) = run(1.0)?;
    let mut points = Vec::with_capacity(config.k_m.len());
    for &k in &config.k_m {
        let (s, g, m) = if k == 1.0 { (s0, g0, m0) } else { run(k)? };
        points.push(RobustnessPoint {
            k_m: k,
            sigma: s,
            gamma: g,
            test_mape: m,
            k_sigma: 100.0 * s / s0,
            k_gamma: 100.0 * g / g0,
            k_mape: 100.0 * m / m0,
        });
    }
    Ok(RobustnessReport {
        n_lag,
        contaminated_rows: chosen,
        baseline_sigma: s0,
        baseline_gamma: g0,
        baseline_mape: m0,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredPoint {
    pub fraction: f64,
    pub monitored: usize,
    /// Ratio percentage error of each monitor subset.
    pub errors: Vec<f64>,
    pub mean_error: f64,
}

/// Inputs of the monitored-share study: customer traces of a simulated outage
/// world and the true ratio.
pub struct MonitoredInputs<'a> {
    pub houses: &'a [DemandSeries],
    pub temp: &'a TemperatureSeries,
    pub outage: &'a OutageRecord,
    pub calendar: &'a HolidayCalendar,
    pub true_ratio: f64,
}

/// For each fraction, approximates the feeder by the scaled sum of a random
/// subset of customers, re-runs the pipeline and records the ratio error.
/// A fraction of one uses the full population once.
pub fn monitored_fraction_study(
    inputs: &MonitoredInputs,
    fractions: &[f64],
    subsets: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<Vec<MonitoredPoint>> {
    let m = inputs.houses.len();
    let mut out = Vec::with_capacity(fractions.len());
    for (fi, &f) in fractions.iter().enumerate() {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidInput(format!("monitored fraction {f} outside (0, 1]")));
        }
        let k = ((f * m as f64).round() as usize).clamp(1, m);
        let draws = if k == m { 1 } else { subsets.max(1) };
        let mut errors = Vec::with_capacity(draws);
        for r in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((fi * 1_000_003 + r) as u64);
            let mut idx = sample(&mut rng, m, k).into_vec();
            idx.sort_unstable();
            let subset: Vec<DemandSeries> = idx.iter().map(|&i| inputs.houses[i].clone()).collect();
            let sum = aggregate_feeder(&subset, "feeder")?;
            let feeder = if k == m {
                sum
            } else {
                sum.scaled(m as f64 / k as f64, "feeder")?
            };
            let records = std::slice::from_ref(inputs.outage);
            let trained = train_for_date(
                &feeder,
                inputs.temp,
                inputs.calendar,
                inputs.outage.end.date_naive(),
                records,
                config,
            )?;
            let res = assess_case(&trained, &feeder, inputs.temp, inputs.outage)?;
            errors.push(100.0 * (res.ratio - inputs.true_ratio).abs() / inputs.true_ratio);
        }
        out.push(MonitoredPoint {
            fraction: f,
            monitored: k,
            mean_error: stats::mean(&errors),
            errors,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCountPoint {
    pub n: usize,
    /// Average over draws of the mean absolute percentage error on held-out cases.
    pub mean_mpe: f64,
    pub draws: usize,
    /// Draws whose design was rank deficient and were skipped.
    pub skipped: usize,
}

/// Random drop-out validation of the ratio surface: for each `n`, fit on `n`
/// random cases and score the held-out remainder, averaged over `repeats`
/// draws. Sizes below the coefficient count or without a held-out case are
/// skipped with a warning.
pub fn outage_count_study(
    pool: &[SurfacePoint],
    n_values: &[usize],
    repeats: usize,
    degree: usize,
    seed: u64,
) -> Result<Vec<OutageCountPoint>> {
    let k = surface_terms(degree).len();
    let mut out = Vec::new();
    for &n in n_values {
        if n < k {
            log::warn!("skipping n = {n}: fewer cases than the {k} surface coefficients");
            continue;
        }
        if n >= pool.len() {
            log::warn!("skipping n = {n}: no held-out cases in a pool of {}", pool.len());
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(n as u64);
        let mut total = 0.0;
        let mut used = 0usize;
        let mut skipped = 0usize;
        for _ in 0..repeats {
            let mut pick = sample(&mut rng, pool.len(), n).into_vec();
            pick.sort_unstable();
            let fit_pts: Vec<SurfacePoint> = pick.iter().map(|&i| pool[i]).collect();
            let surface = match RatioSurface::fit(&fit_pts, degree) {
                Ok(s) => s,
                Err(Error::RankDeficient(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let held: Vec<&SurfacePoint> = pool
                .iter()
                .enumerate()
                .filter(|(i, _)| pick.binary_search(i).is_err())
                .map(|(_, p)| p)
                .collect();
            let mpe = held
                .iter()
                .map(|p| 100.0 * (surface.eval(p.duration_min, p.temp_c) - p.ratio).abs() / p.ratio)
                .sum::<f64>()
                / held.len() as f64;
            total += mpe;
            used += 1;
        }
        if used == 0 {
            log::warn!("n = {n}: every draw was rank deficient");
            continue;
        }
        out.push(OutageCountPoint {
            n,
            mean_mpe: total / used as f64,
            draws: used,
            skipped,
        });
    }
    Ok(out)
}
