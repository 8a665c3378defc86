//! End-to-end feeder assessment: partition the history, train one model per
//! season × day-type cell that contains outages, and compute every case's
//! CLPU ratio.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{
    partition, DatasetPartition, DayType, DemandSeries, HolidayCalendar, OutageCase, OutageRecord,
    Season, TemperatureSeries,
};
use crate::feeder::{clpu_ratio, estimate_diversified, ClpuRatioResult};
use crate::lssvm::{
    build_training_rows, cross_validate, mape, residual_stats, train, CvConfig, CvOutcome,
    LssvmModel, TrainingRow,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub cv: CvConfig,
    /// Chronologically last share of partition rows held out for MAPE and
    /// residual statistics.
    pub test_fraction: f64,
    /// Keep only this many of the most recent training rows.
    pub max_train_rows: Option<usize>,
    /// Drop whole calendar days that touch an outage from training and testing.
    pub exclude_outage_days: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cv: CvConfig::default(),
            test_fraction: 0.2,
            max_train_rows: None,
            exclude_outage_days: true,
        }
    }
}

/// Training and held-out rows of one partition cell, built with the largest
/// candidate lag.
#[derive(Debug, Clone)]
pub struct SplitRows {
    pub train: Vec<TrainingRow>,
    pub test: Vec<TrainingRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub season: Season,
    pub day_type: DayType,
    pub cv: CvOutcome,
    pub model: LssvmModel,
    pub test_mape: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Calendar days touched by any outage.
pub fn outage_days(outages: &[OutageRecord]) -> BTreeSet<NaiveDate> {
    let mut days = BTreeSet::new();
    for o in outages {
        let mut d = o.start.date_naive();
        while d <= o.end.date_naive() {
            days.insert(d);
            d = d.succ_opt().expect("date in range");
        }
    }
    days
}

/// Rows of `part` split chronologically into training and test blocks.
pub fn split_rows(
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    part: &DatasetPartition,
    outages: &[OutageRecord],
    config: &PipelineConfig,
) -> Result<SplitRows> {
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        return Err(Error::InvalidInput("test_fraction must lie in (0, 1)".into()));
    }
    let temp = temp.align_to(feeder)?;
    let excluded = if config.exclude_outage_days {
        outage_days(outages)
    } else {
        BTreeSet::new()
    };
    let kept = DatasetPartition {
        season: part.season,
        day_type: part.day_type,
        indices: part
            .indices
            .iter()
            .copied()
            .filter(|&i| !excluded.contains(&feeder.timestamp(i).date_naive()))
            .collect(),
    };
    let rows = build_training_rows(feeder, &temp, &kept, config.cv.max_lag())?;
    let n_test = ((rows.len() as f64) * config.test_fraction).ceil() as usize;
    if n_test < 2 || rows.len() - n_test < 2 * config.cv.k_folds {
        return Err(Error::InsufficientData(format!(
            "{} rows in the {:?}/{:?} partition are too few to train and test",
            rows.len(),
            part.season,
            part.day_type
        )));
    }
    let split = rows.len() - n_test;
    let mut train_rows = rows[..split].to_vec();
    let test = rows[split..].to_vec();
    if let Some(max) = config.max_train_rows {
        if train_rows.len() > max {
            train_rows.drain(..train_rows.len() - max);
        }
    }
    Ok(SplitRows {
        train: train_rows,
        test,
    })
}

/// Cross-validates, trains at the selected hyperparameters and attaches the
/// held-out residual statistics.
pub fn fit_split(split: &SplitRows, cv: &CvConfig, season: Season, day_type: DayType) -> Result<TrainedModel> {
    let outcome = cross_validate(&split.train, cv)?;
    let train_rows: Vec<TrainingRow> = split.train.iter().map(|r| r.truncated(outcome.n_lag)).collect();
    let test_rows: Vec<TrainingRow> = split.test.iter().map(|r| r.truncated(outcome.n_lag)).collect();
    let model = train(&train_rows, outcome.sigma, outcome.gamma)?;
    let pred = model.predict_rows(&test_rows)?;
    let actual: Vec<f64> = test_rows.iter().map(|r| r.target).collect();
    let test_mape = mape(&pred, &actual)?;
    let (mean, std) = residual_stats(&model, &test_rows)?;
    Ok(TrainedModel {
        season,
        day_type,
        cv: outcome,
        model: model.with_residuals(mean, std),
        test_mape,
        n_train: train_rows.len(),
        n_test: test_rows.len(),
    })
}

/// Trains the model of the cell containing `date`.
pub fn train_for_date(
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    calendar: &HolidayCalendar,
    date: NaiveDate,
    outages: &[OutageRecord],
    config: &PipelineConfig,
) -> Result<TrainedModel> {
    let (season, day_type) = crate::data::cell_of(date, calendar);
    let parts = partition(feeder, calendar);
    let part = parts
        .iter()
        .find(|p| p.season == season && p.day_type == day_type)
        .expect("all cells present");
    let split = split_rows(feeder, temp, part, outages, config)?;
    fit_split(&split, &config.cv, season, day_type)
}

/// CLPU ratio of one outage under an already trained model.
pub fn assess_case(
    trained: &TrainedModel,
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    record: &OutageRecord,
) -> Result<ClpuRatioResult> {
    let case = OutageCase::from_record(record, feeder, temp)?;
    let est = estimate_diversified(&trained.model, feeder, temp, record.end)?;
    clpu_ratio(&case, est.p_hat_d_mean, trained.test_mape)
}

/// Ratios for every outage, training one model per cell that contains any.
pub fn assess_outages(
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    outages: &[OutageRecord],
    calendar: &HolidayCalendar,
    config: &PipelineConfig,
) -> Result<(Vec<ClpuRatioResult>, Vec<TrainedModel>)> {
    let mut by_cell: BTreeMap<(Season, DayType), Vec<&OutageRecord>> = BTreeMap::new();
    for o in outages {
        by_cell
            .entry(crate::data::cell_of(o.end.date_naive(), calendar))
            .or_default()
            .push(o);
    }
    let mut results = Vec::with_capacity(outages.len());
    let mut models = Vec::new();
    for (_, records) in by_cell {
        let trained = train_for_date(feeder, temp, calendar, records[0].end.date_naive(), outages, config)?;
        for r in records {
            results.push(assess_case(&trained, feeder, temp, r)?);
        }
        models.push(trained);
    }
    let order: BTreeMap<&str, usize> = outages
        .iter()
        .enumerate()
        .map(|(i, o)| (o.case_id.as_str(), i))
        .collect();
    results.sort_by_key(|r| order.get(r.case_id.as_str()).copied().unwrap_or(usize::MAX));
    Ok((results, models))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CustomerConfig {
    pub s_grid: Vec<usize>,
    pub k_folds: usize,
    pub em: crate::gmm::EmConfig,
    /// Half-width (hours) of the time-of-day window around t_r for samples.
    pub window_hours: f64,
    pub grid_points: usize,
    /// Demand-increase thresholds (kW); default spans 0 to the largest increase.
    pub i0_grid: Option<Vec<f64>>,
    pub energy_window_hours: f64,
    pub min_normal_days: usize,
}

impl Default for CustomerConfig {
    fn default() -> Self {
        Self {
            s_grid: (1..=8).collect(),
            k_folds: 5,
            em: crate::gmm::EmConfig::default(),
            window_hours: 1.0,
            grid_points: 4096,
            i0_grid: None,
            energy_window_hours: 4.0,
            min_normal_days: 5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomerResult {
    pub customer_id: String,
    pub components: usize,
    pub model: crate::gmm::Gmm2D,
    /// Customer demand in the restoration slot, kW.
    pub p_u: f64,
    /// Density of the estimated diversified customer demand.
    pub demand: crate::customer::Pdf1D,
    /// Density of the demand increase at restoration.
    pub increase: crate::customer::Pdf1D,
    pub diagnostics: crate::customer::MarginalDiagnostics,
    /// Measured normal-operation demand at the sample slots, kW.
    pub normal_samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomerAnalysis {
    pub sample_slots: Vec<usize>,
    pub customers: Vec<CustomerResult>,
    pub aggregate: crate::customer::Pdf1D,
    pub diversity: crate::customer::DiversityReport,
    pub entropy: Option<crate::customer::EntropyCorrelation>,
    pub energy: Option<crate::customer::EnergyComparison>,
}

/// Normal slots of the outage's cell within `window_hours` of the restoration
/// clock time, on days without outages, where every customer is normal and
/// the model's lag window is complete.
pub fn contribution_slots(
    customers: &[DemandSeries],
    feeder: &DemandSeries,
    calendar: &HolidayCalendar,
    record: &OutageRecord,
    outages: &[OutageRecord],
    n_lag: usize,
    window_hours: f64,
) -> Vec<usize> {
    use chrono::Timelike;
    let cell = crate::data::cell_of(record.end.date_naive(), calendar);
    let excluded = outage_days(outages);
    let minute_of = |t: chrono::DateTime<chrono::Utc>| (t.hour() * 60 + t.minute()) as i64;
    let tr_min = minute_of(record.end);
    let half = (window_hours * 60.0).round() as i64;
    (n_lag..feeder.len())
        .filter(|&t| {
            let ts = feeder.timestamp(t);
            let d = (minute_of(ts) - tr_min).rem_euclid(1440);
            let d = d.min(1440 - d);
            d <= half
                && !excluded.contains(&ts.date_naive())
                && crate::data::cell_of(ts.date_naive(), calendar) == cell
                && feeder.is_normal(t)
                && (1..=n_lag).all(|k| feeder.is_normal(t - k))
                && customers.iter().all(|c| c.is_normal(t))
        })
        .collect()
}

/// Times the demand grid is widened after a `GridTooSmall` before giving up.
pub const MAX_GRID_WIDENINGS: usize = 6;

/// Joint (P̂_d, C_i) mixture, product density and demand-increase density
/// for every customer, plus the aggregate, diversity, entropy and energy
/// indices.
#[allow(clippy::too_many_arguments)]
pub fn analyse_customers(
    customers: &[DemandSeries],
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    record: &OutageRecord,
    outages: &[OutageRecord],
    calendar: &HolidayCalendar,
    trained: &TrainedModel,
    config: &CustomerConfig,
) -> Result<CustomerAnalysis> {
    use crate::customer::{
        contribution_factors, convolve_increases, demand_increase_pdf, diversity_report,
        energy_comparison, entropy_correlation, marginal_customer_pdf, GridSpec,
    };
    use rayon::prelude::*;

    let model = &trained.model;
    let temp = temp.align_to(feeder)?;
    let slots = contribution_slots(
        customers,
        feeder,
        calendar,
        record,
        outages,
        model.n_lag(),
        config.window_hours,
    );
    if slots.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "only {} normal samples near the restoration time of day",
            slots.len()
        )));
    }
    let p_hat: Vec<f64> = slots
        .iter()
        .map(|&t| {
            let lags: Vec<f64> = (1..=model.n_lag()).map(|k| feeder.value(t - k)).collect();
            model.predict(&crate::lssvm::ExplanatoryVector::new(&lags, temp.values()[t]))
        })
        .collect::<Result<_>>()?;
    let samples = contribution_factors(customers, feeder, &slots, &p_hat)?;
    let restoration = feeder.first_slot_at_or_after(record.end).ok_or_else(|| {
        Error::InsufficientData("series ends before restoration".into())
    })?;

    let results: Vec<CustomerResult> = customers
        .par_iter()
        .zip(samples.par_iter())
        .map(|(c, s)| {
            let sel = crate::gmm::select_components(&s.pairs, &config.s_grid, config.k_folds, &config.em)?;
            let mut grid = GridSpec::from_samples(&s.products())?;
            grid.points = config.grid_points;
            let mut widened = 0;
            let (demand, diagnostics) = loop {
                match marginal_customer_pdf(&sel.model, grid) {
                    Err(Error::GridTooSmall { suggested_hi, .. }) if widened < MAX_GRID_WIDENINGS => {
                        log::debug!("{}: widening demand grid to {suggested_hi:.3}", c.entity_id());
                        grid.hi = suggested_hi;
                        widened += 1;
                    }
                    other => break other?,
                }
            };
            if !c.is_normal(restoration) {
                return Err(Error::InsufficientData(format!(
                    "{}: restoration slot is not a normal reading",
                    c.entity_id()
                )));
            }
            let p_u = c.value(restoration);
            let increase = demand_increase_pdf(&demand, p_u)?;
            Ok(CustomerResult {
                customer_id: c.entity_id().to_string(),
                components: sel.s,
                model: sel.model,
                p_u,
                demand,
                increase,
                diagnostics,
                normal_samples: slots.iter().map(|&t| c.value(t)).collect(),
            })
        })
        .collect::<Result<_>>()?;

    let increases: Vec<crate::customer::Pdf1D> = results.iter().map(|r| r.increase.clone()).collect();
    let aggregate = convolve_increases(&increases)?;
    let i0_grid = match &config.i0_grid {
        Some(g) => g.clone(),
        None => {
            let hi = increases.iter().map(|q| q.end()).fold(0.0, f64::max);
            (0..=40).map(|k| hi * k as f64 / 40.0).collect()
        }
    };
    let diversity = diversity_report(&increases, &i0_grid)?;
    let pairs: Vec<(&crate::customer::Pdf1D, &[f64])> = results
        .iter()
        .map(|r| (&r.increase, r.normal_samples.as_slice()))
        .collect();
    let entropy = match entropy_correlation(&pairs) {
        Ok(e) => Some(e),
        Err(e) => {
            log::warn!("entropy correlation unavailable: {e}");
            None
        }
    };
    let window = chrono::Duration::minutes((config.energy_window_hours * 60.0).round() as i64);
    let energy = match energy_comparison(customers, record.end, window, calendar, config.min_normal_days) {
        Ok(e) => Some(e),
        Err(e) => {
            log::warn!("energy comparison unavailable: {e}");
            None
        }
    };
    Ok(CustomerAnalysis {
        sample_slots: slots,
        customers: results,
        aggregate,
        diversity,
        entropy,
        energy,
    })
}
