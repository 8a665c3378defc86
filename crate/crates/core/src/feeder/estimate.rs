use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, OutageCase, TemperatureSeries};
use crate::lssvm::{ExplanatoryVector, LssvmModel};
use crate::{Error, Result};

/// Counterfactual diversified demand in the restoration slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversifiedEstimate {
    /// Slot the estimate refers to (first complete interval at or after t_r).
    pub slot: usize,
    pub x: ExplanatoryVector,
    /// Point prediction P̂_d(t_r), kW.
    pub p_hat_d: f64,
    /// Bias-corrected expectation E{P̂_d}, kW.
    pub p_hat_d_mean: f64,
}

/// The `n_lag` most recent `normal` samples strictly before `slot`, newest first.
pub fn pre_outage_lags(feeder: &DemandSeries, slot: usize, n_lag: usize) -> Result<Vec<f64>> {
    let lags: Vec<f64> = (0..slot)
        .rev()
        .filter(|&i| feeder.is_normal(i))
        .take(n_lag)
        .map(|i| feeder.value(i))
        .collect();
    if lags.len() < n_lag {
        return Err(Error::InsufficientData(format!(
            "only {} normal samples precede slot {slot}, model needs {n_lag}",
            lags.len()
        )));
    }
    Ok(lags)
}

/// Predicts the diversified feeder demand at restoration instant `tr` from the
/// last normal samples before the outage and the temperature at `tr`.
pub fn estimate_diversified(
    model: &LssvmModel,
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    tr: chrono::DateTime<chrono::Utc>,
) -> Result<DiversifiedEstimate> {
    let slot = feeder.first_slot_at_or_after(tr).ok_or_else(|| {
        Error::InsufficientData(format!("feeder series ends before restoration at {tr}"))
    })?;
    let temp = temp.align_to(feeder)?;
    let lags = pre_outage_lags(feeder, slot, model.n_lag())?;
    let x = ExplanatoryVector::new(&lags, temp.values()[slot]);
    let p_hat_d = model.predict(&x)?;
    Ok(DiversifiedEstimate {
        slot,
        x,
        p_hat_d,
        p_hat_d_mean: p_hat_d + model.residual_mean(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClpuRatioResult {
    pub case_id: String,
    pub duration_min: f64,
    pub temp_c: f64,
    /// Undiversified demand at restoration, kW.
    pub p_u: f64,
    /// E{P̂_d}, kW.
    pub p_hat_d_mean: f64,
    pub ratio: f64,
    /// Held-out MAPE of the model used, percent.
    pub test_mape: f64,
}

/// `P_u / E{P̂_d}`.
pub fn clpu_ratio(case: &OutageCase, p_hat_d_mean: f64, test_mape: f64) -> Result<ClpuRatioResult> {
    if !(p_hat_d_mean > 0.0) || !p_hat_d_mean.is_finite() {
        return Err(Error::InvalidInput(format!(
            "case {}: diversified demand estimate {p_hat_d_mean} is not positive",
            case.case_id
        )));
    }
    Ok(ClpuRatioResult {
        case_id: case.case_id.clone(),
        duration_min: case.duration_min,
        temp_c: case.temp_c,
        p_u: case.p_u,
        p_hat_d_mean,
        ratio: case.p_u / p_hat_d_mean,
        test_mape,
    })
}

const RESULTS_HEADER: [&str; 7] = ["case_id", "O_min", "T_c", "p_u", "p_hat_d", "ratio", "mape"];

pub fn write_results_csv(path: impl AsRef<Path>, results: &[ClpuRatioResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        w.write_record([
            r.case_id.clone(),
            r.duration_min.to_string(),
            r.temp_c.to_string(),
            r.p_u.to_string(),
            r.p_hat_d_mean.to_string(),
            r.ratio.to_string(),
            r.test_mape.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ClpuRatioResult>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != RESULTS_HEADER {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("expected header `{}`", RESULTS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Parse {
                    path: path.display().to_string(),
                    line,
                    msg: format!("column {}: {e}", RESULTS_HEADER[k]),
                })
        };
        out.push(ClpuRatioResult {
            case_id: rec.get(0).unwrap_or("").to_string(),
            duration_min: num(1)?,
            temp_c: num(2)?,
            p_u: num(3)?,
            p_hat_d_mean: num(4)?,
            ratio: num(5)?,
            test_mape: num(6)?,
        });
    }
    Ok(out)
}

/// First slot at or after restoration from which actual demand stays inside
/// `prediction ± band_k · residual_std` for `consecutive` slots.
///
/// The prediction is run recursively from the pre-outage lags, feeding its own
/// outputs back as lags, since post-restoration measurements are not
/// diversified. Returns `None` if this does not happen within `horizon` slots.
pub fn diversity_restored(
    model: &LssvmModel,
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    tr: chrono::DateTime<chrono::Utc>,
    band_k: f64,
    consecutive: usize,
    horizon: usize,
) -> Result<Option<usize>> {
    let est = estimate_diversified(model, feeder, temp, tr)?;
    let temp = temp.align_to(feeder)?;
    let band = band_k * model.residual_std();
    let mut lags = est.x.lags().to_vec();
    let mut run = 0usize;
    let end = (est.slot + horizon).min(feeder.len());
    for t in est.slot..end {
        let x = ExplanatoryVector::new(&lags, temp.values()[t]);
        let pred = model.predict(&x)?;
        let center = pred + model.residual_mean();
        if feeder.is_normal(t) && (feeder.value(t) - center).abs() <= band {
            run += 1;
            if run == consecutive {
                return Ok(Some(t + 1 - consecutive));
            }
        } else {
            run = 0;
        }
        lags.rotate_right(1);
        lags[0] = pred;
    }
    Ok(None)
}
