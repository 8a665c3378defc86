use serde::{Deserialize, Serialize};

use crate::data::{DatasetPartition, DemandSeries, TemperatureSeries};
use crate::{Error, Result};

/// `[P_d(t-1), …, P_d(t-n_lag), T(t)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplanatoryVector(Vec<f64>);

impl ExplanatoryVector {
    /// `lags[0]` is the most recent demand sample.
    pub fn new(lags: &[f64], temp: f64) -> Self {
        let mut v = Vec::with_capacity(lags.len() + 1);
        v.extend_from_slice(lags);
        v.push(temp);
        Self(v)
    }

    pub fn from_raw(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(
                "explanatory vector needs at least one lag and a temperature".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn n_lag(&self) -> usize {
        self.0.len() - 1
    }

    pub fn lags(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn temp(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Keeps the `n_lag` most recent lags.
    pub fn truncated(&self, n_lag: usize) -> Self {
        assert!(n_lag >= 1 && n_lag <= self.n_lag(), "cannot truncate to {n_lag} lags");
        Self::new(&self.0[..n_lag], self.temp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub x: ExplanatoryVector,
    /// P_d(t) in kW.
    pub target: f64,
    /// Slot index of `t` in the source series.
    pub slot: usize,
}

impl TrainingRow {
    pub fn truncated(&self, n_lag: usize) -> Self {
        Self {
            x: self.x.truncated(n_lag),
            target: self.target,
            slot: self.slot,
        }
    }
}

/// One row per partition slot whose target and all `n_lag` lags are `normal`.
///
/// `temp` must already be aligned to `feeder`. Rows come out in slot order.
pub fn build_training_rows(
    feeder: &DemandSeries,
    temp: &TemperatureSeries,
    partition: &DatasetPartition,
    n_lag: usize,
) -> Result<Vec<TrainingRow>> {
    if n_lag == 0 {
        return Err(Error::InvalidInput("n_lag must be at least 1".into()));
    }
    if temp.start() != feeder.start() || temp.len() < feeder.len() {
        return Err(Error::Alignment("temperature not aligned to feeder".into()));
    }
    let values = feeder.values();
    let mut rows = Vec::new();
    let mut lags = Vec::with_capacity(n_lag);
    for &t in &partition.indices {
        if t < n_lag || t >= feeder.len() || !feeder.is_normal(t) {
            continue;
        }
        if !(1..=n_lag).all(|k| feeder.is_normal(t - k)) {
            continue;
        }
        lags.clear();
        lags.extend((1..=n_lag).map(|k| values[t - k]));
        rows.push(TrainingRow {
            x: ExplanatoryVector::new(&lags, temp.values()[t]),
            target: values[t],
            slot: t,
        });
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no complete {n_lag}-lag windows in the {:?}/{:?} partition",
            partition.season, partition.day_type
        )));
    }
    Ok(rows)
}
