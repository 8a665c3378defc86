use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Meter interval length.
pub const STEP_MINUTES: i64 = 15;
/// Average kW over a 15-minute interval from the interval's kWh reading.
pub const KWH_TO_KW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Normal,
    Outage,
    Missing,
}

pub(crate) fn step() -> Duration {
    Duration::minutes(STEP_MINUTES)
}

pub(crate) fn check_on_grid(ts: DateTime<Utc>) -> Result<()> {
    if ts.minute() as i64 % STEP_MINUTES != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(Error::Spacing {
            timestamp: ts.to_rfc3339(),
        });
    }
    Ok(())
}

/// Uniformly sampled demand (kW) with per-slot status flags.
///
/// Outage slots always carry 0 kW, normal slots a finite non-negative value.
/// Missing slots carry 0 kW as a placeholder and must never be read as data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    entity_id: String,
    start: DateTime<Utc>,
    values: Vec<f64>,
    flags: Vec<Flag>,
}

impl DemandSeries {
    pub fn new(
        entity_id: impl Into<String>,
        start: DateTime<Utc>,
        values: Vec<f64>,
        flags: Vec<Flag>,
    ) -> Result<Self> {
        check_on_grid(start)?;
        if values.len() != flags.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: flags.len(),
            });
        }
        for (i, (v, f)) in values.iter().zip(&flags).enumerate() {
            let ok = match f {
                Flag::Normal => v.is_finite() && *v >= 0.0,
                Flag::Outage | Flag::Missing => *v == 0.0,
            };
            if !ok {
                return Err(Error::InvalidInput(format!(
                    "slot {i}: value {v} inconsistent with flag {f:?}"
                )));
            }
        }
        Ok(Self {
            entity_id: entity_id.into(),
            start,
            values,
            flags,
        })
    }

    /// All-normal series.
    pub fn normal(entity_id: impl Into<String>, start: DateTime<Utc>, values: Vec<f64>) -> Result<Self> {
        let flags = vec![Flag::Normal; values.len()];
        Self::new(entity_id, start, values, flags)
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn step(&self) -> Duration {
        step()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn flag(&self, i: usize) -> Flag {
        self.flags[i]
    }

    pub fn is_normal(&self, i: usize) -> bool {
        self.flags[i] == Flag::Normal
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + step() * i as i32
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp(self.len())
    }

    /// Index of the slot starting exactly at `ts`.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<usize> {
        let mins = (ts - self.start).num_minutes();
        if ts < self.start || (ts - self.start) != Duration::minutes(mins) || mins % STEP_MINUTES != 0 {
            return None;
        }
        let i = (mins / STEP_MINUTES) as usize;
        (i < self.len()).then_some(i)
    }

    /// Index of the first slot starting at or after `ts`.
    pub fn first_slot_at_or_after(&self, ts: DateTime<Utc>) -> Option<usize> {
        if ts <= self.start {
            return (!self.is_empty()).then_some(0);
        }
        let secs = (ts - self.start).num_seconds();
        let step_secs = STEP_MINUTES * 60;
        let i = ((secs + step_secs - 1) / step_secs) as usize;
        (i < self.len()).then_some(i)
    }

    pub fn is_aligned_with(&self, other: &DemandSeries) -> bool {
        self.start == other.start && self.len() == other.len()
    }

    /// Multiplies every value by `factor` (flags unchanged).
    pub fn scaled(&self, factor: f64, entity_id: impl Into<String>) -> Result<Self> {
        let values = self.values.iter().map(|v| v * factor).collect();
        Self::new(entity_id, self.start, values, self.flags.clone())
    }
}

/// Element-wise sum of time-aligned customer series.
///
/// A slot is `Outage` if any input is, otherwise `Missing` if any input is,
/// otherwise `Normal`.
pub fn aggregate_feeder(customers: &[DemandSeries], entity_id: &str) -> Result<DemandSeries> {
    let first = customers
        .first()
        .ok_or_else(|| Error::InsufficientData("no customer series to aggregate".into()))?;
    for c in customers {
        if !c.is_aligned_with(first) {
            return Err(Error::Alignment(format!(
                "{} starts {} with {} slots, {} starts {} with {} slots",
                first.entity_id,
                first.start,
                first.len(),
                c.entity_id,
                c.start,
                c.len()
            )));
        }
    }
    let n = first.len();
    let mut values = vec![0.0; n];
    let mut flags = vec![Flag::Normal; n];
    for c in customers {
        for i in 0..n {
            values[i] += c.values[i];
            flags[i] = match (flags[i], c.flags[i]) {
                (Flag::Outage, _) | (_, Flag::Outage) => Flag::Outage,
                (Flag::Missing, _) | (_, Flag::Missing) => Flag::Missing,
                _ => Flag::Normal,
            };
        }
    }
    for (v, f) in values.iter_mut().zip(&flags) {
        if *f != Flag::Normal {
            *v = 0.0;
        }
    }
    DemandSeries::new(entity_id, first.start, values, flags)
}

/// Ambient temperature samples (°C) on the meter clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSeries {
    start: DateTime<Utc>,
    values: Vec<f64>,
}

impl TemperatureSeries {
    pub fn new(start: DateTime<Utc>, values: Vec<f64>) -> Result<Self> {
        check_on_grid(start)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite temperature at slot {i}")));
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> DateTime<Utc> {
        self.start + step() * i as i32
    }

    /// Re-slices the series onto the clock of `series`.
    pub fn align_to(&self, series: &DemandSeries) -> Result<TemperatureSeries> {
        let offset = (series.start() - self.start).num_minutes();
        if offset < 0 || offset % STEP_MINUTES != 0 {
            return Err(Error::Alignment(format!(
                "temperature starts {} but demand starts {}",
                self.start,
                series.start()
            )));
        }
        let first = (offset / STEP_MINUTES) as usize;
        if first + series.len() > self.len() {
            return Err(Error::Alignment(format!(
                "temperature covers {} slots from {}, demand needs {} from {}",
                self.len(),
                self.start,
                series.len(),
                series.start()
            )));
        }
        Ok(TemperatureSeries {
            start: series.start(),
            values: self.values[first..first + series.len()].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 7, 1, 0, 0, 0).unwrap()
    }

    #[test]
    fn sums_constant_series() {
        let a = DemandSeries::normal("a", t0(), vec![1.0; 4]).unwrap();
        let b = DemandSeries::normal("b", t0(), vec![2.0; 4]).unwrap();
        let f = aggregate_feeder(&[a, b], "feeder").unwrap();
        assert_eq!(f.values(), &[3.0; 4]);
        assert!(f.flags().iter().all(|f| *f == Flag::Normal));
    }

    #[test]
    fn outage_flag_propagates() {
        let a = DemandSeries::normal("a", t0(), vec![1.0; 3]).unwrap();
        let b = DemandSeries::new(
            "b",
            t0(),
            vec![2.0, 0.0, 2.0],
            vec![Flag::Normal, Flag::Outage, Flag::Normal],
        )
        .unwrap();
        let f = aggregate_feeder(&[a, b], "feeder").unwrap();
        assert_eq!(f.flag(1), Flag::Outage);
        assert_eq!(f.value(1), 0.0);
        assert_eq!(f.value(2), 3.0);
    }

    #[test]
    fn misaligned_clocks_rejected() {
        let a = DemandSeries::normal("a", t0(), vec![1.0; 3]).unwrap();
        let b = DemandSeries::normal("b", t0() + step(), vec![1.0; 3]).unwrap();
        assert!(matches!(aggregate_feeder(&[a, b], "f"), Err(Error::Alignment(_))));
    }

    #[test]
    fn outage_slots_must_be_zero() {
        let r = DemandSeries::new("a", t0(), vec![1.0], vec![Flag::Outage]);
        assert!(r.is_err());
        let r = DemandSeries::new("a", t0(), vec![-1.0], vec![Flag::Normal]);
        assert!(r.is_err());
    }

    #[test]
    fn slot_lookup() {
        let a = DemandSeries::normal("a", t0(), vec![1.0; 8]).unwrap();
        assert_eq!(a.index_of(t0() + Duration::minutes(30)), Some(2));
        assert_eq!(a.index_of(t0() + Duration::minutes(31)), None);
        assert_eq!(a.first_slot_at_or_after(t0() + Duration::minutes(31)), Some(3));
        assert_eq!(a.first_slot_at_or_after(t0() + Duration::minutes(45)), Some(3));
    }
}
