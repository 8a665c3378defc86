use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::series::{DemandSeries, TemperatureSeries};
use crate::{Error, Result};

/// One row of `outages.csv`: the feeder was de-energized over `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    pub case_id: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl OutageRecord {
    pub fn new(case_id: impl Into<String>, start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidInput(format!(
                "outage ends ({end}) before it starts ({start})"
            )));
        }
        Ok(Self {
            case_id: case_id.into(),
            start,
            end,
        })
    }

    /// True when `[slot_start, slot_end)` intersects the outage window.
    pub fn overlaps(&self, slot_start: DateTime<Utc>, slot_end: DateTime<Utc>) -> bool {
        slot_start < self.end && self.start < slot_end
    }
}

/// A historical outage with its restoration measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCase {
    pub case_id: String,
    pub t0: DateTime<Utc>,
    pub tr: DateTime<Utc>,
    /// Outage duration O in minutes.
    pub duration_min: f64,
    /// Ambient temperature T at restoration (°C).
    pub temp_c: f64,
    /// Measured (undiversified) feeder demand at restoration (kW).
    pub p_u: f64,
    /// Index of the first complete meter interval at or after `tr`.
    pub restoration_slot: usize,
}

impl OutageCase {
    /// Reads P_u and T off the feeder and temperature series.
    ///
    /// P_u is the first complete 15-minute interval starting at or after the
    /// restoration instant; T is the temperature sample of that same slot.
    pub fn from_record(
        record: &OutageRecord,
        feeder: &DemandSeries,
        temp: &TemperatureSeries,
    ) -> Result<Self> {
        let slot = feeder.first_slot_at_or_after(record.end).ok_or_else(|| {
            Error::InsufficientData(format!(
                "case {}: feeder series ends before restoration at {}",
                record.case_id, record.end
            ))
        })?;
        if !feeder.is_normal(slot) {
            return Err(Error::InsufficientData(format!(
                "case {}: restoration slot {} is not a normal reading",
                record.case_id, slot
            )));
        }
        let temp = temp.align_to(feeder)?;
        let p_u = feeder.value(slot);
        if p_u <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "case {}: non-positive restoration demand {p_u}",
                record.case_id
            )));
        }
        Ok(Self {
            case_id: record.case_id.clone(),
            t0: record.start,
            tr: record.end,
            duration_min: (record.end - record.start).num_seconds() as f64 / 60.0,
            temp_c: temp.values()[slot],
            p_u,
            restoration_slot: slot,
        })
    }
}
