use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Timelike, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::house::{Mode, TclHouse};
use crate::data::STEP_MINUTES;
use crate::{Error, Result};

/// Uniform draw `nominal · (1 ± rel)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelSpread {
    pub nominal: f64,
    pub rel: f64,
}

impl RelSpread {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.rel == 0.0 {
            return self.nominal;
        }
        self.nominal * (1.0 + rng.random_range(-self.rel..=self.rel))
    }
}

/// Uniform draw `center ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsSpread {
    pub center: f64,
    pub half_width: f64,
}

impl AbsSpread {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.half_width == 0.0 {
            return self.center;
        }
        self.center + rng.random_range(-self.half_width..=self.half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationSpec {
    pub count: usize,
    pub r: RelSpread,
    pub c_th: RelSpread,
    pub p_rated: RelSpread,
    pub eta: RelSpread,
    pub setpoint: AbsSpread,
    pub deadband: f64,
    pub mode: Mode,
    /// Mean non-TCL demand (kW) drawn uniformly per house.
    pub baseline_kw: [f64; 2],
    /// Log-space standard deviation of the per-slot baseline noise.
    pub baseline_noise: f64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            count: 200,
            r: RelSpread { nominal: 2.0, rel: 0.2 },
            c_th: RelSpread { nominal: 2.0, rel: 0.2 },
            p_rated: RelSpread { nominal: 4.0, rel: 0.25 },
            eta: RelSpread { nominal: 2.5, rel: 0.1 },
            setpoint: AbsSpread { center: 22.0, half_width: 1.5 },
            deadband: 1.0,
            mode: Mode::Cooling,
            baseline_kw: [0.5, 1.5],
            baseline_noise: 0.2,
        }
    }
}

/// Daily ambient profile `T(h) = peak + amplitude · (cos(2π(h − peak_hour)/24) − 1)`.
///
/// Each day's peak is drawn uniformly from `peak_range` unless fixed in `fixed_peaks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmbientSpec {
    pub peak_range: [f64; 2],
    pub amplitude: f64,
    pub peak_hour: f64,
    pub fixed_peaks: BTreeMap<NaiveDate, f64>,
}

impl Default for AmbientSpec {
    fn default() -> Self {
        Self {
            peak_range: [24.0, 41.0],
            amplitude: 4.0,
            peak_hour: 15.0,
            fixed_peaks: BTreeMap::new(),
        }
    }
}

impl AmbientSpec {
    pub fn shape(&self, hour: f64) -> f64 {
        self.amplitude * ((2.0 * std::f64::consts::PI * (hour - self.peak_hour) / 24.0).cos() - 1.0)
    }

    /// Peak that makes the profile read `temp` at `hour`.
    pub fn peak_for(&self, temp: f64, hour: f64) -> f64 {
        temp - self.shape(hour)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageWindow {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub population: PopulationSpec,
    /// Midnight at the start of the horizon.
    pub start: DateTime<Utc>,
    pub days: usize,
    #[serde(default)]
    pub ambient: AmbientSpec,
    #[serde(default)]
    pub outage: Option<OutageWindow>,
    #[serde(default = "default_inner_step")]
    pub inner_step_min: u32,
    /// Identifier written to `outages.csv`.
    #[serde(default = "default_case_id")]
    pub case_id: String,
    pub seed: u64,
}

fn default_inner_step() -> u32 {
    1
}

fn default_case_id() -> String {
    "case-1".into()
}

/// Per-day ambient stream, kept apart from the per-house streams.
const AMBIENT_STREAM: u64 = u64::MAX;

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.start.time() != chrono::NaiveTime::MIN || self.start.second() != 0 {
            return Err(Error::InvalidInput("scenario must start at midnight".into()));
        }
        if self.days == 0 || self.population.count == 0 {
            return Err(Error::InvalidInput("scenario needs at least one day and one house".into()));
        }
        if self.inner_step_min == 0 || STEP_MINUTES % self.inner_step_min as i64 != 0 {
            return Err(Error::InvalidInput(format!(
                "inner step {} min does not divide the {STEP_MINUTES}-min meter interval",
                self.inner_step_min
            )));
        }
        let p = &self.population;
        let positive = [
            p.r.nominal * (1.0 - p.r.rel),
            p.c_th.nominal * (1.0 - p.c_th.rel),
            p.p_rated.nominal * (1.0 - p.p_rated.rel),
            p.eta.nominal * (1.0 - p.eta.rel),
            p.deadband,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput("house parameters must stay positive".into()));
        }
        if !(p.baseline_kw[0] >= 0.0 && p.baseline_kw[1] >= p.baseline_kw[0] && p.baseline_noise >= 0.0) {
            return Err(Error::InvalidInput("invalid baseline demand spec".into()));
        }
        if let Some(w) = &self.outage {
            if w.end < w.start || w.start < self.start || w.end > self.end() {
                return Err(Error::InvalidInput("outage window outside the horizon".into()));
            }
            let minute_aligned = |t: DateTime<Utc>| {
                let m = (t - self.start).num_seconds();
                m % (60 * self.inner_step_min as i64) == 0
            };
            if !minute_aligned(w.start) || !minute_aligned(w.end) {
                return Err(Error::InvalidInput("outage window must fall on inner steps".into()));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.start + Duration::days(self.days as i64)
    }

    pub fn n_slots(&self) -> usize {
        self.days * (24 * 60 / STEP_MINUTES as usize)
    }

    pub fn steps_per_slot(&self) -> usize {
        STEP_MINUTES as usize / self.inner_step_min as usize
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start.date_naive() + Duration::days(day as i64)
    }

    pub fn daily_peaks(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(AMBIENT_STREAM);
        let [lo, hi] = self.ambient.peak_range;
        (0..self.days)
            .map(|d| {
                let drawn = if hi > lo { rng.random_range(lo..hi) } else { lo };
                *self.ambient.fixed_peaks.get(&self.date(d)).unwrap_or(&drawn)
            })
            .collect()
    }

    /// Ambient temperature at the start of every inner step.
    pub fn ambient_per_step(&self) -> Vec<f64> {
        let peaks = self.daily_peaks();
        let per_day = 24 * 60 / self.inner_step_min as usize;
        let shape: Vec<f64> = (0..per_day)
            .map(|k| self.ambient.shape(k as f64 * self.inner_step_min as f64 / 60.0))
            .collect();
        peaks
            .iter()
            .flat_map(|p| shape.iter().map(move |s| p + s))
            .collect()
    }

    /// Draws the houses and their mean baseline demand from per-house streams.
    pub fn draw_population(&self) -> Vec<(TclHouse, f64, ChaCha8Rng)> {
        let p = &self.population;
        (0..p.count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(i as u64);
                let setpoint = p.setpoint.draw(&mut rng);
                let mut house = TclHouse {
                    r: p.r.draw(&mut rng),
                    c_th: p.c_th.draw(&mut rng),
                    p_rated: p.p_rated.draw(&mut rng),
                    eta: p.eta.draw(&mut rng),
                    setpoint,
                    deadband: p.deadband,
                    mode: p.mode,
                    on: false,
                    theta: setpoint,
                };
                house.theta = setpoint + rng.random_range(-0.5..0.5) * p.deadband;
                house.on = rng.random_bool(0.5);
                let [lo, hi] = p.baseline_kw;
                let base = if hi > lo { rng.random_range(lo..hi) } else { lo };
                (house, base, rng)
            })
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Relative shape of non-TCL demand over the day (mean near one): low at
/// night, a morning bump, flat through the afternoon and an evening peak.
pub fn baseline_shape(hour: f64) -> f64 {
    let bump = |center: f64, width: f64| (-((hour - center) / width).powi(2)).exp();
    let night = if !(6.0..22.0).contains(&hour) { -0.3 } else { 0.0 };
    let afternoon_flat = (12.0..18.0).contains(&hour);
    let morning = if afternoon_flat { 0.0 } else { 0.5 * bump(7.5, 1.2) };
    let evening = if afternoon_flat { 0.0 } else { 0.8 * bump(20.0, 1.5) };
    1.0 + night + morning + evening
}
