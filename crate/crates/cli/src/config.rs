use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clpu_core::data::HolidayCalendar;
use clpu_core::feeder::RobustnessConfig;
use clpu_core::pipeline::{CustomerConfig, PipelineConfig};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Everything a command may need. Loaded from `--config`, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub meters: Vec<PathBuf>,
    pub temperature: Option<PathBuf>,
    pub outages: Option<PathBuf>,
    /// `ground_truth.json` files written by `simulate`.
    pub ground_truth: Vec<PathBuf>,
    pub holidays: Vec<NaiveDate>,
    /// Years whose US federal holidays count as non-working days.
    pub federal_holiday_years: Vec<i32>,
    pub pipeline: PipelineConfig,
    pub customer: CustomerConfig,
    pub surface_degree: usize,
    pub robustness: RobustnessConfig,
    pub monitored_fractions: Vec<f64>,
    pub monitored_subsets: usize,
    pub outage_counts: Vec<usize>,
    pub outage_count_repeats: usize,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            meters: Vec::new(),
            temperature: None,
            outages: None,
            ground_truth: Vec::new(),
            holidays: Vec::new(),
            federal_holiday_years: Vec::new(),
            pipeline: PipelineConfig::default(),
            customer: CustomerConfig::default(),
            surface_degree: 2,
            robustness: RobustnessConfig::default(),
            monitored_fractions: vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0],
            monitored_subsets: 5,
            outage_counts: vec![6, 8, 10, 12, 14, 16, 18],
            outage_count_repeats: 200,
            out: None,
            seed: None,
        }
    }
}

/// Subsystems that draw their own seed from the root seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Simulate = 1,
    Gmm = 2,
    Robustness = 3,
    Monitored = 4,
    OutageCount = 5,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }

    pub fn calendar(&self) -> HolidayCalendar {
        let federal = HolidayCalendar::us_federal(self.federal_holiday_years.iter().copied());
        HolidayCalendar::new(federal.dates().copied().chain(self.holidays.iter().copied()))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn root_seed(&self, command: &str) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!("`{command}` is stochastic: pass --seed or set \"seed\" in the config"),
        }
    }

    /// Independent seed for one subsystem, derived from the root seed.
    pub fn seed_for(&self, command: &str, stream: Stream) -> Result<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root_seed(command)?);
        rng.set_stream(stream as u64);
        Ok(rng.next_u64())
    }

    /// Checks that every referenced input file exists.
    pub fn check_paths(&self) -> Result<()> {
        let mut all: Vec<(&str, &PathBuf)> = self.meters.iter().map(|p| ("meter", p)).collect();
        all.extend(self.temperature.iter().map(|p| ("temperature", p)));
        all.extend(self.outages.iter().map(|p| ("outage", p)));
        all.extend(self.ground_truth.iter().map(|p| ("ground-truth", p)));
        for (what, p) in all {
            if !p.is_file() {
                bail!("{what} file {} does not exist", p.display());
            }
        }
        Ok(())
    }
}
