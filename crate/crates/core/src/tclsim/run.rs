use std::path::Path;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::house::TclHouse;
use super::scenario::{baseline_shape, OutageWindow, Scenario};
use crate::data::{
    aggregate_feeder, write_meter_csv, write_outages_csv, write_temperature_csv, DemandSeries, Flag,
    OutageRecord, TemperatureSeries, KWH_TO_KW, STEP_MINUTES,
};
use crate::{Error, Result};

/// Exact restoration quantities of a simulated outage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub case_id: String,
    pub t0: DateTime<Utc>,
    pub tr: DateTime<Utc>,
    pub duration_min: f64,
    pub temp_c: f64,
    pub restoration_slot: usize,
    pub p_u: f64,
    /// Demand of the no-outage world in the restoration slot.
    pub p_d_counterfactual: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Houses in the world with the outage.
    pub houses: Vec<DemandSeries>,
    pub feeder: DemandSeries,
    /// The same houses with the outage removed.
    pub counterfactual_houses: Vec<DemandSeries>,
    pub counterfactual_feeder: DemandSeries,
    pub temperature: TemperatureSeries,
    pub outage: Option<OutageRecord>,
    pub truth: Option<GroundTruth>,
}

pub fn meter_id(index: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len();
    format!("m{index:0width$}")
}

struct HouseTrace {
    powered_kw: Vec<f64>,
    counterfactual_kw: Vec<f64>,
}

fn simulate_house(
    sc: &Scenario,
    mut house: TclHouse,
    base_kw: f64,
    mut rng: ChaCha8Rng,
    ambient: &[f64],
    outage_steps: Option<(usize, usize)>,
) -> HouseTrace {
    let n_slots = sc.n_slots();
    let sps = sc.steps_per_slot();
    let dt = sc.inner_step_min as f64;
    let sigma = sc.population.baseline_noise;
    let slot_hours = STEP_MINUTES as f64 / 60.0;
    let baseline_kwh: Vec<f64> = (0..n_slots)
        .map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let noise = (sigma * z - 0.5 * sigma * sigma).exp();
            let hour = ((s % 96) as f64 + 0.5) * slot_hours;
            base_kw * baseline_shape(hour) * noise * slot_hours
        })
        .collect();

    let decay = house.decay(dt);
    let total_steps = n_slots * sps;
    let fork = outage_steps.map_or(total_steps, |(s, _)| s);
    let mut cf = vec![0.0; n_slots];
    for (k, t_amb) in ambient.iter().enumerate().take(fork) {
        cf[k / sps] += house.advance(*t_amb, dt, decay, true);
    }
    let mut pw = cf.clone();
    if let Some((start, end)) = outage_steps {
        let mut other = house.clone();
        let fork_slot = fork / sps;
        pw[fork_slot + 1..].iter_mut().for_each(|v| *v = 0.0);
        for k in fork..total_steps {
            let t_amb = ambient[k];
            cf[k / sps] += house.advance(t_amb, dt, decay, true);
            let powered = !(start..end).contains(&k);
            pw[k / sps] += other.advance(t_amb, dt, decay, powered);
        }
    }
    let to_kw = |tcl: &mut Vec<f64>| {
        for (v, b) in tcl.iter_mut().zip(&baseline_kwh) {
            *v = (*v + b) * KWH_TO_KW;
        }
    };
    to_kw(&mut cf);
    to_kw(&mut pw);
    HouseTrace {
        powered_kw: pw,
        counterfactual_kw: cf,
    }
}

/// Runs the outage world and the no-outage world from identical seeds.
pub fn run_scenario(sc: &Scenario) -> Result<SimOutput> {
    sc.validate()?;
    let ambient = sc.ambient_per_step();
    let step_of = |t: DateTime<Utc>| ((t - sc.start).num_minutes() / sc.inner_step_min as i64) as usize;
    let outage_steps = sc
        .outage
        .filter(|w| w.end > w.start)
        .map(|w| (step_of(w.start), step_of(w.end)));
    let population = sc.draw_population();
    let traces: Vec<HouseTrace> = population
        .into_par_iter()
        .map(|(house, base, rng)| simulate_house(sc, house, base, rng, &ambient, outage_steps))
        .collect();

    let n_slots = sc.n_slots();
    let slot_len = Duration::minutes(STEP_MINUTES);
    let record = match (sc.outage, outage_steps) {
        (Some(w), Some(_)) => Some(OutageRecord::new(sc.case_id.clone(), w.start, w.end)?),
        _ => None,
    };
    let flags: Vec<Flag> = (0..n_slots)
        .map(|s| {
            let t = sc.start + slot_len * s as i32;
            match &record {
                Some(r) if r.overlaps(t, t + slot_len) => Flag::Outage,
                _ => Flag::Normal,
            }
        })
        .collect();

    let count = sc.population.count;
    let mut houses = Vec::with_capacity(count);
    let mut cf_houses = Vec::with_capacity(count);
    for (i, tr) in traces.into_iter().enumerate() {
        let id = meter_id(i, count);
        let mut pw = tr.powered_kw;
        for (v, f) in pw.iter_mut().zip(&flags) {
            if *f == Flag::Outage {
                *v = 0.0;
            }
        }
        houses.push(DemandSeries::new(id.clone(), sc.start, pw, flags.clone())?);
        cf_houses.push(DemandSeries::normal(id, sc.start, tr.counterfactual_kw)?);
    }
    let feeder = aggregate_feeder(&houses, "feeder")?;
    let cf_feeder = aggregate_feeder(&cf_houses, "feeder")?;
    let sps = sc.steps_per_slot();
    let temperature = TemperatureSeries::new(
        sc.start,
        (0..n_slots).map(|s| ambient[s * sps]).collect(),
    )?;

    let truth = match sc.outage {
        Some(w) => Some(ground_truth(sc, &w, &feeder, &cf_feeder, &temperature)?),
        None => None,
    };
    Ok(SimOutput {
        houses,
        feeder,
        counterfactual_houses: cf_houses,
        counterfactual_feeder: cf_feeder,
        temperature,
        outage: record,
        truth,
    })
}

fn ground_truth(
    sc: &Scenario,
    w: &OutageWindow,
    feeder: &DemandSeries,
    cf: &DemandSeries,
    temp: &TemperatureSeries,
) -> Result<GroundTruth> {
    let slot = feeder.first_slot_at_or_after(w.end).ok_or_else(|| {
        Error::InvalidInput("restoration falls after the simulated horizon".into())
    })?;
    let p_u = feeder.value(slot);
    let p_d = cf.value(slot);
    Ok(GroundTruth {
        case_id: sc.case_id.clone(),
        t0: w.start,
        tr: w.end,
        duration_min: (w.end - w.start).num_seconds() as f64 / 60.0,
        temp_c: temp.values()[slot],
        restoration_slot: slot,
        p_u,
        p_d_counterfactual: p_d,
        ratio: p_u / p_d,
    })
}

/// Outage `duration_min` long centred on `center_hour` of `date`, with that
/// day's ambient profile pinned so the restoration slot reads `temp_c`.
pub fn with_outage(
    base: &Scenario,
    case_id: impl Into<String>,
    date: NaiveDate,
    center_hour: f64,
    duration_min: u32,
    temp_c: f64,
) -> Result<Scenario> {
    let midnight = date.and_time(chrono::NaiveTime::MIN).and_utc();
    let center = midnight + Duration::seconds((center_hour * 3600.0).round() as i64);
    let half = Duration::seconds(duration_min as i64 * 30);
    let (t0, tr) = (center - half, center + half);
    let tr_hour = (tr - midnight).num_seconds() as f64 / 3600.0;
    let mut sc = base.clone();
    sc.case_id = case_id.into();
    sc.outage = Some(OutageWindow { start: t0, end: tr });
    sc.ambient
        .fixed_peaks
        .insert(date, sc.ambient.peak_for(temp_c, tr_hour));
    sc.validate()?;
    Ok(sc)
}

/// One scenario per (O, T) pair, O varying fastest within each T; outages sit
/// on `date` centred at the ambient peak hour.
pub fn generate_case_grid(
    durations_min: &[u32],
    temps_c: &[f64],
    base: &Scenario,
    date: NaiveDate,
) -> Result<Vec<Scenario>> {
    let mut out = Vec::with_capacity(durations_min.len() * temps_c.len());
    let width = (durations_min.len() * temps_c.len()).to_string().len().max(2);
    for &t in temps_c {
        for &o in durations_min {
            let id = format!("c{:0width$}", out.len() + 1);
            out.push(with_outage(base, id, date, base.ambient.peak_hour, o, t)?);
        }
    }
    Ok(out)
}

/// Writes `meters.csv`, `counterfactual_meters.csv`, `temperature.csv`,
/// `outages.csv` and (for outage runs) `ground_truth.json` into `dir`.
pub fn write_outputs(dir: impl AsRef<Path>, out: &SimOutput) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_meter_csv(dir.join("meters.csv"), &out.houses)?;
    write_meter_csv(dir.join("counterfactual_meters.csv"), &out.counterfactual_houses)?;
    write_temperature_csv(dir.join("temperature.csv"), &out.temperature)?;
    let records: Vec<OutageRecord> = out.outage.iter().cloned().collect();
    write_outages_csv(dir.join("outages.csv"), &records)?;
    if let Some(t) = &out.truth {
        std::fs::write(dir.join("ground_truth.json"), serde_json::to_string_pretty(t)?)?;
    }
    Ok(())
}
