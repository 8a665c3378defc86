use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Utc};

use super::outage::OutageRecord;
use super::series::{check_on_grid, step, DemandSeries, Flag, TemperatureSeries, KWH_TO_KW, STEP_MINUTES};
use crate::{Error, Result};

const METER_HEADER: [&str; 3] = ["meter_id", "timestamp", "kwh"];
const TEMP_HEADER: [&str; 2] = ["timestamp", "celsius"];
const OUTAGE_HEADER: [&str; 3] = ["case_id", "start", "end"];

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn format_ts(ts: DateTime<Utc>) -> String {
    ts.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

fn parse_ts(path: &Path, line: u64, s: &str) -> Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| parse_err(path, line, format!("bad timestamp {s:?}: {e}")))
}

fn parse_f64(path: &Path, line: u64, s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|e| parse_err(path, line, format!("bad number {s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite number {s:?}")));
    }
    Ok(v)
}

/// Opens `path` and checks the header matches `expected` exactly.
fn open_checked(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;
    let header = rdr.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(rdr)
}

fn records(
    path: &Path,
    expected: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = open_checked(path, expected)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

/// Reads one `meters.csv` file; see [`ingest_meter_files`].
pub fn ingest_meter_csv(path: impl AsRef<Path>, outages: &[OutageRecord]) -> Result<Vec<DemandSeries>> {
    ingest_meter_files(&[path], outages)
}

/// Reads one or more `meter_id,timestamp,kwh` files into one series per meter.
///
/// All series share the global time span of the input. Readings are converted
/// to average kW (kWh × 4). Slots without a reading are `Missing`; slots that
/// intersect any outage window are `Outage` with value 0 whatever was read.
pub fn ingest_meter_files<P: AsRef<Path>>(paths: &[P], outages: &[OutageRecord]) -> Result<Vec<DemandSeries>> {
    let mut by_meter: BTreeMap<String, BTreeMap<DateTime<Utc>, f64>> = BTreeMap::new();
    for path in paths {
        let path = path.as_ref();
        for (line, rec) in records(path, &METER_HEADER)? {
            let meter_id = rec[0].trim().to_string();
            if meter_id.is_empty() {
                return Err(parse_err(path, line, "empty meter_id"));
            }
            let ts = parse_ts(path, line, &rec[1])?;
            check_on_grid(ts)?;
            let kwh = parse_f64(path, line, &rec[2])?;
            if kwh < 0.0 {
                return Err(parse_err(path, line, format!("negative reading {kwh}")));
            }
            let slots = by_meter.entry(meter_id.clone()).or_default();
            if slots.insert(ts, kwh).is_some() {
                return Err(Error::DuplicateReading {
                    meter_id,
                    timestamp: format_ts(ts),
                });
            }
        }
    }
    let (Some(first), Some(last)) = (
        by_meter.values().filter_map(|m| m.keys().next()).min().copied(),
        by_meter.values().filter_map(|m| m.keys().next_back()).max().copied(),
    ) else {
        return Ok(Vec::new());
    };
    let n = ((last - first).num_minutes() / STEP_MINUTES) as usize + 1;
    let outage_slot: Vec<bool> = (0..n)
        .map(|i| {
            let s = first + step() * i as i32;
            outages.iter().any(|o| o.overlaps(s, s + step()))
        })
        .collect();

    by_meter
        .into_iter()
        .map(|(meter_id, readings)| {
            let mut values = vec![0.0; n];
            let mut flags = vec![Flag::Missing; n];
            for (ts, kwh) in readings {
                let i = ((ts - first).num_minutes() / STEP_MINUTES) as usize;
                values[i] = kwh * KWH_TO_KW;
                flags[i] = Flag::Normal;
            }
            for i in 0..n {
                if outage_slot[i] {
                    values[i] = 0.0;
                    flags[i] = Flag::Outage;
                }
            }
            DemandSeries::new(meter_id, first, values, flags)
        })
        .collect()
}

/// Writes series in the `meters.csv` format; missing slots are omitted.
pub fn write_meter_csv(path: impl AsRef<Path>, series: &[DemandSeries]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(METER_HEADER)?;
    for s in series {
        for i in 0..s.len() {
            if s.flag(i) == Flag::Missing {
                continue;
            }
            let kwh = s.value(i) / KWH_TO_KW;
            w.write_record([s.entity_id(), &format_ts(s.timestamp(i)), &kwh.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a contiguous 15-minute `timestamp,celsius` file.
pub fn read_temperature_csv(path: impl AsRef<Path>) -> Result<TemperatureSeries> {
    let path = path.as_ref();
    let mut rows: BTreeMap<DateTime<Utc>, f64> = BTreeMap::new();
    for (line, rec) in records(path, &TEMP_HEADER)? {
        let ts = parse_ts(path, line, &rec[0])?;
        check_on_grid(ts)?;
        let c = parse_f64(path, line, &rec[1])?;
        if rows.insert(ts, c).is_some() {
            return Err(parse_err(path, line, format!("duplicate timestamp {}", format_ts(ts))));
        }
    }
    let start = *rows
        .keys()
        .next()
        .ok_or_else(|| Error::InsufficientData(format!("{} has no rows", path.display())))?;
    let mut values = Vec::with_capacity(rows.len());
    for (i, (ts, c)) in rows.into_iter().enumerate() {
        let expected = start + step() * i as i32;
        if ts != expected {
            return Err(Error::InsufficientData(format!(
                "{}: temperature gap at {}",
                path.display(),
                format_ts(expected)
            )));
        }
        values.push(c);
    }
    TemperatureSeries::new(start, values)
}

pub fn write_temperature_csv(path: impl AsRef<Path>, temp: &TemperatureSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TEMP_HEADER)?;
    for (i, c) in temp.values().iter().enumerate() {
        w.write_record([format_ts(temp.timestamp(i)), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_outages_csv(path: impl AsRef<Path>) -> Result<Vec<OutageRecord>> {
    let path = path.as_ref();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in records(path, &OUTAGE_HEADER)? {
        let case_id = rec[0].trim().to_string();
        if !seen.insert(case_id.clone()) {
            return Err(parse_err(path, line, format!("duplicate case_id {case_id}")));
        }
        let start = parse_ts(path, line, &rec[1])?;
        let end = parse_ts(path, line, &rec[2])?;
        out.push(OutageRecord::new(case_id, start, end).map_err(|e| parse_err(path, line, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_outages_csv(path: impl AsRef<Path>, outages: &[OutageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(OUTAGE_HEADER)?;
    for o in outages {
        w.write_record([o.case_id.as_str(), &format_ts(o.start), &format_ts(o.end)])?;
    }
    w.flush()?;
    Ok(())
}
