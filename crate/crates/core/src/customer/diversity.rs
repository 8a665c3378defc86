use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::pdf::Pdf1D;
use crate::data::{cell_of, DemandSeries, HolidayCalendar, STEP_MINUTES};
use crate::stats::{self, quantile};
use crate::{Error, Result};

/// `q(I) = h(p_u − I)`: density of the demand increase `I = p_u − p̂`.
pub fn demand_increase_pdf(h: &Pdf1D, p_u: f64) -> Result<Pdf1D> {
    if !(p_u >= 0.0) {
        return Err(Error::InvalidInput(format!("restoration demand {p_u} is negative")));
    }
    Ok(h.reflected(p_u))
}

/// Differential entropy in bits.
pub fn entropy(pdf: &Pdf1D) -> f64 {
    pdf.entropy_bits()
}

/// Probabilities below this count as zero in the diversity index.
pub const POSITIVITY_THRESHOLD: f64 = 1e-6;

/// Unit step with `H(0) = 1`.
pub fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub i0: Vec<f64>,
    /// `probabilities[k][i] = P(I_i ≥ i0[k])`.
    pub probabilities: Vec<Vec<f64>>,
    /// Percentage of customers whose increase exceeds each threshold with
    /// non-negligible probability.
    pub r_lb: Vec<f64>,
    /// Min, lower quartile, median, upper quartile and max of the
    /// probabilities at each threshold.
    pub quartiles: Vec<[f64; 5]>,
}

pub fn diversity_report(increases: &[Pdf1D], i0_grid: &[f64]) -> Result<DiversityReport> {
    if increases.is_empty() {
        return Err(Error::InsufficientData("no customer densities".into()));
    }
    let m = increases.len() as f64;
    let mut probabilities = Vec::with_capacity(i0_grid.len());
    let mut r_lb = Vec::with_capacity(i0_grid.len());
    let mut quartiles = Vec::with_capacity(i0_grid.len());
    for &i0 in i0_grid {
        let probs: Vec<f64> = increases.iter().map(|q| q.survival(i0)).collect();
        let count: f64 = probs.iter().map(|p| heaviside(p - POSITIVITY_THRESHOLD)).sum();
        r_lb.push(100.0 * count / m);
        let mut sorted = probs.clone();
        sorted.sort_by(f64::total_cmp);
        quartiles.push([
            sorted[0],
            quantile(&sorted, 0.25),
            quantile(&sorted, 0.5),
            quantile(&sorted, 0.75),
            sorted[sorted.len() - 1],
        ]);
        probabilities.push(probs);
    }
    Ok(DiversityReport {
        i0: i0_grid.to_vec(),
        probabilities,
        r_lb,
        quartiles,
    })
}

/// Plug-in differential entropy (bits) of `samples` from a histogram with
/// bins of width `bin`.
pub fn histogram_entropy_bits(samples: &[f64], bin: f64) -> Result<f64> {
    if samples.is_empty() || !(bin > 0.0) {
        return Err(Error::InsufficientData("histogram entropy needs samples and a bin width".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for x in samples {
        *counts.entry(((x - lo) / bin).floor() as i64).or_default() += 1;
    }
    let n = samples.len() as f64;
    Ok(-counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * (p / bin).log2()
        })
        .sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCorrelation {
    /// `(E(Î_i), E(p_{d,i}))` per customer, bits.
    pub pairs: Vec<(f64, f64)>,
    pub r: f64,
}

/// Pairs each customer's increase-density entropy with the histogram entropy
/// of their normal demand samples (same bin width as the density grid) and
/// correlates them.
pub fn entropy_correlation(customers: &[(&Pdf1D, &[f64])]) -> Result<EntropyCorrelation> {
    if customers.len() < 3 {
        return Err(Error::InsufficientData("entropy correlation needs three customers".into()));
    }
    let pairs: Vec<(f64, f64)> = customers
        .iter()
        .map(|(q, samples)| Ok((q.entropy_bits(), histogram_entropy_bits(samples, q.step())?)))
        .collect::<Result<_>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    let r = stats::pearson(&a, &b)?;
    Ok(EntropyCorrelation { pairs, r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyComparison {
    pub customer_ids: Vec<String>,
    /// Energy (kWh) in the window after restoration.
    pub post_restoration: Vec<f64>,
    /// Average energy (kWh) in the same clock window on normal days.
    pub normal_average: Vec<f64>,
    pub days_averaged: usize,
    /// Least-squares line `normal_average = slope · post_restoration + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
}

/// Energy over `[t_r, t_r + window)` for each customer against the mean of the
/// same clock window on other days of the same season/day-type cell where
/// every customer was normal throughout.
pub fn energy_comparison(
    customers: &[DemandSeries],
    tr: DateTime<Utc>,
    window: Duration,
    calendar: &HolidayCalendar,
    min_days: usize,
) -> Result<EnergyComparison> {
    let first = customers
        .first()
        .ok_or_else(|| Error::InsufficientData("no customers".into()))?;
    let slot0 = first
        .first_slot_at_or_after(tr)
        .ok_or_else(|| Error::InsufficientData("series ends before restoration".into()))?;
    let n = (window.num_minutes() / STEP_MINUTES) as usize;
    if n == 0 || slot0 + n > first.len() {
        return Err(Error::InsufficientData("post-restoration window not fully recorded".into()));
    }
    let hours = STEP_MINUTES as f64 / 60.0;
    let energy = |c: &DemandSeries, from: usize| -> f64 {
        c.values()[from..from + n].iter().sum::<f64>() * hours
    };
    for c in customers {
        if !c.is_aligned_with(first) {
            return Err(Error::Alignment(format!("{} is not aligned", c.entity_id())));
        }
        if (slot0..slot0 + n).any(|t| !c.is_normal(t)) {
            return Err(Error::InsufficientData(format!(
                "{}: post-restoration window has non-normal readings",
                c.entity_id()
            )));
        }
    }
    let cell = cell_of(first.timestamp(slot0).date_naive(), calendar);
    let per_day = (24 * 60 / STEP_MINUTES) as usize;
    let mut days = Vec::new();
    let mut start = slot0 % per_day;
    while start + n <= first.len() {
        let date = first.timestamp(start).date_naive();
        if start != slot0
            && cell_of(date, calendar) == cell
            && customers.iter().all(|c| (start..start + n).all(|t| c.is_normal(t)))
        {
            days.push(start);
        }
        start += per_day;
    }
    if days.len() < min_days {
        return Err(Error::InsufficientData(format!(
            "only {} normal days available for the average, need {min_days}",
            days.len()
        )));
    }
    let post: Vec<f64> = customers.iter().map(|c| energy(c, slot0)).collect();
    let avg: Vec<f64> = customers
        .iter()
        .map(|c| days.iter().map(|&d| energy(c, d)).sum::<f64>() / days.len() as f64)
        .collect();
    let (slope, intercept) = stats::linear_fit(&post, &avg)?;
    let r = stats::pearson(&post, &avg)?;
    Ok(EnergyComparison {
        customer_ids: customers.iter().map(|c| c.entity_id().to_string()).collect(),
        post_restoration: post,
        normal_average: avg,
        days_averaged: days.len(),
        slope,
        intercept,
        r,
    })
}
