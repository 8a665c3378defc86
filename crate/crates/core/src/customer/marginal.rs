use serde::{Deserialize, Serialize};

use super::pdf::Pdf1D;
use crate::data::DemandSeries;
use crate::gmm::{Gmm2D, Point};
use crate::stats::normal_cdf;
use crate::{Error, Result};

/// `(P̂_d, C_i)` pairs of one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionSamples {
    pub customer_id: String,
    pub pairs: Vec<Point>,
}

impl ContributionSamples {
    /// Products `P̂_d · C_i`, the customer's estimated diversified demand.
    pub fn products(&self) -> Vec<f64> {
        self.pairs.iter().map(|[p, c]| p * c).collect()
    }
}

/// `C_i(t) = p_{d,i}(t) / P_d(t)` at `slots`, each paired with the estimate
/// `p_hat[k]` of the feeder demand at `slots[k]`.
pub fn contribution_factors(
    customers: &[DemandSeries],
    feeder: &DemandSeries,
    slots: &[usize],
    p_hat: &[f64],
) -> Result<Vec<ContributionSamples>> {
    if slots.len() != p_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: slots.len(),
            got: p_hat.len(),
        });
    }
    for c in customers {
        if !c.is_aligned_with(feeder) {
            return Err(Error::Alignment(format!(
                "customer {} is not aligned with the feeder",
                c.entity_id()
            )));
        }
    }
    for &t in slots {
        if t >= feeder.len() {
            return Err(Error::InvalidInput(format!("slot {t} is outside the series")));
        }
        if !feeder.is_normal(t) || customers.iter().any(|c| !c.is_normal(t)) {
            return Err(Error::InvalidInput(format!("slot {t} is not a normal reading")));
        }
        if !(feeder.value(t) > 0.0) {
            return Err(Error::InvalidInput(format!("feeder demand is zero at slot {t}")));
        }
    }
    Ok(customers
        .iter()
        .map(|c| ContributionSamples {
            customer_id: c.entity_id().to_string(),
            pairs: slots
                .iter()
                .zip(p_hat)
                .map(|(&t, &p)| [p, c.value(t) / feeder.value(t)])
                .collect(),
        })
        .collect())
}

/// Uniform output grid `[lo, hi]` with `points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    /// `[0, 1.5 · q99.9(samples)]` on 4096 points.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no demand samples for the grid".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = crate::stats::quantile(&sorted, 0.999);
        if !(q > 0.0) {
            return Err(Error::InvalidInput("demand samples are not positive".into()));
        }
        Ok(Self {
            lo: 0.0,
            hi: 1.5 * q,
            points: 4096,
        })
    }
}

/// Lower cutoff of the contribution-factor integral.
pub const C_EPSILON: f64 = 1e-4;
/// Simpson intervals over `ln C`.
pub const C_INTERVALS: usize = 2048;
/// Allowed relative mass lost to the output grid bounds.
pub const MAX_TRUNCATION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalDiagnostics {
    /// Mixture mass with `C` inside `c_range`.
    pub in_domain_mass: f64,
    /// Quadrature mass on the output grid before renormalization.
    pub grid_mass: f64,
    /// `(in_domain_mass − grid_mass) / in_domain_mass`.
    pub truncation: f64,
    pub c_range: [f64; 2],
}

/// Density of the product `P̂_d · C` under the joint mixture:
/// `h(p) = ∫ f(p/C, C) / C dC`, integrated over `u = ln C` by composite
/// Simpson on [`C_INTERVALS`] intervals, then renormalized.
///
/// The C-range is the mixture's `±10σ_C` envelope clipped to `[ε, 1]`.
pub fn marginal_customer_pdf(joint: &Gmm2D, grid: GridSpec) -> Result<(Pdf1D, MarginalDiagnostics)> {
    if !(grid.hi > grid.lo) || grid.points < 2 {
        return Err(Error::InvalidInput("empty output grid".into()));
    }
    let comps = joint.components();
    let c_lo = comps
        .iter()
        .map(|k| k.mean[1] - 10.0 * k.cov[1][1].sqrt())
        .fold(f64::INFINITY, f64::min)
        .max(C_EPSILON);
    let c_hi = comps
        .iter()
        .map(|k| k.mean[1] + 10.0 * k.cov[1][1].sqrt())
        .fold(f64::NEG_INFINITY, f64::max)
        .min(1.0);
    if !(c_hi > c_lo) {
        return Err(Error::InvalidInput(format!(
            "contribution factor mass lies outside ({C_EPSILON}, 1)"
        )));
    }
    let in_domain: f64 = comps
        .iter()
        .map(|k| {
            let sd = k.cov[1][1].sqrt();
            k.weight * (normal_cdf((c_hi - k.mean[1]) / sd) - normal_cdf((c_lo - k.mean[1]) / sd))
        })
        .sum();
    if 1.0 - in_domain > 1e-6 {
        log::info!(
            "{:.3e} of the mixture mass has C outside [{c_lo:.3e}, {c_hi:.3e}] and is dropped",
            1.0 - in_domain
        );
    }

    let (u_lo, u_hi) = (c_lo.ln(), c_hi.ln());
    let du = (u_hi - u_lo) / C_INTERVALS as f64;
    let nodes: Vec<(f64, f64, f64)> = (0..=C_INTERVALS)
        .map(|k| {
            let u = u_lo + du * k as f64;
            let w = if k == 0 || k == C_INTERVALS {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (u.exp(), (-u).exp(), w * du / 3.0)
        })
        .collect();
    let step = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let densities: Vec<f64> = (0..grid.points)
        .map(|i| {
            let p = grid.lo + step * i as f64;
            nodes
                .iter()
                .map(|&(c, inv_c, w)| w * joint.pdf(&[p * inv_c, c]))
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    let raw = Pdf1D::new(grid.lo, step, densities)?;
    let grid_mass = raw.integral();
    let truncation = (in_domain - grid_mass) / in_domain;
    if truncation > MAX_TRUNCATION {
        return Err(Error::GridTooSmall {
            lo: grid.lo,
            hi: grid.hi,
            mass_outside: truncation,
            suggested_hi: grid.hi * 1.5,
        });
    }
    if truncation.abs() > 1e-6 {
        log::debug!("product density renormalized by {:.3e}", truncation);
    }
    Ok((
        raw.normalized()?,
        MarginalDiagnostics {
            in_domain_mass: in_domain,
            grid_mass,
            truncation,
            c_range: [c_lo, c_hi],
        },
    ))
}
