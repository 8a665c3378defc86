//! Feeder-level CLPU assessment: counterfactual diversified demand at
//! restoration, CLPU ratios, the ratio surface over outage duration and
//! temperature, and the sensitivity studies built on them.

mod estimate;
mod studies;
mod surface;

pub use estimate::{
    clpu_ratio, diversity_restored, estimate_diversified, pre_outage_lags, read_results_csv,
    write_results_csv, ClpuRatioResult, DiversifiedEstimate,
};
pub use studies::{
    monitored_fraction_study, outage_count_study, robustness_study, MonitoredInputs, MonitoredPoint,
    OutageCountPoint, RobustnessConfig, RobustnessPoint, RobustnessReport,
};
pub use surface::{surface_terms, RatioSurface, SurfacePoint};
