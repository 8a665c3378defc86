//! Customer-level CLPU analysis: contribution factors, product densities of
//! estimated customer demand, demand-increase densities and their aggregate,
//! and the diversity, entropy and energy indices.

mod diversity;
mod marginal;
mod pdf;

pub use diversity::{
    demand_increase_pdf, diversity_report, energy_comparison, entropy, entropy_correlation,
    heaviside, histogram_entropy_bits, DiversityReport, EnergyComparison, EntropyCorrelation,
    POSITIVITY_THRESHOLD,
};
pub use marginal::{
    contribution_factors, marginal_customer_pdf, ContributionSamples, GridSpec, MarginalDiagnostics,
    C_EPSILON, C_INTERVALS, MAX_TRUNCATION,
};
pub use pdf::{convolve, Pdf1D};

/// Aggregate demand-increase density of independent customers.
pub fn convolve_increases(pdfs: &[Pdf1D]) -> crate::Result<Pdf1D> {
    convolve(pdfs)
}
