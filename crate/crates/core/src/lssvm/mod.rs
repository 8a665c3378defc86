//! Least-squares SVM regression of feeder demand on its own lags and the
//! ambient temperature (a kernel NARX model).
//!
//! Training solves the bordered system
//!
//! ```text
//! [ 0   1ᵀ        ] [ b ]   [ 0   ]
//! [ 1   Ω + I/γ   ] [ α ] = [ P_d ]
//! ```
//!
//! with a Gaussian kernel matrix `Ω`. The feature map is never materialised.

mod cv;
mod kernel;
mod linalg;
mod model;
mod rows;

pub use cv::{cross_validate, log_grid, mape, CvConfig, CvOutcome};
pub use kernel::{kernel, squared_distance};
pub use model::{residual_stats, train, LssvmModel, Standardizer};
pub use rows::{build_training_rows, ExplanatoryVector, TrainingRow};
