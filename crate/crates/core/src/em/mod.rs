//! Initialization, the pairwise EM loop and multi-start orchestration.

mod fit;
mod init;
mod kmeans;

pub use fit::{em_fit, multi_start_fit, start_seed, FitConfig, FitResult};
pub use init::{initialize, marginal_thresholds, StartMode};
