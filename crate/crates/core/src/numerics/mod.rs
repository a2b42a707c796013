//! Numerical primitives used by the model and fitting code.

pub mod bvn;
pub mod geneig;
pub mod ipf;
pub mod mvn;
pub mod normal;
pub mod optimize;

pub use bvn::{bivariate_normal_cdf, Bvn};
pub use geneig::generalized_eigen_trace;
pub use ipf::{ipf_fit, IpfOutcome, MarginTargets};
pub use mvn::{mvn_rectangle_probability, RectangleSpec};
pub use normal::{checked_std_normal_cdf, std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use optimize::{
    maximize, FnObjective, MaximizeOptions, MaximizeResult, MaximizeStatus, SmoothObjective,
};
