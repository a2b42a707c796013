//! Joint posterior reconstruction, hard assignment and evaluation metrics.

mod metrics;
mod posterior;

pub use metrics::{argmax, ari, hard_assign, loss_measure, PartitionMatrix, MAX_LOSS_COMPONENTS};
pub use posterior::{
    ipf_joint_posterior, joint_posterior, pairwise_product_posterior, JointPosterior,
    PosteriorMethod, IPF_MAX_SWEEPS, IPF_TOL, MAX_IPF_CELLS,
};
