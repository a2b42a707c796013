//! Pairwise contingency tables and the pairwise-likelihood machinery.

mod cells;
mod gradient;
mod likelihood;
mod tables;

pub use cells::{pair_cell_probability, standardized_thresholds, CellProbabilities, PROB_FLOOR};
pub use gradient::{objective_and_gradient, Objective};
pub use likelihood::{
    cell_posterior, estep, expected_complete_loglik, pairwise_loglik, posterior_entropy,
    update_weights, PosteriorTables,
};
pub use tables::{build_pairwise_tables, PairwiseTables};
