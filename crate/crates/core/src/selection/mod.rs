//! Composite BIC and model selection over (G, Q) grids.

mod grid;
mod scores;
#[cfg(test)]
mod tests;

pub use grid::{
    cbic, grid_select, grid_select_with_fits, GridEntry, SelectionReport, SkippedModel,
};
pub use scores::{
    pair_cell_scores, pair_cell_scores_scaled, score_matrices, sensitivity_variability,
    total_score, CellScores, ScoreMatrices, SCORE_STEP,
};
