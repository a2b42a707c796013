pub mod classify;
pub mod evaluate;
pub mod fit;
pub mod select;
pub mod simulate;

use std::path::PathBuf;

use clap::Args;
use ordscr::em::FitConfig;

/// What a successful command reports back to the process.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// Outputs were written but EM stopped before meeting its tolerance.
    NotConverged,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// CSV file; the header names the variables, cells hold categories 1..C.
    #[arg(long)]
    pub data: PathBuf,
    /// Column with pattern counts for pre-aggregated data.
    #[arg(long)]
    pub freq: Option<String>,
    /// Category counts per variable, e.g. 4,5,3 (default: largest observed code).
    #[arg(long, value_delimiter = ',')]
    pub categories: Option<Vec<usize>>,
}

impl DataArgs {
    pub fn load(&self) -> anyhow::Result<ordscr::datasets::FrequencyData> {
        crate::data::read_ordinal_csv(
            &self.data,
            &crate::data::DataSpec {
                freq: self.freq.as_deref(),
                categories: self.categories.as_deref(),
            },
        )
    }
}

#[derive(Args, Debug, Clone)]
pub struct EmArgs {
    /// Random seed for starts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of starts (one rational, the rest random).
    #[arg(long, default_value_t = 20)]
    pub starts: usize,
    /// EM stops when an iteration gains less pairwise log-likelihood than this.
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Run every start only to this tolerance, then refine the best to --tol.
    #[arg(long)]
    pub screen_tol: Option<f64>,
}

impl EmArgs {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            max_em_iters: self.max_iter,
            em_tol: self.tol,
            n_starts: self.starts,
            seed: self.seed,
            screen_tol: self.screen_tol,
            ..FitConfig::default()
        }
    }
}
