//! Benchmark helpers.

use ordscr::em::{initialize, StartMode};
use ordscr::model::{PackLayout, ScrParameters};
use ordscr::pairwise::{build_pairwise_tables, PairwiseTables};
use ordscr::simulate::{generate_dataset, scenario_preset};

/// Data, a rational start and its packing layout for one (G, Q).
pub struct Problem {
    pub tables: PairwiseTables,
    pub params: ScrParameters,
    pub layout: PackLayout,
}

impl Problem {
    fn new(tables: PairwiseTables, g: usize, q: usize) -> Self {
        let params = initialize(&tables, g, q, 0, StartMode::Rational).expect("start");
        let layout = PackLayout::new(tables.schema(), g, q).expect("layout");
        Self {
            tables,
            params,
            layout,
        }
    }

    pub fn gss(g: usize, q: usize) -> Self {
        Self::new(ordscr::datasets::gss().tables().expect("fixture"), g, q)
    }

    /// `n` draws from the separated five-variable scenario.
    pub fn simulated(n: usize, q: usize) -> Self {
        let spec = scenario_preset("scr-separated").expect("preset");
        let data = generate_dataset(&spec, n, 1).expect("sample");
        let tables = build_pairwise_tables(&data.rows, None, &spec.schema()).expect("tables");
        Self::new(tables, spec.n_components(), q)
    }
}
