use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use ordscr::selection::grid_select;

use super::{DataArgs, EmArgs, Outcome};
use crate::output::{Clock, OutputDir};

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Component counts to try.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub g_grid: Vec<usize>,
    /// Subspace dimensions to try.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub q_grid: Vec<usize>,
    #[command(flatten)]
    pub em: EmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SelectArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let data = args.data.load()?;
    let tables = data.tables()?;
    let config = args.em.config();
    let report = grid_select(&tables, &args.g_grid, &args.q_grid, &config)?;

    let table = report.table();
    print!("{table}");
    println!("chosen: G={} Q={}", report.chosen.0, report.chosen.1);

    let mut out = OutputDir::create(&args.out)?;
    out.write_json("selection.json", &report)?;
    out.write_text("grid.txt", &table)?;
    out.finish(clock.manifest(
        "select",
        &[&args.data.data],
        serde_json::json!({
            "freq": args.data.freq,
            "categories": data.schema.categories(),
            "g_grid": args.g_grid,
            "q_grid": args.q_grid,
            "fit": config,
        }),
        Some(config.seed),
    ))?;
    Ok(Outcome::Done)
}
