use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use ordscr::classify::{joint_posterior, JointPosterior};
use ordscr::em::multi_start_fit;
use ordscr::pairwise::PairwiseTables;

use super::{DataArgs, EmArgs, Outcome};
use crate::model_file::ModelFile;
use crate::output::{num, Clock, OutputDir};

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of mixture components.
    #[arg(long, default_value_t = 2)]
    pub g: usize,
    /// Dimension of the discriminative subspace.
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[command(flatten)]
    pub em: EmArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// One row per observed response pattern: codes, count, component posteriors.
pub fn posterior_rows(
    names: &[String],
    tables: &PairwiseTables,
    post: &JointPosterior,
) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = names.to_vec();
    header.push("count".into());
    header.extend((1..=post.n_components()).map(|g| format!("post_{g}")));
    let rows = tables
        .patterns()
        .iter()
        .map(|(pat, n)| {
            let probs = post
                .get(pat)
                .expect("posterior covers every tabulated pattern");
            pat.iter()
                .map(|c| (c + 1).to_string())
                .chain(std::iter::once(n.to_string()))
                .chain(probs.iter().map(|&p| num(p)))
                .collect()
        })
        .collect();
    (header, rows)
}

pub fn run(args: &FitArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let data = args.data.load()?;
    let tables = data.tables()?;
    let config = args.em.config();
    let fit = multi_start_fit(&tables, args.g, args.q, &config)?;
    let post = joint_posterior(&fit.params, &tables)?;

    let mut out = OutputDir::create(&args.out)?;
    let model = ModelFile::from_fit(data.names.clone(), &fit, config)?;
    out.write_json("model.json", &model)?;
    let (header, rows) = posterior_rows(&data.names, &tables, &post);
    out.write_csv("posteriors.csv", &header, rows)?;

    println!(
        "G={} Q={} pll={:.4} iterations={} converged={} start={}",
        args.g, args.q, fit.pll, fit.iterations, fit.converged, fit.start_index
    );
    let weights: Vec<String> = fit
        .params
        .weights
        .iter()
        .map(|w| format!("{w:.4}"))
        .collect();
    println!("weights: {}", weights.join(" "));

    out.finish(clock.manifest(
        "fit",
        &[&args.data.data],
        serde_json::json!({
            "freq": args.data.freq,
            "categories": data.schema.categories(),
            "G": args.g,
            "Q": args.q,
            "fit": config,
        }),
        Some(config.seed),
    ))?;
    Ok(if fit.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}
