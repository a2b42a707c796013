use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use ordscr::classify::{argmax, joint_posterior};
use ordscr::pairwise::build_pairwise_tables;

use super::Outcome;
use crate::data::{read_ordinal_csv, DataSpec};
use crate::model_file::ModelFile;
use crate::output::{num, Clock, OutputDir};

#[derive(Args, Debug)]
pub struct ClassifyArgs {
    /// model.json written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    /// Responses to classify, with the model's variables as columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub freq: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &ClassifyArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let model = ModelFile::load(&args.model)?;
    let data = read_ordinal_csv(
        &args.data,
        &DataSpec {
            freq: args.freq.as_deref(),
            categories: Some(&model.categories),
        },
    )?;
    if data.names != model.variables {
        bail!(
            "data columns [{}] do not match the model's variables [{}]",
            data.names.join(", "),
            model.variables.join(", ")
        );
    }
    // posteriors depend on the data only through which patterns occur, and
    // zero-count rows still need one
    let tables = build_pairwise_tables(&data.rows, None, &data.schema)?;
    let post = joint_posterior(&model.params, &tables)?;

    let mut front = data.names.clone();
    if args.freq.is_some() {
        front.push("count".into());
    }
    let lead = |r: usize| -> Vec<String> {
        let mut v: Vec<String> = data.rows[r].iter().map(usize::to_string).collect();
        if args.freq.is_some() {
            v.push(data.counts[r].to_string());
        }
        v
    };
    let probs: Vec<&[f64]> = data
        .rows
        .iter()
        .map(|row| {
            let pat: Vec<usize> = row.iter().map(|c| c - 1).collect();
            post.get(&pat).expect("every row was tabulated")
        })
        .collect();

    let mut out = OutputDir::create(&args.out)?;
    let mut header = front.clone();
    header.push("component".into());
    out.write_csv(
        "assignments.csv",
        &header,
        probs.iter().enumerate().map(|(r, p)| {
            let mut v = lead(r);
            v.push((argmax(p) + 1).to_string());
            v
        }),
    )?;
    let mut header = front;
    header.extend((1..=model.n_components).map(|g| format!("post_{g}")));
    out.write_csv(
        "posteriors.csv",
        &header,
        probs.iter().enumerate().map(|(r, p)| {
            let mut v = lead(r);
            v.extend(p.iter().map(|&x| num(x)));
            v
        }),
    )?;
    let summary = serde_json::json!({
        "method": post.method,
        "ipf_discrepancy": post.ipf_discrepancy,
        "sweeps": post.sweeps,
        "patterns": post.patterns().len(),
    });
    out.write_json("classify.json", &summary)?;
    println!(
        "method={:?} sweeps={} ipf_discrepancy={:e}",
        post.method, post.sweeps, post.ipf_discrepancy
    );

    out.finish(clock.manifest(
        "classify",
        &[&args.model, &args.data],
        serde_json::json!({ "freq": args.freq }),
        None,
    ))?;
    Ok(Outcome::Done)
}
