use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use ordscr::em::FitConfig;
use ordscr::simulate::{replicate_study, scenario_preset, StudyModel, STUDY_COLUMNS};

use super::Outcome;
use crate::output::{num, Clock, OutputDir};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// One of scr-separated, scr-nonseparated, miss-separated, miss-nonseparated.
    #[arg(long)]
    pub scenario: String,
    /// Observations per replicate.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    /// Subspace dimension of the fitted model (default: the generating one).
    #[arg(long)]
    pub q: Option<usize>,
    /// Also fit the unrestricted model (Q = P) to every replicate.
    #[arg(long)]
    pub unrestricted: bool,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<Outcome> {
    let clock = Clock::start();
    let spec = scenario_preset(&args.scenario)?;
    let g = spec.n_components();
    let p = spec.n_vars();
    let q = args.q.unwrap_or(spec.q_true);
    if q == 0 || q > p {
        bail!("--q must lie in 1..={p}");
    }
    let mut models = vec![StudyModel {
        n_components: g,
        n_signal: q,
    }];
    if args.unrestricted && q != p {
        models.push(StudyModel {
            n_components: g,
            n_signal: p,
        });
    }
    let config = FitConfig {
        max_em_iters: args.max_iter,
        em_tol: args.tol,
        n_starts: args.starts,
        seed: args.seed,
        ..FitConfig::default()
    };
    let study = replicate_study(&spec, args.n, args.replicates, &models, &config, args.seed)?;

    let mut out = OutputDir::create(&args.out)?;
    let header: Vec<String> = STUDY_COLUMNS.iter().map(|s| s.to_string()).collect();
    out.write_csv(
        "study.csv",
        &header,
        study.summary.iter().map(|r| {
            [r.model.clone(), r.metric.clone()]
                .into_iter()
                .chain([r.mean, r.sd, r.q025, r.q25, r.q50, r.q75, r.q975].map(num))
        }),
    )?;
    let header: Vec<String> = ["replicate", "model", "ari", "loss", "pll", "converged"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    out.write_csv(
        "replicates.csv",
        &header,
        study.outcomes.iter().map(|o| {
            [
                o.replicate.to_string(),
                o.model.clone(),
                num(o.ari),
                num(o.loss),
                num(o.pll),
                o.converged.to_string(),
            ]
        }),
    )?;
    if !study.failures.is_empty() {
        out.write_json("failures.json", &study.failures)?;
    }

    for r in &study.summary {
        println!(
            "{:<22} {:<5} mean {:.4} median {:.4} [{:.4}, {:.4}]",
            r.model, r.metric, r.mean, r.q50, r.q025, r.q975
        );
    }
    for f in &study.failures {
        eprintln!("replicate {} {}: {}", f.replicate, f.model, f.message);
    }
    let unconverged = study.outcomes.iter().filter(|o| !o.converged).count();
    if unconverged > 0 {
        eprintln!("{unconverged} fit(s) stopped at the iteration limit");
    }

    out.finish(clock.manifest(
        "simulate",
        &[],
        serde_json::json!({
            "scenario": args.scenario,
            "n": args.n,
            "replicates": args.replicates,
            "models": models,
            "fit": config,
        }),
        Some(args.seed),
    ))?;
    Ok(Outcome::Done)
}
