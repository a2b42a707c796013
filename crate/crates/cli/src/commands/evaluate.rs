use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use ordscr::classify::{argmax, ari, loss_measure, PartitionMatrix};

use super::Outcome;

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// CSV with a `component` column (1-based) or `post_1..post_G` columns.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
}

/// Per-observation memberships read from an assignment or posterior file.
struct Memberships {
    labels: Vec<usize>,
    /// Posterior rows; indicator rows when only labels were given.
    probs: Vec<Vec<f64>>,
}

fn read_memberships(path: &Path) -> Result<Memberships> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let post_cols: Vec<usize> = (1..)
        .map_while(|g| header.iter().position(|h| *h == format!("post_{g}")))
        .collect();
    let label_col = header.iter().position(|h| h == "component");
    let count_col = header.iter().position(|h| h == "count");
    if post_cols.is_empty() && label_col.is_none() {
        bail!(
            "{}: needs a 'component' column or post_1.. columns",
            path.display()
        );
    }

    let mut labels = Vec::new();
    let mut probs = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let row_probs: Option<Vec<f64>> = if post_cols.is_empty() {
            None
        } else {
            Some(
                post_cols
                    .iter()
                    .map(|&c| field(c).parse::<f64>())
                    .collect::<Result<_, _>>()
                    .with_context(|| format!("{}: row {}: bad posterior", path.display(), r + 1))?,
            )
        };
        let label = match label_col {
            Some(c) => {
                let l: usize = field(c)
                    .parse()
                    .with_context(|| format!("{}: row {}: bad component", path.display(), r + 1))?;
                if l == 0 {
                    bail!(
                        "{}: row {}: components are numbered from 1",
                        path.display(),
                        r + 1
                    );
                }
                l - 1
            }
            None => argmax(row_probs.as_deref().unwrap_or(&[])),
        };
        let repeat = match count_col {
            Some(c) => field(c)
                .parse::<usize>()
                .with_context(|| format!("{}: row {}: bad count", path.display(), r + 1))?,
            None => 1,
        };
        for _ in 0..repeat {
            labels.push(label);
            probs.push(row_probs.clone());
        }
    }
    if labels.is_empty() {
        bail!("{} has no rows", path.display());
    }
    let width = if post_cols.is_empty() {
        labels.iter().max().map_or(0, |m| m + 1)
    } else {
        post_cols.len()
    };
    let probs = probs
        .into_iter()
        .zip(&labels)
        .map(|(p, &l)| {
            p.unwrap_or_else(|| (0..width).map(|g| f64::from(u8::from(g == l))).collect())
        })
        .collect();
    Ok(Memberships { labels, probs })
}

pub fn run(args: &EvaluateArgs) -> Result<Outcome> {
    let truth = read_memberships(&args.truth)?;
    let estimate = read_memberships(&args.estimate)?;
    if truth.labels.len() != estimate.labels.len() {
        bail!(
            "truth has {} observations, estimate has {}",
            truth.labels.len(),
            estimate.labels.len()
        );
    }
    let a = ari(
        &PartitionMatrix::from_labels(&truth.labels),
        &PartitionMatrix::from_labels(&estimate.labels),
    )?;
    println!("ARI: {a:.6}");
    let (gt, ge) = (truth.probs[0].len(), estimate.probs[0].len());
    if gt == ge {
        println!("L: {:.6}", loss_measure(&truth.probs, &estimate.probs)?);
    } else {
        println!("L: undefined ({gt} vs {ge} components)");
    }
    Ok(Outcome::Done)
}
