use rayon::prelude::*;
use serde::Serialize;

use super::generate::generate_dataset;
use super::scenario::ScenarioSpec;
use crate::classify::{ari, hard_assign, joint_posterior, loss_measure, PartitionMatrix};
use crate::em::{multi_start_fit, start_seed, FitConfig};
use crate::error::{Error, Result};
use crate::pairwise::build_pairwise_tables;

/// A (G, Q) model fitted in every replicate; `Q = P` is the unrestricted
/// baseline without a noise block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StudyModel {
    pub n_components: usize,
    pub n_signal: usize,
}

impl StudyModel {
    pub fn label(&self, n_vars: usize) -> String {
        if self.n_signal == n_vars {
            format!("unrestricted(G={})", self.n_components)
        } else {
            format!("scr(G={},Q={})", self.n_components, self.n_signal)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub model: String,
    pub ari: f64,
    pub loss: f64,
    pub pll: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub model: String,
    pub message: String,
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

pub const STUDY_COLUMNS: [&str; 9] = [
    "model", "metric", "mean", "sd", "q025", "q25", "q50", "q75", "q975",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyTable {
    pub scenario: String,
    pub n_obs: usize,
    pub n_replicates: usize,
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<ReplicateFailure>,
    pub summary: Vec<SummaryRow>,
}

impl StudyTable {
    pub fn outcomes_for<'a>(
        &'a self,
        model: &'a str,
    ) -> impl Iterator<Item = &'a ReplicateOutcome> + 'a {
        self.outcomes.iter().filter(move |o| o.model == model)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(model: &str, metric: &str, values: &[f64]) -> Option<SummaryRow> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(SummaryRow {
        model: model.into(),
        metric: metric.into(),
        mean,
        sd,
        q025: quantile(&v, 0.025),
        q25: quantile(&v, 0.25),
        q50: quantile(&v, 0.5),
        q75: quantile(&v, 0.75),
        q975: quantile(&v, 0.975),
    })
}

fn run_model(
    rows: &[Vec<usize>],
    labels: &PartitionMatrix,
    truth: &[Vec<f64>],
    spec: &ScenarioSpec,
    model: StudyModel,
    config: &FitConfig,
) -> Result<(f64, f64, f64, bool)> {
    let tables = build_pairwise_tables(rows, None, &spec.schema())?;
    let fit = multi_start_fit(&tables, model.n_components, model.n_signal, config)?;
    let post = joint_posterior(&fit.params, &tables)?;
    let zero_based: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| r.iter().map(|c| c - 1).collect())
        .collect();
    let assigned = hard_assign(&post, &zero_based)?;
    let estimate: Vec<Vec<f64>> = zero_based
        .iter()
        .map(|r| post.get(r).expect("pattern was tabulated").to_vec())
        .collect();
    let a = ari(labels, &assigned)?;
    // The loss needs matching widths; compare only when G agrees with the truth.
    let l = if model.n_components == spec.n_components() {
        loss_measure(truth, &estimate)?
    } else {
        f64::NAN
    };
    Ok((a, l, fit.pll, fit.converged))
}

/// Generate `n_replicates` samples, fit every model to each and summarize
/// ARI and loss. Replicate `r` uses data seed `start_seed(seed, r)`.
pub fn replicate_study(
    spec: &ScenarioSpec,
    n_obs: usize,
    n_replicates: usize,
    models: &[StudyModel],
    config: &FitConfig,
    seed: u64,
) -> Result<StudyTable> {
    if n_replicates == 0 || models.is_empty() {
        return Err(Error::InvalidArgument(
            "a study needs at least one replicate and one model".into(),
        ));
    }
    config.validate()?;
    let p = spec.n_vars();
    type RepResult = Vec<(String, Result<(f64, f64, f64, bool)>)>;
    let per_rep: Vec<Result<RepResult>> = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let data = generate_dataset(spec, n_obs, start_seed(seed, r))?;
            let labels = PartitionMatrix::new(data.labels.clone(), spec.n_components())?;
            let cfg = FitConfig {
                seed: start_seed(seed ^ 0x5851_f42d_4c95_7f2d, r),
                ..*config
            };
            Ok(models
                .iter()
                .map(|&m| {
                    let out = run_model(&data.rows, &labels, &data.posteriors, spec, m, &cfg);
                    (m.label(p), out)
                })
                .collect())
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (r, rep) in per_rep.into_iter().enumerate() {
        match rep {
            Err(e) => failures.push(ReplicateFailure {
                replicate: r,
                model: String::new(),
                message: e.to_string(),
            }),
            Ok(list) => {
                for (model, res) in list {
                    match res {
                        Ok((ari, loss, pll, converged)) => outcomes.push(ReplicateOutcome {
                            replicate: r,
                            model,
                            ari,
                            loss,
                            pll,
                            converged,
                        }),
                        Err(e) => failures.push(ReplicateFailure {
                            replicate: r,
                            model,
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
    }
    let mut summary = Vec::new();
    for m in models {
        let label = m.label(p);
        let of = |f: fn(&ReplicateOutcome) -> f64| -> Vec<f64> {
            outcomes
                .iter()
                .filter(|o| o.model == label)
                .map(f)
                .filter(|v| v.is_finite())
                .collect()
        };
        summary.extend(summarize(&label, "ari", &of(|o| o.ari)));
        summary.extend(summarize(&label, "loss", &of(|o| o.loss)));
    }
    Ok(StudyTable {
        scenario: spec.name.clone(),
        n_obs,
        n_replicates,
        outcomes,
        failures,
        summary,
    })
}
