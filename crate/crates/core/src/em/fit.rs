use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::init::{initialize, StartMode};
use crate::error::{Error, Result};
use crate::model::{count_parameters, PackLayout, ScrParameters};
use crate::numerics::optimize::{maximize, MaximizeOptions, SmoothObjective};
use crate::pairwise::{
    estep, objective_and_gradient, pairwise_loglik, update_weights, Objective, PairwiseTables,
    PosteriorTables,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_em_iters: usize,
    /// Stop once an iteration raises the pairwise log-likelihood by less than this.
    pub em_tol: f64,
    pub mstep: MaximizeOptions,
    pub n_starts: usize,
    pub seed: u64,
    /// When set, every start stops at this looser tolerance and only the
    /// best one continues to `em_tol`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen_tol: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_em_iters: 500,
            em_tol: 1e-2,
            mstep: MaximizeOptions {
                gtol: 1e-6,
                ftol: 1e-6,
                max_evals: 200,
            },
            n_starts: 100,
            seed: 0,
            screen_tol: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_em_iters == 0 || self.n_starts == 0 {
            return Err(Error::InvalidArgument(
                "max_em_iters and n_starts must be at least 1".into(),
            ));
        }
        if !(self.em_tol > 0.0 && self.mstep.gtol > 0.0 && self.mstep.ftol >= 0.0)
            || self.screen_tol.is_some_and(|t| !(t > 0.0))
        {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub params: ScrParameters,
    pub pll: f64,
    /// Pairwise log-likelihood at the start and after every iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub seed: u64,
    /// Pairwise posteriors at the returned parameters.
    pub posteriors: PosteriorTables,
}

/// M-step objective over the non-weight packed coordinates.
struct MStep<'a> {
    layout: &'a PackLayout,
    tables: &'a PairwiseTables,
    posteriors: &'a PosteriorTables,
    prefix: &'a [f64],
}

impl MStep<'_> {
    fn full(&self, tail: &[f64]) -> Vec<f64> {
        let mut theta = self.prefix.to_vec();
        theta.extend_from_slice(tail);
        theta
    }
}

impl SmoothObjective for MStep<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.value_and_gradient(x).0
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let fail = || (f64::NAN, vec![f64::NAN; x.len()]);
        let Ok(params) = self.layout.unpack(&self.full(x)) else {
            return fail();
        };
        match objective_and_gradient(
            self.layout,
            &params,
            self.tables,
            Objective::Expected(self.posteriors),
        ) {
            Ok((v, g)) => (v, g[self.layout.non_weight()].to_vec()),
            Err(_) => fail(),
        }
    }
}

fn weight_logits(weights: &[f64]) -> Vec<f64> {
    let last = weights[weights.len() - 1].ln();
    weights[..weights.len() - 1]
        .iter()
        .map(|w| w.ln() - last)
        .collect()
}

/// Pairwise EM from `start`.
pub fn em_fit(
    tables: &PairwiseTables,
    start: &ScrParameters,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    start.validate()?;
    let schema = tables.schema();
    let (g, q) = (start.n_components(), start.n_signal());
    let count = count_parameters(schema.n_vars(), q, g, schema.categories());
    if !count.identifiable {
        return Err(Error::NotIdentifiable {
            g,
            q,
            count: count.count,
            bound: count.bound,
        });
    }
    let layout = PackLayout::new(schema, g, q)?;
    let mut params = start.clone();
    let mut pll = pairwise_loglik(&params, tables)?;
    if !pll.is_finite() {
        return Err(Error::Optimizer(
            "pairwise log-likelihood not finite at start".into(),
        ));
    }
    let mut trace = vec![pll];
    let mut converged = false;
    let mut iterations = 0;
    let mut posteriors = estep(&params, tables)?;
    while iterations < config.max_em_iters {
        iterations += 1;
        let weights = update_weights(tables, &posteriors);
        if weights.iter().any(|w| !(*w > 0.0)) {
            break;
        }
        let mut candidate = params.clone();
        candidate.weights = weights;
        let theta = layout.pack(&candidate)?;
        let prefix = weight_logits(&candidate.weights);
        let objective = MStep {
            layout: &layout,
            tables,
            posteriors: &posteriors,
            prefix: &prefix,
        };
        let result = maximize(&objective, &theta[layout.non_weight()], &config.mstep);
        if !result.value.is_finite() {
            break;
        }
        let Ok(next) = layout.unpack(&objective.full(&result.argmax)) else {
            break;
        };
        let Ok(next_pll) = pairwise_loglik(&next, tables) else {
            break;
        };
        if !next_pll.is_finite() {
            break;
        }
        let gain = next_pll - pll;
        params = next;
        pll = next_pll;
        trace.push(pll);
        posteriors = estep(&params, tables)?;
        if gain < config.em_tol {
            converged = true;
            break;
        }
    }
    Ok(FitResult {
        params,
        pll,
        trace,
        iterations,
        converged,
        start_index: 0,
        seed: config.seed,
        posteriors,
    })
}

/// Seed of start `index` derived from the run seed (SplitMix64 finalizer).
pub fn start_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Continue `fit` to the full tolerance, keeping one trace.
fn refine(tables: &PairwiseTables, fit: FitResult, config: &FitConfig) -> Result<FitResult> {
    let budget = config.max_em_iters.saturating_sub(fit.iterations);
    if budget == 0 {
        return Ok(fit);
    }
    let cfg = FitConfig {
        max_em_iters: budget,
        ..*config
    };
    let more = em_fit(tables, &fit.params, &cfg)?;
    let mut trace = fit.trace;
    trace.extend_from_slice(&more.trace[1..]);
    Ok(FitResult {
        trace,
        iterations: fit.iterations + more.iterations,
        start_index: fit.start_index,
        seed: fit.seed,
        ..more
    })
}

/// One rational start plus `n_starts - 1` random starts; the best
/// pairwise log-likelihood wins, ties going to the lowest start index.
pub fn multi_start_fit(
    tables: &PairwiseTables,
    n_components: usize,
    n_signal: usize,
    config: &FitConfig,
) -> Result<FitResult> {
    config.validate()?;
    let screen = FitConfig {
        em_tol: config
            .screen_tol
            .map_or(config.em_tol, |t| t.max(config.em_tol)),
        ..*config
    };
    let runs: Vec<Result<FitResult>> = (0..config.n_starts)
        .into_par_iter()
        .map(|k| {
            let (mode, seed) = if k == 0 {
                (StartMode::Rational, config.seed)
            } else {
                (StartMode::Random, start_seed(config.seed, k))
            };
            let start = initialize(tables, n_components, n_signal, seed, mode)?;
            let mut fit = em_fit(tables, &start, &screen)?;
            fit.start_index = k;
            fit.seed = seed;
            Ok(fit)
        })
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.pll > b.pll) {
                    best = Some(f);
                }
            }
            Err(e) => {
                if let Error::NotIdentifiable { .. } | Error::InvalidArgument(_) = e {
                    return Err(e);
                }
                first_err.get_or_insert(e);
            }
        }
    }
    let best = best.ok_or_else(|| Error::AllStartsFailed {
        n_starts: config.n_starts,
        first: first_err.map(|e| e.to_string()).unwrap_or_default(),
    })?;
    if screen.em_tol > config.em_tol && best.converged {
        refine(tables, best, config)
    } else {
        Ok(best)
    }
}
