use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_moments, ScrParameters};
use crate::numerics::ipf::{ipf_fit, MarginTargets};
use crate::numerics::normal::std_normal_cdf;
use crate::pairwise::{standardized_thresholds, CellProbabilities, PairwiseTables, PROB_FLOOR};

/// Largest `(prod C_i) * G` array the IPF reconstruction will allocate.
pub const MAX_IPF_CELLS: usize = 10_000_000;
pub const IPF_TOL: f64 = 1e-6;
pub const IPF_MAX_SWEEPS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PosteriorMethod {
    Ipf,
    PairwiseProduct,
}

/// Component posterior probabilities for observed response patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPosterior {
    patterns: Vec<Vec<usize>>,
    probs: Vec<Vec<f64>>,
    index: HashMap<Vec<usize>, usize>,
    pub method: PosteriorMethod,
    pub ipf_discrepancy: f64,
    pub sweeps: usize,
}

impl JointPosterior {
    pub(crate) fn new(
        patterns: Vec<Vec<usize>>,
        probs: Vec<Vec<f64>>,
        method: PosteriorMethod,
        ipf_discrepancy: f64,
        sweeps: usize,
    ) -> Self {
        let index = patterns
            .iter()
            .enumerate()
            .map(|(k, p)| (p.clone(), k))
            .collect();
        Self {
            patterns,
            probs,
            index,
            method,
            ipf_discrepancy,
            sweeps,
        }
    }

    pub fn n_components(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    /// Observed patterns (0-based categories).
    pub fn patterns(&self) -> &[Vec<usize>] {
        &self.patterns
    }

    pub fn probabilities(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Posterior of a 0-based pattern, if it was observed.
    pub fn get(&self, pattern: &[usize]) -> Option<&[f64]> {
        self.index.get(pattern).map(|&k| self.probs[k].as_slice())
    }
}

fn univariate_probs(params: &ScrParameters) -> Result<Vec<Vec<Vec<f64>>>> {
    // [g][var][category]
    let moments = derive_moments(params)?;
    Ok(moments
        .iter()
        .map(|m| {
            (0..params.n_vars())
                .map(|i| {
                    standardized_thresholds(m, &params.thresholds, i)
                        .windows(2)
                        .map(|w| (std_normal_cdf(w[1]) - std_normal_cdf(w[0])).max(0.0))
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Reconstruct joint posteriors by fitting the full (pattern x component)
/// table to the model's pairwise joint margins `p_g pi^(ij)_g`.
pub fn ipf_joint_posterior(
    params: &ScrParameters,
    tables: &PairwiseTables,
) -> Result<JointPosterior> {
    let schema = tables.schema();
    let p = schema.n_vars();
    let g = params.n_components();
    let cats = schema.categories();
    let cells = schema
        .pattern_count()
        .and_then(|r| r.checked_mul(g))
        .filter(|&n| n <= MAX_IPF_CELLS)
        .ok_or_else(|| {
            Error::Capacity(format!(
                "the joint table needs more than {MAX_IPF_CELLS} cells; \
                 use the pairwise-product posterior instead"
            ))
        })?;
    let probs = CellProbabilities::compute(params, schema)?;
    let uni = univariate_probs(params)?;

    let mut shape: Vec<usize> = cats.to_vec();
    shape.push(g);
    let mut init = vec![0.0; cells];
    let mut idx = vec![0usize; p];
    for chunk in init.chunks_mut(g) {
        for (h, v) in chunk.iter_mut().enumerate() {
            let mut prod = params.weights[h];
            for (i, &c) in idx.iter().enumerate() {
                prod *= uni[h][i][c];
            }
            *v = prod.max(PROB_FLOOR);
        }
        for k in (0..p).rev() {
            idx[k] += 1;
            if idx[k] < cats[k] {
                break;
            }
            idx[k] = 0;
        }
    }

    let mut axes = Vec::with_capacity(schema.n_pairs());
    let mut targets = Vec::with_capacity(schema.n_pairs());
    for (k, (i, j)) in schema.pairs().enumerate() {
        let n_cells = cats[i] * cats[j];
        let mut t = vec![0.0; n_cells * g];
        for c in 0..n_cells {
            for h in 0..g {
                t[c * g + h] = params.weights[h] * probs.cells(k, h)[c];
            }
        }
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|v| *v /= s);
        axes.push(vec![i, j, p]);
        targets.push(t);
    }
    let targets = MarginTargets::new(axes, targets)?;
    let fit = ipf_fit(&init, &shape, &targets, IPF_TOL, IPF_MAX_SWEEPS)?;

    let strides: Vec<usize> = (0..p).map(|k| shape[k + 1..].iter().product()).collect();
    let mut patterns = Vec::with_capacity(tables.patterns().len());
    let mut post = Vec::with_capacity(tables.patterns().len());
    for (pat, _) in tables.patterns() {
        let base: usize = pat.iter().zip(&strides).map(|(c, s)| c * s).sum();
        let slice = &fit.array[base..base + g];
        let s: f64 = slice.iter().sum();
        let row: Vec<f64> = if s > 0.0 {
            slice.iter().map(|v| v / s).collect()
        } else {
            // no mass left for this pattern: fall back to the prior, as the E-step does
            params.weights.clone()
        };
        patterns.push(pat.clone());
        post.push(row);
    }
    Ok(JointPosterior::new(
        patterns,
        post,
        PosteriorMethod::Ipf,
        fit.discrepancy,
        fit.sweeps,
    ))
}

/// Fallback for large schemas: per pattern, the normalized product of the
/// pairwise cell posteriors raised to `1 / (P - 1)`.
pub fn pairwise_product_posterior(
    params: &ScrParameters,
    tables: &PairwiseTables,
) -> Result<JointPosterior> {
    let schema = tables.schema();
    let g = params.n_components();
    let probs = CellProbabilities::compute(params, schema)?;
    let expo = 1.0 / (schema.n_vars() as f64 - 1.0);
    let cats = schema.categories();
    let mut patterns = Vec::new();
    let mut post = Vec::new();
    for (pat, _) in tables.patterns() {
        let mut logp = vec![0.0; g];
        for (k, (i, j)) in schema.pairs().enumerate() {
            let c = pat[i] * cats[j] + pat[j];
            let row: Vec<f64> = (0..g)
                .map(|h| params.weights[h] * probs.cells(k, h)[c].max(PROB_FLOOR))
                .collect();
            let s: f64 = row.iter().sum();
            for (l, r) in logp.iter_mut().zip(&row) {
                *l += expo * (r / s).ln();
            }
        }
        let top = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logp.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = e.iter().sum();
        patterns.push(pat.clone());
        post.push(e.iter().map(|v| v / s).collect());
    }
    Ok(JointPosterior::new(
        patterns,
        post,
        PosteriorMethod::PairwiseProduct,
        0.0,
        0,
    ))
}

/// IPF reconstruction, or the pairwise-product fallback when the joint
/// table would be too large.
pub fn joint_posterior(params: &ScrParameters, tables: &PairwiseTables) -> Result<JointPosterior> {
    match ipf_joint_posterior(params, tables) {
        Err(Error::Capacity(_)) => pairwise_product_posterior(params, tables),
        other => other,
    }
}
