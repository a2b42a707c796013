use super::cells::{CellProbabilities, PROB_FLOOR};
use super::tables::PairwiseTables;
use crate::error::{Error, Result};
use crate::model::ScrParameters;

/// Per (pair, cell) posterior component probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTables {
    n_components: usize,
    /// `[pair][cell * G + g]`
    probs: Vec<Vec<f64>>,
}

impl PosteriorTables {
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Posterior vector of cell `cell` (row-major index) in pair `pair`.
    pub fn cell(&self, pair: usize, cell: usize) -> &[f64] {
        let g = self.n_components;
        &self.probs[pair][cell * g..(cell + 1) * g]
    }

    pub fn pair(&self, pair: usize) -> &[f64] {
        &self.probs[pair]
    }

    pub fn n_pairs(&self) -> usize {
        self.probs.len()
    }

    /// Build from raw per-pair arrays laid out as `cell * G + g`.
    pub fn from_raw(n_components: usize, probs: Vec<Vec<f64>>) -> Result<Self> {
        if n_components == 0 || probs.iter().any(|p| p.len() % n_components != 0) {
            return Err(Error::InvalidArgument("posterior layout mismatch".into()));
        }
        Ok(Self {
            n_components,
            probs,
        })
    }
}

fn check_shapes(params: &ScrParameters, tables: &PairwiseTables) -> Result<()> {
    let cats: Vec<usize> = (0..params.n_vars())
        .map(|i| params.thresholds.cuts(i).len() + 1)
        .collect();
    if cats != tables.schema().categories() {
        return Err(Error::InvalidArgument(format!(
            "parameter categories {cats:?} do not match data categories {:?}",
            tables.schema().categories()
        )));
    }
    Ok(())
}

/// Mixture probability of every cell, floored: `[pair][cell]`.
pub(crate) fn mixture_cells(
    weights: &[f64],
    probs: &CellProbabilities,
    n_pairs: usize,
) -> Vec<Vec<f64>> {
    (0..n_pairs)
        .map(|k| {
            let n_cells = probs.cells(k, 0).len();
            (0..n_cells)
                .map(|c| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(g, w)| w * probs.cells(k, g)[c].max(PROB_FLOOR))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Sum over pairs and cells of `n log(sum_g p_g pi_g)`.
pub fn pairwise_loglik(params: &ScrParameters, tables: &PairwiseTables) -> Result<f64> {
    check_shapes(params, tables)?;
    let probs = CellProbabilities::compute(params, tables.schema())?;
    Ok(loglik_from(&params.weights, &probs, tables))
}

pub(crate) fn loglik_from(
    weights: &[f64],
    probs: &CellProbabilities,
    tables: &PairwiseTables,
) -> f64 {
    let mix = mixture_cells(weights, probs, tables.schema().n_pairs());
    let mut total = 0.0;
    for (k, counts) in tables.all_pair_counts().iter().enumerate() {
        for (n, f) in counts.iter().zip(&mix[k]) {
            if *n > 0.0 {
                total += n * f.ln();
            }
        }
    }
    total
}

/// `p_g pi_g / sum_h p_h pi_h` for one cell, with the probability floor applied.
pub fn cell_posterior(weights: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    let mut out = probs.to_vec();
    fill_posterior(weights, &mut out)?;
    Ok(out)
}

fn fill_posterior(weights: &[f64], row: &mut [f64]) -> Result<()> {
    for (r, w) in row.iter_mut().zip(weights) {
        *r = w * r.max(PROB_FLOOR);
    }
    let s: f64 = row.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Internal("zero posterior denominator".into()));
    }
    row.iter_mut().for_each(|r| *r /= s);
    Ok(())
}

/// Posterior component probabilities of every (pair, cell).
pub fn estep(params: &ScrParameters, tables: &PairwiseTables) -> Result<PosteriorTables> {
    check_shapes(params, tables)?;
    let probs = CellProbabilities::compute(params, tables.schema())?;
    posteriors_from(&params.weights, &probs, tables.schema().n_pairs())
}

pub(crate) fn posteriors_from(
    weights: &[f64],
    probs: &CellProbabilities,
    n_pairs: usize,
) -> Result<PosteriorTables> {
    let g = weights.len();
    let mut out = Vec::with_capacity(n_pairs);
    for k in 0..n_pairs {
        let n_cells = probs.cells(k, 0).len();
        let mut z = vec![0.0; n_cells * g];
        for c in 0..n_cells {
            let row = &mut z[c * g..(c + 1) * g];
            for (h, r) in row.iter_mut().enumerate() {
                *r = probs.cells(k, h)[c];
            }
            fill_posterior(weights, row).map_err(|_| {
                Error::Internal(format!("zero posterior denominator at pair {k}, cell {c}"))
            })?;
        }
        out.push(z);
    }
    Ok(PosteriorTables {
        n_components: g,
        probs: out,
    })
}

/// Expected complete-data pairwise log-likelihood with posteriors held fixed.
pub fn expected_complete_loglik(
    params: &ScrParameters,
    tables: &PairwiseTables,
    posteriors: &PosteriorTables,
) -> Result<f64> {
    check_shapes(params, tables)?;
    if posteriors.n_components() != params.n_components() {
        return Err(Error::InvalidArgument(
            "posterior component count mismatch".into(),
        ));
    }
    let probs = CellProbabilities::compute(params, tables.schema())?;
    Ok(expected_from(&params.weights, &probs, tables, posteriors))
}

pub(crate) fn expected_from(
    weights: &[f64],
    probs: &CellProbabilities,
    tables: &PairwiseTables,
    posteriors: &PosteriorTables,
) -> f64 {
    let mut total = 0.0;
    let n_comp = weights.len();
    for (k, counts) in tables.all_pair_counts().iter().enumerate() {
        for (c, n) in counts.iter().enumerate() {
            if *n == 0.0 {
                continue;
            }
            let z = posteriors.cell(k, c);
            for g in 0..n_comp {
                if z[g] > 0.0 {
                    total +=
                        n * z[g] * (probs.cells(k, g)[c].max(PROB_FLOOR).ln() + weights[g].ln());
                }
            }
        }
    }
    total
}

/// `-sum n z log z`, the entropy term closing `pl = Q + H`.
pub fn posterior_entropy(tables: &PairwiseTables, posteriors: &PosteriorTables) -> f64 {
    let mut total = 0.0;
    for (k, counts) in tables.all_pair_counts().iter().enumerate() {
        for (c, n) in counts.iter().enumerate() {
            for z in posteriors.cell(k, c) {
                if *z > 0.0 {
                    total -= n * z * z.ln();
                }
            }
        }
    }
    total
}

/// Closed-form weights: count-weighted posterior mass, normalized to the simplex.
pub fn update_weights(tables: &PairwiseTables, posteriors: &PosteriorTables) -> Vec<f64> {
    let g = posteriors.n_components();
    let mut s = vec![0.0; g];
    for (k, counts) in tables.all_pair_counts().iter().enumerate() {
        for (c, n) in counts.iter().enumerate() {
            for (acc, z) in s.iter_mut().zip(posteriors.cell(k, c)) {
                *acc += n * z;
            }
        }
    }
    let total: f64 = s.iter().sum();
    s.iter().map(|v| v / total).collect()
}
