use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{PackLayout, ScrParameters};
use crate::numerics::geneig::generalized_eigen_trace;
use crate::pairwise::{CellProbabilities, PairwiseTables, PROB_FLOOR};

/// Relative central-difference step of the score computation.
pub const SCORE_STEP: f64 = 1e-4;
const MAX_HALVINGS: usize = 8;

/// Finite-difference scores of every pairwise cell's log mixture probability.
#[derive(Clone, Debug, PartialEq)]
pub struct CellScores {
    dim: usize,
    /// `[pair][cell * dim + k]`
    scores: Vec<Vec<f64>>,
}

impl CellScores {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Score vector of cell `cell` (row-major) of pair `pair`.
    pub fn cell(&self, pair: usize, cell: usize) -> &[f64] {
        &self.scores[pair][cell * self.dim..(cell + 1) * self.dim]
    }

    pub fn n_pairs(&self) -> usize {
        self.scores.len()
    }
}

/// `log sum_g p_g pi_g` for every pair and cell.
fn log_mixture_cells(params: &ScrParameters, tables: &PairwiseTables) -> Result<Vec<Vec<f64>>> {
    let schema = tables.schema();
    let probs = CellProbabilities::compute(params, schema)?;
    Ok((0..schema.n_pairs())
        .map(|k| {
            let n_cells = probs.cells(k, 0).len();
            (0..n_cells)
                .map(|c| {
                    (0..params.n_components())
                        .map(|g| params.weights[g] * probs.cells(k, g)[c])
                        .sum::<f64>()
                        .max(PROB_FLOOR)
                        .ln()
                })
                .collect()
        })
        .collect())
}

/// Cell scores with respect to `phi`, where the packed vector is
/// `theta = scale * phi` elementwise. `scale = None` means the identity.
pub fn pair_cell_scores_scaled(
    params: &ScrParameters,
    tables: &PairwiseTables,
    scale: Option<&[f64]>,
) -> Result<CellScores> {
    let layout = PackLayout::new(tables.schema(), params.n_components(), params.n_signal())?;
    let theta = layout.pack(params)?;
    let d = theta.len();
    let scale: Vec<f64> = match scale {
        Some(s) if s.len() == d && s.iter().all(|v| v.is_finite() && *v != 0.0) => s.to_vec(),
        Some(s) => {
            return Err(Error::InvalidArgument(format!(
                "scale needs {d} non-zero finite entries, got {}",
                s.len()
            )))
        }
        None => vec![1.0; d],
    };
    let phi: Vec<f64> = theta.iter().zip(&scale).map(|(t, s)| t / s).collect();
    let eval = |x: &[f64]| -> Result<Vec<Vec<f64>>> {
        let th: Vec<f64> = x.iter().zip(&scale).map(|(p, s)| p * s).collect();
        let out = log_mixture_cells(&layout.unpack(&th)?, tables)?;
        if out.iter().flatten().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Optimizer(
                "non-finite perturbed cell probability".into(),
            ))
        }
    };
    let columns: Vec<Vec<Vec<f64>>> = (0..d)
        .into_par_iter()
        .map(|k| {
            let mut h = SCORE_STEP * phi[k].abs().max(1.0);
            let mut x = phi.clone();
            let mut last = None;
            for _ in 0..=MAX_HALVINGS {
                x[k] = phi[k] + h;
                let up = eval(&x);
                x[k] = phi[k] - h;
                let dn = eval(&x);
                match (up, dn) {
                    (Ok(u), Ok(l)) => {
                        return Ok(u
                            .iter()
                            .zip(&l)
                            .map(|(a, b)| {
                                a.iter().zip(b).map(|(p, m)| (p - m) / (2.0 * h)).collect()
                            })
                            .collect());
                    }
                    (Err(e), _) | (_, Err(e)) => last = Some(e),
                }
                h *= 0.5;
            }
            Err(last.unwrap_or_else(|| Error::Internal("no score evaluation".into())))
        })
        .collect::<Result<_>>()?;
    let scores = (0..tables.schema().n_pairs())
        .map(|pair| {
            let n_cells = columns.first().map_or(0, |c| c[pair].len());
            let mut flat = vec![0.0; n_cells * d];
            for (k, col) in columns.iter().enumerate() {
                for (c, v) in col[pair].iter().enumerate() {
                    flat[c * d + k] = *v;
                }
            }
            flat
        })
        .collect();
    Ok(CellScores { dim: d, scores })
}

/// Central-difference scores of each pairwise cell in packed coordinates.
pub fn pair_cell_scores(params: &ScrParameters, tables: &PairwiseTables) -> Result<CellScores> {
    pair_cell_scores_scaled(params, tables, None)
}

/// Sensitivity (outer-product form, per pair) and variability matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrices {
    pub sensitivity: DMatrix<f64>,
    pub variability: DMatrix<f64>,
}

impl ScoreMatrices {
    pub fn dim(&self) -> usize {
        self.sensitivity.nrows()
    }

    /// `tr(H^-1 V)`, the effective number of parameters.
    pub fn trace_penalty(&self) -> Result<f64> {
        generalized_eigen_trace(&self.variability, &self.sensitivity, 0.0)
    }
}

fn add_outer(m: &mut DMatrix<f64>, s: &[f64], w: f64) {
    let d = s.len();
    for a in 0..d {
        let wa = w * s[a];
        if wa == 0.0 {
            continue;
        }
        for b in a..d {
            m[(a, b)] += wa * s[b];
        }
    }
}

fn symmetrize_upper(m: &mut DMatrix<f64>) {
    for a in 0..m.nrows() {
        for b in 0..a {
            m[(a, b)] = m[(b, a)];
        }
    }
}

/// Build `H = (1/N) sum_pairs sum_cells n s s'` and
/// `V = (1/N) sum_patterns n_r s_r s_r'` from cell scores.
pub fn score_matrices(scores: &CellScores, tables: &PairwiseTables) -> ScoreMatrices {
    let schema = tables.schema();
    let d = scores.dim();
    let n = tables.n_obs() as f64;
    let mut h = DMatrix::zeros(d, d);
    for k in 0..schema.n_pairs() {
        for (c, &cnt) in tables.pair_counts(k).iter().enumerate() {
            if cnt > 0.0 {
                add_outer(&mut h, scores.cell(k, c), cnt / n);
            }
        }
    }
    let cats = schema.categories();
    let mut v = DMatrix::zeros(d, d);
    let mut s = vec![0.0; d];
    for (pat, cnt) in tables.patterns() {
        s.iter_mut().for_each(|x| *x = 0.0);
        for (k, (i, j)) in schema.pairs().enumerate() {
            let cell = pat[i] * cats[j] + pat[j];
            for (acc, x) in s.iter_mut().zip(scores.cell(k, cell)) {
                *acc += x;
            }
        }
        add_outer(&mut v, &s, *cnt as f64 / n);
    }
    symmetrize_upper(&mut h);
    symmetrize_upper(&mut v);
    ScoreMatrices {
        sensitivity: h,
        variability: v,
    }
}

pub fn sensitivity_variability(
    params: &ScrParameters,
    tables: &PairwiseTables,
) -> Result<ScoreMatrices> {
    Ok(score_matrices(&pair_cell_scores(params, tables)?, tables))
}

/// Total score `sum_r n_r s_r` (equivalently the finite-difference gradient
/// of the pairwise log-likelihood).
pub fn total_score(scores: &CellScores, tables: &PairwiseTables) -> Vec<f64> {
    let mut out = vec![0.0; scores.dim()];
    for k in 0..tables.schema().n_pairs() {
        for (c, &cnt) in tables.pair_counts(k).iter().enumerate() {
            for (o, x) in out.iter_mut().zip(scores.cell(k, c)) {
                *o += cnt * x;
            }
        }
    }
    out
}
