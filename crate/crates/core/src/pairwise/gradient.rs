//! Analytic gradients of the pairwise objectives in packed coordinates.

use nalgebra::{DMatrix, DVector};

use super::cells::{CellProbabilities, PROB_FLOOR};
use super::likelihood::PosteriorTables;
use super::tables::PairwiseTables;
use crate::error::{Error, Result};
use crate::model::{derive_moments, PackLayout, ScrParameters};

/// Which objective to differentiate.
#[derive(Clone, Copy, Debug)]
pub enum Objective<'a> {
    /// The pairwise log-likelihood.
    Pairwise,
    /// The expected complete-data log-likelihood for fixed posteriors.
    Expected(&'a PosteriorTables),
}

/// Value and gradient (in the coordinates of `layout`) of an objective.
pub fn objective_and_gradient(
    layout: &PackLayout,
    params: &ScrParameters,
    tables: &PairwiseTables,
    objective: Objective<'_>,
) -> Result<(f64, Vec<f64>)> {
    let schema = tables.schema();
    if schema.categories() != layout.categories() {
        return Err(Error::InvalidArgument(
            "layout does not match data schema".into(),
        ));
    }
    let p = layout.n_vars();
    let n_comp = layout.n_components();
    let moments = derive_moments(params)?;
    let probs = CellProbabilities::from_moments(&moments, &params.thresholds, schema, true)?;
    let weights = &params.weights;

    let mut value = 0.0;
    // d value / d p_g
    let mut d_weight = vec![0.0; n_comp];
    let mut d_mean: Vec<DVector<f64>> = vec![DVector::zeros(p); n_comp];
    let mut d_sd = vec![vec![0.0; p]; n_comp];
    let mut d_cov: Vec<DMatrix<f64>> = vec![DMatrix::zeros(p, p); n_comp];
    let mut d_cut: Vec<Vec<f64>> = (0..p)
        .map(|i| vec![0.0; params.thresholds.cuts(i).len()])
        .collect();

    let mut cell_w = vec![Vec::new(); n_comp];
    for (k, (i, j)) in schema.pairs().enumerate() {
        let counts = tables.pair_counts(k);
        let n_cells = counts.len();
        cell_w.iter_mut().for_each(|w| {
            w.clear();
            w.resize(n_cells, 0.0);
        });
        for (c, &n) in counts.iter().enumerate() {
            if n == 0.0 {
                continue;
            }
            match objective {
                Objective::Pairwise => {
                    let mut f = 0.0;
                    for g in 0..n_comp {
                        f += weights[g] * probs.cells(k, g)[c].max(PROB_FLOOR);
                    }
                    value += n * f.ln();
                    for g in 0..n_comp {
                        let pi = probs.cells(k, g)[c];
                        d_weight[g] += n * pi.max(PROB_FLOOR) / f;
                        if pi > PROB_FLOOR {
                            cell_w[g][c] = n * weights[g] / f;
                        }
                    }
                }
                Objective::Expected(post) => {
                    let z = post.cell(k, c);
                    for g in 0..n_comp {
                        if z[g] <= 0.0 {
                            continue;
                        }
                        let pi = probs.cells(k, g)[c];
                        value += n * z[g] * (pi.max(PROB_FLOOR).ln() + weights[g].ln());
                        d_weight[g] += n * z[g] / weights[g];
                        if pi > PROB_FLOOR {
                            cell_w[g][c] = n * z[g] / pi;
                        }
                    }
                }
            }
        }
        for g in 0..n_comp {
            let grid = probs.grid(k, g);
            let w = &cell_w[g];
            let (ci, cj) = (grid.tau_i.len() - 1, grid.tau_j.len() - 1);
            let stride = cj + 1;
            // fold cell weights onto the corners of the rectangle combination
            let mut corner = vec![0.0; (ci + 1) * stride];
            for a in 0..ci {
                for b in 0..cj {
                    let v = w[a * cj + b];
                    if v == 0.0 {
                        continue;
                    }
                    corner[(a + 1) * stride + b + 1] += v;
                    corner[a * stride + b + 1] -= v;
                    corner[(a + 1) * stride + b] -= v;
                    corner[a * stride + b] += v;
                }
            }
            let mut d_tau_i = vec![0.0; ci + 1];
            let mut d_tau_j = vec![0.0; cj + 1];
            let mut d_rho = 0.0;
            for r in 0..=ci {
                for s in 0..=cj {
                    let v = corner[r * stride + s];
                    if v == 0.0 {
                        continue;
                    }
                    let (_, fa, fb, fr) = grid.corners[r * stride + s];
                    d_tau_i[r] += v * fa;
                    d_tau_j[s] += v * fb;
                    d_rho += v * fr;
                }
            }
            let m = &moments[g];
            for (var, tau, dt) in [(i, &grid.tau_i, &d_tau_i), (j, &grid.tau_j, &d_tau_j)] {
                let sd = m.sd[var];
                for r in 1..tau.len() - 1 {
                    let d = dt[r];
                    d_cut[var][r - 1] += d / sd;
                    d_mean[g][var] -= d / sd;
                    d_sd[g][var] -= d * tau[r] / sd;
                }
            }
            if !grid.clamped {
                let (si, sj) = (m.sd[i], m.sd[j]);
                let half = 0.5 * d_rho / (si * sj);
                d_cov[g][(i, j)] += half;
                d_cov[g][(j, i)] += half;
                d_sd[g][i] -= d_rho * grid.rho / si;
                d_sd[g][j] -= d_rho * grid.rho / sj;
            }
        }
    }
    for g in 0..n_comp {
        for v in 0..p {
            d_cov[g][(v, v)] += d_sd[g][v] / (2.0 * moments[g].sd[v]);
        }
    }

    let mut grad = vec![0.0; layout.len()];
    // weight logits against the last component
    let mean_dw: f64 = weights.iter().zip(&d_weight).map(|(w, d)| w * d).sum();
    for g in 0..n_comp - 1 {
        grad[layout.weights.start + g] = weights[g] * (d_weight[g] - mean_dw);
    }

    let v1 = &params.signal_loadings;
    let v2 = &params.noise_loadings;
    let mut d_v1 = DMatrix::zeros(v1.nrows(), v1.ncols());
    let mut d_v2 = DMatrix::zeros(v2.nrows(), v2.ncols());
    let mut d_mean_total = DVector::zeros(p);
    for g in 0..n_comp {
        d_v1 += &d_mean[g] * params.signal_means[g].transpose()
            + &d_cov[g] * v1 * params.signal_covariance(g) * 2.0;
        d_v2 += &d_mean[g] * params.noise_mean.transpose() + &d_cov[g] * v2 * 2.0;
        d_mean_total += &d_mean[g];
    }
    write_lower(&mut grad[layout.signal_loadings.clone()], &d_v1, v1);
    write_lower(&mut grad[layout.noise_loadings.clone()], &d_v2, v2);

    let q = layout.n_signal();
    let mut at = layout.shape_factors.start;
    for g in 1..n_comp {
        let t = &params.shape_factors[g - 1];
        let d_t = (v1.transpose() * &d_cov[g] * v1) * t * 2.0;
        for r in 0..q {
            for c in r..q {
                grad[at] = if r == c {
                    d_t[(r, c)] * t[(r, c)]
                } else {
                    d_t[(r, c)]
                };
                at += 1;
            }
        }
    }
    let mut at = layout.signal_means.start;
    for dm in &d_mean {
        for v in (v1.transpose() * dm).iter() {
            grad[at] = *v;
            at += 1;
        }
    }
    for (slot, v) in grad[layout.noise_mean.clone()]
        .iter_mut()
        .zip((v2.transpose() * &d_mean_total).iter())
    {
        *slot = *v;
    }
    let mut at = layout.thresholds.start;
    for (var, dc) in d_cut.iter().enumerate() {
        let cuts = params.thresholds.cuts(var);
        // cut m (0-based, m >= 2) is 1 + sum of exp(delta) up to m
        let mut tail = 0.0;
        let mut tails = vec![0.0; cuts.len()];
        for m in (0..cuts.len()).rev() {
            tail += dc[m];
            tails[m] = tail;
        }
        for m in 2..cuts.len() {
            grad[at] = (cuts[m] - cuts[m - 1]) * tails[m];
            at += 1;
        }
    }
    debug_assert_eq!(at, layout.len());
    Ok((value, grad))
}

fn write_lower(out: &mut [f64], d: &DMatrix<f64>, m: &DMatrix<f64>) {
    let mut at = 0;
    for r in 0..m.nrows() {
        for c in 0..m.ncols().min(r + 1) {
            out[at] = if r == c {
                d[(r, c)] * m[(r, c)]
            } else {
                d[(r, c)]
            };
            at += 1;
        }
    }
}
