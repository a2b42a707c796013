//! Starting values: latent scores, k-means, per-variable probit fits of the
//! clusters, and a projection of the clustered moments onto the identified form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::kmeans::weighted_kmeans;
use crate::error::{Error, Result};
use crate::model::{count_parameters, PackLayout, ScrParameters, Thresholds};
use crate::numerics::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::numerics::optimize::{maximize, FnObjective, MaximizeOptions};
use crate::pairwise::PairwiseTables;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    Rational,
    Random,
}

const KMEANS_RESTARTS: usize = 10;
const JITTER: f64 = 0.1;

/// Raw normal-scale cuts from cumulative marginal proportions.
pub(crate) fn normal_scale_cuts(counts: &[f64]) -> Vec<f64> {
    let n: f64 = counts.iter().sum();
    let lo = 0.5 / n;
    let mut cum = 0.0;
    let mut cuts = Vec::with_capacity(counts.len() - 1);
    for c in &counts[..counts.len() - 1] {
        cum += c;
        let z = std_normal_quantile((cum / n).clamp(lo, 1.0 - lo));
        // empty categories give tied cuts; keep them strictly increasing
        let z = match cuts.last() {
            Some(&prev) if z <= prev + 1e-3 => prev + 1e-3,
            _ => z,
        };
        cuts.push(z);
    }
    cuts
}

/// The affine map sending the first two cuts to 0 and 1 as `(shift, scale)`:
/// `gamma = (z - shift) / scale`.
fn identification_map(cuts: &[f64]) -> (f64, f64) {
    (cuts[0], cuts[1] - cuts[0])
}

/// Thresholds from pooled marginal proportions.
pub fn marginal_thresholds(tables: &PairwiseTables) -> Result<Thresholds> {
    let p = tables.schema().n_vars();
    let cuts = (0..p)
        .map(|i| {
            let raw = normal_scale_cuts(&tables.marginal_counts(i));
            let (shift, scale) = identification_map(&raw);
            let mut v: Vec<f64> = raw.iter().map(|z| (z - shift) / scale).collect();
            v[0] = 0.0;
            v[1] = 1.0;
            v
        })
        .collect();
    Thresholds::new(cuts)
}

/// Conditional mean of each category on the standard normal scale.
fn category_scores(counts: &[f64]) -> Vec<f64> {
    let raw = normal_scale_cuts(counts);
    let mut ext = vec![f64::NEG_INFINITY];
    ext.extend(&raw);
    ext.push(f64::INFINITY);
    ext.windows(2)
        .map(|w| {
            let mass = std_normal_cdf(w[1]) - std_normal_cdf(w[0]);
            if mass > 1e-300 {
                (std_normal_pdf(w[0]) - std_normal_pdf(w[1])) / mass
            } else if w[0].is_finite() {
                w[0]
            } else {
                w[1]
            }
        })
        .collect()
}

/// Per-variable ordinal probit fit with cluster labels held fixed: common
/// cuts (first two at 0 and 1) and one mean and sd per cluster, from
/// cluster-by-category counts smoothed by half a count per cell.
fn cluster_probit(counts: &[Vec<f64>], pooled: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = counts.len();
    let c = counts[0].len();
    let extra = c - 3;
    let smoothed: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|v| v + 0.5).collect())
        .collect();
    let unpack = |x: &[f64]| {
        let mut cuts = vec![0.0, 1.0];
        for k in 0..extra {
            cuts.push(cuts[k + 1] + x[k].exp());
        }
        let mu = x[extra..extra + g].to_vec();
        let sd: Vec<f64> = x[extra + g..].iter().map(|v| v.exp()).collect();
        (cuts, mu, sd)
    };
    let loglik = |x: &[f64]| -> f64 {
        let (cuts, mu, sd) = unpack(x);
        let mut total = 0.0;
        for (k, row) in smoothed.iter().enumerate() {
            let f = |z: f64| std_normal_cdf((z - mu[k]) / sd[k]);
            for (cat, n) in row.iter().enumerate() {
                let hi = if cat + 1 < c { f(cuts[cat]) } else { 1.0 };
                let lo = if cat > 0 { f(cuts[cat - 1]) } else { 0.0 };
                total += n * (hi - lo).max(1e-300).ln();
            }
        }
        total
    };
    let mut x0: Vec<f64> = (0..extra)
        .map(|k| (pooled[k + 2] - pooled[k + 1]).max(1e-3).ln())
        .collect();
    x0.extend(std::iter::repeat_n(0.5, g));
    x0.extend(std::iter::repeat_n(0.0, g));
    let objective = FnObjective {
        f: loglik,
        grad: None::<fn(&[f64]) -> Vec<f64>>,
    };
    let opts = MaximizeOptions {
        gtol: 1e-6,
        ftol: 1e-10,
        max_evals: 500,
    };
    let res = maximize(&objective, &x0, &opts);
    let best = if res.value.is_finite() {
        res.argmax
    } else {
        x0
    };
    unpack(&best)
}

fn weighted_moments(points: &[Vec<f64>], w: &[f64]) -> (DVector<f64>, DMatrix<f64>, f64) {
    let p = points[0].len();
    let mass: f64 = w.iter().sum();
    let mut mean = DVector::zeros(p);
    for (x, wi) in points.iter().zip(w) {
        mean += DVector::from_column_slice(x) * *wi;
    }
    mean /= mass;
    let mut cov = DMatrix::zeros(p, p);
    for (x, wi) in points.iter().zip(w) {
        let d = DVector::from_column_slice(x) - &mean;
        cov += &d * d.transpose() * *wi;
    }
    cov /= mass;
    (mean, cov, mass)
}

fn ridge(m: &mut DMatrix<f64>, rel: f64) {
    let s = (m.trace() / m.nrows() as f64).max(1e-8);
    for k in 0..m.nrows() {
        m[(k, k)] += rel * s;
    }
}

/// Rotate `a` (on the right) so its leading square block is lower triangular
/// with a positive diagonal. Returns the rotated matrix and the rotation.
fn triangularize(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let k = a.ncols();
    if k == 0 {
        return (a.clone(), DMatrix::zeros(0, 0));
    }
    let head = a.rows(0, k).transpose();
    let qr = head.qr();
    let mut rot = qr.q();
    let r = qr.r();
    for c in 0..k {
        if r[(c, c)] < 0.0 {
            rot.column_mut(c).neg_mut();
        }
    }
    let mut out = a * &rot;
    for c in 0..k {
        for r in 0..c {
            out[(r, c)] = 0.0;
        }
        if !(out[(c, c)] > 0.0) {
            out[(c, c)] = 1e-6;
        }
    }
    (out, rot)
}

/// Upper-triangular `T` with `T T' = omega`.
fn upper_cholesky(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = omega.nrows();
    let rev = DMatrix::from_fn(q, q, |r, c| omega[(q - 1 - r, q - 1 - c)]);
    let l = rev
        .cholesky()
        .ok_or_else(|| Error::Initialization("component covariance not positive definite".into()))?
        .l();
    Ok(DMatrix::from_fn(q, q, |r, c| l[(q - 1 - r, q - 1 - c)]))
}

fn lower_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Initialization("covariance not positive definite".into()))
}

/// Rational (data-driven) or jittered starting parameters.
pub fn initialize(
    tables: &PairwiseTables,
    n_components: usize,
    n_signal: usize,
    seed: u64,
    mode: StartMode,
) -> Result<ScrParameters> {
    let schema = tables.schema();
    let p = schema.n_vars();
    if n_signal == 0 || n_signal > p || n_components == 0 {
        return Err(Error::InvalidArgument(format!(
            "need G >= 1 and 1 <= Q <= {p}, got G={n_components}, Q={n_signal}"
        )));
    }
    let count = count_parameters(p, n_signal, n_components, schema.categories());
    if !count.identifiable {
        return Err(Error::NotIdentifiable {
            g: n_components,
            q: n_signal,
            count: count.count,
            bound: count.bound,
        });
    }
    let rational = rational_start(tables, n_components, n_signal, seed)?;
    match mode {
        StartMode::Rational => Ok(rational),
        StartMode::Random => {
            // a different clustering, then jitter in packed coordinates
            let base = rational_start(tables, n_components, n_signal, seed ^ 0x9e37_79b9_7f4a_7c15)
                .unwrap_or(rational);
            let layout = PackLayout::new(schema, n_components, n_signal)?;
            let mut theta = layout.pack(&base)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for v in theta.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += JITTER * v.abs().max(1.0) * z;
            }
            layout.unpack(&theta)
        }
    }
}

/// Eigenvectors of a symmetric matrix by decreasing eigenvalue, ties by index.
fn sorted_eigenvectors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])])
}

fn rational_start(
    tables: &PairwiseTables,
    n_components: usize,
    n_signal: usize,
    seed: u64,
) -> Result<ScrParameters> {
    let schema = tables.schema();
    let (p, q, g) = (schema.n_vars(), n_signal, n_components);
    let pooled = marginal_thresholds(tables)?;
    let unit: Vec<Vec<f64>> = (0..p)
        .map(|i| category_scores(&tables.marginal_counts(i)))
        .collect();
    // cluster with every variable on unit scale
    let points: Vec<Vec<f64>> = tables
        .patterns()
        .iter()
        .map(|(pat, _)| pat.iter().enumerate().map(|(i, &c)| unit[i][c]).collect())
        .collect();
    let w: Vec<f64> = tables.patterns().iter().map(|(_, n)| *n as f64).collect();

    let labels = if g == 1 {
        vec![0; points.len()]
    } else {
        weighted_kmeans(&points, &w, g, KMEANS_RESTARTS, seed)?.labels
    };
    // correlations from unit-scale scores; location, spread and cuts from
    // per-variable probit fits on the identified scale
    let cats = schema.categories();
    let mut mass = vec![0.0; g];
    let mut by_cat: Vec<Vec<Vec<f64>>> = cats.iter().map(|&c| vec![vec![0.0; c]; g]).collect();
    for (((pat, _), l), wi) in tables.patterns().iter().zip(&labels).zip(&w) {
        mass[*l] += wi;
        for (i, &c) in pat.iter().enumerate() {
            by_cat[i][*l][c] += wi;
        }
    }
    let fits: Vec<_> = (0..p)
        .map(|i| cluster_probit(&by_cat[i], pooled.cuts(i)))
        .collect();
    let thresholds = Thresholds::new(fits.iter().map(|f| f.0.clone()).collect())?;
    let mut means = Vec::with_capacity(g);
    let mut covs = Vec::with_capacity(g);
    for k in 0..g {
        let idx: Vec<usize> = (0..points.len()).filter(|&i| labels[i] == k).collect();
        let pts: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
        let ws: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
        let (_, c, _) = weighted_moments(&pts, &ws);
        let sd = DVector::from_fn(p, |i, _| fits[i].2[k]);
        let cov = DMatrix::from_fn(p, p, |a, b| {
            let r = if a == b {
                1.0
            } else {
                let d = (c[(a, a)] * c[(b, b)]).sqrt();
                if d > 0.0 {
                    (c[(a, b)] / d).clamp(-0.95, 0.95)
                } else {
                    0.0
                }
            };
            r * sd[a] * sd[b]
        });
        means.push(DVector::from_fn(p, |i, _| fits[i].1[k]));
        covs.push(cov);
    }
    let total: f64 = mass.iter().sum();
    let weights: Vec<f64> = mass.iter().map(|m| m / total).collect();
    let mut grand = DVector::zeros(p);
    let mut within = DMatrix::zeros(p, p);
    for k in 0..g {
        grand += &means[k] * weights[k];
        within += &covs[k] * weights[k];
    }
    let mut between = DMatrix::zeros(p, p);
    for k in 0..g {
        let d = &means[k] - &grand;
        between += &d * d.transpose() * weights[k];
    }
    ridge(&mut within, 1e-3);
    let chol = lower_cholesky(&within)?;
    let chol_inv = chol
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Initialization("singular within-cluster covariance".into()))?;
    let whitened = &chol_inv * &between * chol_inv.transpose();
    let basis = sorted_eigenvectors(&whitened);
    let u_signal = basis.columns(0, q).into_owned();
    let u_noise = basis.columns(q, p - q).into_owned();

    // second-order coordinates: signal = U1' L^-1 y, noise = U2' L^-1 y
    let to_signal = u_signal.transpose() * &chol_inv;
    let mut omegas: Vec<DMatrix<f64>> = covs
        .iter()
        .map(|c| {
            let mut o = &to_signal * c * to_signal.transpose();
            o = (&o + o.transpose()) * 0.5;
            ridge(&mut o, 1e-3);
            o
        })
        .collect();
    let mut etas: Vec<DVector<f64>> = means.iter().map(|m| &to_signal * m).collect();

    // pin the first component's signal covariance to the identity
    let r1 = lower_cholesky(&omegas[0])?;
    let r1_inv = r1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Initialization("singular reference covariance".into()))?;
    let v1_raw = &chol * &u_signal * &r1;
    for k in 0..g {
        omegas[k] = &r1_inv * &omegas[k] * r1_inv.transpose();
        etas[k] = &r1_inv * &etas[k];
    }
    let (v1, rot1) = triangularize(&v1_raw);
    for k in 0..g {
        omegas[k] = rot1.transpose() * &omegas[k] * &rot1;
        etas[k] = rot1.transpose() * &etas[k];
    }
    let v2_raw = &chol * &u_noise;
    let (v2, rot2) = triangularize(&v2_raw);
    let eta0 = rot2.transpose() * (u_noise.transpose() * &chol_inv * &grand);

    let shape_factors = omegas[1..]
        .iter()
        .map(|o| upper_cholesky(&((o + o.transpose()) * 0.5)))
        .collect::<Result<Vec<_>>>()?;
    let params = ScrParameters {
        weights,
        signal_loadings: v1,
        noise_loadings: v2,
        shape_factors,
        signal_means: etas,
        noise_mean: eta0,
        thresholds,
    };
    params.validate()?;
    Ok(params)
}
