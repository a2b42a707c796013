//! Multivariate normal rectangle probabilities.
//!
//! Block-diagonal covariances with blocks of size one or two are integrated
//! exactly. Anything else goes through Genz's separation-of-variables
//! transform evaluated on randomly shifted Richtmyer lattices.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bvn::Bvn;
use super::normal::{std_normal_cdf, std_normal_quantile};
use crate::error::{Error, Result};

/// Integration bounds and moments of a rectangle probability.
#[derive(Clone, Debug)]
pub struct RectangleSpec {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl RectangleSpec {
    pub fn new(
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d
            || covariance.ncols() != d
            || lower.len() != d
            || upper.len() != d
        {
            return Err(Error::InvalidArgument(
                "rectangle dimensions are inconsistent".into(),
            ));
        }
        for k in 0..d {
            if !(lower[k] < upper[k]) {
                return Err(Error::InvalidArgument(format!(
                    "lower bound {} not below upper bound {} at coordinate {k}",
                    lower[k], upper[k]
                )));
            }
            if !(covariance[(k, k)] > 0.0) {
                return Err(Error::Matrix(format!(
                    "non-positive variance at coordinate {k}"
                )));
            }
            for l in 0..k {
                if (covariance[(k, l)] - covariance[(l, k)]).abs()
                    > 1e-12 * (1.0 + covariance[(k, l)].abs())
                {
                    return Err(Error::Matrix("covariance is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            mean,
            covariance,
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Connected components of the non-zero pattern of the covariance.
fn blocks(cov: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let d = cov.nrows();
    let mut seen = vec![false; d];
    let mut out = Vec::new();
    for start in 0..d {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < comp.len() {
            let k = comp[head];
            head += 1;
            for l in 0..d {
                if !seen[l] && cov[(k, l)] != 0.0 {
                    seen[l] = true;
                    comp.push(l);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn interval_probability(lo: f64, hi: f64) -> f64 {
    // Work in the tail that keeps precision.
    if lo > 0.0 {
        std_normal_cdf(-lo) - std_normal_cdf(-hi)
    } else {
        std_normal_cdf(hi) - std_normal_cdf(lo)
    }
}

/// Exact probability of a standardized 2-D rectangle.
pub(crate) fn rectangle_2d(bvn: &Bvn, lo: (f64, f64), hi: (f64, f64)) -> f64 {
    let v = bvn.cdf(hi.0, hi.1) - bvn.cdf(hi.0, lo.1) - bvn.cdf(lo.0, hi.1) + bvn.cdf(lo.0, lo.1);
    v.max(0.0)
}

fn exact_block_product(spec: &RectangleSpec, comps: &[Vec<usize>]) -> Result<f64> {
    let mut prob = 1.0;
    for comp in comps {
        match *comp.as_slice() {
            [k] => {
                let s = spec.covariance[(k, k)].sqrt();
                let m = spec.mean[k];
                prob *= interval_probability((spec.lower[k] - m) / s, (spec.upper[k] - m) / s);
            }
            [k, l] => {
                let sk = spec.covariance[(k, k)].sqrt();
                let sl = spec.covariance[(l, l)].sqrt();
                let rho = spec.covariance[(k, l)] / (sk * sl);
                if !(rho.abs() < 1.0) {
                    return Err(Error::Matrix(
                        "2x2 covariance block is not positive definite".into(),
                    ));
                }
                let bvn = Bvn::new(rho)?;
                let lo = (
                    (spec.lower[k] - spec.mean[k]) / sk,
                    (spec.lower[l] - spec.mean[l]) / sl,
                );
                let hi = (
                    (spec.upper[k] - spec.mean[k]) / sk,
                    (spec.upper[l] - spec.mean[l]) / sl,
                );
                prob *= rectangle_2d(&bvn, lo, hi);
            }
            _ => unreachable!("exact path only sees blocks of size <= 2"),
        }
    }
    Ok(prob)
}

const PRIMES: [f64; 24] = [
    2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0, 29.0, 31.0, 37.0, 41.0, 43.0, 47.0, 53.0,
    59.0, 61.0, 67.0, 71.0, 73.0, 79.0, 83.0, 89.0,
];

/// Randomized QMC estimate of the rectangle probability.
pub(crate) fn genz_qmc(spec: &RectangleSpec, seed: u64, tol: f64) -> Result<(f64, f64)> {
    let d = spec.dim();
    let chol = spec
        .covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Matrix("covariance is not positive definite".into()))?;
    let l = chol.l();
    let a: Vec<f64> = (0..d).map(|k| spec.lower[k] - spec.mean[k]).collect();
    let b: Vec<f64> = (0..d).map(|k| spec.upper[k] - spec.mean[k]).collect();
    let dims = d.saturating_sub(1).max(1);
    if dims > PRIMES.len() {
        return Err(Error::InvalidArgument(format!(
            "dimension {d} exceeds the lattice generator table"
        )));
    }
    let alpha: Vec<f64> = PRIMES[..dims].iter().map(|p| p.sqrt().fract()).collect();

    let integrand = |w: &[f64], y: &mut [f64]| -> f64 {
        let mut f = 1.0;
        for i in 0..d {
            let mut t = 0.0;
            for j in 0..i {
                t += l[(i, j)] * y[j];
            }
            let lii = l[(i, i)];
            let di = std_normal_cdf((a[i] - t) / lii);
            let ei = std_normal_cdf((b[i] - t) / lii);
            let width = ei - di;
            if width <= 0.0 {
                return 0.0;
            }
            f *= width;
            if i + 1 < d {
                let u = (di + w[i] * width).clamp(1e-300, 1.0 - 1e-16);
                y[i] = std_normal_quantile(u);
            }
        }
        f
    };

    let shifts = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let deltas: Vec<Vec<f64>> = (0..shifts)
        .map(|_| (0..dims).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut n = 1usize << 10;
    let max_n = 1usize << 20;
    let mut w = vec![0.0; dims];
    let mut y = vec![0.0; d];
    loop {
        let mut means = Vec::with_capacity(shifts);
        for delta in &deltas {
            let mut acc = 0.0;
            for k in 1..=n {
                for (m, wm) in w.iter_mut().enumerate() {
                    let x = (k as f64 * alpha[m] + delta[m]).fract();
                    *wm = (2.0 * x - 1.0).abs();
                }
                acc += integrand(&w, &mut y);
            }
            means.push(acc / n as f64);
        }
        let mean = means.iter().sum::<f64>() / shifts as f64;
        let var =
            means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / ((shifts - 1) * shifts) as f64;
        let se = var.sqrt();
        if se <= tol || n >= max_n {
            return Ok((mean, se));
        }
        n *= 2;
    }
}

/// Probability that `N(mean, covariance)` lands in the rectangle.
///
/// Returns `(probability, standard error)`. The error is exactly zero when the
/// covariance splits into blocks of size at most two.
pub fn mvn_rectangle_probability(spec: &RectangleSpec, seed: u64, tol: f64) -> Result<(f64, f64)> {
    let comps = blocks(&spec.covariance);
    if comps.iter().all(|c| c.len() <= 2) {
        return Ok((exact_block_product(spec, &comps)?, 0.0));
    }
    genz_qmc(spec, seed, tol)
}
