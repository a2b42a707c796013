use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::numerics::mvn::{mvn_rectangle_probability, RectangleSpec};

/// Simulated ordinal sample with its generating truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// 1-based categories, one row per observation.
    pub rows: Vec<Vec<usize>>,
    /// 0-based generating component.
    pub labels: Vec<usize>,
    /// Pr(component | observed pattern) under the generating model.
    pub posteriors: Vec<Vec<f64>>,
}

/// 1-based category of latent value `y` given increasing cuts.
pub fn categorize(y: f64, cuts: &[f64]) -> usize {
    1 + cuts.iter().filter(|&&c| c <= y).count()
}

/// Latent-component posterior of a 1-based pattern under the scenario.
pub fn true_posterior(spec: &ScenarioSpec, pattern: &[usize]) -> Result<Vec<f64>> {
    let p = spec.n_vars();
    let schema = spec.schema();
    if pattern.len() != p
        || pattern
            .iter()
            .enumerate()
            .any(|(i, &c)| c < 1 || c > schema.n_categories(i))
    {
        return Err(Error::InvalidArgument(format!(
            "pattern {pattern:?} does not fit the scenario"
        )));
    }
    let mut lower = DVector::zeros(p);
    let mut upper = DVector::zeros(p);
    for (i, &c) in pattern.iter().enumerate() {
        let ext = spec.thresholds.extended(i);
        lower[i] = ext[c - 1];
        upper[i] = ext[c];
    }
    let mut joint = Vec::with_capacity(spec.n_components());
    for (g, w) in spec.weights.iter().enumerate() {
        let rect = RectangleSpec::new(
            spec.means[g].clone(),
            spec.covariances[g].clone(),
            lower.clone(),
            upper.clone(),
        )?;
        let (prob, _) = mvn_rectangle_probability(&rect, 0, 1e-7)?;
        joint.push(w * prob.max(0.0));
    }
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Ok(spec.weights.clone());
    }
    Ok(joint.iter().map(|v| v / total).collect())
}

/// Draw `n` observations without computing true posteriors: 1-based rows
/// and 0-based component labels. Observation `k` uses stream `k` of a
/// ChaCha8 generator keyed by `seed`, so the sample does not depend on
/// scheduling.
pub fn sample_rows(
    spec: &ScenarioSpec,
    n: usize,
    seed: u64,
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let p = spec.n_vars();
    let chols: Vec<DMatrix<f64>> = spec
        .covariances
        .iter()
        .map(|s| {
            s.clone()
                .cholesky()
                .map(|c| c.l())
                .ok_or_else(|| Error::Matrix("covariance is not positive definite".into()))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..n {
        rng.set_stream(k as u64);
        rng.set_word_pos(0);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut g = spec.n_components() - 1;
        for (h, w) in spec.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                g = h;
                break;
            }
        }
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &spec.means[g] + &chols[g] * z;
        rows.push(
            (0..p)
                .map(|i| categorize(y[i], spec.thresholds.cuts(i)))
                .collect::<Vec<_>>(),
        );
        labels.push(g);
    }
    Ok((rows, labels))
}

/// [`sample_rows`] plus the true posterior of every observation.
pub fn generate_dataset(spec: &ScenarioSpec, n: usize, seed: u64) -> Result<Dataset> {
    let (rows, labels) = sample_rows(spec, n, seed)?;
    let mut cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut posteriors = Vec::with_capacity(n);
    for row in &rows {
        if !cache.contains_key(row) {
            cache.insert(row.clone(), true_posterior(spec, row)?);
        }
        posteriors.push(cache[row].clone());
    }
    Ok(Dataset {
        rows,
        labels,
        posteriors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Thresholds;
    use crate::numerics::normal::std_normal_cdf;
    use crate::simulate::scenario::scenario_preset;

    #[test]
    fn threshold_mapping() {
        let cuts = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(categorize(-5.0, &cuts), 1);
        assert_eq!(categorize(0.5, &cuts), 2);
        assert_eq!(categorize(0.0, &cuts), 2);
        assert_eq!(categorize(9.0, &cuts), 5);
    }

    #[test]
    fn deterministic() {
        let s = scenario_preset("scr-nonseparated").unwrap();
        let a = generate_dataset(&s, 300, 11).unwrap();
        let b = generate_dataset(&s, 300, 11).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&s, 300, 12).unwrap();
        assert_ne!(a.rows, c.rows);
        // prefix stability: observation k does not depend on n
        let d = generate_dataset(&s, 100, 11).unwrap();
        assert_eq!(d.rows[..], a.rows[..100]);
    }

    #[test]
    fn third_variable_marginal() {
        let s = scenario_preset("scr-separated").unwrap();
        let n = 200_000;
        let d = generate_dataset(&s, n, 3).unwrap();
        let ones = d.rows.iter().filter(|r| r[2] == 1).count() as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((ones - 0.5).abs() < 3.0 * se, "{ones}");
    }

    /// Upper 0.001 points of the chi-square distribution, df 1..=6.
    const CHI2_999: [f64; 6] = [10.828, 13.816, 16.266, 18.467, 20.515, 22.458];

    #[test]
    fn marginals_pass_goodness_of_fit() {
        let n = 100_000;
        for (k, name) in crate::simulate::SCENARIO_NAMES.iter().enumerate() {
            let s = scenario_preset(name).unwrap();
            let (rows, _) = sample_rows(&s, n, 40 + k as u64).unwrap();
            for i in 0..s.n_vars() {
                let ext = s.thresholds.extended(i);
                let expected: Vec<f64> = ext
                    .windows(2)
                    .map(|w| {
                        s.weights
                            .iter()
                            .zip(s.means.iter().zip(&s.covariances))
                            .map(|(p, (m, c))| {
                                let sd = c[(i, i)].sqrt();
                                let z = |x: f64| std_normal_cdf((x - m[i]) / sd);
                                p * (z(w[1]) - z(w[0]))
                            })
                            .sum::<f64>()
                            * n as f64
                    })
                    .collect();
                let mut observed = vec![0.0; expected.len()];
                for r in &rows {
                    observed[r[i] - 1] += 1.0;
                }
                let used: Vec<(f64, f64)> = observed
                    .iter()
                    .zip(&expected)
                    .filter(|(_, e)| **e > 0.0)
                    .map(|(o, e)| (*o, *e))
                    .collect();
                let stat: f64 = used.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
                let df = used.len() - 1;
                assert!(
                    stat < CHI2_999[df - 1],
                    "{name} variable {i}: {stat} on {df} df"
                );
            }
        }
    }

    #[test]
    fn true_posteriors_are_distributions() {
        let s = scenario_preset("scr-separated").unwrap();
        for pat in [
            [1, 1, 1, 1, 1],
            [5, 2, 3, 4, 1],
            [3, 3, 3, 3, 3],
            [5, 5, 5, 5, 5],
        ] {
            let post = true_posterior(&s, &pat).unwrap();
            assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_oracles() {
        let th = Thresholds::new(vec![vec![0.0, 1.0]; 3]).unwrap();
        let m = DVector::from_vec(vec![0.3, -0.2, 0.5]);
        let cov = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let same = ScenarioSpec::new(
            "same",
            vec![0.25, 0.25, 0.5],
            vec![m.clone(), m.clone(), m.clone()],
            vec![cov.clone(), cov.clone(), cov.clone()],
            th.clone(),
            false,
            false,
            3,
        )
        .unwrap();
        let post = true_posterior(&same, &[1, 2, 3]).unwrap();
        assert!((post[0] - 0.25).abs() < 1e-12 && (post[2] - 0.5).abs() < 1e-12);

        // diagonal covariance: product of univariate interval masses
        let m2 = DVector::from_vec(vec![1.0, 0.0, -0.5]);
        let spec = ScenarioSpec::new(
            "diag",
            vec![0.4, 0.6],
            vec![m.clone(), m2.clone()],
            vec![cov.clone(), cov.clone()],
            th.clone(),
            false,
            false,
            3,
        )
        .unwrap();
        let pat = [2, 1, 3];
        let mass = |mu: &DVector<f64>| {
            (0..3)
                .map(|i| {
                    let e = th.extended(i);
                    let sd = cov[(i, i)].sqrt();
                    std_normal_cdf((e[pat[i]] - mu[i]) / sd)
                        - std_normal_cdf((e[pat[i] - 1] - mu[i]) / sd)
                })
                .product::<f64>()
        };
        let a = 0.4 * mass(&m);
        let b = 0.6 * mass(&m2);
        let post = true_posterior(&spec, &pat).unwrap();
        assert!((post[0] - a / (a + b)).abs() < 1e-12);
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_monte_carlo() {
        // Monte Carlo oracle: latent draws landing in the rectangle of (1,5,3,3,3).
        let s = scenario_preset("scr-separated").unwrap();
        let pat = [1usize, 5, 3, 3, 3];
        let exact = true_posterior(&s, &pat).unwrap();
        let draws = 2_000_000;
        let d = generate_dataset_rows_only(&s, draws, 99);
        let hits: Vec<usize> = d
            .iter()
            .filter(|(r, _)| r.as_slice() == pat)
            .map(|(_, g)| *g)
            .collect();
        let n = hits.len() as f64;
        assert!(n > 100.0, "{n}");
        let f = hits.iter().filter(|&&g| g == 0).count() as f64 / n;
        let se = (exact[0] * (1.0 - exact[0]) / n).sqrt().max(1.0 / n);
        assert!(
            (f - exact[0]).abs() < 3.0 * se + 1e-9,
            "{f} vs {}",
            exact[0]
        );
    }

    fn generate_dataset_rows_only(
        s: &ScenarioSpec,
        n: usize,
        seed: u64,
    ) -> Vec<(Vec<usize>, usize)> {
        let chols: Vec<_> = s
            .covariances
            .iter()
            .map(|c| c.clone().cholesky().unwrap().l())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let g = usize::from(rng.random::<f64>() >= s.weights[0]);
                let z =
                    DVector::from_iterator(5, (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let y = &s.means[g] + &chols[g] * z;
                (
                    (0..5)
                        .map(|i| categorize(y[i], s.thresholds.cuts(i)))
                        .collect(),
                    g,
                )
            })
            .collect()
    }
}
