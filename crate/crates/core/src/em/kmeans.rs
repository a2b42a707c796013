//! Weighted k-means used to seed the mixture fit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct Clustering {
    pub labels: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let pick = |mass: &[f64], rng: &mut ChaCha8Rng| {
        let total: f64 = mass.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, m) in mass.iter().enumerate() {
            u -= m;
            if u <= 0.0 && *m > 0.0 {
                return i;
            }
        }
        mass.iter().rposition(|m| *m > 0.0).unwrap_or(0)
    };
    let mut centers = vec![points[pick(weights, rng)].clone()];
    let mut d: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let mass: Vec<f64> = d.iter().zip(weights).map(|(d, w)| d * w).collect();
        if mass.iter().all(|m| *m == 0.0) {
            break;
        }
        let c = points[pick(&mass, rng)].clone();
        for (di, p) in d.iter_mut().zip(points) {
            *di = di.min(dist2(p, &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &[Vec<f64>], weights: &[f64], mut centers: Vec<Vec<f64>>) -> Option<Clustering> {
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (l, p) in labels.iter_mut().zip(points) {
            let best = (0..k)
                .min_by(|&a, &b| dist2(p, &centers[a]).total_cmp(&dist2(p, &centers[b])))
                .unwrap();
            if *l != best {
                *l = best;
                changed = true;
            }
        }
        let mut mass = vec![0.0; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for ((l, p), w) in labels.iter().zip(points).zip(weights) {
            mass[*l] += w;
            for (s, x) in sums[*l].iter_mut().zip(p) {
                *s += w * x;
            }
        }
        if mass.contains(&0.0) {
            return None;
        }
        for ((c, s), m) in centers.iter_mut().zip(sums).zip(&mass) {
            *c = s.into_iter().map(|v| v / m).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = labels
        .iter()
        .zip(points)
        .zip(weights)
        .map(|((l, p), w)| w * dist2(p, &centers[*l]))
        .sum();
    Some(Clustering { labels, inertia })
}

/// Best of `restarts` k-means++ runs; runs that empty a cluster are redrawn
/// (at most `restarts` extra draws).
pub(crate) fn weighted_kmeans(
    points: &[Vec<f64>],
    weights: &[f64],
    k: usize,
    restarts: usize,
    seed: u64,
) -> Result<Clustering> {
    let distinct = weights.iter().filter(|w| **w > 0.0).count();
    if distinct < k {
        return Err(Error::Initialization(format!(
            "{distinct} distinct patterns cannot form {k} clusters"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Clustering> = None;
    let mut good = 0;
    let mut tries = 0;
    while good < restarts && tries < 2 * restarts {
        tries += 1;
        let centers = plus_plus(points, weights, k, &mut rng);
        if centers.len() < k {
            continue;
        }
        if let Some(c) = lloyd(points, weights, centers) {
            good += 1;
            if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
                best = Some(c);
            }
        }
    }
    best.ok_or_else(|| Error::Initialization("k-means kept producing empty clusters".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let off = if i < 10 { 0.0 } else { 10.0 };
                vec![off + (i % 3) as f64 * 0.1, off]
            })
            .collect();
        let w = vec![1.0; 20];
        let c = weighted_kmeans(&pts, &w, 2, 5, 1).unwrap();
        assert!(c.labels[..10].iter().all(|&l| l == c.labels[0]));
        assert!(c.labels[10..].iter().all(|&l| l == c.labels[10]));
        assert_ne!(c.labels[0], c.labels[10]);
        let again = weighted_kmeans(&pts, &w, 2, 5, 1).unwrap();
        assert_eq!(c.labels, again.labels);
    }

    #[test]
    fn too_few_points() {
        assert!(weighted_kmeans(&[vec![0.0]], &[3.0], 2, 5, 0).is_err());
    }
}
