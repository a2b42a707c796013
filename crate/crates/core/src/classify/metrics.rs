use crate::error::{Error, Result};

use super::posterior::JointPosterior;

/// Hard partition: one component label per observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMatrix {
    labels: Vec<usize>,
    n_components: usize,
}

impl PartitionMatrix {
    pub fn new(labels: Vec<usize>, n_components: usize) -> Result<Self> {
        if let Some(l) = labels.iter().find(|&&l| l >= n_components) {
            return Err(Error::InvalidArgument(format!(
                "label {l} outside 0..{n_components}"
            )));
        }
        Ok(Self {
            labels,
            n_components,
        })
    }

    /// Labels from arbitrary identifiers, numbered by first appearance.
    pub fn from_labels<T: PartialEq + Clone>(raw: &[T]) -> Self {
        let mut seen: Vec<T> = Vec::new();
        let labels = raw
            .iter()
            .map(|v| match seen.iter().position(|s| s == v) {
                Some(k) => k,
                None => {
                    seen.push(v.clone());
                    seen.len() - 1
                }
            })
            .collect();
        Self {
            labels,
            n_components: seen.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// The N x G indicator matrix.
    pub fn indicator(&self) -> Vec<Vec<f64>> {
        self.labels
            .iter()
            .map(|&l| {
                (0..self.n_components)
                    .map(|g| if g == l { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

/// Argmax component per row; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in probs.iter().enumerate() {
        if *v > probs[best] {
            best = k;
        }
    }
    best
}

/// Assign every row (0-based pattern) to its most probable component.
pub fn hard_assign(post: &JointPosterior, rows: &[Vec<usize>]) -> Result<PartitionMatrix> {
    let labels = rows
        .iter()
        .enumerate()
        .map(|(r, pat)| {
            post.get(pat).map(argmax).ok_or_else(|| {
                Error::InvalidArgument(format!("row {} has an unseen response pattern", r + 1))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PartitionMatrix::new(labels, post.n_components())
}

fn choose2(n: u64) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index via the contingency table.
pub fn ari(a: &PartitionMatrix, b: &PartitionMatrix) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "partitions have {} and {} observations",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Undefined(
            "ARI needs at least two observations".into(),
        ));
    }
    let (ka, kb) = (a.n_components, b.n_components);
    let mut table = vec![0u64; ka * kb];
    for (x, y) in a.labels.iter().zip(&b.labels) {
        table[x * kb + y] += 1;
    }
    let mut rows = vec![0u64; ka];
    let mut cols = vec![0u64; kb];
    for x in 0..ka {
        for y in 0..kb {
            rows[x] += table[x * kb + y];
            cols[y] += table[x * kb + y];
        }
    }
    let index: f64 = table.iter().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.iter().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.iter().map(|&v| choose2(v)).sum();
    let expected = sa * sb / choose2(n as u64);
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both partitions trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Every permutation of `0..g` (Heap's algorithm).
fn permutations(g: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..g).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; g];
    let mut i = 0;
    while i < g {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Largest component count accepted by [`loss_measure`].
pub const MAX_LOSS_COMPONENTS: usize = 8;

/// Root mean squared difference between posterior matrices, minimized over
/// relabelings of the estimate.
pub fn loss_measure(truth: &[Vec<f64>], estimate: &[Vec<f64>]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::InvalidArgument(
            "posterior matrices differ in size or are empty".into(),
        ));
    }
    let g = truth[0].len();
    if truth.iter().chain(estimate).any(|r| r.len() != g) {
        return Err(Error::InvalidArgument("ragged posterior matrix".into()));
    }
    if g > MAX_LOSS_COMPONENTS {
        return Err(Error::InvalidArgument(format!(
            "loss over {g} components would enumerate {g}! permutations (limit {MAX_LOSS_COMPONENTS})"
        )));
    }
    let denom = (truth.len() * g) as f64;
    let best = permutations(g)
        .iter()
        .map(|perm| {
            truth
                .iter()
                .zip(estimate)
                .map(|(t, e)| (0..g).map(|k| (e[perm[k]] - t[k]).powi(2)).sum::<f64>())
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok((best / denom).sqrt())
}
