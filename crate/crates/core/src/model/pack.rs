use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::params::ScrParameters;
use super::schema::{OrdinalSchema, Thresholds};
use crate::error::{Error, Result};

/// Where each parameter block lives in the unconstrained vector.
///
/// Blocks, in order: `G - 1` weight logits against the last component;
/// free entries of the signal loadings and of the noise loadings (row-major,
/// diagonals as logs); shape-factor upper triangles for components `2..=G`
/// (row-major, diagonals as logs); signal means; noise mean; log threshold
/// increments beyond the second cut of each variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackLayout {
    n_vars: usize,
    n_signal: usize,
    n_components: usize,
    categories: Vec<usize>,
    pub weights: Range<usize>,
    pub signal_loadings: Range<usize>,
    pub noise_loadings: Range<usize>,
    pub shape_factors: Range<usize>,
    pub signal_means: Range<usize>,
    pub noise_mean: Range<usize>,
    pub thresholds: Range<usize>,
}

fn lower_free(p: usize, k: usize) -> usize {
    (0..p).map(|r| (r + 1).min(k)).sum()
}

impl PackLayout {
    pub fn new(schema: &OrdinalSchema, n_components: usize, n_signal: usize) -> Result<Self> {
        let p = schema.n_vars();
        if n_components == 0 {
            return Err(Error::InvalidArgument("G must be at least 1".into()));
        }
        if n_signal == 0 || n_signal > p {
            return Err(Error::InvalidArgument(format!(
                "Q must lie in 1..={p}, got {n_signal}"
            )));
        }
        let (g, q) = (n_components, n_signal);
        let mut at = 0;
        let mut seg = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let weights = seg(g - 1);
        let signal_loadings = seg(lower_free(p, q));
        let noise_loadings = seg(lower_free(p, p - q));
        let shape_factors = seg((g - 1) * q * (q + 1) / 2);
        let signal_means = seg(g * q);
        let noise_mean = seg(p - q);
        let thresholds = seg(schema.categories().iter().map(|c| c - 3).sum());
        Ok(Self {
            n_vars: p,
            n_signal: q,
            n_components: g,
            categories: schema.categories().to_vec(),
            weights,
            signal_loadings,
            noise_loadings,
            shape_factors,
            signal_means,
            noise_mean,
            thresholds,
        })
    }

    pub fn len(&self) -> usize {
        self.thresholds.end
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_signal(&self) -> usize {
        self.n_signal
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    /// Every coordinate except the weight logits.
    pub fn non_weight(&self) -> Range<usize> {
        self.weights.end..self.len()
    }

    pub fn pack(&self, params: &ScrParameters) -> Result<Vec<f64>> {
        let (p, q, g) = (self.n_vars, self.n_signal, self.n_components);
        if params.n_vars() != p || params.n_signal() != q || params.n_components() != g {
            return Err(Error::InvalidArgument(format!(
                "parameters are (P={}, Q={}, G={}), layout is (P={p}, Q={q}, G={g})",
                params.n_vars(),
                params.n_signal(),
                params.n_components()
            )));
        }
        let mut theta = Vec::with_capacity(self.len());
        let last = params.weights[g - 1].ln();
        theta.extend(params.weights[..g - 1].iter().map(|w| w.ln() - last));
        push_lower(&mut theta, &params.signal_loadings);
        push_lower(&mut theta, &params.noise_loadings);
        for t in &params.shape_factors {
            for r in 0..q {
                for c in r..q {
                    theta.push(if r == c { t[(r, c)].ln() } else { t[(r, c)] });
                }
            }
        }
        for m in &params.signal_means {
            theta.extend(m.iter());
        }
        theta.extend(params.noise_mean.iter());
        for (i, &c) in self.categories.iter().enumerate() {
            let cuts = params.thresholds.cuts(i);
            if cuts.len() != c - 1 {
                return Err(Error::InvalidArgument(format!(
                    "variable {} has {} cuts, schema needs {}",
                    i + 1,
                    cuts.len(),
                    c - 1
                )));
            }
            theta.extend(cuts.windows(2).skip(1).map(|w| (w[1] - w[0]).ln()));
        }
        debug_assert_eq!(theta.len(), self.len());
        Ok(theta)
    }

    pub fn unpack(&self, theta: &[f64]) -> Result<ScrParameters> {
        if theta.len() != self.len() {
            return Err(Error::Layout {
                expected: self.len(),
                got: theta.len(),
            });
        }
        let (p, q, g) = (self.n_vars, self.n_signal, self.n_components);
        let logits = &theta[self.weights.clone()];
        let top = logits.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut weights: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
        weights.push((-top).exp());
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let signal_loadings = read_lower(&theta[self.signal_loadings.clone()], p, q);
        let noise_loadings = read_lower(&theta[self.noise_loadings.clone()], p, p - q);
        let mut it = theta[self.shape_factors.clone()].iter();
        let shape_factors = (1..g)
            .map(|_| {
                let mut t = DMatrix::zeros(q, q);
                for r in 0..q {
                    for c in r..q {
                        let v = *it.next().expect("segment length");
                        t[(r, c)] = if r == c { v.exp() } else { v };
                    }
                }
                t
            })
            .collect();
        let signal_means = theta[self.signal_means.clone()]
            .chunks(q)
            .map(DVector::from_column_slice)
            .collect();
        let noise_mean = DVector::from_column_slice(&theta[self.noise_mean.clone()]);
        let mut it = theta[self.thresholds.clone()].iter();
        let cuts = self
            .categories
            .iter()
            .map(|&c| {
                let mut v = vec![0.0, 1.0];
                for _ in 3..c {
                    let prev = *v.last().unwrap();
                    v.push(prev + it.next().expect("segment length").exp());
                }
                v
            })
            .collect();
        Ok(ScrParameters {
            weights,
            signal_loadings,
            noise_loadings,
            shape_factors,
            signal_means,
            noise_mean,
            thresholds: Thresholds::new(cuts)?,
        })
    }
}

fn push_lower(theta: &mut Vec<f64>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols().min(r + 1) {
            theta.push(if r == c { m[(r, c)].ln() } else { m[(r, c)] });
        }
    }
}

fn read_lower(seg: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    let mut it = seg.iter();
    for r in 0..rows {
        for c in 0..cols.min(r + 1) {
            let v = *it.next().expect("segment length");
            m[(r, c)] = if r == c { v.exp() } else { v };
        }
    }
    m
}

/// Pack `params` into unconstrained coordinates.
pub fn pack(params: &ScrParameters) -> Result<Vec<f64>> {
    let schema = params.schema()?;
    PackLayout::new(&schema, params.n_components(), params.n_signal())?.pack(params)
}

/// Inverse of [`pack`].
pub fn unpack(
    theta: &[f64],
    schema: &OrdinalSchema,
    n_components: usize,
    n_signal: usize,
) -> Result<ScrParameters> {
    PackLayout::new(schema, n_components, n_signal)?.unpack(theta)
}
