use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::OrdinalSchema;

/// Bivariate contingency tables for every variable pair, plus the
/// response-pattern frequencies they were built from.
///
/// Categories are stored 0-based internally.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseTables {
    schema: OrdinalSchema,
    n_obs: u64,
    pair_counts: Vec<Vec<f64>>,
    patterns: Vec<(Vec<usize>, u64)>,
}

impl PairwiseTables {
    pub fn schema(&self) -> &OrdinalSchema {
        &self.schema
    }

    pub fn n_obs(&self) -> u64 {
        self.n_obs
    }

    /// Row-major `C_i x C_j` counts for the pair with index `pair`.
    pub fn pair_counts(&self, pair: usize) -> &[f64] {
        &self.pair_counts[pair]
    }

    pub fn all_pair_counts(&self) -> &[Vec<f64>] {
        &self.pair_counts
    }

    /// Observed patterns (0-based categories) with their frequencies,
    /// sorted lexicographically.
    pub fn patterns(&self) -> &[(Vec<usize>, u64)] {
        &self.patterns
    }

    /// Build from 0-based pattern frequencies. Zero frequencies are dropped.
    pub fn from_patterns(
        schema: OrdinalSchema,
        patterns: impl IntoIterator<Item = (Vec<usize>, u64)>,
    ) -> Result<Self> {
        let p = schema.n_vars();
        let mut merged: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for (row, (pat, n)) in patterns.into_iter().enumerate() {
            if pat.len() != p {
                return Err(Error::Ingestion {
                    row: row + 1,
                    column: pat.len().min(p) + 1,
                    message: format!("expected {p} values, got {}", pat.len()),
                });
            }
            if let Some((col, &c)) = pat
                .iter()
                .enumerate()
                .find(|(i, &c)| c >= schema.n_categories(*i))
            {
                return Err(Error::Ingestion {
                    row: row + 1,
                    column: col + 1,
                    message: format!(
                        "category {} outside 1..={}",
                        c + 1,
                        schema.n_categories(col)
                    ),
                });
            }
            if n > 0 {
                *merged.entry(pat).or_insert(0) += n;
            }
        }
        let cats = schema.categories().to_vec();
        let mut pair_counts: Vec<Vec<f64>> = schema
            .pairs()
            .map(|(i, j)| vec![0.0; cats[i] * cats[j]])
            .collect();
        let mut n_obs = 0u64;
        for (pat, &n) in &merged {
            n_obs += n;
            for (k, (i, j)) in schema.pairs().enumerate() {
                pair_counts[k][pat[i] * cats[j] + pat[j]] += n as f64;
            }
        }
        if n_obs == 0 {
            return Err(Error::InvalidArgument("no observations".into()));
        }
        Ok(Self {
            schema,
            n_obs,
            pair_counts,
            patterns: merged.into_iter().collect(),
        })
    }

    /// Per-variable category counts (the univariate margins).
    pub fn marginal_counts(&self, var: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.schema.n_categories(var)];
        for (pat, n) in &self.patterns {
            out[pat[var]] += *n as f64;
        }
        out
    }
}

/// Tabulate 1-based category rows, optionally weighted by integer frequencies.
pub fn build_pairwise_tables(
    rows: &[Vec<usize>],
    freq: Option<&[u64]>,
    schema: &OrdinalSchema,
) -> Result<PairwiseTables> {
    if let Some(f) = freq {
        if f.len() != rows.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frequencies for {} rows",
                f.len(),
                rows.len()
            )));
        }
    }
    let mut pats = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        if row.len() != schema.n_vars() {
            return Err(Error::Ingestion {
                row: r + 1,
                column: row.len().min(schema.n_vars()) + 1,
                message: format!("expected {} values, got {}", schema.n_vars(), row.len()),
            });
        }
        let mut pat = Vec::with_capacity(row.len());
        for (c, &v) in row.iter().enumerate() {
            if v < 1 || v > schema.n_categories(c) {
                return Err(Error::Ingestion {
                    row: r + 1,
                    column: c + 1,
                    message: format!("category {v} outside 1..={}", schema.n_categories(c)),
                });
            }
            pat.push(v - 1);
        }
        pats.push((pat, freq.map_or(1, |f| f[r])));
    }
    PairwiseTables::from_patterns(schema.clone(), pats)
}
