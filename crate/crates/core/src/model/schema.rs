use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ordinal variables and their category counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct OrdinalSchema {
    categories: Vec<usize>,
}

impl OrdinalSchema {
    /// Requires at least two variables, each with at least three categories.
    pub fn new(categories: Vec<usize>) -> Result<Self> {
        if categories.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 variables, got {}",
                categories.len()
            )));
        }
        if let Some((i, &c)) = categories.iter().enumerate().find(|(_, &c)| c < 3) {
            return Err(Error::Schema(format!(
                "variable {} has {c} categories; at least 3 are required",
                i + 1
            )));
        }
        Ok(Self { categories })
    }

    pub fn n_vars(&self) -> usize {
        self.categories.len()
    }

    pub fn categories(&self) -> &[usize] {
        &self.categories
    }

    pub fn n_categories(&self, var: usize) -> usize {
        self.categories[var]
    }

    /// Number of response patterns, `None` on overflow.
    pub fn pattern_count(&self) -> Option<usize> {
        self.categories
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
    }

    /// Variable pairs `(i, j)` with `i < j`, in lexicographic order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.n_vars();
        (0..p).flat_map(move |i| (i + 1..p).map(move |j| (i, j)))
    }

    pub fn n_pairs(&self) -> usize {
        let p = self.n_vars();
        p * (p - 1) / 2
    }

    /// Index of the pair `(i, j)`, `i < j`, in [`Self::pairs`] order.
    pub fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        let p = self.n_vars();
        i * (2 * p - i - 1) / 2 + (j - i - 1)
    }
}

impl TryFrom<Vec<usize>> for OrdinalSchema {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<OrdinalSchema> for Vec<usize> {
    fn from(s: OrdinalSchema) -> Self {
        s.categories
    }
}

/// Ordered cut points per variable. The first two are fixed at 0 and 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Thresholds {
    cuts: Vec<Vec<f64>>,
}

impl Thresholds {
    pub fn new(cuts: Vec<Vec<f64>>) -> Result<Self> {
        for (i, c) in cuts.iter().enumerate() {
            if c.len() < 2 {
                return Err(Error::Schema(format!(
                    "variable {} has {} thresholds; at least 2 are required",
                    i + 1,
                    c.len()
                )));
            }
            if c[0] != 0.0 || c[1] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "variable {}: first two thresholds must be 0 and 1, got {} and {}",
                    i + 1,
                    c[0],
                    c[1]
                )));
            }
            if c.iter().any(|v| !v.is_finite()) || c.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidArgument(format!(
                    "variable {}: thresholds must be finite and strictly increasing",
                    i + 1
                )));
            }
        }
        Ok(Self { cuts })
    }

    /// Thresholds `0, 1, 2, ...` for every variable of `schema`.
    pub fn equispaced(schema: &OrdinalSchema) -> Self {
        Self {
            cuts: schema
                .categories()
                .iter()
                .map(|&c| (0..c - 1).map(|k| k as f64).collect())
                .collect(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.cuts.len()
    }

    /// Finite cut points of variable `var` (length `C - 1`).
    pub fn cuts(&self, var: usize) -> &[f64] {
        &self.cuts[var]
    }

    /// Cut points with the implicit `-inf` and `+inf` ends (length `C + 1`).
    pub fn extended(&self, var: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.cuts[var].len() + 2);
        v.push(f64::NEG_INFINITY);
        v.extend_from_slice(&self.cuts[var]);
        v.push(f64::INFINITY);
        v
    }

    pub fn all(&self) -> &[Vec<f64>] {
        &self.cuts
    }

    /// Schema implied by the threshold counts.
    pub fn schema(&self) -> Result<OrdinalSchema> {
        OrdinalSchema::new(self.cuts.iter().map(|c| c.len() + 1).collect())
    }
}

impl TryFrom<Vec<Vec<f64>>> for Thresholds {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Thresholds> for Vec<Vec<f64>> {
    fn from(t: Thresholds) -> Self {
        t.cuts
    }
}
