//! Iterative proportional fitting of a dense array to a set of margins.

use crate::error::{Error, Result};

/// A set of target margins.
///
/// `tables[m]` is a row-major array over `axes[m]` (in the listed order).
#[derive(Clone, Debug, PartialEq)]
pub struct MarginTargets {
    axes: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
}

impl MarginTargets {
    pub fn new(axes: Vec<Vec<usize>>, tables: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != tables.len() {
            return Err(Error::InvalidArgument(format!(
                "{} axis tuples but {} tables",
                axes.len(),
                tables.len()
            )));
        }
        let mut total = None;
        for (m, t) in tables.iter().enumerate() {
            if t.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "margin {m} has a negative or non-finite entry"
                )));
            }
            let s: f64 = t.iter().sum();
            match total {
                None => total = Some(s),
                Some(t0)
                    if (s - t0).abs() > 1e-9 * t0.abs().max(s.abs()).max(f64::MIN_POSITIVE) =>
                {
                    return Err(Error::InvalidArgument(format!(
                        "margin {m} sums to {s}, expected {t0}"
                    )));
                }
                _ => {}
            }
        }
        for (m, ax) in axes.iter().enumerate() {
            let mut seen = ax.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != ax.len() || ax.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "margin {m} has empty or repeated axes"
                )));
            }
        }
        Ok(Self { axes, tables })
    }

    pub fn axes(&self) -> &[Vec<usize>] {
        &self.axes
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpfOutcome {
    pub array: Vec<f64>,
    pub discrepancy: f64,
    pub sweeps: usize,
}

/// Map every cell of an array with `shape` to its cell in the margin over `axes`.
fn margin_index(shape: &[usize], axes: &[usize]) -> Vec<usize> {
    let total: usize = shape.iter().product();
    // stride of each array axis inside the margin table
    let mut mstride = vec![0usize; shape.len()];
    let mut s = 1;
    for &a in axes.iter().rev() {
        mstride[a] = s;
        s *= shape[a];
    }
    let mut idx = vec![0usize; shape.len()];
    let mut out = Vec::with_capacity(total);
    let mut cur = 0usize;
    for _ in 0..total {
        out.push(cur);
        // odometer over the last axis first (row-major)
        for k in (0..shape.len()).rev() {
            idx[k] += 1;
            cur += mstride[k];
            if idx[k] < shape[k] {
                break;
            }
            cur -= mstride[k] * shape[k];
            idx[k] = 0;
        }
    }
    out
}

fn margins_of(array: &[f64], map: &[usize], len: usize) -> Vec<f64> {
    let mut m = vec![0.0; len];
    for (v, &c) in array.iter().zip(map) {
        m[c] += v;
    }
    m
}

/// Cyclically rescale `init` (row-major over `shape`) to the target margins.
///
/// Stops once the largest absolute margin discrepancy, measured after a full
/// sweep, is at most `tol`, or after `max_sweeps` sweeps.
pub fn ipf_fit(
    init: &[f64],
    shape: &[usize],
    targets: &MarginTargets,
    tol: f64,
    max_sweeps: usize,
) -> Result<IpfOutcome> {
    let total: usize = shape.iter().product();
    if init.len() != total {
        return Err(Error::InvalidArgument(format!(
            "array has {} cells, shape implies {total}",
            init.len()
        )));
    }
    if init.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument(
            "initial array must be nonnegative".into(),
        ));
    }
    let mut maps = Vec::with_capacity(targets.axes.len());
    for (m, (ax, t)) in targets.axes.iter().zip(&targets.tables).enumerate() {
        if ax.iter().any(|&a| a >= shape.len()) {
            return Err(Error::InvalidArgument(format!(
                "margin {m} names a missing axis"
            )));
        }
        let len: usize = ax.iter().map(|&a| shape[a]).product();
        if t.len() != len {
            return Err(Error::InvalidArgument(format!(
                "margin {m} has {} cells, expected {len}",
                t.len()
            )));
        }
        maps.push(margin_index(shape, ax));
    }
    let mut array = init.to_vec();
    for (m, (map, t)) in maps.iter().zip(&targets.tables).enumerate() {
        let cur = margins_of(&array, map, t.len());
        if cur.iter().zip(t).any(|(c, t)| *c == 0.0 && *t > 0.0) {
            return Err(Error::IpfInfeasible { margin: m });
        }
    }
    let discrepancy_of = |array: &[f64]| {
        maps.iter()
            .zip(&targets.tables)
            .map(|(map, t)| {
                margins_of(array, map, t.len())
                    .iter()
                    .zip(t)
                    .fold(0.0f64, |d, (c, t)| d.max((c - t).abs()))
            })
            .fold(0.0f64, f64::max)
    };
    let mut sweeps = 0;
    let mut discrepancy = discrepancy_of(&array);
    while sweeps < max_sweeps {
        sweeps += 1;
        for (map, t) in maps.iter().zip(&targets.tables) {
            let cur = margins_of(&array, map, t.len());
            let factor: Vec<f64> = cur
                .iter()
                .zip(t)
                .map(|(c, t)| if *c > 0.0 { t / c } else { 0.0 })
                .collect();
            for (v, &c) in array.iter_mut().zip(map) {
                *v *= factor[c];
            }
        }
        discrepancy = discrepancy_of(&array);
        if discrepancy <= tol {
            break;
        }
    }
    Ok(IpfOutcome {
        array,
        discrepancy,
        sweeps,
    })
}
