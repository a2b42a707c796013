use crate::error::Result;
use crate::model::{derive_moments, ComponentMoments, OrdinalSchema, ScrParameters, Thresholds};
use crate::numerics::bvn::{clamp_rho, Bvn};

/// Smallest cell probability used before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

/// Thresholds of variable `var` on the standardized scale of one component,
/// with the infinite ends included (length `C + 1`).
pub fn standardized_thresholds(
    moments: &ComponentMoments,
    thresholds: &Thresholds,
    var: usize,
) -> Vec<f64> {
    let mu = moments.mean[var];
    let sd = moments.sd[var];
    thresholds
        .extended(var)
        .into_iter()
        .map(|g| if g.is_finite() { (g - mu) / sd } else { g })
        .collect()
}

/// Rectangle probability of cell `(ci, cj)` (0-based) for variables `i, j`
/// under one component.
pub fn pair_cell_probability(
    moments: &ComponentMoments,
    thresholds: &Thresholds,
    i: usize,
    j: usize,
    ci: usize,
    cj: usize,
) -> Result<f64> {
    let ti = standardized_thresholds(moments, thresholds, i);
    let tj = standardized_thresholds(moments, thresholds, j);
    let bvn = Bvn::new(clamp_rho(moments.correlation[(i, j)]))?;
    let f = |a: f64, b: f64| bvn.cdf(a, b);
    let v = f(ti[ci + 1], tj[cj + 1]) - f(ti[ci], tj[cj + 1]) - f(ti[ci + 1], tj[cj])
        + f(ti[ci], tj[cj]);
    Ok(v.clamp(0.0, 1.0))
}

/// Cell probabilities for one (pair, component).
#[derive(Clone, Debug)]
pub(crate) struct PairGrid {
    pub tau_i: Vec<f64>,
    pub tau_j: Vec<f64>,
    pub rho: f64,
    pub clamped: bool,
    /// `(C_i + 1) x (C_j + 1)` corner values and partials `(F, dF/da, dF/db, dF/drho)`.
    pub corners: Vec<(f64, f64, f64, f64)>,
    /// Row-major `C_i x C_j` cell probabilities (unfloored).
    pub cells: Vec<f64>,
}

impl PairGrid {
    pub fn compute(
        m: &ComponentMoments,
        thresholds: &Thresholds,
        i: usize,
        j: usize,
        partials: bool,
    ) -> Result<Self> {
        let tau_i = standardized_thresholds(m, thresholds, i);
        let tau_j = standardized_thresholds(m, thresholds, j);
        let raw = m.correlation[(i, j)];
        let rho = clamp_rho(raw);
        let bvn = Bvn::new(rho)?;
        let w = tau_j.len();
        let mut corners = Vec::with_capacity(tau_i.len() * w);
        for &a in &tau_i {
            for &b in &tau_j {
                corners.push(if partials {
                    bvn.cdf_with_partials(a, b)
                } else {
                    (bvn.cdf(a, b), 0.0, 0.0, 0.0)
                });
            }
        }
        let (ci, cj) = (tau_i.len() - 1, w - 1);
        let mut cells = Vec::with_capacity(ci * cj);
        for a in 0..ci {
            for b in 0..cj {
                let f = |r: usize, s: usize| corners[r * w + s].0;
                let v = f(a + 1, b + 1) - f(a, b + 1) - f(a + 1, b) + f(a, b);
                cells.push(v.clamp(0.0, 1.0));
            }
        }
        Ok(Self {
            tau_i,
            tau_j,
            rho,
            clamped: rho != raw,
            corners,
            cells,
        })
    }
}

/// Every pair's per-component cell probabilities.
#[derive(Clone, Debug)]
pub struct CellProbabilities {
    n_components: usize,
    /// `[pair][component]`
    grids: Vec<Vec<PairGrid>>,
}

impl CellProbabilities {
    pub fn compute(params: &ScrParameters, schema: &OrdinalSchema) -> Result<Self> {
        let moments = derive_moments(params)?;
        Self::from_moments(&moments, &params.thresholds, schema, false)
    }

    pub(crate) fn from_moments(
        moments: &[ComponentMoments],
        thresholds: &Thresholds,
        schema: &OrdinalSchema,
        partials: bool,
    ) -> Result<Self> {
        let grids = schema
            .pairs()
            .map(|(i, j)| {
                moments
                    .iter()
                    .map(|m| PairGrid::compute(m, thresholds, i, j, partials))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_components: moments.len(),
            grids,
        })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Row-major cell probabilities of pair `pair` under component `g`.
    pub fn cells(&self, pair: usize, g: usize) -> &[f64] {
        &self.grids[pair][g].cells
    }

    pub(crate) fn grid(&self, pair: usize, g: usize) -> &PairGrid {
        &self.grids[pair][g]
    }
}
