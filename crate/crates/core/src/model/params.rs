use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::schema::{OrdinalSchema, Thresholds};
use crate::error::{Error, Result};

/// Identified parameters of a mixture with `G` components whose mean and
/// covariance differences live in a `Q`-dimensional signal subspace.
///
/// For component `g`:
/// `mean_g = signal_loadings * signal_means[g] + noise_loadings * noise_mean`,
/// `cov_g = signal_loadings * Omega_g * signal_loadings' + noise_loadings * noise_loadings'`,
/// with `Omega_1 = I` and `Omega_g = T_g T_g'` for the upper-triangular
/// `shape_factors[g - 2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsRepr", into = "ParamsRepr")]
pub struct ScrParameters {
    pub weights: Vec<f64>,
    /// `P x Q`, lower triangular in its first `Q` rows, positive diagonal.
    pub signal_loadings: DMatrix<f64>,
    /// `P x (P - Q)`, lower triangular in its first `P - Q` rows, positive diagonal.
    pub noise_loadings: DMatrix<f64>,
    /// `G - 1` upper-triangular `Q x Q` factors for components `2..=G`.
    pub shape_factors: Vec<DMatrix<f64>>,
    /// One length-`Q` vector per component.
    pub signal_means: Vec<DVector<f64>>,
    /// Length `P - Q`.
    pub noise_mean: DVector<f64>,
    pub thresholds: Thresholds,
}

impl ScrParameters {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn n_signal(&self) -> usize {
        self.signal_loadings.ncols()
    }

    pub fn n_vars(&self) -> usize {
        self.signal_loadings.nrows()
    }

    pub fn schema(&self) -> Result<OrdinalSchema> {
        self.thresholds.schema()
    }

    /// `Omega_g` (identity for the first component).
    pub fn signal_covariance(&self, g: usize) -> DMatrix<f64> {
        let q = self.n_signal();
        if g == 0 {
            DMatrix::identity(q, q)
        } else {
            let t = &self.shape_factors[g - 1];
            t * t.transpose()
        }
    }

    /// Check every structural constraint.
    pub fn validate(&self) -> Result<()> {
        let g = self.weights.len();
        let p = self.signal_loadings.nrows();
        let q = self.signal_loadings.ncols();
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if g == 0 {
            return bad("at least one component is required".into());
        }
        if q == 0 || q > p {
            return bad(format!("signal dimension {q} must lie in 1..={p}"));
        }
        if self.thresholds.n_vars() != p {
            return bad(format!(
                "{} threshold vectors for {p} variables",
                self.thresholds.n_vars()
            ));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite()))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("weights must be positive and sum to 1".into());
        }
        check_loadings(&self.signal_loadings, "signal loadings")?;
        if self.noise_loadings.nrows() != p || self.noise_loadings.ncols() != p - q {
            return bad(format!(
                "noise loadings must be {p}x{}, got {}x{}",
                p - q,
                self.noise_loadings.nrows(),
                self.noise_loadings.ncols()
            ));
        }
        check_loadings(&self.noise_loadings, "noise loadings")?;
        if self.shape_factors.len() != g - 1 {
            return bad(format!(
                "{} shape factors for {g} components",
                self.shape_factors.len()
            ));
        }
        for (k, t) in self.shape_factors.iter().enumerate() {
            if t.nrows() != q || t.ncols() != q {
                return bad(format!("shape factor {} is not {q}x{q}", k + 2));
            }
            for r in 0..q {
                for c in 0..q {
                    let v = t[(r, c)];
                    if !v.is_finite() || (r > c && v != 0.0) || (r == c && !(v > 0.0)) {
                        return bad(format!(
                            "shape factor {} must be upper triangular with positive diagonal",
                            k + 2
                        ));
                    }
                }
            }
        }
        if self.signal_means.len() != g || self.signal_means.iter().any(|m| m.len() != q) {
            return bad(format!("need {g} signal means of length {q}"));
        }
        if self.noise_mean.len() != p - q {
            return bad(format!("noise mean must have length {}", p - q));
        }
        if self
            .signal_means
            .iter()
            .flat_map(|m| m.iter())
            .chain(self.noise_mean.iter())
            .any(|v| !v.is_finite())
        {
            return bad("non-finite mean parameter".into());
        }
        Ok(())
    }

    /// Relabel components: new component `k` is old component `perm[k]`.
    ///
    /// Only well defined for `G = 1` or when the reference component keeps
    /// its place, because `Omega_1 = I` is pinned. Returns `None` otherwise.
    pub fn permuted(&self, perm: &[usize]) -> Option<Self> {
        if perm.len() != self.n_components() || perm[0] != 0 {
            return None;
        }
        let mut out = self.clone();
        out.weights = perm.iter().map(|&k| self.weights[k]).collect();
        out.signal_means = perm.iter().map(|&k| self.signal_means[k].clone()).collect();
        out.shape_factors = perm[1..]
            .iter()
            .map(|&k| self.shape_factors[k - 1].clone())
            .collect();
        Some(out)
    }
}

fn check_loadings(m: &DMatrix<f64>, what: &str) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..=c {
            let v = m[(r, c)];
            if (r < c && v != 0.0) || (r == c && !(v > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{what}: entry ({r},{c}) violates the triangular pattern"
                )));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Mean, covariance and derived correlations of one mixture component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MomentsRepr", try_from = "MomentsRepr")]
pub struct ComponentMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sd: Vec<f64>,
    pub correlation: DMatrix<f64>,
}

impl ComponentMoments {
    pub fn from_mean_cov(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let p = mean.len();
        if covariance.nrows() != p || covariance.ncols() != p {
            return Err(Error::InvalidArgument(
                "mean/covariance size mismatch".into(),
            ));
        }
        let sd: Vec<f64> = (0..p).map(|i| covariance[(i, i)].sqrt()).collect();
        if sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Matrix("non-positive variance".into()));
        }
        let correlation = DMatrix::from_fn(p, p, |i, j| {
            if i == j {
                1.0
            } else {
                covariance[(i, j)] / (sd[i] * sd[j])
            }
        });
        Ok(Self {
            mean,
            covariance,
            sd,
            correlation,
        })
    }
}

/// Latent component moments implied by `params`.
///
/// Fails when extreme loadings overflow a variance.
pub fn derive_moments(params: &ScrParameters) -> Result<Vec<ComponentMoments>> {
    let v1 = &params.signal_loadings;
    let v2 = &params.noise_loadings;
    let noise_cov = v2 * v2.transpose();
    let noise_shift = v2 * &params.noise_mean;
    (0..params.n_components())
        .map(|g| {
            let mean = v1 * &params.signal_means[g] + &noise_shift;
            let mut cov = v1 * params.signal_covariance(g) * v1.transpose() + &noise_cov;
            cov = (&cov + cov.transpose()) * 0.5;
            ComponentMoments::from_mean_cov(mean, cov)
        })
        .collect()
}

/// A random valid parameter set, drawn in packed coordinates with moderate
/// spread. Intended for tests and benchmarks.
pub fn random_parameters<R: rand::Rng + ?Sized>(
    schema: &OrdinalSchema,
    n_components: usize,
    n_signal: usize,
    rng: &mut R,
) -> Result<ScrParameters> {
    use rand_distr::{Distribution, StandardNormal};
    let layout = super::PackLayout::new(schema, n_components, n_signal)?;
    let mut theta: Vec<f64> = (0..layout.len())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    let scale = |theta: &mut [f64], r: std::ops::Range<usize>, s: f64| {
        theta[r].iter_mut().for_each(|v| *v *= s)
    };
    scale(&mut theta, layout.weights.clone(), 0.5);
    scale(&mut theta, layout.signal_loadings.clone(), 0.6);
    scale(&mut theta, layout.noise_loadings.clone(), 0.6);
    scale(&mut theta, layout.shape_factors.clone(), 0.3);
    scale(&mut theta, layout.thresholds.clone(), 0.3);
    layout.unpack(&theta)
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

#[derive(Serialize, Deserialize)]
struct ParamsRepr {
    #[serde(rename = "G")]
    g: usize,
    #[serde(rename = "Q")]
    q: usize,
    weights: Vec<f64>,
    #[serde(rename = "V1")]
    v1: Vec<Vec<f64>>,
    #[serde(rename = "V2")]
    v2: Vec<Vec<f64>>,
    #[serde(rename = "T")]
    t: Vec<Vec<Vec<f64>>>,
    eta_star: Vec<Vec<f64>>,
    eta0_star: Vec<f64>,
    thresholds: Thresholds,
}

impl From<ScrParameters> for ParamsRepr {
    fn from(p: ScrParameters) -> Self {
        Self {
            g: p.n_components(),
            q: p.n_signal(),
            weights: p.weights.clone(),
            v1: to_rows(&p.signal_loadings),
            v2: to_rows(&p.noise_loadings),
            t: p.shape_factors.iter().map(to_rows).collect(),
            eta_star: p
                .signal_means
                .iter()
                .map(|m| m.iter().copied().collect())
                .collect(),
            eta0_star: p.noise_mean.iter().copied().collect(),
            thresholds: p.thresholds,
        }
    }
}

impl TryFrom<ParamsRepr> for ScrParameters {
    type Error = Error;
    fn try_from(r: ParamsRepr) -> Result<Self> {
        let p = r.v1.len();
        if r.q > p {
            return Err(Error::InvalidArgument(format!("Q={} exceeds P={p}", r.q)));
        }
        let out = Self {
            weights: r.weights,
            signal_loadings: from_rows(&r.v1, r.q)?,
            noise_loadings: from_rows(&r.v2, p - r.q)?,
            shape_factors: r
                .t
                .iter()
                .map(|m| from_rows(m, r.q))
                .collect::<Result<_>>()?,
            signal_means: r.eta_star.into_iter().map(DVector::from_vec).collect(),
            noise_mean: DVector::from_vec(r.eta0_star),
            thresholds: r.thresholds,
        };
        if out.n_components() != r.g {
            return Err(Error::InvalidArgument(format!(
                "G={} but {} weights",
                r.g,
                out.n_components()
            )));
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct MomentsRepr {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
    sd: Vec<f64>,
    correlation: Vec<Vec<f64>>,
}

impl From<ComponentMoments> for MomentsRepr {
    fn from(m: ComponentMoments) -> Self {
        Self {
            mean: m.mean.iter().copied().collect(),
            covariance: to_rows(&m.covariance),
            sd: m.sd,
            correlation: to_rows(&m.correlation),
        }
    }
}

impl TryFrom<MomentsRepr> for ComponentMoments {
    type Error = Error;
    fn try_from(r: MomentsRepr) -> Result<Self> {
        let p = r.mean.len();
        Self::from_mean_cov(DVector::from_vec(r.mean), from_rows(&r.covariance, p)?)
    }
}
