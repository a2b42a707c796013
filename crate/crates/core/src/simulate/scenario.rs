use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{derive_moments, OrdinalSchema, ScrParameters, Thresholds};

/// Generating model of a simulation scenario: a latent Gaussian mixture
/// cut at fixed thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub thresholds: Thresholds,
    pub separated: bool,
    pub misspecified: bool,
    /// Signal dimension of the generating model.
    pub q_true: usize,
}

impl ScenarioSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covariances: Vec<DMatrix<f64>>,
        thresholds: Thresholds,
        separated: bool,
        misspecified: bool,
        q_true: usize,
    ) -> Result<Self> {
        let g = weights.len();
        let p = thresholds.n_vars();
        if g == 0 || means.len() != g || covariances.len() != g {
            return Err(Error::InvalidArgument(
                "weights, means and covariances must have one entry per component".into(),
            ));
        }
        if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidArgument(
                "weights must lie on the open simplex".into(),
            ));
        }
        for (m, s) in means.iter().zip(&covariances) {
            if m.len() != p || s.nrows() != p || s.ncols() != p {
                return Err(Error::InvalidArgument(format!(
                    "component moments must have dimension {p}"
                )));
            }
            if (s - s.transpose()).amax() > 1e-12 || s.clone().cholesky().is_none() {
                return Err(Error::Matrix(
                    "component covariance is not positive definite".into(),
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            weights,
            means,
            covariances,
            thresholds,
            separated,
            misspecified,
            q_true,
        })
    }

    /// Generating model with the latent moments implied by `params`.
    pub fn from_parameters(name: impl Into<String>, params: &ScrParameters) -> Result<Self> {
        let moments = derive_moments(params)?;
        Self::new(
            name,
            params.weights.clone(),
            moments.iter().map(|m| m.mean.clone()).collect(),
            moments.iter().map(|m| m.covariance.clone()).collect(),
            params.thresholds.clone(),
            false,
            false,
            params.n_signal(),
        )
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn n_vars(&self) -> usize {
        self.thresholds.n_vars()
    }

    pub fn schema(&self) -> OrdinalSchema {
        self.thresholds
            .schema()
            .expect("thresholds carry a valid schema")
    }
}

pub const SCENARIO_NAMES: [&str; 4] = [
    "scr-separated",
    "scr-nonseparated",
    "miss-separated",
    "miss-nonseparated",
];

fn block(top: [[f64; 2]; 2], rest: f64) -> DMatrix<f64> {
    let mut s = DMatrix::identity(5, 5) * rest;
    for i in 0..2 {
        for j in 0..2 {
            s[(i, j)] = top[i][j];
        }
    }
    s
}

/// One of the four built-in generating models.
pub fn scenario_preset(name: &str) -> Result<ScenarioSpec> {
    let m1_sep = [-2.0, 4.0, 0.0, 0.0, 0.0];
    let m1_non = [-0.5, 3.5, 0.0, 0.0, 0.0];
    let m2 = [2.5, 0.5, 0.0, 0.0, 0.0];
    let sep_cov = DMatrix::from_diagonal(&DVector::from_vec(vec![0.8, 0.8, 1.5, 1.5, 1.5]));
    let non_cov = DMatrix::identity(5, 5) * 1.5;
    let (m1, m2, s1, s2, separated, miss) = match name {
        "scr-separated" => (
            m1_sep,
            m2,
            sep_cov,
            block([[1.0, 0.6], [0.6, 1.0]], 1.5),
            true,
            false,
        ),
        "scr-nonseparated" => (
            m1_non,
            m2,
            non_cov,
            block([[3.3, 1.95], [1.95, 3.3]], 1.5),
            false,
            false,
        ),
        "miss-separated" => (
            [-2.0, 4.0, 0.0, -0.5, 0.0],
            [2.5, 0.5, 0.5, 0.0, 0.5],
            sep_cov,
            block([[1.25, 0.75], [0.75, 1.25]], 1.0),
            true,
            true,
        ),
        "miss-nonseparated" => (
            [-0.5, 3.5, 0.0, -0.5, 0.0],
            [2.5, 0.5, 0.5, 0.0, 0.5],
            non_cov,
            block([[2.2, 1.3], [1.3, 2.2]], 1.0),
            false,
            true,
        ),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    let thresholds = Thresholds::new(vec![vec![0.0, 1.0, 2.0, 3.0]; 5])?;
    ScenarioSpec::new(
        name,
        vec![0.3, 0.7],
        vec![DVector::from_row_slice(&m1), DVector::from_row_slice(&m2)],
        vec![s1, s2],
        thresholds,
        separated,
        miss,
        2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s = scenario_preset("scr-separated").unwrap();
        assert_eq!(s.means[0].as_slice(), &[-2.0, 4.0, 0.0, 0.0, 0.0]);
        assert_eq!(s.covariances[0][(1, 1)], 0.8);
        assert_eq!(s.covariances[0][(4, 4)], 1.5);
        let m = scenario_preset("miss-nonseparated").unwrap();
        assert_eq!(m.means[1].as_slice(), &[2.5, 0.5, 0.5, 0.0, 0.5]);
        assert_eq!(m.covariances[1][(0, 0)], 2.2);
        assert_eq!(m.covariances[1][(0, 1)], 1.3);
        for name in SCENARIO_NAMES {
            let s = scenario_preset(name).unwrap();
            assert_eq!(s.weights, vec![0.3, 0.7]);
            assert_eq!(s.thresholds.cuts(2), &[0.0, 1.0, 2.0, 3.0]);
        }
        assert!(matches!(
            scenario_preset("nope"),
            Err(Error::UnknownScenario(_))
        ));
    }
}
