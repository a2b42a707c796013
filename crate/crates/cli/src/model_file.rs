//! Saved model format.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ordscr::em::{FitConfig, FitResult};
use ordscr::model::{
    derive_moments, first_second_order_correlation, ComponentMoments, ScrParameters,
};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub variables: Vec<String>,
    pub categories: Vec<usize>,
    #[serde(rename = "G")]
    pub n_components: usize,
    #[serde(rename = "Q")]
    pub n_signal: usize,
    pub params: ScrParameters,
    pub moments: Vec<ComponentMoments>,
    /// Rows are variables, columns the rotated latent variables.
    pub latent_correlation: Vec<Vec<f64>>,
    pub pll: f64,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub seed: u64,
    pub config: FitConfig,
}

impl ModelFile {
    pub fn from_fit(variables: Vec<String>, fit: &FitResult, config: FitConfig) -> Result<Self> {
        let params = fit.params.clone();
        let r = first_second_order_correlation(&params);
        Ok(Self {
            format_version: FORMAT_VERSION,
            variables,
            categories: params
                .thresholds
                .all()
                .iter()
                .map(|c| c.len() + 1)
                .collect(),
            n_components: params.n_components(),
            n_signal: params.n_signal(),
            moments: derive_moments(&params)?,
            latent_correlation: r
                .row_iter()
                .map(|row| row.iter().copied().collect())
                .collect(),
            params,
            pll: fit.pll,
            trace: fit.trace.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            start_index: fit.start_index,
            seed: fit.seed,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read model file {}", path.display()))?;
        let model: Self = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a model file", path.display()))?;
        if model.format_version != FORMAT_VERSION {
            bail!(
                "{}: unsupported format_version {} (expected {FORMAT_VERSION})",
                path.display(),
                model.format_version
            );
        }
        model.params.validate()?;
        Ok(model)
    }
}
