use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scores::sensitivity_variability;
use crate::em::{multi_start_fit, FitConfig, FitResult};
use crate::error::{Error, Result};
use crate::model::count_parameters;
use crate::pairwise::PairwiseTables;

/// Composite BIC of a converged fit: `(cbic, tr(H^-1 V))`.
pub fn cbic(fit: &FitResult, tables: &PairwiseTables) -> Result<(f64, f64)> {
    if !fit.converged {
        return Err(Error::Selection("C-BIC needs a converged fit".into()));
    }
    let m = sensitivity_variability(&fit.params, tables)?;
    let penalty = m.trace_penalty()?;
    Ok((
        -2.0 * fit.pll + penalty * (tables.n_obs() as f64).ln(),
        penalty,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    #[serde(rename = "G")]
    pub n_components: usize,
    #[serde(rename = "Q")]
    pub n_signal: usize,
    pub pll: f64,
    pub trace_penalty: Option<f64>,
    pub cbic: Option<f64>,
    pub converged: bool,
    pub n_parameters: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedModel {
    #[serde(rename = "G")]
    pub n_components: usize,
    #[serde(rename = "Q")]
    pub n_signal: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub grid: Vec<GridEntry>,
    /// `(G, Q)` with the smallest C-BIC among converged fits.
    pub chosen: (usize, usize),
    pub skipped: Vec<SkippedModel>,
}

impl SelectionReport {
    pub fn entry(&self, g: usize, q: usize) -> Option<&GridEntry> {
        self.grid
            .iter()
            .find(|e| e.n_components == g && e.n_signal == q)
    }

    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>3} {:>3} {:>5} {:>14} {:>10} {:>14} {:>9}",
            "G", "Q", "d", "pll", "penalty", "C-BIC", "converged"
        );
        let fmt =
            |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |x| format!("{x:.prec$}"));
        for e in &self.grid {
            let mark = if (e.n_components, e.n_signal) == self.chosen {
                " *"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:>3} {:>3} {:>5} {:>14.3} {:>10} {:>14} {:>9}{mark}",
                e.n_components,
                e.n_signal,
                e.n_parameters,
                e.pll,
                fmt(e.trace_penalty, 3),
                fmt(e.cbic, 2),
                e.converged
            );
        }
        for s in &self.skipped {
            let _ = writeln!(
                out,
                "skipped G={} Q={}: {}",
                s.n_components, s.n_signal, s.reason
            );
        }
        out
    }
}

/// Fit every identifiable `(G, Q)` of the grid and pick the C-BIC minimizer.
/// The fitted models are returned alongside the report, in grid order.
pub fn grid_select_with_fits(
    tables: &PairwiseTables,
    g_list: &[usize],
    q_list: &[usize],
    config: &FitConfig,
) -> Result<(SelectionReport, Vec<FitResult>)> {
    if g_list.is_empty() || q_list.is_empty() {
        return Err(Error::InvalidArgument("empty model grid".into()));
    }
    let schema = tables.schema();
    let p = schema.n_vars();
    let mut grid = Vec::new();
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for &g in g_list {
        for &q in q_list {
            if g == 0 || q == 0 || q > p {
                skipped.push(SkippedModel {
                    n_components: g,
                    n_signal: q,
                    reason: format!("need G >= 1 and 1 <= Q <= {p}"),
                });
                continue;
            }
            let count = count_parameters(p, q, g, schema.categories());
            if !count.identifiable {
                skipped.push(SkippedModel {
                    n_components: g,
                    n_signal: q,
                    reason: format!(
                        "not identifiable: {} parameters > bound {}",
                        count.count, count.bound
                    ),
                });
                continue;
            }
            let fit = match multi_start_fit(tables, g, q, config) {
                Ok(f) => f,
                Err(e) => {
                    skipped.push(SkippedModel {
                        n_components: g,
                        n_signal: q,
                        reason: e.to_string(),
                    });
                    continue;
                }
            };
            let (score, note) = if fit.converged {
                match cbic(&fit, tables) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            } else {
                (None, Some("EM did not converge".into()))
            };
            grid.push(GridEntry {
                n_components: g,
                n_signal: q,
                pll: fit.pll,
                trace_penalty: score.map(|s| s.1),
                cbic: score.map(|s| s.0),
                converged: fit.converged,
                n_parameters: count.count,
                note,
            });
            fits.push(fit);
        }
    }
    let chosen = grid
        .iter()
        .filter(|e| e.converged)
        .filter_map(|e| e.cbic.map(|c| (c, e)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, e)| (e.n_components, e.n_signal))
        .ok_or_else(|| Error::Selection("no grid cell produced a C-BIC".into()))?;
    Ok((
        SelectionReport {
            grid,
            chosen,
            skipped,
        },
        fits,
    ))
}

pub fn grid_select(
    tables: &PairwiseTables,
    g_list: &[usize],
    q_list: &[usize],
    config: &FitConfig,
) -> Result<SelectionReport> {
    grid_select_with_fits(tables, g_list, q_list, config).map(|r| r.0)
}
