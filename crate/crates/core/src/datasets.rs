//! Bundled data.

use crate::error::{Error, Result};
use crate::model::OrdinalSchema;
use crate::pairwise::{build_pairwise_tables, PairwiseTables};

const GSS_CSV: &str = include_str!("../data/gss.csv");

/// Frequency-weighted ordinal data: 1-based rows plus a count per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyData {
    pub names: Vec<String>,
    pub rows: Vec<Vec<usize>>,
    pub counts: Vec<u64>,
    pub schema: OrdinalSchema,
}

impl FrequencyData {
    pub fn tables(&self) -> Result<PairwiseTables> {
        build_pairwise_tables(&self.rows, Some(&self.counts), &self.schema)
    }

    pub fn n_obs(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// General Social Survey cross-classification of schooling (4 levels),
/// number of siblings (5) and happiness (3), one row per cell.
pub fn gss() -> FrequencyData {
    parse_counts(GSS_CSV, vec![4, 5, 3]).expect("bundled GSS table is well formed")
}

fn parse_counts(text: &str, categories: Vec<usize>) -> Result<FrequencyData> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Schema("empty table".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let p = header.len() - 1;
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (r, line) in lines.enumerate() {
        let vals: Vec<u64> = line
            .split(',')
            .enumerate()
            .map(|(c, v)| {
                v.trim().parse().map_err(|_| Error::Ingestion {
                    row: r + 1,
                    column: c + 1,
                    message: format!("not an integer: {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        counts.push(vals[p]);
        rows.push(vals[..p].iter().map(|&v| v as usize).collect());
    }
    Ok(FrequencyData {
        names: header[..p].to_vec(),
        rows,
        counts,
        schema: OrdinalSchema::new(categories)?,
    })
}
