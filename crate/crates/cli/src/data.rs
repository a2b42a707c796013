//! CSV ingestion of ordinal response data.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ordscr::datasets::FrequencyData;
use ordscr::model::OrdinalSchema;

/// How to read an ordinal data file.
#[derive(Clone, Debug, Default)]
pub struct DataSpec<'a> {
    /// Column holding pattern counts, if the file is pre-aggregated.
    pub freq: Option<&'a str>,
    /// Category counts per variable; inferred from the data when absent.
    pub categories: Option<&'a [usize]>,
}

pub fn read_ordinal_csv(path: &Path, spec: &DataSpec) -> Result<FrequencyData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let freq_col = match spec.freq {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("no column named '{name}' in {}", path.display()))?,
        ),
        None => None,
    };
    let var_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != freq_col).collect();
    if var_cols.len() < 2 {
        bail!(
            "{} has {} ordinal variable(s); at least 2 are required",
            path.display(),
            var_cols.len()
        );
    }

    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record =
            record.with_context(|| format!("{}: malformed row {}", path.display(), r + 1))?;
        let cell = |c: usize| -> Result<u64> {
            let raw = record.get(c).unwrap_or("");
            raw.parse::<u64>().with_context(|| {
                format!(
                    "row {}, column '{}': expected a non-negative integer, got '{raw}'",
                    r + 1,
                    header[c]
                )
            })
        };
        let mut row = Vec::with_capacity(var_cols.len());
        for &c in &var_cols {
            let v = cell(c)?;
            if v == 0 {
                bail!(
                    "row {}, column '{}': categories are coded from 1",
                    r + 1,
                    header[c]
                );
            }
            row.push(v as usize);
        }
        counts.push(match freq_col {
            Some(c) => cell(c)?,
            None => 1,
        });
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} has no data rows", path.display());
    }

    let observed: Vec<usize> = (0..var_cols.len())
        .map(|i| rows.iter().map(|row| row[i]).max().unwrap_or(0))
        .collect();
    let categories = match spec.categories {
        Some(given) => {
            if given.len() != var_cols.len() {
                bail!(
                    "--categories lists {} values for {} variables",
                    given.len(),
                    var_cols.len()
                );
            }
            for (i, (&c, &m)) in given.iter().zip(&observed).enumerate() {
                if m > c {
                    bail!(
                        "variable '{}' has code {m} above its {c} categories",
                        header[var_cols[i]]
                    );
                }
            }
            given.to_vec()
        }
        None => observed,
    };
    let schema = OrdinalSchema::new(categories)?;
    Ok(FrequencyData {
        names: var_cols.iter().map(|&c| header[c].clone()).collect(),
        rows,
        counts,
        schema,
    })
}
