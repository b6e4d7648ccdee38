//! Dyadic CSV files.
//!
//! One row per directed dyad, with a header. Node ids are arbitrary strings.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DyadError, Result};
use crate::sample::{BuildOptions, DyadRecord, DyadicSample, OutcomeKind};

/// Which header names play which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    pub src: String,
    pub dst: String,
    pub outcome: String,
    pub treatment: String,
    #[serde(default)]
    pub instrument: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

impl ColumnRoles {
    /// Roles matching [`write_sample_csv`] output for `p` covariates.
    pub fn standard(p: usize) -> Self {
        Self {
            src: "src".into(),
            dst: "dst".into(),
            outcome: "y".into(),
            treatment: "d".into(),
            instrument: None,
            covariates: (1..=p).map(|c| format!("x{c}")).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sample: DyadicSample,
    /// Covariate names in column order of `sample.x()`.
    pub covariate_names: Vec<String>,
    /// Column of `sample.x()` holding the instrument (always the last one).
    pub instrument_column: Option<usize>,
}

fn csv_error(e: csv::Error) -> DyadError {
    let at = e.position().map(|p| format!(" at line {}", p.line())).unwrap_or_default();
    DyadError::InvalidArgument(format!("csv{at}: {e}"))
}

/// Parse a dyadic CSV from any reader.
pub fn read_dyadic_csv<R: Read>(
    reader: R,
    roles: &ColumnRoles,
    outcome_kind: OutcomeKind,
    opts: BuildOptions,
) -> Result<LoadedSample> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DyadError::InvalidArgument(format!("missing column \"{name}\"")))
    };
    let src = column(&roles.src)?;
    let dst = column(&roles.dst)?;
    let outcome = column(&roles.outcome)?;
    let treatment = column(&roles.treatment)?;
    let mut covariate_names = roles.covariates.clone();
    if let Some(z) = &roles.instrument {
        covariate_names.retain(|c| c != z);
        covariate_names.push(z.clone());
    }
    let covs = covariate_names.iter().map(|c| column(c)).collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (index, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(index as u64 + 2);
        let num = |col: usize| -> Result<f64> {
            let field = row.get(col).unwrap_or("");
            field.parse::<f64>().map_err(|_| {
                DyadError::InvalidArgument(format!(
                    "row {index} (line {line}): column \"{}\" has non-numeric value \"{field}\"",
                    &header[col]
                ))
            })
        };
        let x = covs.iter().map(|c| num(*c)).collect::<Result<Vec<_>>>()?;
        records.push(DyadRecord::new(&row[src], &row[dst], num(outcome)?, num(treatment)?, x));
    }
    let sample = DyadicSample::from_records(&records, outcome_kind, opts)?;
    let instrument_column = roles.instrument.as_ref().map(|_| covariate_names.len() - 1);
    Ok(LoadedSample { sample, covariate_names, instrument_column })
}

/// [`read_dyadic_csv`] on a file.
pub fn load_dyadic_csv(
    path: impl AsRef<Path>,
    roles: &ColumnRoles,
    outcome_kind: OutcomeKind,
    opts: BuildOptions,
) -> Result<LoadedSample> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DyadError::InvalidArgument(format!("{}: {e}", path.display())))?;
    read_dyadic_csv(file, roles, outcome_kind, opts)
}

/// Write every dyad as `src,dst,y,d,x1..xp` using node labels.
///
/// Values are printed in shortest round-trip form, so reading the file back
/// with [`ColumnRoles::standard`] reproduces the sample bit for bit.
pub fn write_sample_csv<W: Write>(sample: &DyadicSample, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| DyadError::InvalidArgument(format!("csv write: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["src".to_string(), "dst".into(), "y".into(), "d".into()];
    header.extend((1..=sample.p()).map(|c| format!("x{c}")));
    w.write_record(&header).map_err(io_err)?;
    let labels = sample.labels();
    for (row, dyad) in sample.dyads().enumerate() {
        let mut rec = vec![labels[dyad.src()].clone(), labels[dyad.dst()].clone()];
        rec.push(sample.y()[row].to_string());
        rec.push(sample.d()[row].to_string());
        rec.extend((0..sample.p()).map(|c| sample.x()[(row, c)].to_string()));
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| DyadError::InvalidArgument(format!("csv write: {e}")))?;
    Ok(())
}
