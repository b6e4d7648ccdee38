//! Plain-text and CSV tables.

use dyadml::MCResult;

use crate::error::CliError;
use crate::record::ResultsRecord;

/// Monte Carlo summary columns, in this order, followed by one column per
/// coverage level.
pub const SIM_COLUMNS: [&str; 12] = ["Method", "N", "dim(X)", "K", "True", "Mean", "Bias", "SD", "RMSE", "Q25", "Q50", "Q75"];

fn level_label(level: f64) -> String {
    format!("{}%", (level * 1000.0).round() / 10.0)
}

fn sim_header(levels: &[f64]) -> Vec<String> {
    SIM_COLUMNS.iter().map(|s| s.to_string()).chain(levels.iter().map(|l| level_label(*l))).collect()
}

fn sim_row(r: &MCResult, levels: &[f64], prec: usize) -> Vec<String> {
    let f = |v: f64| format!("{v:.prec$}");
    let mut row = vec![
        r.method.label().to_string(),
        r.n_nodes.to_string(),
        r.dim_x.to_string(),
        r.k.to_string(),
        f(r.theta0),
        f(r.mean),
        f(r.bias),
        f(r.sd),
        f(r.rmse),
        f(r.q25),
        f(r.q50),
        f(r.q75),
    ];
    row.extend(levels.iter().map(|l| r.coverage_at(*l).map(f).unwrap_or_else(|| "NA".into())));
    row
}

pub fn simulation_csv(results: &[MCResult], levels: &[f64]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::io(e.to_string());
    w.write_record(sim_header(levels)).map_err(err)?;
    for r in results {
        w.write_record(sim_row(r, levels, 6)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn simulation_text(results: &[MCResult], levels: &[f64]) -> String {
    let rows: Vec<Vec<String>> = results.iter().map(|r| sim_row(r, levels, 3)).collect();
    align(&sim_header(levels), &rows)
}

/// Left-align the first column, right-align the rest.
pub fn align(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len().saturating_sub(1))));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

/// One row per record and theta coordinate.
pub fn records_text(records: &[ResultsRecord]) -> String {
    let mut levels: Vec<f64> = records.iter().flat_map(|r| r.intervals.iter().map(|c| c.level)).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut header: Vec<String> = ["Method", "Score", "N", "K", "S", "Coef", "Estimate", "SE"].iter().map(|s| s.to_string()).collect();
    header.extend(levels.iter().map(|l| format!("{} CI", level_label(*l))));
    let mut rows = Vec::new();
    for r in records {
        for (i, theta) in r.theta.iter().enumerate() {
            let mut row = vec![
                r.method.label().to_string(),
                r.score.name().to_string(),
                r.n_nodes.to_string(),
                r.k.to_string(),
                r.resample_s.to_string(),
                format!("theta{i}"),
                format!("{theta:.4}"),
                format!("{:.4}", r.std_error[i]),
            ];
            row.extend(levels.iter().map(|l| match r.interval(i, *l) {
                Some(ci) => format!("[{:.4}, {:.4}]", ci.lower, ci.upper),
                None => "NA".into(),
            }));
            rows.push(row);
        }
    }
    align(&header, &rows)
}
