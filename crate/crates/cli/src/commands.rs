use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dyadml::simulation::{data_rng, estimation_rng};
use dyadml::{
    gen_dgp, load_dyadic_csv, resampled_cross_fit, run_monte_carlo, write_sample_csv, BuildOptions, CrossFitConfig,
    IvScore, LogitScore, MCResult, PlmScore, ResampledFit, SimConfig,
};

use crate::config::{RunConfig, Score};
use crate::error::CliError;
use crate::record::ResultsRecord;
use crate::table;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io(e.to_string()))
}

fn cross_fit_config(cfg: &RunConfig) -> CrossFitConfig {
    let mut cf = CrossFitConfig::default();
    cf.nuisance.penalty_multiplier = cfg.penalty_multiplier;
    cf
}

/// Run every requested Monte Carlo cell and write the summary table.
///
/// With an output path the CSV goes there and the aligned table next to it
/// with a `.txt` extension; the aligned table is also printed.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Vec<MCResult>, CliError> {
    cfg.validate()?;
    let mut results = Vec::new();
    for cell in &cfg.cells {
        for &method in &cell.methods {
            let mut sim = SimConfig::new(cell.n_nodes, cell.dim_x, cell.k.unwrap_or(cfg.k), cfg.reps, method);
            sim.seed = cfg.seed;
            sim.levels = cfg.levels.clone();
            sim.cross_fit.nuisance.penalty_multiplier = cfg.penalty_multiplier;
            sim.validate().map_err(|e| CliError::config(e.to_string()))?;
            results.push(run_monte_carlo(&sim)?);
        }
    }
    let text = table::simulation_text(&results, &cfg.levels);
    if let Some(path) = &cfg.output_path {
        write_file(path, &table::simulation_csv(&results, &cfg.levels)?)?;
        write_file(&path.with_extension("txt"), &text)?;
    }
    emit(out, &text)?;
    Ok(results)
}

/// Write one draw of the simulation design for the first configured cell.
pub fn cmd_dump_dgp(cfg: &RunConfig, path: &Path) -> Result<(), CliError> {
    let cell = cfg.cells.first().ok_or_else(|| CliError::config("dump-dgp needs at least one cell"))?;
    let data = gen_dgp(cell.n_nodes, cell.dim_x, 1.0, &mut data_rng(cfg.seed, 0))?;
    let file = fs::File::create(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    write_sample_csv(&data.sample, file)?;
    Ok(())
}

/// Estimate on `input_path` and return the fit with its record.
pub fn estimate(cfg: &RunConfig) -> Result<(ResampledFit, ResultsRecord), CliError> {
    cfg.validate()?;
    let roles = cfg.columns.as_ref().expect("validated");
    let input = cfg.input_path.as_ref().expect("validated");
    let loaded = load_dyadic_csv(input, roles, cfg.outcome_kind(), BuildOptions { symmetrize: cfg.symmetrize })
        .map_err(|e| CliError::new("data", format!("{}: {e}", input.display())))?;
    let sample = &loaded.sample;
    let cf = cross_fit_config(cfg);
    let mut rng = estimation_rng(cfg.seed, 0);
    let fit = match cfg.score {
        Score::Logit => resampled_cross_fit(sample, &LogitScore, cfg.k, cfg.resample_s, &mut rng, &cf)?,
        Score::Plm => resampled_cross_fit(sample, &PlmScore, cfg.k, cfg.resample_s, &mut rng, &cf)?,
        Score::Iv => {
            let instrument = loaded.instrument_column.expect("validated");
            resampled_cross_fit(sample, &IvScore { instrument }, cfg.k, cfg.resample_s, &mut rng, &cf)?
        }
    };
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let record = ResultsRecord::from_fit(cfg, &fit, sample.n_dyads(), now)?;
    Ok((fit, record))
}

/// Estimate, write the record to `output_path` (or print it), and print a
/// summary table.
pub fn cmd_estimate(cfg: &RunConfig, out: &mut dyn Write) -> Result<ResultsRecord, CliError> {
    let (_, record) = estimate(cfg)?;
    match &cfg.output_path {
        Some(path) => write_file(path, &record.to_text())?,
        None => emit(out, &record.to_text())?,
    }
    emit(out, &table::records_text(std::slice::from_ref(&record)))?;
    Ok(record)
}

/// Merge record files into one comparison table. Records with a config hash
/// already seen are dropped with a warning.
pub fn cmd_report(
    paths: &[PathBuf],
    output: Option<&Path>,
    out: &mut dyn Write,
    warn: &mut dyn Write,
) -> Result<Vec<ResultsRecord>, CliError> {
    if paths.is_empty() {
        return Err(CliError::usage("report needs at least one record file"));
    }
    let mut records: Vec<ResultsRecord> = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let record =
            ResultsRecord::parse(&text).map_err(|e| CliError::record(format!("{}: {}", path.display(), e.detail)))?;
        if records.iter().any(|r| r.config_hash == record.config_hash) {
            writeln!(warn, "warning[duplicate]: {} repeats config {}; skipped", path.display(), record.config_hash)
                .map_err(|e| CliError::io(e.to_string()))?;
            continue;
        }
        records.push(record);
    }
    let text = table::records_text(&records);
    match output {
        Some(path) => write_file(path, &text)?,
        None => emit(out, &text)?,
    }
    Ok(records)
}
