//! The JSON run configuration.

use std::path::{Path, PathBuf};

use dyadml::learners::DEFAULT_PENALTY_MULTIPLIER;
use dyadml::{ColumnRoles, Method, OutcomeKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Estimate,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Score {
    Logit,
    Plm,
    Iv,
}

impl Score {
    pub fn name(self) -> &'static str {
        match self {
            Score::Logit => "logit",
            Score::Plm => "plm",
            Score::Iv => "iv",
        }
    }
}

/// One Monte Carlo cell; `k` falls back to the top-level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub n_nodes: usize,
    pub dim_x: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Conventional, Method::Dyadic]
}

fn default_k() -> usize {
    5
}

fn default_s() -> usize {
    1
}

fn default_multiplier() -> f64 {
    DEFAULT_PENALTY_MULTIPLIER
}

fn default_reps() -> usize {
    100
}

fn default_levels() -> Vec<f64> {
    vec![0.90, 0.95]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub input_path: Option<PathBuf>,
    /// Record files merged by `report`.
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_score")]
    pub score: Score,
    #[serde(default = "default_k", alias = "K")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_s")]
    pub resample_s: usize,
    #[serde(default = "default_multiplier")]
    pub penalty_multiplier: f64,
    #[serde(default)]
    pub columns: Option<ColumnRoles>,
    #[serde(default)]
    pub symmetrize: bool,
    /// Defaults to binary for the logit score and continuous otherwise.
    #[serde(default)]
    pub outcome_kind: Option<OutcomeKind>,
    #[serde(default)]
    pub cells: Vec<Cell>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

fn default_score() -> Score {
    Score::Logit
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind.unwrap_or(match self.score {
            Score::Logit => OutcomeKind::Binary,
            _ => OutcomeKind::Continuous,
        })
    }

    /// SHA-256 of the config with paths cleared, in hex.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        canonical.input_path = canonical.input_path.as_ref().map(|p| PathBuf::from(p.file_name().unwrap_or_default()));
        let digest = Sha256::digest(canonical.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k < 2 {
            return Err(CliError::config(format!("k must be >= 2, got {}", self.k)));
        }
        if self.resample_s == 0 {
            return Err(CliError::config("resample_s must be >= 1"));
        }
        if !(self.penalty_multiplier >= 0.0 && self.penalty_multiplier.is_finite()) {
            return Err(CliError::config("penalty_multiplier must be finite and >= 0"));
        }
        if self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(CliError::config("levels must lie in (0, 1)"));
        }
        match self.command {
            Command::Estimate => {
                if self.input_path.is_none() {
                    return Err(CliError::config("estimate requires input_path"));
                }
                let roles = self.columns.as_ref().ok_or_else(|| CliError::config("estimate requires columns"))?;
                if self.score == Score::Iv && roles.instrument.is_none() {
                    return Err(CliError::config("iv score requires an instrument column"));
                }
            }
            Command::Simulate => {
                if self.cells.is_empty() {
                    return Err(CliError::config("simulate requires at least one cell"));
                }
                if self.reps == 0 {
                    return Err(CliError::config("reps must be >= 1"));
                }
            }
            Command::Report => {}
        }
        Ok(())
    }
}
