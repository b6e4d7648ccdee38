//! Line-oriented `key = value` result records.
//!
//! Floats are written in shortest round-trip form. The timestamp is the last
//! line so that everything above it is byte-stable for a fixed config.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use dyadml::engine::FoldDiagnostics;
use dyadml::scores::NuisanceDiagnostics;
use dyadml::{confidence_interval, Method, ResampledFit};

use crate::config::{RunConfig, Score};
use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;
const HEADER: &str = "# dyadml results record";

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub index: usize,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRecord {
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub method: Method,
    pub score: Score,
    pub n_nodes: usize,
    pub n_dyads: usize,
    pub k: usize,
    pub resample_s: usize,
    pub n_failed: usize,
    pub theta: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Row-major `dim x dim`.
    pub sigma2: Vec<f64>,
    pub intervals: Vec<IntervalRecord>,
    pub folds: Vec<FoldDiagnostics>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl ResultsRecord {
    pub fn from_fit(config: &RunConfig, fit: &ResampledFit, n_dyads: usize, timestamp: u64) -> Result<Self, CliError> {
        let agg = &fit.aggregate;
        let dim = agg.dim();
        let mut intervals = Vec::new();
        for index in 0..dim {
            let mut r = vec![0.0; dim];
            r[index] = 1.0;
            for &level in &config.levels {
                let ci = confidence_interval(agg, &r, 1.0 - level)?;
                intervals.push(IntervalRecord { index, level, lower: ci.lower, upper: ci.upper });
            }
        }
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            method: agg.method,
            score: config.score,
            n_nodes: agg.n_nodes,
            n_dyads,
            k: agg.k,
            resample_s: fit.repetitions.len() + fit.n_failed,
            n_failed: fit.n_failed,
            theta: agg.theta.iter().copied().collect(),
            std_error: (0..dim).map(|r| agg.std_error(r)).collect(),
            sigma2: agg.sigma2.transpose().iter().copied().collect(),
            intervals,
            folds: agg.folds.clone(),
            timestamp,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            writeln!(s, "{k} = {v}").unwrap();
        };
        kv("format", &FORMAT_VERSION);
        kv("version", &self.version);
        kv("config_hash", &self.config_hash);
        kv("config", &self.config.to_json());
        kv("method", &method_key(self.method));
        kv("score", &self.score.name());
        kv("n_nodes", &self.n_nodes);
        kv("n_dyads", &self.n_dyads);
        kv("k", &self.k);
        kv("resample_s", &self.resample_s);
        kv("n_failed", &self.n_failed);
        kv("dim", &self.theta.len());
        for (i, t) in self.theta.iter().enumerate() {
            kv(&format!("theta.{i}"), t);
        }
        for (i, t) in self.std_error.iter().enumerate() {
            kv(&format!("se.{i}"), t);
        }
        for (i, t) in self.sigma2.iter().enumerate() {
            kv(&format!("sigma2.{i}"), t);
        }
        kv("intervals", &self.intervals.len());
        for (n, ci) in self.intervals.iter().enumerate() {
            kv(&format!("interval.{n}.index"), &ci.index);
            kv(&format!("interval.{n}.level"), &ci.level);
            kv(&format!("interval.{n}.lower"), &ci.lower);
            kv(&format!("interval.{n}.upper"), &ci.upper);
        }
        kv("folds", &self.folds.len());
        for (n, f) in self.folds.iter().enumerate() {
            kv(&format!("fold.{n}.size"), &f.size);
            kv(&format!("fold.{n}.n_train_dyads"), &f.n_train_dyads);
            kv(&format!("fold.{n}.n_eval_dyads"), &f.n_eval_dyads);
            kv(&format!("fold.{n}.solvers_converged"), &f.nuisance.solvers_converged);
            kv(&format!("fold.{n}.refits_converged"), &f.nuisance.refits_converged);
            kv(&format!("fold.{n}.supports"), &f.nuisance.supports.len());
            for (m, (name, size)) in f.nuisance.supports.iter().enumerate() {
                kv(&format!("fold.{n}.support.{m}.name"), name);
                kv(&format!("fold.{n}.support.{m}.size"), size);
            }
        }
        kv("timestamp", &self.timestamp);
        format!("{HEADER}\n{s}")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| CliError::record(format!("line {}: expected `key = value`", n + 1)))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(CliError::record(format!("line {}: duplicate key {k}", n + 1)));
            }
        }
        let fields = Fields(map);
        let format: u32 = fields.get("format")?;
        if format != FORMAT_VERSION {
            return Err(CliError::record(format!("unsupported format {format}")));
        }
        let dim: usize = fields.get("dim")?;
        let vector = |prefix: &str, len: usize| -> Result<Vec<f64>, CliError> {
            (0..len).map(|i| fields.get(&format!("{prefix}.{i}"))).collect()
        };
        let n_intervals: usize = fields.get("intervals")?;
        let intervals = (0..n_intervals)
            .map(|n| {
                Ok(IntervalRecord {
                    index: fields.get(&format!("interval.{n}.index"))?,
                    level: fields.get(&format!("interval.{n}.level"))?,
                    lower: fields.get(&format!("interval.{n}.lower"))?,
                    upper: fields.get(&format!("interval.{n}.upper"))?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let n_folds: usize = fields.get("folds")?;
        let folds = (0..n_folds)
            .map(|n| {
                let n_supports: usize = fields.get(&format!("fold.{n}.supports"))?;
                let supports = (0..n_supports)
                    .map(|m| {
                        Ok((fields.raw(&format!("fold.{n}.support.{m}.name"))?.to_string(), fields.get(&format!("fold.{n}.support.{m}.size"))?))
                    })
                    .collect::<Result<_, CliError>>()?;
                Ok(FoldDiagnostics {
                    size: fields.get(&format!("fold.{n}.size"))?,
                    n_train_dyads: fields.get(&format!("fold.{n}.n_train_dyads"))?,
                    n_eval_dyads: fields.get(&format!("fold.{n}.n_eval_dyads"))?,
                    nuisance: NuisanceDiagnostics {
                        supports,
                        solvers_converged: fields.get(&format!("fold.{n}.solvers_converged"))?,
                        refits_converged: fields.get(&format!("fold.{n}.refits_converged"))?,
                    },
                })
            })
            .collect::<Result<_, CliError>>()?;
        let score = match fields.raw("score")? {
            "logit" => Score::Logit,
            "plm" => Score::Plm,
            "iv" => Score::Iv,
            other => return Err(CliError::record(format!("unknown score {other}"))),
        };
        let method = match fields.raw("method")? {
            "dyadic" => Method::Dyadic,
            "conventional" => Method::Conventional,
            other => return Err(CliError::record(format!("unknown method {other}"))),
        };
        Ok(Self {
            version: fields.raw("version")?.to_string(),
            config_hash: fields.raw("config_hash")?.to_string(),
            config: RunConfig::from_json(fields.raw("config")?).map_err(|e| CliError::record(e.detail))?,
            method,
            score,
            n_nodes: fields.get("n_nodes")?,
            n_dyads: fields.get("n_dyads")?,
            k: fields.get("k")?,
            resample_s: fields.get("resample_s")?,
            n_failed: fields.get("n_failed")?,
            theta: vector("theta", dim)?,
            std_error: vector("se", dim)?,
            sigma2: vector("sigma2", dim * dim)?,
            intervals,
            folds,
            timestamp: fields.get("timestamp")?,
        })
    }

    pub fn interval(&self, index: usize, level: f64) -> Option<&IntervalRecord> {
        self.intervals.iter().find(|c| c.index == index && c.level == level)
    }
}

fn method_key(m: Method) -> &'static str {
    match m {
        Method::Dyadic => "dyadic",
        Method::Conventional => "conventional",
    }
}

struct Fields(HashMap<String, String>);

impl Fields {
    fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.0.get(key).map(String::as_str).ok_or_else(|| CliError::record(format!("missing key {key}")))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key)?;
        raw.parse().map_err(|_| CliError::record(format!("bad value for {key}: {raw}")))
    }
}
