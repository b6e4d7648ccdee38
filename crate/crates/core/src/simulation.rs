//! Logistic link formation design with node-level shocks, and the Monte
//! Carlo driver that summarizes repeated estimates.
//!
//! For every ordered pair `(i, j)`:
//!
//! ```text
//! D_ij   = (D~_i + D~_j + D~_ij) / 3
//! X_ij   = (X~_i + X~_j + X~_ij) / 3
//! eps_ij = F_logistic^-1( Phi( (e~_i + e~_j + e~_ij) / sqrt(3) ) )
//! Y_ij   = 1{ D_ij theta0 + X_ij' beta0 >= eps_ij }
//! ```
//!
//! with `(D~, X~')' ~ Normal(0, Sigma)`, `Sigma_rc = 5^-|r-c|`, at both node and
//! dyad level, and standard normal `e~`. Dyad-level shocks are drawn per
//! ordered pair, so `D~_ij` and `D~_ji` are independent.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::{confidence_interval, conventional_estimate, cross_fit_estimate, normal_quantile, CrossFitConfig, Method};
use crate::error::{DyadError, Result};
use crate::sample::{pair_of, DyadicSample, OutcomeKind};
use crate::scores::{LogitScore, PenaltyScale};

/// Correlation between adjacent components of `(D~, X~')`.
const AR_COEF: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub dim_x: usize,
    pub k: usize,
    pub reps: usize,
    pub theta0: f64,
    pub seed: u64,
    pub method: Method,
    /// Nominal coverage levels, e.g. 0.90 and 0.95.
    pub levels: Vec<f64>,
    pub cross_fit: CrossFitConfig,
}

impl SimConfig {
    /// The conventional baseline normalizes penalties by the dyad count.
    pub fn new(n_nodes: usize, dim_x: usize, k: usize, reps: usize, method: Method) -> Self {
        let mut cross_fit = CrossFitConfig::default();
        if method == Method::Conventional {
            cross_fit.nuisance.penalty_scale = PenaltyScale::Dyads;
        }
        Self {
            n_nodes,
            dim_x,
            k,
            reps,
            theta0: 1.0,
            seed: 0,
            method,
            levels: vec![0.90, 0.95],
            cross_fit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(DyadError::InvalidArgument("reps must be >= 1".into()));
        }
        if self.k < 2 || self.n_nodes < 2 * self.k || self.n_nodes < 3 {
            return Err(DyadError::FoldTooSmall { n_nodes: self.n_nodes, k: self.k });
        }
        if let Some(l) = self.levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            return Err(DyadError::InvalidArgument(format!("coverage level {l} outside (0, 1)")));
        }
        Ok(())
    }
}

/// `Sigma_rc = 5^-|r - c|`.
pub fn sigma_matrix(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |r, c| 5.0_f64.powi(-(r.abs_diff(c) as i32)))
}

/// Coordinate `c` (1-based) is `2 (-2)^-c` for `c <= floor(sqrt(n_nodes))`, else 0.
pub fn beta0_vector(dim_x: usize, n_nodes: usize) -> Vec<f64> {
    let cutoff = (n_nodes as f64).sqrt().floor() as usize;
    (1..=dim_x).map(|c| if c <= cutoff { 2.0 * (-2.0_f64).powi(-(c as i32)) } else { 0.0 }).collect()
}

/// Primitive draws of the design, before aggregation into dyads.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpShocks {
    /// `N x (1 + dim_x)` node-level `(D~_i, X~_i')`.
    pub node: DMatrix<f64>,
    pub node_eps: Vec<f64>,
    /// `N(N-1) x (1 + dim_x)` dyad-level `(D~_ij, X~_ij')` in sample row order.
    pub dyad: DMatrix<f64>,
    pub dyad_eps: Vec<f64>,
}

/// Fill `out` with a `Normal(0, Sigma)` draw. `Sigma` is the AR(1) correlation
/// with coefficient 1/5, so its Cholesky factor is the AR recursion.
fn correlated_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let innov = (1.0 - AR_COEF * AR_COEF).sqrt();
    let mut prev = 0.0;
    for (c, v) in out.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        prev = if c == 0 { z } else { AR_COEF * prev + innov * z };
        *v = prev;
    }
}

impl DgpShocks {
    pub fn draw<R: Rng + ?Sized>(n_nodes: usize, dim_x: usize, rng: &mut R) -> Self {
        let q = 1 + dim_x;
        let rows = n_nodes * (n_nodes - 1);
        let mut buf = vec![0.0; q];
        let mut node = DMatrix::zeros(n_nodes, q);
        for i in 0..n_nodes {
            correlated_normal(rng, &mut buf);
            node.row_mut(i).copy_from_slice(&buf);
        }
        let node_eps = (0..n_nodes).map(|_| rng.sample(StandardNormal)).collect();
        let mut dyad = DMatrix::zeros(rows, q);
        for r in 0..rows {
            correlated_normal(rng, &mut buf);
            dyad.row_mut(r).copy_from_slice(&buf);
        }
        let dyad_eps = (0..rows).map(|_| rng.sample(StandardNormal)).collect();
        Self { node, node_eps, dyad, dyad_eps }
    }

    pub fn n_nodes(&self) -> usize {
        self.node.nrows()
    }

    /// `eps_ij` for the dyad in row `r`.
    pub fn epsilon(&self, r: usize) -> f64 {
        let n = self.n_nodes();
        let (i, j) = pair_of(n, r);
        let z = (self.node_eps[i] + self.node_eps[j] + self.dyad_eps[r]) / 3.0_f64.sqrt();
        normal_to_logistic(z)
    }

    /// Aggregate the shocks into a dyadic sample.
    pub fn assemble(&self, theta0: f64, beta0: &[f64]) -> Result<DyadicSample> {
        let n = self.n_nodes();
        let q = self.node.ncols();
        let dim_x = q - 1;
        if beta0.len() != dim_x {
            return Err(DyadError::Shape(format!("beta0 of length {} for dim_x = {dim_x}", beta0.len())));
        }
        let rows = n * (n - 1);
        let mut y = vec![0.0; rows];
        let mut d = vec![0.0; rows];
        let mut x = DMatrix::zeros(rows, dim_x);
        for r in 0..rows {
            let (i, j) = pair_of(n, r);
            let dij = (self.node[(i, 0)] + self.node[(j, 0)] + self.dyad[(r, 0)]) / 3.0;
            let mut index = dij * theta0;
            for c in 0..dim_x {
                let v = (self.node[(i, c + 1)] + self.node[(j, c + 1)] + self.dyad[(r, c + 1)]) / 3.0;
                x[(r, c)] = v;
                index += v * beta0[c];
            }
            d[r] = dij;
            y[r] = f64::from(index >= self.epsilon(r));
        }
        DyadicSample::from_parts(n, y, d, x, OutcomeKind::Binary)
    }
}

/// `F_logistic^-1(Phi(z))`, evaluated on both tails without cancellation.
pub fn normal_to_logistic(z: f64) -> f64 {
    let n = Normal::standard();
    n.cdf(z).ln() - n.cdf(-z).ln()
}

/// A simulated dataset together with its true parameters.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sample: DyadicSample,
    pub theta0: f64,
    pub beta0: Vec<f64>,
}

pub fn gen_dgp<R: Rng + ?Sized>(n_nodes: usize, dim_x: usize, theta0: f64, rng: &mut R) -> Result<SimulatedData> {
    if n_nodes < 3 {
        return Err(DyadError::TooFewNodes(n_nodes));
    }
    let beta0 = beta0_vector(dim_x, n_nodes);
    let sample = DgpShocks::draw(n_nodes, dim_x, rng).assemble(theta0, &beta0)?;
    Ok(SimulatedData { sample, theta0, beta0 })
}

/// Data-generation RNG of replication `rep`.
pub fn data_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64))
}

/// Estimation (fold-drawing) RNG of replication `rep`, independent of [`data_rng`].
pub fn estimation_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
    rng.set_stream(1);
    rng
}

/// One Monte Carlo draw of the estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Replication {
    pub theta: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult {
    pub method: Method,
    pub n_nodes: usize,
    pub dim_x: usize,
    pub k: usize,
    pub theta0: f64,
    pub reps: usize,
    pub n_failed: usize,
    pub mean: f64,
    pub bias: f64,
    /// Sample standard deviation (denominator `n - 1`).
    pub sd: f64,
    /// `sqrt(bias^2 + sum (theta_r - mean)^2 / n)`.
    pub rmse: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    /// `(level, coverage)` per nominal level.
    pub coverage: Vec<(f64, f64)>,
}

impl MCResult {
    pub fn coverage_at(&self, level: f64) -> Option<f64> {
        self.coverage.iter().find(|(l, _)| (l - level).abs() < 1e-12).map(|(_, c)| *c)
    }

    pub fn n_ok(&self) -> usize {
        self.reps - self.n_failed
    }
}

/// Quantile by linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Aggregate successful replications into Monte Carlo statistics.
pub fn summarize(config: &SimConfig, draws: &[Replication], n_failed: usize) -> Result<MCResult> {
    if draws.is_empty() {
        return Err(DyadError::AllFailed { attempted: n_failed, last: "no successful replication".into() });
    }
    let n = draws.len() as f64;
    let mean = draws.iter().map(|r| r.theta).sum::<f64>() / n;
    let ss: f64 = draws.iter().map(|r| (r.theta - mean).powi(2)).sum();
    let bias = mean - config.theta0;
    let sd = if draws.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
    let rmse = (bias * bias + ss / n).sqrt();
    let mut sorted: Vec<f64> = draws.iter().map(|r| r.theta).collect();
    sorted.sort_by(f64::total_cmp);
    let coverage = config
        .levels
        .iter()
        .map(|&level| {
            let z = normal_quantile(1.0 - (1.0 - level) / 2.0);
            let hits = draws.iter().filter(|r| (r.theta - config.theta0).abs() <= z * r.std_error).count();
            (level, hits as f64 / n)
        })
        .collect();
    Ok(MCResult {
        method: config.method,
        n_nodes: config.n_nodes,
        dim_x: config.dim_x,
        k: config.k,
        theta0: config.theta0,
        reps: draws.len() + n_failed,
        n_failed,
        mean,
        bias,
        sd,
        rmse,
        q25: quantile(&sorted, 0.25),
        q50: quantile(&sorted, 0.50),
        q75: quantile(&sorted, 0.75),
        coverage,
    })
}

/// Monte Carlo loop with a caller-supplied per-replication estimator.
///
/// Replications run in parallel; results are reduced in replication order.
pub fn run_monte_carlo_with<F>(config: &SimConfig, estimator: F) -> Result<MCResult>
where
    F: Fn(usize) -> Result<Replication> + Sync,
{
    config.validate()?;
    let outcomes: Vec<Result<Replication>> = (0..config.reps).into_par_iter().map(&estimator).collect();
    let draws: Vec<Replication> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
    let n_failed = config.reps - draws.len();
    summarize(config, &draws, n_failed)
}

/// One replication of the logit design: fresh data, then the configured method.
pub fn simulate_replication(config: &SimConfig, rep: usize) -> Result<Replication> {
    let data = gen_dgp(config.n_nodes, config.dim_x, config.theta0, &mut data_rng(config.seed, rep))?;
    let mut rng = estimation_rng(config.seed, rep);
    let fit = match config.method {
        Method::Dyadic => cross_fit_estimate(&data.sample, &LogitScore, config.k, &mut rng, &config.cross_fit)?,
        Method::Conventional => conventional_estimate(&data.sample, &LogitScore, config.k, &mut rng, &config.cross_fit)?,
    };
    let ci = confidence_interval(&fit, &[1.0], 0.05)?;
    Ok(Replication { theta: fit.theta[0], std_error: ci.std_error })
}

/// Monte Carlo study of the logit design with replication `rep` seeded by `seed + rep`.
pub fn run_monte_carlo(config: &SimConfig) -> Result<MCResult> {
    run_monte_carlo_with(config, |rep| simulate_replication(config, rep))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_entries() {
        let s = sigma_matrix(4);
        assert_eq!(s[(0, 0)], 1.0);
        assert!((s[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((s[(0, 2)] - 0.04).abs() < 1e-15);
        assert_eq!(s, s.transpose());
        assert!(s.clone().cholesky().is_some());
    }

    #[test]
    fn ar_recursion_is_sigma_cholesky() {
        let l = sigma_matrix(6).cholesky().unwrap().l();
        let innov = (1.0 - AR_COEF * AR_COEF).sqrt();
        for r in 0..6 {
            for c in 0..=r {
                let expect = if c == 0 { AR_COEF.powi(r as i32) } else { innov * AR_COEF.powi((r - c) as i32) };
                assert!((l[(r, c)] - expect).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn beta0_entries() {
        let b = beta0_vector(50, 100);
        assert_eq!(b[0], -1.0);
        assert_eq!(b[1], 0.5);
        assert_eq!(b[9], 2.0 * (-2.0_f64).powi(-10));
        assert!(b[10..].iter().all(|v| *v == 0.0));
        assert!(beta0_vector(0, 100).is_empty());
    }

    #[test]
    fn logistic_transform() {
        assert_eq!(normal_to_logistic(0.0), 0.0);
        let p = Normal::standard().cdf(1.3);
        assert!((normal_to_logistic(1.3) - (p / (1.0 - p)).ln()).abs() < 1e-12);
        assert!(normal_to_logistic(-9.0).is_finite());
    }

    #[test]
    fn stub_estimator_recovers_theta0() {
        let cfg = SimConfig::new(10, 2, 2, 5, Method::Dyadic);
        let res = run_monte_carlo_with(&cfg, |_| Ok(Replication { theta: 1.0, std_error: 0.0 })).unwrap();
        assert_eq!(res.bias, 0.0);
        assert_eq!(res.sd, 0.0);
        assert_eq!(res.rmse, 0.0);
        assert_eq!(res.coverage, vec![(0.90, 1.0), (0.95, 1.0)]);
    }

    #[test]
    fn failures_are_counted() {
        let cfg = SimConfig::new(10, 2, 2, 6, Method::Dyadic);
        let res = run_monte_carlo_with(&cfg, |rep| {
            if rep % 3 == 0 {
                Err(DyadError::SingularJacobian { det: 0.0 })
            } else {
                Ok(Replication { theta: rep as f64, std_error: 1.0 })
            }
        })
        .unwrap();
        assert_eq!(res.n_failed, 2);
        assert_eq!(res.n_ok(), 4);
        assert_eq!(res.mean, (1.0 + 2.0 + 4.0 + 5.0) / 4.0);
        assert!(run_monte_carlo_with(&cfg, |_| Err(DyadError::EmptyDyadSet)).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.25), 2.0);
        assert_eq!(quantile(&[1.0, 2.0], 0.5), 1.5);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(5, 2, 3, 1, Method::Dyadic).validate().is_err());
        assert!(SimConfig::new(10, 2, 2, 0, Method::Dyadic).validate().is_err());
        let mut c = SimConfig::new(10, 2, 2, 1, Method::Dyadic);
        c.levels = vec![1.5];
        assert!(c.validate().is_err());
    }
}
