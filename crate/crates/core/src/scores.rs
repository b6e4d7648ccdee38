//! Neyman-orthogonal scores and their per-fold nuisance recipes.
//!
//! Three models are provided:
//!
//! * [`LogitScore`]: high-dimensional logit link formation,
//!   `psi = {Y - Lambda(D theta + X'beta)} (D - X'gamma)`, where `gamma` is the
//!   weighted projection of `D` on `X` with logistic variance weights;
//! * [`PlmScore`]: partially linear regression,
//!   `psi = (Y - D theta - X'gamma)(D - X'delta)`;
//! * [`IvScore`]: partially linear IV, `psi = (Y - D theta - X'gamma)(Z - X'delta)`
//!   with the instrument `Z` stored as one designated covariate column.
//!
//! Score evaluation is split in two: [`ScoreModel::prepare`] computes the
//! theta-free pieces of a dyad's score once per nuisance estimate, and
//! [`ScoreModel::psi`] / [`ScoreModel::jacobian`] evaluate those pieces at any
//! theta. Root finding over theta then never touches the covariates.

use std::fmt::Debug;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DyadError, Result};
use crate::learners::{
    compute_weights, default_penalty, fit_lasso_logit, fit_weighted_lasso_ols, logistic, logistic_variance,
    post_fit_logit, post_fit_ols, Penalty, SolverOptions, DEFAULT_PENALTY_MULTIPLIER,
};
use crate::sample::{DyadIndex, DyadView, DyadicSample, OutcomeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// `psi(w, theta, eta) = psi_a(w, eta) theta + psi_b(w, eta)`.
    Linear,
    Nonlinear,
}

/// Settings shared by every nuisance recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    /// Multiplier `c` of the analytic penalty level.
    pub penalty_multiplier: f64,
    /// Sample size that normalizes the penalty.
    #[serde(default)]
    pub penalty_scale: PenaltyScale,
    pub solver: SolverOptions,
}

/// Effective sample size `n_pen` in the penalty `c sqrt(n_pen log(q n_pen)) / n_pen`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyScale {
    /// Distinct nodes in the training dyads.
    #[default]
    Nodes,
    /// Training dyads, as if they were independent observations.
    Dyads,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self { penalty_multiplier: DEFAULT_PENALTY_MULTIPLIER, penalty_scale: PenaltyScale::Nodes, solver: SolverOptions::default() }
    }
}

/// Per-fold summary of a nuisance fit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NuisanceDiagnostics {
    /// Named support sizes of the penalized fits, e.g. `("beta", 4)`.
    pub supports: Vec<(String, usize)>,
    /// Every penalized solver reported convergence.
    pub solvers_converged: bool,
    /// Every post-selection refit converged (no fallback).
    pub refits_converged: bool,
}

pub trait ScoreModel: Sync {
    type Nuisance: Clone + Debug + Send + Sync;
    /// Theta-free per-dyad ingredients of the score.
    type Prepared: Copy + Debug + Send + Sync;

    fn kind(&self) -> ScoreKind;

    /// Dimension of theta.
    fn dim(&self) -> usize {
        1
    }

    fn fit_nuisance(&self, sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<Self::Nuisance>;

    fn diagnostics(&self, _nuisance: &Self::Nuisance) -> NuisanceDiagnostics {
        NuisanceDiagnostics { supports: Vec::new(), solvers_converged: true, refits_converged: true }
    }

    fn prepare(&self, w: DyadView<'_>, nuisance: &Self::Nuisance) -> Self::Prepared;

    /// Score vector (length `dim`) into `out`.
    fn psi(&self, prep: &Self::Prepared, theta: &[f64], out: &mut [f64]);

    /// Row-major `dim x dim` Jacobian `d psi_r / d theta_c` into `out`.
    fn jacobian(&self, prep: &Self::Prepared, theta: &[f64], out: &mut [f64]);

    /// `(psi_a, psi_b)` for linear scores, row-major `psi_a`.
    fn linear_parts(&self, _prep: &Self::Prepared, _a: &mut [f64], _b: &mut [f64]) -> bool {
        false
    }
}

/// Design matrix over `dyads` with the treatment as column 0 (if requested)
/// followed by every covariate except `skip`.
pub(crate) fn training_design(
    sample: &DyadicSample,
    dyads: &[DyadIndex],
    with_treatment: bool,
    skip: Option<usize>,
) -> DMatrix<f64> {
    let cols: Vec<usize> = (0..sample.p()).filter(|c| Some(*c) != skip).collect();
    let offset = usize::from(with_treatment);
    let rows: Vec<usize> = dyads.iter().map(|d| sample.row(*d)).collect();
    let mut out = DMatrix::zeros(dyads.len(), cols.len() + offset);
    if with_treatment {
        for (k, &r) in rows.iter().enumerate() {
            out[(k, 0)] = sample.d()[r];
        }
    }
    let x = sample.x();
    for (c_out, &c) in cols.iter().enumerate() {
        let src = x.column(c);
        let mut dst = out.column_mut(c_out + offset);
        for (k, &r) in rows.iter().enumerate() {
            dst[k] = src[r];
        }
    }
    out
}

pub(crate) fn penalty_normalizer(sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> f64 {
    match cfg.penalty_scale {
        PenaltyScale::Nodes => node_count(sample.n_nodes(), train) as f64,
        PenaltyScale::Dyads => train.len() as f64,
    }
}

/// Distinct nodes touched by `dyads`.
pub(crate) fn node_count(n_nodes: usize, dyads: &[DyadIndex]) -> usize {
    let mut seen = vec![false; n_nodes];
    for d in dyads {
        seen[d.src()] = true;
        seen[d.dst()] = true;
    }
    seen.into_iter().filter(|s| *s).count()
}

fn gather(values: &[f64], sample: &DyadicSample, dyads: &[DyadIndex]) -> Vec<f64> {
    dyads.iter().map(|d| values[sample.row(*d)]).collect()
}

fn supported_penalty(n_pen: f64, q: usize, cfg: &NuisanceConfig) -> Penalty {
    Penalty::new(default_penalty(n_pen, q.max(1), cfg.penalty_multiplier), n_pen)
}

// ---------------------------------------------------------------------------
// Logit link formation

/// Nuisance of the logit score: `beta` enters the index, `gamma` the instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitNuisance {
    /// Post-lasso coefficient on `D`, used only to form the weights.
    pub theta_pilot: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub diagnostics: NuisanceDiagnostics,
}

/// `Lambda(D theta + X'beta)` link formation score.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogitScore;

/// Theta-free pieces of the logit score at one dyad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogitPrepared {
    pub y: f64,
    pub d: f64,
    /// `X'beta`
    pub offset: f64,
    /// `D - X'gamma`
    pub instrument: f64,
}

impl LogitPrepared {
    pub fn score(&self, theta: f64) -> f64 {
        (self.y - logistic(self.d * theta + self.offset)) * self.instrument
    }

    pub fn dscore(&self, theta: f64) -> f64 {
        -self.d * logistic_variance(self.d * theta + self.offset) * self.instrument
    }
}

/// `{Y - Lambda(D theta + X'beta)} (D - X'gamma)`.
pub fn logit_score(w: DyadView<'_>, theta: f64, nuisance: &LogitNuisance) -> f64 {
    LogitScore.prepare(w, nuisance).score(theta)
}

/// `-D Lambda(.) {1 - Lambda(.)} (D - X'gamma)`, the theta-derivative of [`logit_score`].
pub fn logit_score_dtheta(w: DyadView<'_>, theta: f64, nuisance: &LogitNuisance) -> f64 {
    LogitScore.prepare(w, nuisance).dscore(theta)
}

/// Lasso logit of `Y` on `(D, X)`, post-lasso refit, logistic variance
/// weights from the refit, then weighted lasso of `D` on `X` and its refit.
///
/// Both penalty levels use the node count of `train` as normalizer.
pub fn fit_nuisance_logit(sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LogitNuisance> {
    if sample.outcome_kind() != OutcomeKind::Binary {
        return Err(DyadError::InvalidArgument("logit score needs a binary outcome".into()));
    }
    if train.is_empty() {
        return Err(DyadError::EmptyDyadSet);
    }
    let p = sample.p();
    let n_pen = penalty_normalizer(sample, train, cfg);
    let design = training_design(sample, train, true, None);
    let y = gather(sample.y(), sample, train);

    let lasso = fit_lasso_logit(&design, &y, &supported_penalty(n_pen, p + 1, cfg), &cfg.solver)?;
    let refit = post_fit_logit(&design, &y, &lasso.support, false, Some(&lasso))?;
    let weights = compute_weights(&design, &refit.coefficients);
    let theta_pilot = refit.coefficients[0];
    let beta = refit.coefficients[1..].to_vec();

    let mut supports = vec![("theta_beta".to_owned(), lasso.support.len())];
    let mut solvers_converged = lasso.converged;
    let gamma = if p == 0 {
        Vec::new()
    } else {
        let x = design.columns(1, p).into_owned();
        let d = gather(sample.d(), sample, train);
        let wl = fit_weighted_lasso_ols(&x, &d, &weights, &supported_penalty(n_pen, p, cfg), &cfg.solver)?;
        supports.push(("gamma".to_owned(), wl.support.len()));
        solvers_converged &= wl.converged;
        post_fit_ols(&x, &d, &weights, &wl.support)?
    };
    Ok(LogitNuisance {
        theta_pilot,
        beta,
        gamma,
        diagnostics: NuisanceDiagnostics { supports, solvers_converged, refits_converged: refit.newton_converged },
    })
}

impl ScoreModel for LogitScore {
    type Nuisance = LogitNuisance;
    type Prepared = LogitPrepared;

    fn kind(&self) -> ScoreKind {
        ScoreKind::Nonlinear
    }

    fn fit_nuisance(&self, sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LogitNuisance> {
        fit_nuisance_logit(sample, train, cfg)
    }

    fn diagnostics(&self, nuisance: &LogitNuisance) -> NuisanceDiagnostics {
        nuisance.diagnostics.clone()
    }

    fn prepare(&self, w: DyadView<'_>, eta: &LogitNuisance) -> LogitPrepared {
        LogitPrepared { y: w.y, d: w.d, offset: w.x_dot(&eta.beta), instrument: w.d - w.x_dot(&eta.gamma) }
    }

    fn psi(&self, prep: &LogitPrepared, theta: &[f64], out: &mut [f64]) {
        out[0] = prep.score(theta[0]);
    }

    fn jacobian(&self, prep: &LogitPrepared, theta: &[f64], out: &mut [f64]) {
        out[0] = prep.dscore(theta[0]);
    }
}

// ---------------------------------------------------------------------------
// Partially linear models

/// Nuisance of the linear scores: outcome regression `gamma_y` and projection
/// `delta` of the treatment (PLM) or instrument (IV) on the controls. Both
/// vectors have one entry per covariate column; an IV instrument column holds 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearNuisance {
    pub gamma_y: Vec<f64>,
    pub delta: Vec<f64>,
    pub diagnostics: NuisanceDiagnostics,
}

impl LinearNuisance {
    pub fn new(gamma_y: Vec<f64>, delta: Vec<f64>) -> Self {
        Self { gamma_y, delta, diagnostics: NuisanceDiagnostics::default() }
    }
}

/// `psi_a` and `psi_b` of a dyad, so that `psi = psi_a theta + psi_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPrepared {
    pub psi_a: f64,
    pub psi_b: f64,
}

/// `(Y - D theta - X'gamma)(D - X'delta)` as `(-D (D - X'delta), (Y - X'gamma)(D - X'delta))`.
pub fn plm_score_components(w: DyadView<'_>, nuisance: &LinearNuisance) -> (f64, f64) {
    let resid_d = w.d - w.x_dot(&nuisance.delta);
    (-w.d * resid_d, (w.y - w.x_dot(&nuisance.gamma_y)) * resid_d)
}

/// `(Y - D theta - X'gamma)(Z - X'delta)` as `(-D (Z - X'delta), (Y - X'gamma)(Z - X'delta))`.
pub fn iv_score_components(w: DyadView<'_>, instrument: usize, nuisance: &LinearNuisance) -> Result<(f64, f64)> {
    if instrument >= w.p() {
        return Err(DyadError::InvalidArgument(format!("instrument column {instrument} missing (p = {})", w.p())));
    }
    let resid_z = w.x(instrument) - w.x_dot(&nuisance.delta);
    Ok((-w.d * resid_z, (w.y - w.x_dot(&nuisance.gamma_y)) * resid_z))
}

/// Post-lasso of `target` on the controls, then post-lasso of `Y` on
/// `(D, controls)` with `D` unpenalized. Coefficients are scattered back to
/// full covariate length with zeros at `skip`.
fn fit_partialling_out(
    sample: &DyadicSample,
    train: &[DyadIndex],
    target: &[f64],
    skip: Option<usize>,
    cfg: &NuisanceConfig,
) -> Result<LinearNuisance> {
    if train.is_empty() {
        return Err(DyadError::EmptyDyadSet);
    }
    let p = sample.p();
    let cols: Vec<usize> = (0..p).filter(|c| Some(*c) != skip).collect();
    if cols.is_empty() {
        return Ok(LinearNuisance {
            gamma_y: vec![0.0; p],
            delta: vec![0.0; p],
            diagnostics: NuisanceDiagnostics { supports: Vec::new(), solvers_converged: true, refits_converged: true },
        });
    }
    let n_pen = penalty_normalizer(sample, train, cfg);
    let design = training_design(sample, train, true, skip);
    let x = design.columns(1, cols.len()).into_owned();
    let ones = vec![1.0; train.len()];

    let penalty = supported_penalty(n_pen, cols.len(), cfg);
    let proj = fit_weighted_lasso_ols(&x, target, &ones, &penalty, &cfg.solver)?;
    let delta_sub = post_fit_ols(&x, target, &ones, &proj.support)?;

    let y = gather(sample.y(), sample, train);
    let mut factors = vec![1.0; cols.len() + 1];
    factors[0] = 0.0;
    let outcome = fit_weighted_lasso_ols(&design, &y, &ones, &penalty.clone().with_factors(factors), &cfg.solver)?;
    let mut support = outcome.support.clone();
    if !support.contains(&0) {
        support.insert(0, 0);
    }
    let gamma_sub = post_fit_ols(&design, &y, &ones, &support)?;

    let mut gamma_y = vec![0.0; p];
    let mut delta = vec![0.0; p];
    for (k, &c) in cols.iter().enumerate() {
        gamma_y[c] = gamma_sub[k + 1];
        delta[c] = delta_sub[k];
    }
    Ok(LinearNuisance {
        gamma_y,
        delta,
        diagnostics: NuisanceDiagnostics {
            supports: vec![("delta".to_owned(), proj.support.len()), ("gamma_y".to_owned(), outcome.support.len())],
            solvers_converged: proj.converged && outcome.converged,
            refits_converged: true,
        },
    })
}

/// Partialling-out nuisance for the partially linear model.
pub fn fit_nuisance_plm(sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LinearNuisance> {
    let d = gather(sample.d(), sample, train);
    fit_partialling_out(sample, train, &d, None, cfg)
}

/// Partially linear regression score.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlmScore;

impl ScoreModel for PlmScore {
    type Nuisance = LinearNuisance;
    type Prepared = LinearPrepared;

    fn kind(&self) -> ScoreKind {
        ScoreKind::Linear
    }

    fn fit_nuisance(&self, sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LinearNuisance> {
        fit_nuisance_plm(sample, train, cfg)
    }

    fn diagnostics(&self, nuisance: &LinearNuisance) -> NuisanceDiagnostics {
        nuisance.diagnostics.clone()
    }

    fn prepare(&self, w: DyadView<'_>, eta: &LinearNuisance) -> LinearPrepared {
        let (psi_a, psi_b) = plm_score_components(w, eta);
        LinearPrepared { psi_a, psi_b }
    }

    fn psi(&self, prep: &LinearPrepared, theta: &[f64], out: &mut [f64]) {
        out[0] = prep.psi_a * theta[0] + prep.psi_b;
    }

    fn jacobian(&self, prep: &LinearPrepared, _theta: &[f64], out: &mut [f64]) {
        out[0] = prep.psi_a;
    }

    fn linear_parts(&self, prep: &LinearPrepared, a: &mut [f64], b: &mut [f64]) -> bool {
        a[0] = prep.psi_a;
        b[0] = prep.psi_b;
        true
    }
}

/// Partially linear IV score; the instrument is covariate column `instrument`.
#[derive(Debug, Clone, Copy)]
pub struct IvScore {
    pub instrument: usize,
}

impl IvScore {
    pub fn new(instrument: usize) -> Self {
        Self { instrument }
    }

    pub fn fit_nuisance_iv(&self, sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LinearNuisance> {
        if self.instrument >= sample.p() {
            return Err(DyadError::InvalidArgument(format!(
                "instrument column {} missing (p = {})",
                self.instrument,
                sample.p()
            )));
        }
        let z: Vec<f64> = train.iter().map(|d| sample.x()[(sample.row(*d), self.instrument)]).collect();
        fit_partialling_out(sample, train, &z, Some(self.instrument), cfg)
    }
}

impl ScoreModel for IvScore {
    type Nuisance = LinearNuisance;
    type Prepared = LinearPrepared;

    fn kind(&self) -> ScoreKind {
        ScoreKind::Linear
    }

    fn fit_nuisance(&self, sample: &DyadicSample, train: &[DyadIndex], cfg: &NuisanceConfig) -> Result<LinearNuisance> {
        self.fit_nuisance_iv(sample, train, cfg)
    }

    fn diagnostics(&self, nuisance: &LinearNuisance) -> NuisanceDiagnostics {
        nuisance.diagnostics.clone()
    }

    fn prepare(&self, w: DyadView<'_>, eta: &LinearNuisance) -> LinearPrepared {
        // instrument index validated when fitting
        let (psi_a, psi_b) = iv_score_components(w, self.instrument, eta).unwrap_or((0.0, 0.0));
        LinearPrepared { psi_a, psi_b }
    }

    fn psi(&self, prep: &LinearPrepared, theta: &[f64], out: &mut [f64]) {
        out[0] = prep.psi_a * theta[0] + prep.psi_b;
    }

    fn jacobian(&self, prep: &LinearPrepared, _theta: &[f64], out: &mut [f64]) {
        out[0] = prep.psi_a;
    }

    fn linear_parts(&self, prep: &LinearPrepared, a: &mut [f64], b: &mut [f64]) -> bool {
        a[0] = prep.psi_a;
        b[0] = prep.psi_b;
        true
    }
}

/// Wraps a score model with a fixed nuisance that ignores the training data.
///
/// Useful for oracle comparisons: plugging the true nuisance isolates the
/// behaviour of cross-fitting and the variance estimator.
#[derive(Debug, Clone)]
pub struct FixedNuisance<M: ScoreModel> {
    pub model: M,
    pub nuisance: M::Nuisance,
}

impl<M: ScoreModel> ScoreModel for FixedNuisance<M> {
    type Nuisance = M::Nuisance;
    type Prepared = M::Prepared;

    fn kind(&self) -> ScoreKind {
        self.model.kind()
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn fit_nuisance(&self, _: &DyadicSample, _: &[DyadIndex], _: &NuisanceConfig) -> Result<M::Nuisance> {
        Ok(self.nuisance.clone())
    }

    fn diagnostics(&self, nuisance: &M::Nuisance) -> NuisanceDiagnostics {
        self.model.diagnostics(nuisance)
    }

    fn prepare(&self, w: DyadView<'_>, eta: &M::Nuisance) -> M::Prepared {
        self.model.prepare(w, eta)
    }

    fn psi(&self, prep: &M::Prepared, theta: &[f64], out: &mut [f64]) {
        self.model.psi(prep, theta, out)
    }

    fn jacobian(&self, prep: &M::Prepared, theta: &[f64], out: &mut [f64]) {
        self.model.jacobian(prep, theta, out)
    }

    fn linear_parts(&self, prep: &M::Prepared, a: &mut [f64], b: &mut [f64]) -> bool {
        self.model.linear_parts(prep, a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{BuildOptions, DyadRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_dyad(y: f64, d: f64, x: Vec<f64>) -> DyadicSample {
        let names = ["a", "b", "c"];
        let mut recs = Vec::new();
        for s in names {
            for t in names {
                if s != t {
                    recs.push(DyadRecord::new(s, t, y, d, x.clone()));
                }
            }
        }
        DyadicSample::from_records(&recs, OutcomeKind::Continuous, BuildOptions::default()).unwrap()
    }

    fn first(s: &DyadicSample) -> DyadView<'_> {
        s.view(DyadIndex::new(0, 1).unwrap())
    }

    fn logit_nuisance(beta: Vec<f64>, gamma: Vec<f64>) -> LogitNuisance {
        LogitNuisance { theta_pilot: 0.0, beta, gamma, diagnostics: NuisanceDiagnostics::default() }
    }

    #[test]
    fn logit_score_cases() {
        // D theta + X'beta = 0, D - X'gamma = 2
        let s = one_dyad(1.0, 2.0, vec![1.0]);
        let eta = logit_nuisance(vec![0.0], vec![0.0]);
        assert_eq!(logit_score(first(&s), 0.0, &eta), 1.0);
        let s = one_dyad(1.0, 1.0, vec![1.0]);
        let eta = logit_nuisance(vec![-0.5], vec![-1.0]);
        assert_eq!(logit_score(first(&s), 0.5, &eta), 1.0);
        assert_eq!(logit_score_dtheta(first(&s), 0.5, &eta), -0.5);
        // gamma reproduces D exactly
        let s = one_dyad(1.0, 3.0, vec![1.5]);
        let eta = logit_nuisance(vec![0.2], vec![2.0]);
        assert_eq!(logit_score(first(&s), 0.7, &eta), 0.0);
        // D = 0
        let s = one_dyad(0.0, 0.0, vec![1.0]);
        assert_eq!(logit_score_dtheta(first(&s), 0.7, &logit_nuisance(vec![0.3], vec![0.1])), 0.0);
    }

    #[test]
    fn logit_score_zero_at_fitted_probability() {
        let p = logistic(0.3);
        let s = one_dyad(p, 1.0, vec![1.0]);
        let eta = logit_nuisance(vec![0.1], vec![0.4]);
        assert!(logit_score(first(&s), 0.2, &eta).abs() < 1e-16);
    }

    #[test]
    fn plm_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let s = one_dyad(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), x);
            let g: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dl: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = first(&s);
            let eta = LinearNuisance::new(g.clone(), dl.clone());
            let (a, b) = plm_score_components(w, &eta);
            let theta = 0.7;
            let direct = (w.y - w.d * theta - w.x_dot(&g)) * (w.d - w.x_dot(&dl));
            assert!((a * theta + b - direct).abs() < 1e-12);
        }
        let s = one_dyad(2.0, 3.0, vec![1.0, 1.0]);
        let (a, b) = plm_score_components(first(&s), &LinearNuisance::new(vec![0.0; 2], vec![0.0; 2]));
        assert_eq!((a, b), (-9.0, 6.0));
        let (a, b) = plm_score_components(first(&s), &LinearNuisance::new(vec![0.5, 0.0], vec![1.0, 2.0]));
        assert_eq!((a, b), (0.0, 0.0));
    }

    #[test]
    fn iv_components() {
        // column 1 is the instrument
        let s = one_dyad(2.0, 3.0, vec![1.0, 3.0]);
        let eta = LinearNuisance::new(vec![0.5, 0.0], vec![0.0, 0.0]);
        let (a, b) = iv_score_components(first(&s), 1, &eta).unwrap();
        let theta = -1.3;
        let direct = (2.0 - 3.0 * theta - 0.5) * 3.0;
        assert!((a * theta + b - direct).abs() < 1e-12);
        // Z = D reduces to the PLM components
        let (pa, pb) = plm_score_components(first(&s), &eta);
        assert_eq!((a, b), (pa, pb));
        // Z = X'delta
        let (a, b) = iv_score_components(first(&s), 1, &LinearNuisance::new(vec![0.0; 2], vec![3.0, 0.0])).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
        assert!(iv_score_components(first(&s), 2, &eta).is_err());
    }

    #[test]
    fn iv_without_instrument_column() {
        let s = one_dyad(2.0, 3.0, vec![1.0]);
        let train: Vec<_> = s.dyads().collect();
        assert!(IvScore::new(3).fit_nuisance(&s, &train, &NuisanceConfig::default()).is_err());
    }
}
