//! Dyadic cross-fitting, the stacked estimating equation, and
//! dyadic-cluster-robust inference.
//!
//! [`cross_fit_estimate`] partitions nodes into folds, fits nuisances on each
//! fold's complement, and solves
//!
//! ```text
//! (1/K) sum_k E_{I_k}[ psi(W; theta, eta_k) ] = 0
//! ```
//!
//! in closed form for linear scores or by bracketing root search otherwise.
//! The variance is the sandwich `J^-1 Gamma J^-1'` with `Gamma` built from
//! node-level score aggregates, and confidence intervals scale by the node
//! count rather than the dyad count.
//!
//! [`conventional_estimate`] is the i.i.d. baseline: it splits dyads instead of
//! nodes and uses an unclustered variance. Under dyadic dependence it is
//! biased and under-covers; it exists as a comparison point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{DyadError, Result};
use crate::folds::{DyadFolds, FoldPartition};
use crate::sample::{DyadIndex, DyadicSample};
use crate::scores::{NuisanceConfig, NuisanceDiagnostics, ScoreKind, ScoreModel};

/// Jacobians with `|det|` below this are treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;
const GRID_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossFitConfig {
    pub nuisance: NuisanceConfig,
    /// Search interval for nonlinear scores.
    pub theta_bounds: (f64, f64),
    /// Absolute tolerance on the stacked score.
    pub epsilon: f64,
}

impl Default for CrossFitConfig {
    fn default() -> Self {
        Self { nuisance: NuisanceConfig::default(), theta_bounds: (-20.0, 20.0), epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Node-level folds, dyadic-robust variance.
    Dyadic,
    /// Dyad-level folds, i.i.d. variance.
    Conventional,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dyadic => "Dyadic ML",
            Method::Conventional => "Conventional ML",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    /// Nodes in the fold (dyads for conventional folds).
    pub size: usize,
    pub n_train_dyads: usize,
    pub n_eval_dyads: usize,
    pub nuisance: NuisanceDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DMLFit {
    pub method: Method,
    pub theta: DVector<f64>,
    pub j_hat: DMatrix<f64>,
    pub gamma_hat: DMatrix<f64>,
    /// `J^-1 Gamma J^-1'`, the variance of `sqrt(n) (theta - theta0)`.
    pub sigma2: DMatrix<f64>,
    pub n_nodes: usize,
    pub k: usize,
    /// Divisor of `sigma2` in standard errors: the node count for dyadic fits,
    /// the dyad count for the conventional baseline.
    pub effective_n: usize,
    /// Norm of the stacked score at `theta`.
    pub score_residual: f64,
    /// The nonlinear solve found a sign change (always true for linear scores).
    pub bracketed: bool,
    pub folds: Vec<FoldDiagnostics>,
}

impl DMLFit {
    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// `sqrt(sigma2_rr / effective_n)`.
    pub fn std_error(&self, r: usize) -> f64 {
        (self.sigma2[(r, r)].max(0.0) / self.effective_n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - a`.
    pub level: f64,
    pub estimate: f64,
    pub std_error: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `Phi^-1(p)` for the standard normal.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// `r'theta +- Phi^-1(1 - a/2) sqrt(r' sigma2 r / n)`.
pub fn confidence_interval(fit: &DMLFit, r: &[f64], a: f64) -> Result<ConfidenceInterval> {
    if !(a > 0.0 && a < 1.0) {
        return Err(DyadError::InvalidArgument(format!("a must lie in (0, 1), got {a}")));
    }
    if r.len() != fit.dim() {
        return Err(DyadError::Shape(format!("contrast of length {} for theta of length {}", r.len(), fit.dim())));
    }
    let r = DVector::from_column_slice(r);
    let estimate = r.dot(&fit.theta);
    let var = (r.transpose() * &fit.sigma2 * &r)[(0, 0)];
    let scale = fit.sigma2.amax().max(1.0);
    assert!(var >= -1e-12 * scale, "contrast variance {var} is negative; sigma2 not PSD");
    let std_error = (var.max(0.0) / fit.effective_n as f64).sqrt();
    let half = normal_quantile(1.0 - a / 2.0) * std_error;
    Ok(ConfidenceInterval { lower: estimate - half, upper: estimate + half, level: 1.0 - a, estimate, std_error })
}

fn check_invertible(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = j.determinant();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(DyadError::SingularJacobian { det });
    }
    j.clone().try_inverse().ok_or(DyadError::SingularJacobian { det })
}

/// `theta = -J^-1 (1/K) sum_k b_k` with `J = (1/K) sum_k A_k`.
pub fn solve_theta_linear(psi_a_means: &[DMatrix<f64>], psi_b_means: &[DVector<f64>]) -> Result<DVector<f64>> {
    if psi_a_means.is_empty() || psi_a_means.len() != psi_b_means.len() {
        return Err(DyadError::Shape("need one psi_a and psi_b mean per fold".into()));
    }
    let k = psi_a_means.len() as f64;
    let j = psi_a_means.iter().skip(1).fold(psi_a_means[0].clone(), |acc, a| acc + a) / k;
    let b = psi_b_means.iter().skip(1).fold(psi_b_means[0].clone(), |acc, v| acc + v) / k;
    let j_inv = check_invertible(&j)?;
    Ok(-(j_inv * b))
}

/// Outcome of a scalar estimating-equation solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearSolution {
    pub theta: f64,
    /// `|score(theta)|`
    pub residual: f64,
    /// False when no sign change was found and `theta` only minimizes `|score|`.
    pub bracketed: bool,
}

/// Approximate root of a scalar score on `bounds`.
///
/// Scans a 201-point grid for a sign change and bisects the bracket until
/// `|score| <= epsilon` or its width is at most 1e-12. Without a sign change
/// the minimizer of `|score|` (grid, then golden section) is returned as an
/// epsilon-solution with `bracketed = false`.
pub fn solve_theta_nonlinear<F: Fn(f64) -> f64>(score: F, bounds: (f64, f64), epsilon: f64) -> NonlinearSolution {
    let (lo, hi) = bounds;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| if i == GRID_POINTS - 1 { hi } else { lo + step * i as f64 }).collect();
    let values: Vec<f64> = grid.iter().map(|t| score(*t)).collect();

    // Among brackets prefer the one whose endpoints sit closest to zero.
    let mut best_bracket: Option<(usize, f64)> = None;
    for i in 0..GRID_POINTS - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            return NonlinearSolution { theta: grid[i], residual: 0.0, bracketed: true };
        }
        if a.is_finite() && b.is_finite() && a.signum() != b.signum() {
            let closeness = a.abs().min(b.abs());
            if best_bracket.is_none_or(|(_, c)| closeness < c) {
                best_bracket = Some((i, closeness));
            }
        }
    }
    if values[GRID_POINTS - 1] == 0.0 {
        return NonlinearSolution { theta: hi, residual: 0.0, bracketed: true };
    }

    if let Some((i, _)) = best_bracket {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, mut fb) = (values[i], values[i + 1]);
        loop {
            let mid = 0.5 * (a + b);
            let fm = score(mid);
            if fm.abs() <= epsilon || (b - a) <= 1e-12 || mid == a || mid == b {
                let mut best = (mid, fm.abs());
                for (t, f) in [(a, fa.abs()), (b, fb.abs())] {
                    if f < best.1 {
                        best = (t, f);
                    }
                }
                return NonlinearSolution { theta: best.0, residual: best.1, bracketed: true };
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
                fb = fm;
            }
        }
    }

    let abs = |t: f64| score(t).abs();
    let imin = (0..GRID_POINTS)
        .filter(|i| values[*i].is_finite())
        .min_by(|x, y| values[*x].abs().total_cmp(&values[*y].abs()))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[imin.saturating_sub(1)], grid[(imin + 1).min(GRID_POINTS - 1)]);
    let invphi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let (mut fc, mut fd) = (abs(c), abs(d));
    while (b - a) > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = abs(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = abs(d);
        }
        if c >= d {
            break;
        }
    }
    let golden = 0.5 * (a + b);
    let golden_res = abs(golden);
    let grid_res = values[imin].abs();
    let (theta, residual) = if golden_res <= grid_res { (golden, golden_res) } else { (grid[imin], grid_res) };
    NonlinearSolution { theta, residual, bracketed: false }
}

/// Dense per-dyad score storage: `values[(i * n + j) * d + r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreArray {
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl ScoreArray {
    pub fn new(n_nodes: usize, dim: usize) -> Self {
        Self { n: n_nodes, dim, values: vec![0.0; n_nodes * n_nodes * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn get(&self, dyad: DyadIndex) -> &[f64] {
        let off = (dyad.src() * self.n + dyad.dst()) * self.dim;
        &self.values[off..off + self.dim]
    }

    pub fn set(&mut self, dyad: DyadIndex, score: &[f64]) {
        let off = (dyad.src() * self.n + dyad.dst()) * self.dim;
        self.values[off..off + self.dim].copy_from_slice(score);
    }
}

/// Dyadic-robust meat matrix.
///
/// Per fold of size `m`, with `S_l = sum_{j != l} psi(W_lj) + sum_{i != l} psi(W_il)`
/// over fold members, the contribution is `sum_l S_l S_l' / (m^2 (m - 1))`; the
/// result averages the folds. This equals the four double sums over index
/// pairs sharing a node, same-index terms included, so it is PSD.
pub fn estimate_gamma(scores: &ScoreArray, partition: &FoldPartition) -> Result<DMatrix<f64>> {
    let dim = scores.dim();
    let mut total = DMatrix::zeros(dim, dim);
    let mut s = DVector::zeros(dim);
    for k in 0..partition.k() {
        let members = partition.members(k);
        let m = members.len();
        if m < 2 {
            return Err(DyadError::FoldTooSmall { n_nodes: partition.n_nodes(), k: partition.k() });
        }
        let mut fold = DMatrix::zeros(dim, dim);
        for &l in members {
            s.fill(0.0);
            for &j in members.iter().filter(|&&j| j != l) {
                let row = scores.get(DyadIndex::new_unchecked(l, j));
                let col = scores.get(DyadIndex::new_unchecked(j, l));
                for r in 0..dim {
                    s[r] += row[r] + col[r];
                }
            }
            fold.ger(1.0, &s, &s, 1.0);
        }
        let mf = m as f64;
        total += fold / (mf * mf * (mf - 1.0));
    }
    Ok(total / partition.k() as f64)
}

/// `J^-1 Gamma J^-1'`, symmetrized.
pub fn sandwich_variance(j_hat: &DMatrix<f64>, gamma_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let j_inv = check_invertible(j_hat)?;
    let v = &j_inv * gamma_hat * j_inv.transpose();
    Ok((&v + v.transpose()) * 0.5)
}

/// Nuisance fit and prepared evaluation dyads for one fold.
struct FoldWork<P> {
    eval: Vec<DyadIndex>,
    prepared: Vec<P>,
    diagnostics: FoldDiagnostics,
}

fn fit_folds<M: ScoreModel>(
    sample: &DyadicSample,
    model: &M,
    folds: Vec<(usize, Vec<DyadIndex>, Vec<DyadIndex>)>,
    cfg: &CrossFitConfig,
) -> Result<Vec<FoldWork<M::Prepared>>> {
    folds
        .into_par_iter()
        .map(|(size, train, eval)| {
            let nuisance = model.fit_nuisance(sample, &train, &cfg.nuisance)?;
            let prepared = eval.iter().map(|d| model.prepare(sample.view(*d), &nuisance)).collect();
            Ok(FoldWork {
                diagnostics: FoldDiagnostics {
                    size,
                    n_train_dyads: train.len(),
                    n_eval_dyads: eval.len(),
                    nuisance: model.diagnostics(&nuisance),
                },
                eval,
                prepared,
            })
        })
        .collect()
}

/// `(1/K) sum_k mean_{fold k} f`.
fn stacked_mean<P, F>(work: &[FoldWork<P>], dim: usize, f: F) -> DVector<f64>
where
    F: Fn(&P, &mut [f64]),
{
    let mut total = DVector::zeros(dim);
    let mut buf = vec![0.0; dim];
    for fold in work {
        let mut acc = DVector::zeros(dim);
        for p in &fold.prepared {
            f(p, &mut buf);
            for r in 0..dim {
                acc[r] += buf[r];
            }
        }
        total += acc / fold.prepared.len() as f64;
    }
    total / work.len() as f64
}

struct Solved {
    theta: DVector<f64>,
    j_hat: DMatrix<f64>,
    residual: f64,
    bracketed: bool,
}

fn solve_stacked<M: ScoreModel>(model: &M, work: &[FoldWork<M::Prepared>], cfg: &CrossFitConfig) -> Result<Solved> {
    let dim = model.dim();
    let (theta, bracketed) = match model.kind() {
        ScoreKind::Linear => {
            let mut a_means = Vec::with_capacity(work.len());
            let mut b_means = Vec::with_capacity(work.len());
            let (mut a, mut b) = (vec![0.0; dim * dim], vec![0.0; dim]);
            for fold in work {
                let mut sa = DMatrix::zeros(dim, dim);
                let mut sb = DVector::zeros(dim);
                for p in &fold.prepared {
                    let ok = model.linear_parts(p, &mut a, &mut b);
                    assert!(ok, "linear score without linear parts");
                    sa += DMatrix::from_row_slice(dim, dim, &a);
                    sb += DVector::from_column_slice(&b);
                }
                let n = fold.prepared.len() as f64;
                a_means.push(sa / n);
                b_means.push(sb / n);
            }
            (solve_theta_linear(&a_means, &b_means)?, true)
        }
        ScoreKind::Nonlinear => {
            if dim != 1 {
                return Err(DyadError::InvalidArgument("nonlinear scores support a scalar theta only".into()));
            }
            let score = |t: f64| stacked_mean(work, 1, |p, out| model.psi(p, &[t], out))[0];
            let sol = solve_theta_nonlinear(score, cfg.theta_bounds, cfg.epsilon);
            if !sol.bracketed && sol.residual > cfg.epsilon {
                return Err(DyadError::RootNotFound { theta: sol.theta, residual: sol.residual });
            }
            (DVector::from_element(1, sol.theta), sol.bracketed)
        }
    };
    let t = theta.as_slice().to_vec();
    let residual = stacked_mean(work, dim, |p, out| model.psi(p, &t, out)).norm();
    let j_flat = stacked_mean(work, dim * dim, |p, out| model.jacobian(p, &t, out));
    let j_hat = DMatrix::from_row_slice(dim, dim, j_flat.as_slice());
    Ok(Solved { theta, j_hat, residual, bracketed })
}

fn fill_scores<M: ScoreModel>(model: &M, work: &[FoldWork<M::Prepared>], theta: &[f64], n_nodes: usize) -> ScoreArray {
    let mut scores = ScoreArray::new(n_nodes, model.dim());
    let mut buf = vec![0.0; model.dim()];
    for fold in work {
        for (dyad, p) in fold.eval.iter().zip(&fold.prepared) {
            model.psi(p, theta, &mut buf);
            scores.set(*dyad, &buf);
        }
    }
    scores
}

/// Dyadic cross-fitting estimate with a freshly drawn node partition.
pub fn cross_fit_estimate<M: ScoreModel, R: Rng + ?Sized>(
    sample: &DyadicSample,
    model: &M,
    k: usize,
    rng: &mut R,
    cfg: &CrossFitConfig,
) -> Result<DMLFit> {
    let partition = FoldPartition::random(sample.n_nodes(), k, rng)?;
    cross_fit_with_partition(sample, model, &partition, cfg)
}

/// Dyadic cross-fitting estimate on a given node partition.
pub fn cross_fit_with_partition<M: ScoreModel>(
    sample: &DyadicSample,
    model: &M,
    partition: &FoldPartition,
    cfg: &CrossFitConfig,
) -> Result<DMLFit> {
    if partition.n_nodes() != sample.n_nodes() {
        return Err(DyadError::Shape("partition and sample disagree on the node count".into()));
    }
    let folds = (0..partition.k())
        .map(|k| Ok((partition.members(k).len(), partition.train_dyads(k)?, partition.eval_dyads(k)?)))
        .collect::<Result<Vec<_>>>()?;
    let work = fit_folds(sample, model, folds, cfg)?;
    let solved = solve_stacked(model, &work, cfg)?;
    let scores = fill_scores(model, &work, solved.theta.as_slice(), sample.n_nodes());
    let gamma_hat = estimate_gamma(&scores, partition)?;
    let sigma2 = sandwich_variance(&solved.j_hat, &gamma_hat)?;
    Ok(DMLFit {
        method: Method::Dyadic,
        theta: solved.theta,
        j_hat: solved.j_hat,
        gamma_hat,
        sigma2,
        n_nodes: sample.n_nodes(),
        k: partition.k(),
        effective_n: sample.n_nodes(),
        score_residual: solved.residual,
        bracketed: solved.bracketed,
        folds: work.into_iter().map(|w| w.diagnostics).collect(),
    })
}

/// `(1/K) sum_k E_{I_k}[d psi / d theta]` at `theta` for fitted per-fold nuisances.
pub fn estimate_jacobian<M: ScoreModel>(
    sample: &DyadicSample,
    partition: &FoldPartition,
    model: &M,
    theta: &[f64],
    nuisances: &[M::Nuisance],
) -> Result<DMatrix<f64>> {
    if nuisances.len() != partition.k() {
        return Err(DyadError::Shape(format!("{} nuisances for {} folds", nuisances.len(), partition.k())));
    }
    let dim = model.dim();
    let mut total = DMatrix::zeros(dim, dim);
    let mut buf = vec![0.0; dim * dim];
    for (k, eta) in nuisances.iter().enumerate() {
        let eval = partition.eval_dyads(k)?;
        let mut acc = DMatrix::zeros(dim, dim);
        for d in &eval {
            model.jacobian(&model.prepare(sample.view(*d), eta), theta, &mut buf);
            acc += DMatrix::from_row_slice(dim, dim, &buf);
        }
        total += acc / eval.len() as f64;
    }
    Ok(total / partition.k() as f64)
}

/// i.i.d.-style cross-fitting baseline: dyads (not nodes) are split into `k`
/// folds and the variance `J^-1 E_N[psi psi'] J^-1'` is scaled by the dyad count.
pub fn conventional_estimate<M: ScoreModel, R: Rng + ?Sized>(
    sample: &DyadicSample,
    model: &M,
    k: usize,
    rng: &mut R,
    cfg: &CrossFitConfig,
) -> Result<DMLFit> {
    let folds = DyadFolds::random(sample.n_nodes(), k, rng)?;
    let plan = (0..k).map(|f| (folds.eval_dyads(f).len(), folds.train_dyads(f), folds.eval_dyads(f).to_vec())).collect();
    let work = fit_folds(sample, model, plan, cfg)?;
    let solved = solve_stacked(model, &work, cfg)?;
    let dim = model.dim();
    let t = solved.theta.as_slice();
    let mut meat = DMatrix::zeros(dim, dim);
    let mut buf = vec![0.0; dim];
    for fold in &work {
        for p in &fold.prepared {
            model.psi(p, t, &mut buf);
            let v = DVector::from_column_slice(&buf);
            meat.ger(1.0, &v, &v, 1.0);
        }
    }
    meat /= sample.n_dyads() as f64;
    let sigma2 = sandwich_variance(&solved.j_hat, &meat)?;
    Ok(DMLFit {
        method: Method::Conventional,
        theta: solved.theta,
        j_hat: solved.j_hat,
        gamma_hat: meat,
        sigma2,
        n_nodes: sample.n_nodes(),
        k,
        effective_n: sample.n_dyads(),
        score_residual: solved.residual,
        bracketed: solved.bracketed,
        folds: work.into_iter().map(|w| w.diagnostics).collect(),
    })
}

/// Median-aggregated result of repeated cross-fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledFit {
    /// Median point estimate with the median-adjusted variance.
    pub aggregate: DMLFit,
    pub repetitions: Vec<DMLFit>,
    pub n_failed: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) }
}

fn elementwise_median(mats: &[DMatrix<f64>]) -> DMatrix<f64> {
    let (r, c) = mats[0].shape();
    DMatrix::from_fn(r, c, |i, j| median(&mut mats.iter().map(|m| m[(i, j)]).collect::<Vec<_>>()))
}

/// Repeat [`cross_fit_estimate`] `s` times with independent partitions and
/// aggregate by medians.
///
/// The estimate is the componentwise median of the repetitions; the variance
/// is the elementwise median of `sigma2_s + (theta_s - theta_med)(theta_s - theta_med)'`.
/// Failed repetitions are dropped and counted.
pub fn resampled_cross_fit<M: ScoreModel, R: Rng + ?Sized>(
    sample: &DyadicSample,
    model: &M,
    k: usize,
    s: usize,
    rng: &mut R,
    cfg: &CrossFitConfig,
) -> Result<ResampledFit> {
    if s == 0 {
        return Err(DyadError::InvalidArgument("need at least one repetition".into()));
    }
    let seeds: Vec<u64> = (0..s).map(|_| rng.next_u64()).collect();
    let results: Vec<Result<DMLFit>> = seeds
        .into_par_iter()
        .map(|seed| {
            let mut rep_rng = ChaCha8Rng::seed_from_u64(seed);
            cross_fit_estimate(sample, model, k, &mut rep_rng, cfg)
        })
        .collect();
    let mut last_err = None;
    let mut repetitions = Vec::with_capacity(s);
    for r in results {
        match r {
            Ok(fit) => repetitions.push(fit),
            Err(e) => last_err = Some(e),
        }
    }
    let n_failed = s - repetitions.len();
    if repetitions.is_empty() {
        return Err(DyadError::AllFailed { attempted: s, last: last_err.map(|e| e.to_string()).unwrap_or_default() });
    }
    if repetitions.len() == 1 {
        return Ok(ResampledFit { aggregate: repetitions[0].clone(), repetitions, n_failed });
    }
    let dim = repetitions[0].dim();
    let theta = DVector::from_fn(dim, |r, _| median(&mut repetitions.iter().map(|f| f.theta[r]).collect::<Vec<_>>()));
    let adjusted: Vec<DMatrix<f64>> = repetitions
        .iter()
        .map(|f| {
            let dev = &f.theta - &theta;
            &f.sigma2 + &dev * dev.transpose()
        })
        .collect();
    let js: Vec<DMatrix<f64>> = repetitions.iter().map(|f| f.j_hat.clone()).collect();
    let gs: Vec<DMatrix<f64>> = repetitions.iter().map(|f| f.gamma_hat.clone()).collect();
    let first = &repetitions[0];
    let aggregate = DMLFit {
        method: first.method,
        theta,
        j_hat: elementwise_median(&js),
        gamma_hat: elementwise_median(&gs),
        sigma2: elementwise_median(&adjusted),
        n_nodes: first.n_nodes,
        k: first.k,
        effective_n: first.effective_n,
        score_residual: median(&mut repetitions.iter().map(|f| f.score_residual).collect::<Vec<_>>()),
        bracketed: repetitions.iter().all(|f| f.bracketed),
        folds: first.folds.clone(),
    };
    Ok(ResampledFit { aggregate, repetitions, n_failed })
}
