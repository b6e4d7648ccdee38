//! Penalized nuisance learners.
//!
//! Two l1-penalized problems, both solved by cyclic coordinate descent and
//! certified through their KKT conditions:
//!
//! * lasso logistic regression,
//!   `mean[log(1 + exp(u)) - y u] + (lambda / n_pen) * sum_j f_j |b_j|`, solved by
//!   proximal Newton: each sweep rebuilds the IRLS quadratic model at the
//!   current coefficients, minimizes it by coordinate descent, and backtracks
//!   along the resulting direction until the true objective does not increase;
//! * weighted lasso least squares,
//!   `(1/2) mean[w (d - x'g)^2] + (lambda / n_pen) * sum_j f_j |g_j|`, whose
//!   coordinate minimizers are exact soft-threshold updates.
//!
//! `n_pen` is the penalty normalizer (the node count of the training set in
//! cross-fitting) and `f_j >= 0` are optional per-column penalty factors; a
//! zero factor leaves that column unpenalized.
//!
//! Post-selection refits ([`post_fit_logit`], [`post_fit_ols`]) re-estimate the
//! selected columns without penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DyadError, Result};

/// Lower clip for logistic variance weights.
pub const WEIGHT_FLOOR: f64 = 1e-10;
/// Diagonal jitter added to (mean-scaled) Gram matrices that are numerically singular.
pub const RIDGE_JITTER: f64 = 1e-8;
/// Default multiplier `c` in [`default_penalty`].
///
/// With the penalty divided by the node count while the loss averages over
/// dyads, `c = 1.1` zeroes out every coefficient in designs of moderate size.
/// `0.1` keeps the nuisance fits informative in the logistic link formation
/// design at `N` between 50 and 100.
pub const DEFAULT_PENALTY_MULTIPLIER: f64 = 0.1;

/// `|linear index|` beyond which the logistic likelihood is saturated in f64;
/// reaching it means the data are (quasi-)separated and coefficients diverge.
const INDEX_SATURATION: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Convergence requires the largest coefficient change in a sweep below this.
    pub coef_tol: f64,
    /// ...and the KKT residual below this.
    pub kkt_tol: f64,
    /// Fit an unpenalized intercept (logit only).
    pub intercept: bool,
    /// Penalize each column in proportion to its root mean square, which is
    /// the same as fitting on unit-scale columns and mapping back.
    pub standardize: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_sweeps: 10_000, coef_tol: 1e-8, kkt_tol: 1e-6, intercept: false, standardize: false }
    }
}

/// Penalty `lambda / n_pen * sum_j factor_j |coef_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub lambda: f64,
    pub n_pen: f64,
    pub factors: Option<Vec<f64>>,
}

impl Penalty {
    pub fn new(lambda: f64, n_pen: f64) -> Self {
        Self { lambda, n_pen, factors: None }
    }

    pub fn with_factors(mut self, factors: Vec<f64>) -> Self {
        self.factors = Some(factors);
        self
    }

    fn levels(&self, q: usize) -> Result<Vec<f64>> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(DyadError::InvalidArgument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.n_pen > 0.0) {
            return Err(DyadError::InvalidArgument(format!("n_pen must be > 0, got {}", self.n_pen)));
        }
        let base = self.lambda / self.n_pen;
        match &self.factors {
            None => Ok(vec![base; q]),
            Some(f) if f.len() == q && f.iter().all(|v| *v >= 0.0 && v.is_finite()) => {
                Ok(f.iter().map(|v| v * base).collect())
            }
            Some(f) => Err(DyadError::InvalidArgument(format!("{} penalty factors for {q} columns", f.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenalizedFit {
    pub coefficients: Vec<f64>,
    /// Unpenalized intercept, zero unless requested.
    pub intercept: f64,
    pub support: Vec<usize>,
    pub lambda: f64,
    pub n_pen: f64,
    /// Effective per-coordinate penalty `lambda / n_pen * factor_j`.
    pub penalty_levels: Vec<f64>,
    pub has_intercept: bool,
    pub n_iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Penalized objective after every sweep.
    pub objective_trace: Vec<f64>,
}

impl PenalizedFit {
    fn finish(
        coefficients: Vec<f64>,
        intercept: f64,
        penalty: &Penalty,
        penalty_levels: Vec<f64>,
        has_intercept: bool,
        n_iterations: usize,
        converged: bool,
        objective_trace: Vec<f64>,
    ) -> Self {
        let support = support_of(&coefficients);
        let objective = objective_trace.last().copied().unwrap_or(f64::NAN);
        Self {
            coefficients,
            intercept,
            support,
            lambda: penalty.lambda,
            n_pen: penalty.n_pen,
            penalty_levels,
            has_intercept,
            n_iterations,
            converged,
            objective,
            objective_trace,
        }
    }
}

fn support_of(coef: &[f64]) -> Vec<usize> {
    coef.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect()
}

/// `lambda = c * sqrt(n_pen * ln(q * n_pen))`.
pub fn default_penalty(n_pen: f64, q: usize, c: f64) -> f64 {
    c * (n_pen * (q as f64 * n_pen).ln()).sqrt()
}

#[inline]
pub fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `Lambda(u) * (1 - Lambda(u))` without cancellation.
#[inline]
pub fn logistic_variance(u: f64) -> f64 {
    let e = (-u.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// `log(1 + exp(u)) - y u`.
#[inline]
fn log_loss(u: f64, y: f64) -> f64 {
    let softplus = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
    softplus - y * u
}

/// `y - Lambda(u)` for binary y, computed on the accurate tail.
#[inline]
fn logit_residual(u: f64, y: f64) -> f64 {
    if y == 1.0 { logistic(-u) } else { y - logistic(u) }
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn column(design: &DMatrix<f64>, j: usize) -> &[f64] {
    let m = design.nrows();
    &design.as_slice()[j * m..(j + 1) * m]
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) { Ok(()) } else { Err(DyadError::NonFinite(what)) }
}

fn column_scales(design: &DMatrix<f64>) -> Vec<f64> {
    let m = design.nrows() as f64;
    (0..design.ncols())
        .map(|j| {
            let s = (column(design, j).iter().map(|v| v * v).sum::<f64>() / m).sqrt();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect()
}

fn resolve_levels(design: &DMatrix<f64>, penalty: &Penalty, opts: &SolverOptions) -> Result<Vec<f64>> {
    let mut levels = penalty.levels(design.ncols())?;
    if opts.standardize {
        for (l, s) in levels.iter_mut().zip(column_scales(design)) {
            *l *= s;
        }
    }
    Ok(levels)
}

fn l1(levels: &[f64], coef: &[f64]) -> f64 {
    levels.iter().zip(coef).map(|(l, b)| l * b.abs()).sum()
}

/// Coordinate descent on `(1/2) mean[w (z - intercept - X b)^2] + sum_j l_j |b_j|`
/// with `res = z - intercept - X b` maintained in place.
///
/// Cycles over the active set until stable, then confirms with a full sweep.
/// Returns the number of coordinate sweeps performed.
#[allow(clippy::too_many_arguments)]
fn cd_weighted_quadratic(
    design: &DMatrix<f64>,
    w: &[f64],
    curvature: &[f64],
    levels: &[f64],
    coef: &mut [f64],
    intercept: Option<&mut f64>,
    res: &mut [f64],
    tol: f64,
    max_sweeps: usize,
) -> usize {
    let m = design.nrows() as f64;
    let q = design.ncols();
    let w_mean: f64 = w.iter().sum::<f64>() / m;
    let mut intercept = intercept;
    let mut sweeps = 0;
    let mut full = true;
    let mut active: Vec<usize> = (0..q).collect();
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        if let Some(b0) = intercept.as_deref_mut() {
            if w_mean > 0.0 {
                let u: f64 = w.iter().zip(res.iter()).map(|(wi, ri)| wi * ri).sum::<f64>() / m;
                let delta = u / w_mean;
                if delta != 0.0 {
                    *b0 += delta;
                    res.iter_mut().for_each(|r| *r -= delta);
                    max_change = max_change.max(delta.abs() * w_mean.sqrt());
                }
            }
        }
        let coords: &[usize] = if full { &(0..q).collect::<Vec<_>>() } else { &active };
        for &j in coords {
            let a = curvature[j];
            if a <= 0.0 {
                coef[j] = 0.0;
                continue;
            }
            let xj = column(design, j);
            let dot: f64 = xj.iter().zip(w).zip(res.iter()).map(|((x, wi), r)| x * wi * r).sum::<f64>() / m;
            let old = coef[j];
            let new = soft_threshold(dot + a * old, levels[j]) / a;
            if new != old {
                let delta = new - old;
                for (r, x) in res.iter_mut().zip(xj) {
                    *r -= delta * x;
                }
                coef[j] = new;
                max_change = max_change.max(delta.abs() * a.sqrt());
            }
        }
        if full {
            active = (0..q).filter(|&j| coef[j] != 0.0).collect();
            if max_change < tol {
                break;
            }
            full = false;
        } else if max_change < tol {
            full = true;
        }
    }
    sweeps
}

fn logit_objective(design: &DMatrix<f64>, y: &[f64], eta: &[f64], levels: &[f64], coef: &[f64]) -> f64 {
    let m = design.nrows() as f64;
    eta.iter().zip(y).map(|(u, yi)| log_loss(*u, *yi)).sum::<f64>() / m + l1(levels, coef)
}

fn linear_index(design: &DMatrix<f64>, coef: &[f64], intercept: f64) -> Vec<f64> {
    let mut eta = vec![intercept; design.nrows()];
    for (j, b) in coef.iter().enumerate() {
        if *b != 0.0 {
            for (e, x) in eta.iter_mut().zip(column(design, j)) {
                *e += b * x;
            }
        }
    }
    eta
}

fn check_binary(y: &[f64]) -> Result<()> {
    if let Some(row) = y.iter().position(|v| *v != 0.0 && *v != 1.0) {
        return Err(DyadError::NonBinaryOutcome { row, value: y[row] });
    }
    Ok(())
}

/// l1-penalized logistic regression of binary `y` on all columns of `design`.
pub fn fit_lasso_logit(design: &DMatrix<f64>, y: &[f64], penalty: &Penalty, opts: &SolverOptions) -> Result<PenalizedFit> {
    let (m, q) = design.shape();
    if m == 0 || y.len() != m {
        return Err(DyadError::Shape(format!("design has {m} rows, y has {}", y.len())));
    }
    check_binary(y)?;
    check_finite(design.as_slice(), "logit design")?;
    let levels = resolve_levels(design, penalty, opts)?;
    let mf = m as f64;

    let mut coef = vec![0.0; q];
    let mut b0 = 0.0;
    let mut eta = vec![0.0; m];
    let mut objective = logit_objective(design, y, &eta, &levels, &coef);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut sweeps = 0;
    let mut w = vec![0.0; m];
    let mut res = vec![0.0; m];
    let mut curvature = vec![0.0; q];

    while sweeps < opts.max_sweeps {
        sweeps += 1;
        // IRLS quadratic model at the current point.
        for i in 0..m {
            let wi = logistic_variance(eta[i]).max(f64::MIN_POSITIVE);
            w[i] = wi;
            res[i] = logit_residual(eta[i], y[i]) / wi;
        }
        for (j, a) in curvature.iter_mut().enumerate() {
            *a = column(design, j).iter().zip(&w).map(|(x, wi)| wi * x * x).sum::<f64>() / mf;
        }
        let mut new_coef = coef.clone();
        let mut new_b0 = b0;
        cd_weighted_quadratic(
            design,
            &w,
            &curvature,
            &levels,
            &mut new_coef,
            opts.intercept.then_some(&mut new_b0),
            &mut res,
            opts.coef_tol * 1e-2,
            1_000,
        );

        // Backtrack along the proximal Newton direction.
        let dir: Vec<f64> = new_coef.iter().zip(&coef).map(|(a, b)| a - b).collect();
        let dir0 = new_b0 - b0;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = coef.iter().zip(&dir).map(|(b, d)| if *d == 0.0 { *b } else { b + step * d }).collect();
            let cand0 = b0 + step * dir0;
            let cand_eta = linear_index(design, &cand, cand0);
            let obj = logit_objective(design, y, &cand_eta, &levels, &cand);
            if obj <= objective {
                accepted = Some((cand, cand0, cand_eta, obj));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand0, cand_eta, obj)) = accepted else {
            // no descent available at working precision
            trace.push(objective);
            converged = kkt_logit(design, y, &coef, b0, opts.intercept, &levels) <= opts.kkt_tol;
            break;
        };
        let change = cand.iter().zip(&coef).map(|(a, b)| (a - b).abs()).fold((cand0 - b0).abs(), f64::max);
        coef = cand;
        b0 = cand0;
        eta = cand_eta;
        objective = obj;
        trace.push(objective);

        if eta.iter().any(|u| !u.is_finite() || u.abs() > INDEX_SATURATION) {
            break;
        }
        if change < opts.coef_tol && kkt_logit(design, y, &coef, b0, opts.intercept, &levels) <= opts.kkt_tol {
            converged = true;
            break;
        }
    }
    Ok(PenalizedFit::finish(coef, b0, penalty, levels, opts.intercept, sweeps, converged, trace))
}

fn kkt_from_gradient(grad: &[f64], coef: &[f64], levels: &[f64]) -> f64 {
    grad.iter()
        .zip(coef)
        .zip(levels)
        .map(|((g, b), l)| if *b == 0.0 { (g.abs() - l).max(0.0) } else { (g + l * b.signum()).abs() })
        .fold(0.0, f64::max)
}

fn kkt_logit(design: &DMatrix<f64>, y: &[f64], coef: &[f64], b0: f64, intercept: bool, levels: &[f64]) -> f64 {
    let m = design.nrows() as f64;
    let eta = linear_index(design, coef, b0);
    let r: Vec<f64> = eta.iter().zip(y).map(|(u, yi)| -logit_residual(*u, *yi)).collect();
    let grad: Vec<f64> =
        (0..design.ncols()).map(|j| column(design, j).iter().zip(&r).map(|(x, ri)| x * ri).sum::<f64>() / m).collect();
    let mut kkt = kkt_from_gradient(&grad, coef, levels);
    if intercept {
        kkt = kkt.max((r.iter().sum::<f64>() / m).abs());
    }
    kkt
}

fn wls_objective(design: &DMatrix<f64>, d: &[f64], w: &[f64], coef: &[f64], levels: &[f64]) -> f64 {
    let m = design.nrows() as f64;
    let fitted = linear_index(design, coef, 0.0);
    let loss: f64 = d.iter().zip(&fitted).zip(w).map(|((di, f), wi)| wi * (di - f) * (di - f)).sum::<f64>() / m;
    0.5 * loss + l1(levels, coef)
}

/// l1-penalized weighted least squares of `d` on the columns of `x`.
pub fn fit_weighted_lasso_ols(
    x: &DMatrix<f64>,
    d: &[f64],
    weights: &[f64],
    penalty: &Penalty,
    opts: &SolverOptions,
) -> Result<PenalizedFit> {
    let (m, q) = x.shape();
    if m == 0 || d.len() != m || weights.len() != m {
        return Err(DyadError::Shape(format!("x has {m} rows, d {}, weights {}", d.len(), weights.len())));
    }
    check_finite(x.as_slice(), "weighted lasso design")?;
    check_finite(d, "weighted lasso response")?;
    check_finite(weights, "weights")?;
    if weights.iter().any(|w| *w <= 0.0) {
        return Err(DyadError::InvalidArgument("weights must be positive".into()));
    }
    let levels = resolve_levels(x, penalty, opts)?;
    let mf = m as f64;
    let curvature: Vec<f64> =
        (0..q).map(|j| column(x, j).iter().zip(weights).map(|(v, w)| w * v * v).sum::<f64>() / mf).collect();

    let mut coef = vec![0.0; q];
    let mut res = d.to_vec();
    let mut trace = vec![wls_objective(x, d, weights, &coef, &levels)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let before = coef.clone();
        // one exact cyclic pass over every coordinate
        cd_weighted_quadratic(x, weights, &curvature, &levels, &mut coef, None, &mut res, f64::INFINITY, 1);
        trace.push(wls_objective(x, d, weights, &coef, &levels));
        let change = coef.iter().zip(&before).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < opts.coef_tol {
            let fit = PenalizedFit::finish(coef.clone(), 0.0, penalty, levels.clone(), false, sweeps, false, vec![]);
            if kkt_check(&fit, Problem::WeightedLs { design: x, d, weights }) <= opts.kkt_tol {
                converged = true;
                break;
            }
        }
    }
    Ok(PenalizedFit::finish(coef, 0.0, penalty, levels, false, sweeps, converged, trace))
}

/// Data a fit is certified against.
#[derive(Debug, Clone, Copy)]
pub enum Problem<'a> {
    Logit { design: &'a DMatrix<f64>, y: &'a [f64] },
    WeightedLs { design: &'a DMatrix<f64>, d: &'a [f64], weights: &'a [f64] },
}

/// Largest KKT violation of `fit` for `problem`.
///
/// For a zero coefficient this is `max(|g_j| - l_j, 0)`, for an active one
/// `|g_j + l_j sign(b_j)|`, with `g` the gradient of the unpenalized mean loss
/// and `l_j` the effective penalty level.
pub fn kkt_check(fit: &PenalizedFit, problem: Problem<'_>) -> f64 {
    match problem {
        Problem::Logit { design, y } => {
            kkt_logit(design, y, &fit.coefficients, fit.intercept, fit.has_intercept, &fit.penalty_levels)
        }
        Problem::WeightedLs { design, d, weights } => {
            let m = design.nrows() as f64;
            let fitted = linear_index(design, &fit.coefficients, 0.0);
            let r: Vec<f64> = d.iter().zip(&fitted).zip(weights).map(|((di, f), w)| w * (di - f)).collect();
            let grad: Vec<f64> = (0..design.ncols())
                .map(|j| -column(design, j).iter().zip(&r).map(|(x, ri)| x * ri).sum::<f64>() / m)
                .collect();
            kkt_from_gradient(&grad, &fit.coefficients, &fit.penalty_levels)
        }
    }
}

/// Per-row `Lambda(u)(1 - Lambda(u))` at `u = design * coef`, clipped below at
/// [`WEIGHT_FLOOR`].
pub fn compute_weights(design: &DMatrix<f64>, coef: &[f64]) -> Vec<f64> {
    linear_index(design, coef, 0.0).into_iter().map(weight_at).collect()
}

/// Logistic variance weight at a single linear index.
pub fn weight_at(u: f64) -> f64 {
    logistic_variance(u).max(WEIGHT_FLOOR)
}

fn restrict(design: &DMatrix<f64>, support: &[usize]) -> DMatrix<f64> {
    let m = design.nrows();
    let mut out = DMatrix::zeros(m, support.len());
    for (k, &j) in support.iter().enumerate() {
        out.column_mut(k).copy_from_slice(column(design, j));
    }
    out
}

fn check_support(support: &[usize], q: usize, m: usize) -> Result<()> {
    if let Some(j) = support.iter().find(|&&j| j >= q) {
        return Err(DyadError::InvalidArgument(format!("support index {j} out of range for {q} columns")));
    }
    if support.len() >= m {
        return Err(DyadError::InvalidArgument(format!("support of size {} needs more than {m} rows", support.len())));
    }
    Ok(())
}

/// Solve `G b = rhs` for a symmetric PSD `G`, adding [`RIDGE_JITTER`] to the
/// diagonal when `G` is numerically singular.
fn solve_psd(gram: DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let max_diag = gram.diagonal().iter().copied().fold(0.0, f64::max);
    if let Some(chol) = gram.clone().cholesky() {
        let min_pivot = chol.l_dirty().diagonal().iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
        if min_pivot > 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
            let sol = chol.solve(rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return sol;
            }
        }
    }
    let n = gram.nrows();
    let mut jittered = gram;
    for i in 0..n {
        jittered[(i, i)] += RIDGE_JITTER;
    }
    match jittered.clone().cholesky() {
        Some(chol) => chol.solve(rhs),
        None => jittered.lu().solve(rhs).unwrap_or_else(|| DVector::zeros(n)),
    }
}

/// Result of an unpenalized refit on a selected support.
#[derive(Debug, Clone, PartialEq)]
pub struct PostFit {
    /// Full-length coefficients, exactly zero off the support.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// False when Newton diverged and the fallback coefficients were used.
    pub newton_converged: bool,
}

/// Unpenalized logistic MLE on the columns in `support` by Newton-Raphson
/// with step halving.
///
/// If Newton fails (non-finite or saturated index), the coefficients of
/// `fallback` on the support are returned instead.
pub fn post_fit_logit(
    design: &DMatrix<f64>,
    y: &[f64],
    support: &[usize],
    intercept: bool,
    fallback: Option<&PenalizedFit>,
) -> Result<PostFit> {
    let (m, q) = design.shape();
    check_binary(y)?;
    check_support(support, q, m)?;
    if support.is_empty() && !intercept {
        return Ok(PostFit { coefficients: vec![0.0; q], intercept: 0.0, newton_converged: true });
    }
    let mut sub = restrict(design, support);
    if intercept {
        sub = sub.insert_column(0, 1.0);
    }
    let s = sub.ncols();
    let mf = m as f64;
    let no_levels = vec![0.0; s];
    let mut b = vec![0.0; s];
    let mut eta = vec![0.0; m];
    let mut obj = logit_objective(&sub, y, &eta, &no_levels, &b);
    let mut ok = false;
    for _ in 0..200 {
        let r: Vec<f64> = eta.iter().zip(y).map(|(u, yi)| logit_residual(*u, *yi)).collect();
        let w: Vec<f64> = eta.iter().map(|u| logistic_variance(*u)).collect();
        let grad = DVector::from_iterator(s, (0..s).map(|j| column(&sub, j).iter().zip(&r).map(|(x, ri)| x * ri).sum::<f64>() / mf));
        if grad.amax() < 1e-12 {
            ok = true;
            break;
        }
        let mut hess = DMatrix::zeros(s, s);
        for a in 0..s {
            let xa = column(&sub, a);
            for c in a..s {
                let xc = column(&sub, c);
                let h = xa.iter().zip(xc).zip(&w).map(|((u, v), wi)| u * v * wi).sum::<f64>() / mf;
                hess[(a, c)] = h;
                hess[(c, a)] = h;
            }
        }
        let step = solve_psd(hess, &grad);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand: Vec<f64> = b.iter().zip(step.iter()).map(|(bi, si)| bi + t * si).collect();
            let cand_eta = linear_index(&sub, &cand, 0.0);
            let cand_obj = logit_objective(&sub, y, &cand_eta, &no_levels, &cand);
            if cand_obj.is_finite() && cand_obj <= obj {
                let change = step.amax() * t;
                b = cand;
                eta = cand_eta;
                obj = cand_obj;
                moved = true;
                if change < 1e-12 {
                    ok = true;
                }
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // stationary to working precision
            ok = true;
        }
        if eta.iter().any(|u| !u.is_finite() || u.abs() > INDEX_SATURATION) {
            ok = false;
            break;
        }
        if ok {
            break;
        }
    }
    let mut coefficients = vec![0.0; q];
    if !ok {
        let b0 = fallback.map_or(0.0, |f| f.intercept);
        if let Some(f) = fallback {
            for &j in support {
                coefficients[j] = f.coefficients[j];
            }
        }
        return Ok(PostFit { coefficients, intercept: b0, newton_converged: false });
    }
    let (b0, rest) = if intercept { (b[0], &b[1..]) } else { (0.0, &b[..]) };
    for (k, &j) in support.iter().enumerate() {
        coefficients[j] = rest[k];
    }
    Ok(PostFit { coefficients, intercept: b0, newton_converged: true })
}

/// Weighted least squares of `d` on the columns in `support`; zeros elsewhere.
pub fn post_fit_ols(x: &DMatrix<f64>, d: &[f64], weights: &[f64], support: &[usize]) -> Result<Vec<f64>> {
    let (m, q) = x.shape();
    check_support(support, q, m)?;
    let mut out = vec![0.0; q];
    if support.is_empty() {
        return Ok(out);
    }
    let sub = restrict(x, support);
    let s = support.len();
    let mf = m as f64;
    let mut gram = DMatrix::zeros(s, s);
    for a in 0..s {
        let xa = column(&sub, a);
        for c in a..s {
            let g = xa.iter().zip(column(&sub, c)).zip(weights).map(|((u, v), w)| w * u * v).sum::<f64>() / mf;
            gram[(a, c)] = g;
            gram[(c, a)] = g;
        }
    }
    let rhs = DVector::from_iterator(s, (0..s).map(|a| column(&sub, a).iter().zip(d).zip(weights).map(|((u, di), w)| w * u * di).sum::<f64>() / mf));
    let sol = solve_psd(gram, &rhs);
    for (k, &j) in support.iter().enumerate() {
        out[j] = sol[k];
    }
    Ok(out)
}
