//! Independent oracles and checks shared by the integration tests and the
//! acceptance harness.

#![allow(dead_code)]

use dyadml::engine::{estimate_gamma, estimate_jacobian, normal_quantile, ScoreArray};
use dyadml::learners::{fit_lasso_logit, fit_weighted_lasso_ols, kkt_check, logistic, Penalty, Problem, SolverOptions};
use dyadml::sample::DyadicSample;
use dyadml::OutcomeKind;
use dyadml::scores::{logit_score, logit_score_dtheta, LogitNuisance};
use dyadml::{
    confidence_interval, cross_fit_estimate, cross_fit_with_partition, gen_dgp, run_monte_carlo, CrossFitConfig, DMLFit,
    DyadIndex, FoldPartition, LogitScore, Method, NuisanceConfig, ScoreModel, SimConfig,
};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn matrix_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.amax().max(1.0);
    (a - b).amax() / scale
}

// ---------------------------------------------------------------------------
// Oracles

/// Unpenalized logistic MLE by plain Newton with an LU solve.
pub fn newton_logit_mle(design: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (m, q) = design.shape();
    let mut beta = DVector::zeros(q);
    for _ in 0..100 {
        let eta = design * &beta;
        let mut grad = DVector::zeros(q);
        let mut hess = DMatrix::zeros(q, q);
        for i in 0..m {
            let p = 1.0 / (1.0 + (-eta[i]).exp());
            let row = design.row(i).transpose();
            grad += &row * (y[i] - p);
            hess += &row * row.transpose() * (p * (1.0 - p));
        }
        let step = hess.lu().solve(&grad).expect("nonsingular Hessian");
        beta += &step;
        if step.amax() < 1e-14 {
            break;
        }
    }
    beta.iter().copied().collect()
}

/// Weighted least squares from the normal equations `X'WX b = X'Wd`.
pub fn normal_equations(x: &DMatrix<f64>, d: &[f64], w: &[f64]) -> Vec<f64> {
    let (m, p) = x.shape();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwd = DVector::zeros(p);
    for i in 0..m {
        let row = x.row(i).transpose();
        xtwx += &row * row.transpose() * w[i];
        xtwd += &row * (w[i] * d[i]);
    }
    xtwx.lu().solve(&xtwd).expect("nonsingular").iter().copied().collect()
}

/// The four double sums over each fold, taken literally, with weight
/// `(|I|-1)/(|I|(|I|-1))^2`, averaged over folds.
pub fn gamma_quadruple_sums(psi: &dyn Fn(usize, usize) -> DVector<f64>, dim: usize, partition: &FoldPartition) -> DMatrix<f64> {
    let mut total = DMatrix::zeros(dim, dim);
    for k in 0..partition.k() {
        let fold = partition.members(k);
        let m = fold.len() as f64;
        let mut acc = DMatrix::zeros(dim, dim);
        for &i in fold {
            for &j in fold {
                for &jp in fold {
                    if j == i || jp == i {
                        continue;
                    }
                    acc += psi(i, j) * psi(i, jp).transpose();
                    acc += psi(i, j) * psi(jp, i).transpose();
                }
            }
        }
        for &j in fold {
            for &i in fold {
                for &ip in fold {
                    if i == j || ip == j {
                        continue;
                    }
                    acc += psi(i, j) * psi(ip, j).transpose();
                    acc += psi(i, j) * psi(j, ip).transpose();
                }
            }
        }
        total += acc * ((m - 1.0) / (m * (m - 1.0)).powi(2));
    }
    total / partition.k() as f64
}

// ---------------------------------------------------------------------------
// Fixtures

pub fn dgp_sample(seed: u64, n: usize, dim_x: usize) -> DyadicSample {
    gen_dgp(n, dim_x, 1.0, &mut rng(seed)).unwrap().sample
}

pub const THETA_PLM: f64 = 0.5;

/// `Y = THETA_PLM D + X'b + e` with `D` independent of `X`. The error always
/// carries node effects; with `node_effects` so do `D` and every column of `X`.
pub fn plm_sample(seed: u64, n: usize, b: &[f64], node_effects: bool) -> DyadicSample {
    let mut r = rng(seed);
    let p = b.len();
    let rows = n * (n - 1);
    let mut node = |cols: usize| DMatrix::<f64>::from_fn(n, cols, |_, _| StandardNormal.sample(&mut r));
    let (node_u, node_dx) = (node(1), node(1 + p));
    let mut dx = DMatrix::<f64>::from_fn(rows, 1 + p, |_, _| StandardNormal.sample(&mut r));
    if node_effects {
        for row in 0..rows {
            let (i, j) = dyad_at(n, row);
            for c in 0..=p {
                dx[(row, c)] = (node_dx[(i, c)] + node_dx[(j, c)] + dx[(row, c)]) / 3f64.sqrt();
            }
        }
    }
    let d: Vec<f64> = dx.column(0).iter().copied().collect();
    let x = dx.columns(1, p).into_owned();
    let y = (0..rows)
        .map(|row| {
            let (i, j) = dyad_at(n, row);
            let e: f64 = StandardNormal.sample(&mut r);
            THETA_PLM * d[row] + (0..p).map(|c| x[(row, c)] * b[c]).sum::<f64>() + (node_u[i] + node_u[j] + e) / 3f64.sqrt()
        })
        .collect();
    DyadicSample::from_parts(n, y, d, x, OutcomeKind::Continuous).unwrap()
}

pub fn dyad_at(n: usize, row: usize) -> (usize, usize) {
    let i = row / (n - 1);
    let r = row % (n - 1);
    (i, if r < i { r } else { r + 1 })
}

pub fn random_score_array<R: Rng>(rng: &mut R, n: usize, dim: usize) -> ScoreArray {
    let mut s = ScoreArray::new(n, dim);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                s.set(DyadIndex::new(i, j).unwrap(), &v);
            }
        }
    }
    s
}

pub fn logit_problem<R: Rng>(rng: &mut R, m: usize, q: usize) -> (DMatrix<f64>, Vec<f64>) {
    let design = normal_matrix(rng, m, q);
    let beta: Vec<f64> = (0..q).map(|j| if j % 2 == 0 { 0.8 } else { -0.5 }).collect();
    let y = (0..m)
        .map(|i| {
            let u: f64 = (0..q).map(|j| design[(i, j)] * beta[j]).sum();
            if rng.random::<f64>() < logistic(u) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    (design, y)
}

// ---------------------------------------------------------------------------
// Checks returning a worst-case discrepancy

/// Largest relative gap between the node-aggregate Gamma and the literal sums.
pub fn gamma_oracle_error(seed: u64, instances: usize) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(4..=16);
        let dim = rng.random_range(1..=2);
        let k = rng.random_range(2..=n / 2);
        let scores = random_score_array(&mut rng, n, dim);
        let partition = FoldPartition::random(n, k, &mut rng).unwrap();
        let fast = estimate_gamma(&scores, &partition).unwrap();
        let psi = |i: usize, j: usize| DVector::from_column_slice(scores.get(DyadIndex::new(i, j).unwrap()));
        let slow = gamma_quadruple_sums(&psi, dim, &partition);
        worst = worst.max(matrix_rel_diff(&fast, &slow));
    }
    worst
}

pub struct SolverReport {
    pub mle_error: f64,
    pub worst_kkt: f64,
    pub converged_fits: usize,
    pub wls_error: f64,
}

/// Lambda-zero logit vs the Newton oracle, KKT residuals of penalized fits,
/// lambda-zero weighted lasso vs the normal equations.
pub fn solver_certification(seed: u64, problems: usize) -> SolverReport {
    let mut rng = rng(seed);
    let opts = SolverOptions::default();
    let mut report = SolverReport { mle_error: 0.0, worst_kkt: 0.0, converged_fits: 0, wls_error: 0.0 };
    for _ in 0..problems {
        let m = rng.random_range(150..400);
        let q = rng.random_range(2..=5);
        let (design, y) = logit_problem(&mut rng, m, q);
        let fit = fit_lasso_logit(&design, &y, &Penalty::new(0.0, 1.0), &opts).unwrap();
        report.mle_error = report.mle_error.max(max_abs_diff(&fit.coefficients, &newton_logit_mle(&design, &y)));
        for lambda in [0.0, 0.5, 2.0, 5.0, 20.0] {
            let fit = fit_lasso_logit(&design, &y, &Penalty::new(lambda, 100.0), &opts).unwrap();
            if fit.converged {
                report.converged_fits += 1;
                report.worst_kkt = report.worst_kkt.max(kkt_check(&fit, Problem::Logit { design: &design, y: &y }));
            }
        }

        let x = normal_matrix(&mut rng, m, q);
        let d: Vec<f64> = (0..m).map(|i| x[(i, 0)] - 0.3 * x[(i, q - 1)] + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..0.25)).collect();
        let fit = fit_weighted_lasso_ols(&x, &d, &w, &Penalty::new(0.0, 1.0), &opts).unwrap();
        report.wls_error = report.wls_error.max(max_abs_diff(&fit.coefficients, &normal_equations(&x, &d, &w)));
        for lambda in [1.0, 4.0] {
            let fit = fit_weighted_lasso_ols(&x, &d, &w, &Penalty::new(lambda, 100.0), &opts).unwrap();
            if fit.converged {
                report.converged_fits += 1;
                report.worst_kkt =
                    report.worst_kkt.max(kkt_check(&fit, Problem::WeightedLs { design: &x, d: &d, weights: &w }));
            }
        }
    }
    report
}

fn stacked_logit_score(sample: &DyadicSample, partition: &FoldPartition, nuisances: &[LogitNuisance], theta: f64) -> f64 {
    let mut total = 0.0;
    for (k, eta) in nuisances.iter().enumerate() {
        let eval = partition.eval_dyads(k).unwrap();
        let sum: f64 = eval.iter().map(|d| logit_score(sample.view(*d), theta, eta)).sum();
        total += sum / eval.len() as f64;
    }
    total / nuisances.len() as f64
}

/// Largest relative gap between analytic derivatives and central differences,
/// per dyad and for the stacked score.
pub fn jacobian_fd_error(seed: u64, cases: usize) -> f64 {
    let mut rng = rng(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
    for case in 0..cases {
        let sample = dgp_sample(seed.wrapping_add(case as u64), 12, 3);
        let partition = FoldPartition::random(12, 3, &mut rng).unwrap();
        let nuisances: Vec<LogitNuisance> = (0..3)
            .map(|k| LogitScore.fit_nuisance(&sample, &partition.train_dyads(k).unwrap(), &NuisanceConfig::default()).unwrap())
            .collect();
        for _ in 0..5 {
            let theta: f64 = rng.random_range(-3.0..3.0);
            for d in sample.dyads().step_by(7) {
                let eta = &nuisances[partition.fold_of(d.src())];
                let w = sample.view(d);
                let fd = (logit_score(w, theta + h, eta) - logit_score(w, theta - h, eta)) / (2.0 * h);
                worst = worst.max(rel(logit_score_dtheta(w, theta, eta), fd));
            }
            let j = estimate_jacobian(&sample, &partition, &LogitScore, &[theta], &nuisances).unwrap()[(0, 0)];
            let fd = (stacked_logit_score(&sample, &partition, &nuisances, theta + h)
                - stacked_logit_score(&sample, &partition, &nuisances, theta - h))
                / (2.0 * h);
            worst = worst.max(rel(j, fd));
        }
    }
    worst
}

pub struct DgpReport {
    pub var_d: f64,
    pub corr_shared_sender: f64,
    pub ks_stat: f64,
    pub ks_critical_1pct: f64,
}

/// Moments of `D` pooled over `samples` independent draws at `n` nodes, and a
/// KS statistic of the transformed error against the standard logistic on
/// `draws` independent draws.
pub fn dgp_fidelity(seed: u64, n: usize, samples: usize, draws: usize) -> DgpReport {
    let (mut var_sum, mut cov_sum) = (0.0, 0.0);
    for s in 0..samples {
        let sample = dgp_sample(seed.wrapping_add(s as u64), n, 2);
        let d = sample.d();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var_d = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        // Pairs (i,j), (i,k) with j != k, summed per sender.
        let (mut cross, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            let c: Vec<f64> =
                (0..n).filter(|&j| j != i).map(|j| d[sample.row(DyadIndex::new(i, j).unwrap())] - mean).collect();
            let s: f64 = c.iter().sum();
            let s2: f64 = c.iter().map(|v| v * v).sum();
            cross += s * s - s2;
            pairs += (c.len() * (c.len() - 1)) as f64;
        }
        var_sum += var_d;
        cov_sum += cross / pairs;
    }
    let var_d = var_sum / samples as f64;
    let corr_shared_sender = cov_sum / var_sum;

    let mut rng = rng(seed ^ 0x5eed);
    let mut eps: Vec<f64> = (0..draws)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let c: f64 = StandardNormal.sample(&mut rng);
            dyadml::simulation::normal_to_logistic((a + b + c) / 3f64.sqrt())
        })
        .collect();
    eps.sort_by(f64::total_cmp);
    let m = eps.len() as f64;
    let ks_stat = eps
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let f = logistic(*e);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    DgpReport { var_d, corr_shared_sender, ks_stat, ks_critical_1pct: 1.6276 / m.sqrt() }
}

// ---------------------------------------------------------------------------
// Properties, each returning a description of the first violation

pub fn check_fold_separation(n: usize, k: usize, seed: u64) -> Result<(), String> {
    let p = FoldPartition::random(n, k, &mut rng(seed)).map_err(|e| e.to_string())?;
    let mut eval_total = 0;
    for f in 0..k {
        let eval = p.eval_dyads(f).unwrap();
        let train = p.train_dyads(f).unwrap();
        let mut in_eval = vec![false; n];
        for d in &eval {
            in_eval[d.src()] = true;
            in_eval[d.dst()] = true;
        }
        if let Some(d) = train.iter().find(|d| in_eval[d.src()] || in_eval[d.dst()]) {
            return Err(format!("fold {f}: train dyad {d:?} touches an eval node"));
        }
        let m = p.members(f).len();
        let rest = n - m;
        if eval.len() != m * (m - 1) || train.len() != rest * (rest - 1) {
            return Err(format!("fold {f}: wrong dyad counts"));
        }
        eval_total += eval.len();
    }
    let sizes = p.fold_sizes();
    if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 || sizes.iter().sum::<usize>() != n {
        return Err(format!("unbalanced folds {sizes:?}"));
    }
    if eval_total > n * (n - 1) {
        return Err("eval sets overlap".into());
    }
    Ok(())
}

pub fn check_gamma_psd(n: usize, k: usize, dim: usize, seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let scores = random_score_array(&mut r, n, dim);
    let p = FoldPartition::random(n, k, &mut r).map_err(|e| e.to_string())?;
    let g = estimate_gamma(&scores, &p).unwrap();
    if (&g - g.transpose()).amax() > 1e-12 * g.amax().max(1.0) {
        return Err("Gamma not symmetric".into());
    }
    let min_eig = g.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 * g.amax().max(1.0) {
        return Err(format!("Gamma has eigenvalue {min_eig}"));
    }
    Ok(())
}

fn fit_on(sample: &DyadicSample, p: &FoldPartition) -> DMLFit {
    cross_fit_with_partition(sample, &LogitScore, p, &CrossFitConfig::default()).unwrap()
}

pub fn check_permutation_equivariance(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = 15;
    let sample = dgp_sample(seed, n, 3);
    let p = FoldPartition::random(n, 3, &mut r).unwrap();
    let perm = random_perm(&mut r, n);
    let a = fit_on(&sample, &p);
    let b = fit_on(&sample.permute_nodes(&perm).unwrap(), &p.permuted(&perm).unwrap());
    let tol = 1e-6;
    let gaps = [
        ("theta", (a.theta[0] - b.theta[0]).abs() / a.theta[0].abs().max(1.0)),
        ("J", matrix_rel_diff(&b.j_hat, &a.j_hat)),
        ("Gamma", matrix_rel_diff(&b.gamma_hat, &a.gamma_hat)),
    ];
    match gaps.iter().find(|(_, g)| *g > tol) {
        Some((name, g)) => Err(format!("{name} changed by {g:e} under relabelling")),
        None => Ok(()),
    }
}

pub fn check_ci_width(seed: u64, a: f64) -> Result<(), String> {
    let sample = dgp_sample(seed, 12, 2);
    let fit = cross_fit_estimate(&sample, &LogitScore, 3, &mut rng(seed), &CrossFitConfig::default()).unwrap();
    let ci = confidence_interval(&fit, &[1.0], a).unwrap();
    let expected = 2.0 * normal_quantile(1.0 - a / 2.0) * (fit.sigma2[(0, 0)] / fit.n_nodes as f64).sqrt();
    let gap = (ci.width() - expected).abs() / expected;
    if gap > 1e-12 {
        return Err(format!("width {} vs {expected}", ci.width()));
    }
    if ((ci.lower + ci.upper) / 2.0 - fit.theta[0]).abs() > 1e-12 * fit.theta[0].abs().max(1.0) {
        return Err("interval not centred".into());
    }
    Ok(())
}

pub fn check_determinism(seed: u64) -> Result<(), String> {
    let sample = dgp_sample(seed, 12, 2);
    let fit = |s| cross_fit_estimate(&sample, &LogitScore, 3, &mut rng(s), &CrossFitConfig::default()).unwrap();
    let (a, b) = (fit(seed), fit(seed));
    if a.theta[0].to_bits() != b.theta[0].to_bits() || a.sigma2 != b.sigma2 {
        return Err("cross-fit not reproducible".into());
    }
    let mut cfg = SimConfig::new(12, 2, 3, 4, Method::Dyadic);
    cfg.seed = seed;
    if run_monte_carlo(&cfg).unwrap() != run_monte_carlo(&cfg).unwrap() {
        return Err("Monte Carlo not reproducible".into());
    }
    Ok(())
}
