mod common;

use common::{dgp_sample, normal_equations, plm_sample, rng, THETA_PLM};
use dyadml::engine::solve_theta_nonlinear;
use dyadml::learners::logistic;
use dyadml::scores::{logit_score, FixedNuisance, LinearNuisance, LogitNuisance, NuisanceDiagnostics};
use dyadml::simulation::{data_rng, estimation_rng};
use dyadml::{
    conventional_estimate, cross_fit_estimate, cross_fit_with_partition, gen_dgp, resampled_cross_fit, run_monte_carlo,
    CrossFitConfig, DyadError, DyadicSample, FoldPartition, LogitScore, Method, OutcomeKind, PlmScore, ScoreModel,
    SimConfig,
};
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const B: [f64; 4] = [1.0, -0.5, 0.25, 0.0];

fn oracle_plm() -> FixedNuisance<PlmScore> {
    FixedNuisance { model: PlmScore, nuisance: LinearNuisance::new(B.to_vec(), vec![0.0; 4]) }
}

#[test]
fn partition_noise_is_small_next_to_sampling_noise() {
    let sample = plm_sample(17, 100, &B, true);
    let model = oracle_plm();
    let cfg = CrossFitConfig::default();
    let mut r = rng(18);
    let mut thetas = Vec::new();
    let mut se = 0.0;
    for _ in 0..50 {
        let fit = cross_fit_estimate(&sample, &model, 5, &mut r, &cfg).unwrap();
        thetas.push(fit.theta[0]);
        se += fit.std_error(0) / 50.0;
    }
    let mean = thetas.iter().sum::<f64>() / 50.0;
    let sd = (thetas.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / 49.0).sqrt();
    assert!(sd < 0.5 * se, "partition SD {sd} vs SE {se}");
    assert!((mean - THETA_PLM).abs() < 4.0 * se);
}

#[test]
fn linear_solve_agrees_with_root_finder_and_zeroes_the_score() {
    let sample = plm_sample(2, 30, &B, true);
    let model = oracle_plm();
    let p = FoldPartition::random(30, 3, &mut rng(3)).unwrap();
    let fit = cross_fit_with_partition(&sample, &model, &p, &CrossFitConfig::default()).unwrap();
    assert!(fit.score_residual <= 1e-10);

    let stacked = |t: f64| {
        (0..3)
            .map(|k| {
                let eval = p.eval_dyads(k).unwrap();
                eval.iter()
                    .map(|d| {
                        let prep = model.prepare(sample.view(*d), &model.nuisance);
                        prep.psi_a * t + prep.psi_b
                    })
                    .sum::<f64>()
                    / eval.len() as f64
            })
            .sum::<f64>()
            / 3.0
    };
    let root = solve_theta_nonlinear(stacked, (-20.0, 20.0), 0.0);
    assert!(root.bracketed);
    assert!((root.theta - fit.theta[0]).abs() < 1e-10);
    assert!(stacked(fit.theta[0]).abs() < 1e-10);
}

#[test]
fn logit_fit_zeroes_the_stacked_score_when_bracketed() {
    for seed in 0..4 {
        let sample = dgp_sample(seed, 30, 8);
        let fit = cross_fit_estimate(&sample, &LogitScore, 3, &mut rng(seed), &CrossFitConfig::default()).unwrap();
        if fit.bracketed {
            assert!(fit.score_residual <= 1e-8, "{}", fit.score_residual);
        }
        assert!(fit.gamma_hat[(0, 0)] >= 0.0);
        assert!(fit.j_hat[(0, 0)] < 0.0);
    }
}

#[test]
fn score_at_the_truth_is_centred() {
    let n = 100;
    let data = gen_dgp(n, 50, 1.0, &mut data_rng(31, 0)).unwrap();
    let s = &data.sample;
    // Pseudo-true gamma: weighted projection of D on X at the true index.
    let index: Vec<f64> =
        (0..s.n_dyads()).map(|r| s.d()[r] + (0..50).map(|c| s.x()[(r, c)] * data.beta0[c]).sum::<f64>()).collect();
    let w: Vec<f64> = index.iter().map(|u| logistic(*u) * (1.0 - logistic(*u))).collect();
    let gamma = normal_equations(s.x(), s.d(), &w);
    let eta = LogitNuisance { theta_pilot: 1.0, beta: data.beta0.clone(), gamma, diagnostics: NuisanceDiagnostics::default() };
    let psi: Vec<f64> = s.dyads().map(|d| logit_score(s.view(d), data.theta0, &eta)).collect();
    let m = psi.len() as f64;
    let mean = psi.iter().sum::<f64>() / m;
    let sd = (psi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!(mean.abs() < 5.0 * sd / (n as f64).sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn zero_treatment_makes_the_jacobian_singular() {
    let base = dgp_sample(5, 12, 2);
    let sample =
        DyadicSample::from_parts(12, base.y().to_vec(), vec![0.0; base.n_dyads()], base.x().clone(), OutcomeKind::Binary)
            .unwrap();
    let err = cross_fit_estimate(&sample, &LogitScore, 3, &mut rng(1), &CrossFitConfig::default()).unwrap_err();
    assert!(matches!(err, DyadError::SingularJacobian { .. }), "{err}");
}

#[test]
fn single_repetition_is_a_plain_cross_fit() {
    let sample = dgp_sample(6, 15, 3);
    let cfg = CrossFitConfig::default();
    let mut r = estimation_rng(6, 0);
    let resampled = resampled_cross_fit(&sample, &LogitScore, 3, 1, &mut r, &cfg).unwrap();
    let seed = estimation_rng(6, 0).next_u64();
    let direct = cross_fit_estimate(&sample, &LogitScore, 3, &mut ChaCha8Rng::seed_from_u64(seed), &cfg).unwrap();
    assert_eq!(resampled.aggregate, direct);
    assert_eq!(resampled.repetitions.len(), 1);
}

#[test]
fn resampling_inflates_the_variance() {
    let sample = dgp_sample(7, 15, 3);
    let fit = resampled_cross_fit(&sample, &LogitScore, 3, 5, &mut rng(7), &CrossFitConfig::default()).unwrap();
    assert_eq!(fit.repetitions.len() + fit.n_failed, 5);
    let mut thetas: Vec<f64> = fit.repetitions.iter().map(|f| f.theta[0]).collect();
    let mut s2: Vec<f64> = fit.repetitions.iter().map(|f| f.sigma2[(0, 0)]).collect();
    thetas.sort_by(f64::total_cmp);
    s2.sort_by(f64::total_cmp);
    assert_eq!(fit.aggregate.theta[0], thetas[thetas.len() / 2]);
    assert!(fit.aggregate.sigma2[(0, 0)] >= s2[s2.len() / 2]);
}

#[test]
fn conventional_baseline_scales_by_dyads() {
    let sample = dgp_sample(8, 20, 4);
    let fit = conventional_estimate(&sample, &LogitScore, 5, &mut rng(8), &CrossFitConfig::default()).unwrap();
    assert_eq!(fit.method, Method::Conventional);
    assert_eq!(fit.effective_n, sample.n_dyads());
    let se = (fit.sigma2[(0, 0)] / sample.n_dyads() as f64).sqrt();
    assert!((fit.std_error(0) - se).abs() <= 1e-15 * se.max(1.0));
}

#[test]
fn fold_count_does_not_move_the_estimate() {
    let mut means = Vec::new();
    for k in [2, 5] {
        let mut cfg = SimConfig::new(50, 10, k, 40, Method::Dyadic);
        cfg.seed = 100;
        let mc = run_monte_carlo(&cfg).unwrap();
        let mc_se = mc.sd / (mc.n_ok() as f64).sqrt();
        assert!((mc.mean - 1.0).abs() < 3.0 * mc_se + 0.05, "K = {k}: mean {} sd {}", mc.mean, mc.sd);
        means.push(mc.mean);
    }
    assert!((means[0] - means[1]).abs() < 0.2);
}

#[test]
fn sandwich_is_psd_on_real_fits() {
    let sample = plm_sample(9, 20, &B, true);
    let fit = cross_fit_estimate(&sample, &PlmScore, 4, &mut rng(9), &CrossFitConfig::default()).unwrap();
    let s: DMatrix<f64> = fit.sigma2.clone();
    assert!(s.symmetric_eigen().eigenvalues.min() >= -1e-12);
    assert!((fit.theta[0] - THETA_PLM).abs() < 5.0 * fit.std_error(0));
}
