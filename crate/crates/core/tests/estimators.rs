use biteweight::estimators::ffnn::{layer_sizes, n_params, smoothed_mae, train_network};
use biteweight::estimators::grnn::grnn_with_sigma;
use biteweight::estimators::lr::solve_least_squares;
use biteweight::estimators::svr::{rbf_kernel_matrix, svr_train, SvrParams};
use biteweight::estimators::*;
use biteweight::linalg::Matrix;
use biteweight::seed::rng;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

mod common;
use common::{augmented, dual_qp_oracle, random_matrix, svr_instance};

fn linear_targets(x: &Matrix, w: &[f64], b: f64, noise: f64, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    x.iter_rows()
        .map(|row| {
            row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b + noise * r.random_range(-1.0..1.0)
        })
        .collect()
}

#[test]
fn lr_matches_pseudo_inverse() {
    let x = random_matrix(50, 4, 1);
    let y = linear_targets(&x, &[1.5, -2.0, 0.3, 4.0], 7.0, 0.5, 2);
    let m = solve_least_squares(&x, &y);
    let a = augmented(&x);
    let beta = a.pseudo_inverse(1e-12).unwrap() * DVector::from_vec(y);
    for j in 0..4 {
        assert!((m.weights[j] - beta[j]).abs() <= 1e-6, "w{j}: {} vs {}", m.weights[j], beta[j]);
    }
    assert!((m.bias - beta[4]).abs() <= 1e-6);
}

#[test]
fn lr_residuals_orthogonal_to_design() {
    let x = random_matrix(40, 3, 3);
    let y = linear_targets(&x, &[0.5, 1.0, -1.0], 2.0, 1.0, 4);
    let m = solve_least_squares(&x, &y);
    let r: Vec<f64> = x.iter_rows().zip(&y).map(|(row, t)| t - m.predict(row)).collect();
    let a = augmented(&x);
    let atr = a.transpose() * DVector::from_vec(r);
    assert!(atr.amax() <= 1e-6, "{atr}");
}

#[test]
fn svr_matches_dense_dual_qp_oracle() {
    let (x, y) = svr_instance();
    let params = SvrParams {
        c: 2.0,
        gamma: 0.5,
        epsilon: 0.1,
    };
    let (model, sol) = svr_train(&x, &y, params, 1e-8, 1_000_000);
    assert!(sol.converged);
    let k = rbf_kernel_matrix(&x, params.gamma);
    let (beta, b) = dual_qp_oracle(&k, &y, params.c, params.epsilon);
    let probe = random_matrix(20, 2, 12);
    for q in x.iter_rows().chain(probe.iter_rows()) {
        let oracle: f64 = x
            .iter_rows()
            .zip(&beta)
            .map(|(xi, bi)| {
                let d2: f64 = xi.iter().zip(q).map(|(a, c)| (a - c) * (a - c)).sum();
                bi * (-params.gamma * d2).exp()
            })
            .sum::<f64>()
            + b;
        let got = model.predict(q);
        assert!((got - oracle).abs() <= 1e-3, "{got} vs {oracle}");
    }
}

#[test]
fn svr_dual_satisfies_constraints() {
    let (x, y) = svr_instance();
    for c in [0.1, 1.0, 10.0] {
        let params = SvrParams {
            c,
            gamma: 1.0,
            epsilon: 0.05,
        };
        let (_, sol) = svr_train(&x, &y, params, 1e-6, 1_000_000);
        let mut sum = 0.0;
        for (a, s) in sol.alpha.iter().zip(&sol.alpha_star) {
            assert!(*a >= -1e-8 && *a <= c + 1e-8);
            assert!(*s >= -1e-8 && *s <= c + 1e-8);
            sum += a - s;
        }
        assert!(sum.abs() <= 1e-8, "Σ(α−α*) = {sum}");
    }
}

#[test]
fn svr_duplicated_rows_leave_predictions_unchanged() {
    let (x, y) = svr_instance();
    let params = SvrParams {
        c: 1000.0,
        gamma: 0.5,
        epsilon: 0.05,
    };
    let (m1, _) = svr_train(&x, &y, params, 1e-10, 5_000_000);
    let rows: Vec<&[f64]> = x.iter_rows().chain(x.iter_rows()).collect();
    let x2 = Matrix::from_rows(&rows).unwrap();
    let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
    let (m2, _) = svr_train(&x2, &y2, params, 1e-10, 5_000_000);
    for q in random_matrix(10, 2, 5).iter_rows().chain(x.iter_rows()) {
        assert!((m1.predict(q) - m2.predict(q)).abs() <= 1e-6);
    }
}

#[test]
fn svr_constant_targets_predict_constant() {
    let x = random_matrix(12, 3, 6);
    let t = TrainSet::ungrouped(x, vec![4.2; 12]).unwrap();
    let m = svr_fit(&t, &SvrConfig::default()).unwrap();
    for q in random_matrix(5, 3, 7).iter_rows() {
        assert!((m.predict(q).unwrap() - 4.2).abs() < 1e-9);
    }
}

#[test]
fn grnn_two_exemplar_closed_form() {
    let x = Matrix::from_rows(&[[0.0, 1.0], [2.0, -1.0]]).unwrap();
    let t = TrainSet::ungrouped(x, vec![3.0, 7.0]).unwrap();
    let sigma = 0.8;
    let m = grnn_with_sigma(&t, sigma);
    for q in [[0.5, 0.5], [3.0, 3.0], [-1.0, 2.0]] {
        let d1 = (q[0] - 0.0f64).powi(2) + (q[1] - 1.0f64).powi(2);
        let d2 = (q[0] - 2.0f64).powi(2) + (q[1] + 1.0f64).powi(2);
        let w1 = (-d1 / (2.0 * sigma * sigma)).exp();
        let w2 = (-d2 / (2.0 * sigma * sigma)).exp();
        let oracle = (3.0 * w1 + 7.0 * w2) / (w1 + w2);
        assert!((m.predict(&q) - oracle).abs() <= 1e-12);
    }
}

#[test]
fn grnn_flat_kernel_gives_mean() {
    let x = random_matrix(30, 2, 8);
    let y: Vec<f64> = (0..30).map(|i| 1.0 + i as f64).collect();
    let t = TrainSet::ungrouped(x, y.clone()).unwrap();
    let m = grnn_with_sigma(&t, 1e6);
    let mean = y.iter().sum::<f64>() / 30.0;
    assert!((m.predict(&[0.3, -0.1]) - mean).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn grnn_predictions_stay_in_target_range(
        seed in any::<u64>(),
        n in 2usize..20,
        log_sigma in -3.0f64..3.0,
        q in prop::collection::vec(-50.0f64..50.0, 3),
    ) {
        let x = random_matrix(n, 3, seed);
        let mut r = rng(seed ^ 1);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(0.5..30.0)).collect();
        let t = TrainSet::ungrouped(x, y.clone()).unwrap();
        let p = grnn_with_sigma(&t, 10f64.powf(log_sigma)).predict(&q);
        let lo = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
    }
}

#[test]
fn ffnn_gradient_matches_central_differences() {
    let sizes = layer_sizes(3, 2, 5);
    let np = n_params(&sizes);
    let mut r = rng(21);
    let params: Vec<f64> = (0..np).map(|_| r.random_range(-0.8..0.8)).collect();
    let x = random_matrix(25, 3, 22);
    let y: Vec<f64> = (0..25).map(|_| r.random_range(1.0..10.0)).collect();
    let mu = 1e-6;
    let mut g = vec![0.0; np];
    smoothed_mae(&sizes, &params, &x, &y, mu, &mut g);
    let h = 1e-5;
    let mut scratch = vec![0.0; np];
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..np {
        let mut p = params.clone();
        p[j] += h;
        let fp = smoothed_mae(&sizes, &p, &x, &y, mu, &mut scratch);
        p[j] -= 2.0 * h;
        let fm = smoothed_mae(&sizes, &p, &x, &y, mu, &mut scratch);
        let fd = (fp - fm) / (2.0 * h);
        num += (g[j] - fd).powi(2);
        den += fd.powi(2);
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-4, "relative gradient error {rel}");
}

fn line_data() -> TrainSet {
    let xs: Vec<[f64; 1]> = (0..50).map(|i| [i as f64 / 49.0]).collect();
    let y: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] + 1.0).collect();
    TrainSet::ungrouped(Matrix::from_rows(&xs).unwrap(), y).unwrap()
}

#[test]
fn ffnn_fits_a_line() {
    let t = line_data();
    let (net, _) = train_network(2, 5, &t, 3, &FfnnConfig::default());
    let pred: Vec<f64> = t.x.iter_rows().map(|r| net.predict(r)).collect();
    let mae = mean_abs_error(&pred, &t.y);
    assert!(mae < 0.05, "training MAE {mae}");
}

#[test]
fn ffnn_zero_epochs_returns_initialization() {
    let t = line_data();
    let cfg = FfnnConfig {
        max_epochs: 0,
        ..Default::default()
    };
    let (net, report) = train_network(3, 10, &t, 9, &cfg);
    let init = Mlp::initialized(layer_sizes(1, 3, 10), 9, biteweight::stats::median(&t.y));
    assert_eq!(report.iterations, 0);
    assert_eq!(net, init);
    assert_eq!(net.predict(&[0.25]), init.predict(&[0.25]));
}

#[test]
fn ffnn_reported_winner_has_minimum_validation_mae() {
    let x = random_matrix(40, 2, 31);
    let y = linear_targets(&x, &[1.0, -0.5], 6.0, 0.3, 32);
    let t = TrainSet::ungrouped(x, y).unwrap();
    let cfg = FfnnConfig {
        max_epochs: 100,
        seed: 77,
        ..Default::default()
    };
    let m = ffnn_fit(&t, &cfg).unwrap();
    assert_eq!(m.candidates.len(), 8);
    let best = m
        .candidates
        .iter()
        .map(|c| c.validation_mae)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(m.validation_mae, Some(best));
    let winner = m.candidates.iter().find(|c| c.validation_mae == best).unwrap();
    assert_eq!(winner.hyper_parameters, m.hyper_parameters);

    // Recompute every candidate's validation MAE from its seed and split.
    let (tr, va) = random_split(t.len(), cfg.train_fraction, biteweight::seed::derive_seed(cfg.seed, &[0]));
    let (train, val) = (t.subset(&tr), t.subset(&va));
    for (a, (layers, neurons)) in cfg.architectures().into_iter().enumerate() {
        let (net, _) = train_network(layers, neurons, &train, biteweight::estimators::ffnn::init_seed(&cfg, a), &cfg);
        let pred: Vec<f64> = val.x.iter_rows().map(|r| net.predict(r)).collect();
        assert_eq!(mean_abs_error(&pred, &val.y), m.candidates[a].validation_mae);
    }
}

#[test]
fn fits_are_deterministic() {
    let x = random_matrix(30, 3, 41);
    let y = linear_targets(&x, &[1.0, 2.0, -1.0], 8.0, 0.5, 42);
    let t = TrainSet::ungrouped(x, y).unwrap();
    let settings = EstimatorSettings {
        ffnn: FfnnConfig {
            max_epochs: 50,
            ..Default::default()
        },
        ..Default::default()
    };
    for kind in EstimatorKind::ALL {
        let a = fit(kind, &t, &settings, 5).unwrap();
        let b = fit(kind, &t, &settings, 5).unwrap();
        assert_eq!(a, b, "{kind}");
        let json = serde_json::to_string(&a).unwrap();
        let back: EstimatorModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a, "{kind} JSON round trip");
    }
}

#[test]
fn predict_rejects_wrong_dimension() {
    let x = random_matrix(10, 2, 51);
    let t = TrainSet::ungrouped(x, vec![1.0; 10]).unwrap();
    let m = lr_fit(&t);
    assert!(m.predict(&[1.0]).is_err());
}
