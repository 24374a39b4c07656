//! Production routines against independent recomputations and seeded
//! Monte Carlo checks.

use nalgebra::DVector;
use rand::Rng;

use icp_core::conformal::{full_conformal_grid, loo_residuals, ConformalSpec, Design};
use icp_core::config::ExperimentConfig;
use icp_core::dataset::{Dataset, Query};
use icp_core::dgp::{gen_long_dgp, gen_setting, gen_setting_query, LongDgp, SmallSetting};
use icp_core::individualize::{select_percentile, simulate_controls, ControlMode, RelevanceSelection};
use icp_core::interval::{ConformalMethod, Similarity};
use icp_core::pipeline::run_all_paths;
use icp_core::regress::{fit_lasso, fit_lasso_fixed, fit_ols, Regressor};
use icp_core::seed;
use icp_core::selftest::{brute_force_full, gram_ols, naive_loo, orthonormal_design, random_linear};

#[test]
fn ols_agrees_with_gram_inverse() {
    let d = random_linear(&mut seed::stream(11, "oracle-ols", 0), 20, 3);
    let m = fit_ols(&d);
    let want = gram_ols(&d).unwrap();
    assert!((m.intercept() - want[0]).abs() <= 1e-8);
    for (a, b) in m.coefficients().iter().zip(&want[1..]) {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

#[test]
fn lasso_prediction_is_affine() {
    let d = random_linear(&mut seed::stream(12, "oracle-lasso", 0), 40, 4);
    let m = fit_lasso(&d, 5, 3).unwrap();
    let x0 = [0.3, -1.2, 2.0, 0.7];
    let direct = m.intercept() + m.coefficients().iter().zip(&x0).map(|(b, x)| b * x).sum::<f64>();
    assert!((m.predict(&x0).unwrap() - direct).abs() < 1e-12);
}

#[test]
fn lasso_soft_thresholds_orthonormal_designs() {
    for t in 0..10 {
        let mut rng = seed::stream(13, "oracle-ortho", t);
        let (n, p) = (50, 5);
        let x = orthonormal_design(&mut rng, n, p);
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] - 0.7 * x[(i, 3)] + rng.random_range(-0.5..0.5));
        let d = Dataset::new(x, y, (1..=p).map(|j| format!("x{j}")).collect(), "y").unwrap();
        let ols = fit_ols(&d);
        for lambda in [0.0, 0.05, 0.3, 1.0, 3.0] {
            let m = fit_lasso_fixed(&d, lambda).unwrap();
            for (b, o) in m.coefficients().iter().zip(ols.coefficients()) {
                let want = o.signum() * (o.abs() - lambda).max(0.0);
                assert!((b - want).abs() <= 1e-6, "lambda {lambda}: {b} vs {want}");
            }
        }
    }
}

#[test]
fn lasso_zeroes_most_null_coefficients() {
    let reps = 100;
    let good = (0..reps)
        .filter(|&r| {
            let s = gen_long_dgp(LongDgp::Standard, 1000 + r);
            let m = fit_lasso(&s.dataset, 5, r).unwrap();
            m.coefficients()[2..].iter().filter(|b| **b == 0.0).count() >= 5
        })
        .count();
    assert!(good as f64 >= 0.8 * reps as f64, "{good}/{reps} replications");
}

#[test]
fn full_conformal_tiny_one_dimensional() {
    let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.5, 3.0, 4.2].iter().map(|&v| vec![v]).collect();
    let d = Dataset::from_rows(&rows, &[0.1, 1.3, 2.2, 3.4, 3.9]).unwrap();
    for alpha in [0.1, 0.2, 0.4] {
        let mut spec = ConformalSpec::new(ConformalMethod::Full, alpha);
        spec.grid_points = 20;
        let g = full_conformal_grid(&Design::plain(&d), &Regressor::Ols, &[2.0], &spec).unwrap();
        assert_eq!(g.accepted, brute_force_full(&d, &[2.0], &g.candidates, alpha), "alpha {alpha}");
    }
}

#[test]
fn loo_agrees_with_refit_loop() {
    let d = random_linear(&mut seed::stream(14, "oracle-loo", 0), 8, 2);
    let fast = loo_residuals(&d, &Regressor::Ols).unwrap();
    for (a, b) in fast.iter().zip(naive_loo(&d)) {
        assert!((a - b).abs() <= 1e-10);
    }
}

#[test]
fn control_noise_has_requested_spread() {
    let d = random_linear(&mut seed::stream(15, "oracle-controls", 0), 1000, 3);
    let rel = RelevanceSelection {
        indices: (0..1000).collect(),
        scores: vec![0.0; 1000],
        method: Similarity::Percentile,
        threshold_used: 0.0,
        fallback: false,
    };
    let scale = 0.1;
    let cs = simulate_controls(&d, &rel, scale, ControlMode::Perturb, 4).unwrap();
    for j in 0..3 {
        let col = d.x().column(j);
        let mean = col.mean();
        let sigma = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 999.0).sqrt();
        let deltas: Vec<f64> = (1000..2000)
            .map(|k| cs.dataset.x()[(k, j)] - d.x()[(cs.source[k], j)])
            .collect();
        let m = deltas.iter().sum::<f64>() / 1000.0;
        let sd = (deltas.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 999.0).sqrt();
        let target = scale * sigma;
        assert!((sd / target - 1.0).abs() < 0.1, "feature {j}: {sd} vs {target}");
    }
}

#[test]
fn setting_c_noise_grows_with_x1() {
    let hits = (0..200u64)
        .filter(|&s| {
            let d = gen_setting(SmallSetting::C, 250, s);
            let mut pairs: Vec<(f64, f64)> = (0..250)
                .map(|i| {
                    let (x1, x2) = (d.x()[(i, 0)], d.x()[(i, 1)]);
                    (x1, d.y()[i] - 0.5 * x1 * x1 - 0.33 * x2)
                })
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let sd = |v: &[(f64, f64)]| {
                let m = v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
                (v.iter().map(|p| (p.1 - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
            };
            sd(&pairs[250 - 62..]) > sd(&pairs[..62])
        })
        .count();
    assert!(hits >= 190, "{hits}/200");
}

#[test]
fn percentile_near_one_keeps_almost_everything() {
    let d = random_linear(&mut seed::stream(16, "oracle-pct", 0), 57, 2);
    let sel = select_percentile(&d, &[0.1, -0.2], 0.99, 5).unwrap();
    assert!(sel.len() >= d.n() - 1);
}

#[test]
fn relevant_intervals_usually_no_wider_on_setting_c() {
    let cfg = ExperimentConfig::default();
    let reps = 200u64;
    let narrower = (0..reps)
        .filter(|&r| {
            let d = gen_setting(SmallSetting::C, 250, r);
            let q: Query = gen_setting_query(SmallSetting::C, r, 0);
            let out = run_all_paths(&d, &q, &ExperimentConfig { seed: r, ..cfg.clone() }, 0).unwrap();
            out.relevant.length() <= out.standard.length()
        })
        .count();
    assert!(2 * narrower > reps as usize, "{narrower}/{reps}");
}
