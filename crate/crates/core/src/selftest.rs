//! Built-in oracle checks: each production routine is compared against an
//! independent, deliberately naive computation on seeded random problems.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::conformal::{full_conformal_grid, loo_residuals, split_half_width, ConformalSpec, Design};
use crate::dataset::Dataset;
use crate::interval::ConformalMethod;
use crate::regress::{fit_kernel, fit_lasso_fixed, fit_ols, lasso_kkt_residual, Regressor};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

pub fn normal_matrix(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

/// Random linear problem: standard normal features, unit-noise head.
pub fn random_linear(rng: &mut ChaCha20Rng, n: usize, p: usize) -> Dataset {
    let x = normal_matrix(rng, n, p);
    let beta = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    let noise = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * beta + noise.add_scalar(0.5);
    Dataset::new(x, y, crate::dataset::default_names(p), "y").expect("finite")
}

/// `[intercept, coefficients...]` from explicitly inverting the Gram matrix.
pub fn gram_ols(d: &Dataset) -> Option<Vec<f64>> {
    let (n, p) = (d.n(), d.p());
    let xa = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { d.x()[(i, j - 1)] });
    let gram = xa.transpose() * &xa;
    let inv = gram.try_inverse()?;
    Some((inv * xa.transpose() * d.y()).iter().copied().collect())
}

/// Accepted trial values by refitting from scratch for every candidate.
pub fn brute_force_full(d: &Dataset, x0: &[f64], candidates: &[f64], alpha: f64) -> Vec<bool> {
    let n = d.n();
    let limit = ((n as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize;
    candidates
        .iter()
        .map(|&c| {
            let mut rows: Vec<Vec<f64>> = (0..n).map(|i| d.row(i)).collect();
            rows.push(x0.to_vec());
            let mut y: Vec<f64> = d.y().iter().copied().collect();
            y.push(c);
            let aug = Dataset::from_rows(&rows, &y).expect("finite");
            let m = fit_ols(&aug);
            let scores: Vec<f64> = (0..=n)
                .map(|i| (y[i] - m.predict(&rows[i]).expect("dims")).abs())
                .collect();
            let trial = scores[n];
            let rank = scores.iter().filter(|&&s| s <= trial).count();
            rank <= limit
        })
        .collect()
}

/// Leave-one-out residuals by literally deleting each row and refitting.
pub fn naive_loo(d: &Dataset) -> Vec<f64> {
    (0..d.n())
        .map(|i| {
            let keep: Vec<usize> = (0..d.n()).filter(|&j| j != i).collect();
            let m = fit_ols(&d.select(&keep));
            d.y()[i] - m.predict(&d.row(i)).expect("dims")
        })
        .collect()
}

/// Design with centered orthogonal columns of squared norm `n`.
pub fn orthonormal_design(rng: &mut ChaCha20Rng, n: usize, p: usize) -> DMatrix<f64> {
    let mut x = normal_matrix(rng, n, p);
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let q = x.qr().q();
    q.columns(0, p) * (n as f64).sqrt()
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run_selftest(master: u64) -> Vec<Check> {
    let mut out = Vec::new();

    let mut rng = seed::stream(master, "selftest/ols", 0);
    let d = random_linear(&mut rng, 20, 3);
    let m = fit_ols(&d);
    let mut got = vec![m.intercept()];
    got.extend_from_slice(m.coefficients());
    let want = gram_ols(&d).expect("full rank");
    let err = max_abs_diff(&got, &want);
    out.push(check("ols matches normal equations", err <= 1e-8, format!("max diff {err:.3e}")));

    let mut mismatches = 0;
    for t in 0..25 {
        let mut rng = seed::stream(master, "selftest/full", t);
        let n = rng.random_range(6..=15);
        let p = rng.random_range(1..=2);
        let d = random_linear(&mut rng, n, p);
        let x0: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let mut spec = ConformalSpec::new(ConformalMethod::Full, 0.2);
        spec.grid_points = 20;
        let grid = full_conformal_grid(&Design::plain(&d), &Regressor::Ols, &x0, &spec).expect("valid");
        if grid.accepted != brute_force_full(&d, &x0, &grid.candidates, spec.alpha) {
            mismatches += 1;
        }
    }
    out.push(check(
        "full conformal matches brute force",
        mismatches == 0,
        format!("{mismatches}/25 datasets differ"),
    ));

    let mut worst: f64 = 0.0;
    for t in 0..25 {
        let mut rng = seed::stream(master, "selftest/loo", t);
        let n = rng.random_range(5..=30);
        let d = random_linear(&mut rng, n, 2);
        let fast = loo_residuals(&d, &Regressor::Ols).expect("fit");
        worst = worst.max(max_abs_diff(&fast, &naive_loo(&d)));
    }
    out.push(check("leave-one-out matches refits", worst <= 1e-8, format!("max diff {worst:.3e}")));

    let mut rng = seed::stream(master, "selftest/lasso", 0);
    let (n, p) = (40, 4);
    let x = orthonormal_design(&mut rng, n, p);
    let y = DVector::from_fn(n, |i, _| x[(i, 0)] * 1.5 - x[(i, 2)] * 0.4 + rng.sample::<f64, _>(StandardNormal) * 0.3);
    let d = Dataset::new(x, y, crate::dataset::default_names(p), "y").expect("finite");
    let ols = fit_ols(&d);
    let lambda = 0.35;
    let lasso = fit_lasso_fixed(&d, lambda).expect("fit");
    let want: Vec<f64> = ols.coefficients().iter().map(|&b| soft(b, lambda)).collect();
    let err = max_abs_diff(lasso.coefficients(), &want);
    let kkt = lasso_kkt_residual(&d, &lasso);
    out.push(check(
        "lasso matches soft-thresholding",
        err <= 1e-6 && kkt <= 1e-6,
        format!("max diff {err:.3e}, kkt {kkt:.3e}"),
    ));

    let xs = [0.1, 0.5, 0.9, 1.4, 2.0, 2.2, 3.1, 3.3, 4.0, 4.8];
    let ys = [1.0, 1.3, 0.7, 2.2, 2.9, 3.1, 2.5, 4.0, 4.4, 3.8];
    let rows: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
    let km = fit_kernel(&Dataset::from_rows(&rows, &ys).expect("finite")).expect("fit");
    let h = km.bandwidth().expect("kernel");
    let mean = xs.iter().sum::<f64>() / 10.0;
    let sd = (xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
    let mut kerr: f64 = 0.0;
    for x0 in [0.0, 1.7, 2.6, 5.5] {
        let w: Vec<f64> = xs.iter().map(|v| (-((x0 - v) / sd).powi(2) / (2.0 * h * h)).exp()).collect();
        let direct = w.iter().zip(&ys).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        kerr = kerr.max((km.predict(&[x0]).expect("dims") - direct).abs());
    }
    out.push(check("kernel matches direct formula", kerr <= 1e-12, format!("max diff {kerr:.3e}")));

    let scores: Vec<f64> = (1..=9).map(f64::from).collect();
    let hw = split_half_width(&scores, 0.1);
    out.push(check("split quantile rank", hw == 9.0, format!("half-width {hw}")));

    out
}
