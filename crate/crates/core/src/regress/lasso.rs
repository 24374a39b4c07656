//! LASSO by cyclic coordinate descent.
//!
//! The problem solved is
//!
//! ```text
//! minimize  1/(2n) ‖y − b0 − Zβ‖² + λ‖β‖₁
//! ```
//!
//! where `Z` holds the features standardized to mean zero and unit
//! population variance (the glmnet convention, so that for an orthonormal
//! design each coefficient is the soft-thresholded least-squares one).
//! Coefficients are reported back on the original feature scale.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;

use super::FittedModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::interval::RegressorKind;
use crate::seed;

/// Convergence: largest coefficient change in one sweep (standardized scale).
pub const LASSO_TOLERANCE: f64 = 1e-8;
pub const LASSO_GRID_POINTS: usize = 50;
/// Smallest grid value as a fraction of `lambda_max`.
pub const LASSO_GRID_RATIO: f64 = 1e-4;
const MAX_SWEEPS: usize = 100_000;

struct Standardized {
    z: DMatrix<f64>,
    yc: DVector<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    ybar: f64,
    col_sq: Vec<f64>,
}

impl Standardized {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let (n, p) = x.shape();
        let nf = n as f64;
        let mut means = Vec::with_capacity(p);
        let mut scales = Vec::with_capacity(p);
        for col in x.column_iter() {
            let m = col.mean();
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / nf;
            means.push(m);
            // zero-variance columns stay identically zero after centering
            scales.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        let z = DMatrix::from_fn(n, p, |i, j| (x[(i, j)] - means[j]) / scales[j]);
        let ybar = y.mean();
        let yc = y.map(|v| v - ybar);
        let col_sq = z.column_iter().map(|c| c.norm_squared()).collect();
        Standardized {
            z,
            yc,
            means,
            scales,
            ybar,
            col_sq,
        }
    }

    fn n(&self) -> f64 {
        self.z.nrows() as f64
    }

    fn lambda_max(&self) -> f64 {
        let n = self.n();
        self.z
            .column_iter()
            .map(|c| (c.dot(&self.yc) / n).abs())
            .fold(0.0, f64::max)
    }

    fn objective(&self, beta: &[f64], resid: &DVector<f64>, lambda: f64) -> f64 {
        resid.norm_squared() / (2.0 * self.n()) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Runs coordinate descent from `beta`, keeping `resid = yc − Zβ` in sync.
    fn descend(
        &self,
        beta: &mut [f64],
        resid: &mut DVector<f64>,
        lambda: f64,
        mut trace: Option<&mut Vec<f64>>,
    ) {
        let n = self.n();
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.objective(beta, resid, lambda));
        }
        for _ in 0..MAX_SWEEPS {
            let mut max_change = 0.0f64;
            for j in 0..beta.len() {
                let cj = self.col_sq[j] / n;
                if cj == 0.0 {
                    beta[j] = 0.0;
                    continue;
                }
                let col = self.z.column(j);
                let old = beta[j];
                let rho = col.dot(resid) / n + cj * old;
                let new = soft_threshold(rho, lambda) / cj;
                let delta = new - old;
                if delta != 0.0 {
                    resid.axpy(-delta, &col, 1.0);
                    beta[j] = new;
                    max_change = max_change.max(delta.abs());
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(beta, resid, lambda));
            }
            if max_change < LASSO_TOLERANCE {
                break;
            }
        }
    }

    fn to_model(&self, beta: &[f64], lambda: f64) -> FittedModel {
        let coefs: Vec<f64> = beta
            .iter()
            .zip(&self.scales)
            .map(|(b, s)| b / s)
            .collect();
        let intercept = self.ybar - coefs.iter().zip(&self.means).map(|(b, m)| b * m).sum::<f64>();
        let mut m = FittedModel::linear(RegressorKind::Lasso, intercept, coefs);
        m.lambda = Some(lambda);
        m
    }
}

pub(crate) fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Log-spaced penalties from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, points: usize, ratio: f64) -> Vec<f64> {
    if points == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (points as f64 - 1.0);
    (0..points)
        .map(|k| lambda_max * (step * k as f64).exp())
        .collect()
}

/// LASSO at a fixed penalty.
pub fn fit_lasso_fixed(d: &Dataset, lambda: f64) -> Result<FittedModel> {
    fit_fixed_xy(d.x(), d.y(), lambda)
}

pub(crate) fn fit_fixed_xy(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FittedModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be finite and ≥ 0, got {lambda}")));
    }
    let s = Standardized::new(x, y);
    let mut beta = vec![0.0; x.ncols()];
    let mut resid = s.yc.clone();
    s.descend(&mut beta, &mut resid, lambda, None);
    Ok(s.to_model(&beta, lambda))
}

/// Objective value before the first sweep and after each sweep.
pub fn lasso_objective_trace(d: &Dataset, lambda: f64) -> Vec<f64> {
    let s = Standardized::new(d.x(), d.y());
    let mut beta = vec![0.0; d.p()];
    let mut resid = s.yc.clone();
    let mut trace = Vec::new();
    s.descend(&mut beta, &mut resid, lambda, Some(&mut trace));
    trace
}

/// Largest violation of the LASSO subgradient optimality conditions at
/// `model`, measured on the standardized problem for `d`.
pub fn lasso_kkt_residual(d: &Dataset, model: &FittedModel) -> f64 {
    let lambda = model.lambda().unwrap_or(0.0);
    let s = Standardized::new(d.x(), d.y());
    let n = s.n();
    let resid = DVector::from_iterator(
        d.n(),
        (0..d.n()).map(|i| d.y()[i] - model.predict_row(d.x(), i)),
    );
    (0..d.p())
        .filter(|&j| s.col_sq[j] > 0.0)
        .map(|j| {
            let g = s.z.column(j).dot(&resid) / n;
            let b = model.coefficients()[j] * s.scales[j];
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// LASSO with the penalty chosen by `folds`-fold cross-validation over a
/// 50-point log grid; fold assignment is drawn from `seed`.
pub fn fit_lasso(d: &Dataset, folds: usize, seed: u64) -> Result<FittedModel> {
    fit_cv_xy(d.x(), d.y(), folds, seed)
}

pub(crate) fn fit_cv_xy(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    folds: usize,
    seed: u64,
) -> Result<FittedModel> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::param("folds", format!("need at least 2, got {folds}")));
    }
    if n < folds {
        return Err(Error::InsufficientData {
            what: "LASSO cross-validation",
            needed: folds,
            got: n,
        });
    }
    let full = Standardized::new(x, y);
    let lmax = full.lambda_max();
    if lmax == 0.0 {
        return Ok(full.to_model(&vec![0.0; x.ncols()], 0.0));
    }
    let grid = lambda_grid(lmax, LASSO_GRID_POINTS, LASSO_GRID_RATIO);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::stream(seed, "lasso-folds", 0));
    let mut fold_of = vec![0usize; n];
    for (pos, &row) in order.iter().enumerate() {
        fold_of[row] = pos % folds;
    }

    let mut sse = vec![0.0; grid.len()];
    for k in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != k).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k).collect();
        let xt = x.select_rows(&train);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let s = Standardized::new(&xt, &yt);
        let mut beta = vec![0.0; x.ncols()];
        let mut resid = s.yc.clone();
        for (g, &lambda) in grid.iter().enumerate() {
            s.descend(&mut beta, &mut resid, lambda, None);
            let m = s.to_model(&beta, lambda);
            sse[g] += test
                .iter()
                .map(|&i| (y[i] - m.predict_row(x, i)).powi(2))
                .sum::<f64>();
        }
    }
    // first minimum: ties go to the larger penalty
    let best = sse
        .iter()
        .enumerate()
        .fold(0, |b, (g, v)| if *v < sse[b] { g } else { b });

    let mut beta = vec![0.0; x.ncols()];
    let mut resid = full.yc.clone();
    for &lambda in &grid[..=best] {
        full.descend(&mut beta, &mut resid, lambda, None);
    }
    Ok(full.to_model(&beta, grid[best]))
}
