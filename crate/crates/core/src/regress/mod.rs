//! Regression engines: ordinary least squares, cross-validated LASSO and
//! Nadaraya–Watson kernel regression.
//!
//! A [`Regressor`] is a fitting plan (kind plus how its hyperparameter is
//! chosen); fitting it yields an immutable [`FittedModel`].

mod kernel;
mod lasso;
mod ols;

use nalgebra::{DMatrix, DVector};

pub use kernel::{fit_kernel, fit_kernel_with_bandwidth, median_pairwise_distance};
pub use lasso::{
    fit_lasso, fit_lasso_fixed, lambda_grid, lasso_kkt_residual, lasso_objective_trace,
    LASSO_GRID_POINTS, LASSO_GRID_RATIO, LASSO_TOLERANCE,
};
pub use ols::{fit_ols, ols_loo_residuals};

use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::interval::RegressorKind;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KernelState {
    pub scaler: Standardizer,
    pub train: DMatrix<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    kind: RegressorKind,
    intercept: f64,
    coefficients: Vec<f64>,
    lambda: Option<f64>,
    bandwidth: Option<f64>,
    kernel: Option<KernelState>,
    p: usize,
}

impl FittedModel {
    pub(crate) fn linear(kind: RegressorKind, intercept: f64, coefficients: Vec<f64>) -> Self {
        FittedModel {
            kind,
            intercept,
            p: coefficients.len(),
            coefficients,
            lambda: None,
            bandwidth: None,
            kernel: None,
        }
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Slopes on the original feature scale; empty for kernel models.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn n_features(&self) -> usize {
        self.p
    }

    pub fn predict(&self, x0: &[f64]) -> Result<f64> {
        if x0.len() != self.p {
            return Err(Error::Dimension {
                expected: self.p,
                got: x0.len(),
            });
        }
        Ok(self.predict_unchecked(x0.iter().copied()))
    }

    pub(crate) fn predict_unchecked(&self, x0: impl Iterator<Item = f64>) -> f64 {
        match &self.kernel {
            Some(k) => kernel::predict(k, self.bandwidth.unwrap_or(1.0), x0),
            None => {
                self.intercept
                    + self
                        .coefficients
                        .iter()
                        .zip(x0)
                        .map(|(b, v)| b * v)
                        .sum::<f64>()
            }
        }
    }

    pub(crate) fn predict_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.predict_unchecked(x.row(i).iter().copied())
    }
}

/// How the LASSO penalty is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LassoLambda {
    CrossValidated { folds: usize, seed: u64 },
    Fixed(f64),
}

/// A fitting plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regressor {
    Ols,
    Lasso(LassoLambda),
    /// `None` selects the bandwidth by the median heuristic.
    Kernel(Option<f64>),
}

impl Regressor {
    /// Default plan for `kind`; `seed` drives LASSO fold assignment.
    pub fn new(kind: RegressorKind, seed: u64) -> Self {
        match kind {
            RegressorKind::Ols => Regressor::Ols,
            RegressorKind::Lasso => Regressor::Lasso(LassoLambda::CrossValidated {
                folds: DEFAULT_FOLDS,
                seed,
            }),
            RegressorKind::Kernel => Regressor::Kernel(None),
        }
    }

    /// A plan that refits with the hyperparameters already chosen for `model`.
    pub fn frozen(model: &FittedModel) -> Self {
        match model.kind {
            RegressorKind::Ols => Regressor::Ols,
            RegressorKind::Lasso => Regressor::Lasso(LassoLambda::Fixed(model.lambda.unwrap_or(0.0))),
            RegressorKind::Kernel => Regressor::Kernel(model.bandwidth),
        }
    }

    pub fn kind(&self) -> RegressorKind {
        match self {
            Regressor::Ols => RegressorKind::Ols,
            Regressor::Lasso(_) => RegressorKind::Lasso,
            Regressor::Kernel(_) => RegressorKind::Kernel,
        }
    }

    pub fn fit(&self, d: &Dataset) -> Result<FittedModel> {
        self.fit_xy(d.x(), d.y())
    }

    /// Smallest training set this plan accepts.
    pub fn min_rows(&self) -> usize {
        match self {
            Regressor::Ols => 1,
            Regressor::Lasso(_) | Regressor::Kernel(_) => 2,
        }
    }

    pub(crate) fn fit_xy(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FittedModel> {
        match *self {
            Regressor::Ols => Ok(ols::fit_xy(x, y)),
            Regressor::Lasso(LassoLambda::Fixed(lambda)) => lasso::fit_fixed_xy(x, y, lambda),
            Regressor::Lasso(LassoLambda::CrossValidated { folds, seed }) => {
                // small relevant subsets can hold fewer rows than the requested folds
                let folds = folds.min(x.nrows());
                lasso::fit_cv_xy(x, y, folds, seed)
            }
            Regressor::Kernel(bw) => kernel::fit_xy(x, y, bw),
        }
    }
}
