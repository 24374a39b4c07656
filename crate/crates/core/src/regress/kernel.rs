use nalgebra::{DMatrix, DVector};

use super::{FittedModel, KernelState};
use crate::dataset::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::interval::RegressorKind;

const MIN_BANDWIDTH: f64 = 1e-6;

/// Nadaraya–Watson regression with a Gaussian kernel on standardized
/// features; bandwidth from the median pairwise distance.
pub fn fit_kernel(d: &Dataset) -> Result<FittedModel> {
    fit_xy(d.x(), d.y(), None)
}

pub fn fit_kernel_with_bandwidth(d: &Dataset, bandwidth: f64) -> Result<FittedModel> {
    fit_xy(d.x(), d.y(), Some(bandwidth))
}

pub(crate) fn fit_xy(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    bandwidth: Option<f64>,
) -> Result<FittedModel> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData {
            what: "kernel regression",
            needed: 2,
            got: n,
        });
    }
    let scaler = Standardizer::fit(x)?;
    let train = scaler.transform(x);
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::param("bandwidth", format!("must be > 0, got {h}"))),
        None => median_pairwise_distance(&train).max(MIN_BANDWIDTH),
    };
    Ok(FittedModel {
        kind: RegressorKind::Kernel,
        intercept: 0.0,
        coefficients: Vec::new(),
        lambda: None,
        bandwidth: Some(h),
        p: x.ncols(),
        kernel: Some(KernelState {
            scaler,
            train,
            y: y.clone(),
        }),
    })
}

/// Median Euclidean distance over all unordered row pairs.
pub fn median_pairwise_distance(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows();
    let mut d = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push((z.row(i) - z.row(j)).norm());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub(super) fn predict(k: &KernelState, h: f64, x0: impl Iterator<Item = f64>) -> f64 {
    let z0: Vec<f64> = x0
        .zip(k.scaler.centers.iter().zip(&k.scaler.scales))
        .map(|(v, (c, s))| (v - c) / s)
        .collect();
    let d2: Vec<f64> = k
        .train
        .row_iter()
        .map(|r| r.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    // shift by the nearest distance so the largest weight is exactly 1
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 2.0 * h * h;
    let (num, den) = d2
        .iter()
        .zip(k.y.iter())
        .fold((0.0, 0.0), |(num, den), (d, y)| {
            let w = (-(d - dmin) / scale).exp();
            (num + w * y, den + w)
        });
    num / den
}
