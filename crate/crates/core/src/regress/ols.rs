use nalgebra::{DMatrix, DVector};

use super::FittedModel;
use crate::dataset::Dataset;
use crate::interval::RegressorKind;

/// Least squares with an unpenalized intercept.
///
/// Singular or wide designs (p ≥ n) get the minimum-norm slope vector.
pub fn fit_ols(d: &Dataset) -> FittedModel {
    fit_xy(d.x(), d.y())
}

pub(crate) fn fit_xy(x: &DMatrix<f64>, y: &DVector<f64>) -> FittedModel {
    let (n, p) = x.shape();
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let ybar = y.mean();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let yc = y.map(|v| v - ybar);

    let beta = min_norm_solve(xc, &yc);
    let intercept = ybar - beta.iter().zip(&means).map(|(b, m)| b * m).sum::<f64>();
    FittedModel::linear(RegressorKind::Ols, intercept, beta.iter().copied().collect())
}

fn min_norm_solve(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (n, p) = a.shape();
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return DVector::zeros(p);
    }
    let eps = smax * n.max(p) as f64 * f64::EPSILON;
    svd.solve(b, eps).expect("u and v were computed")
}

/// Exact leave-one-out residuals `y_i − ŷ_{−i}(x_i)` via the hat-matrix identity
/// `e_i / (1 − h_ii)`.
///
/// Returns `None` when some row has leverage numerically equal to one, i.e.
/// dropping it changes the column space; callers then refit row by row.
pub fn ols_loo_residuals(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Vec<f64>> {
    let (n, p) = x.shape();
    if n < 2 {
        return None;
    }
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let svd = a.svd(true, false);
    let u = svd.u.as_ref()?;
    let smax = svd.singular_values.max();
    let tol = smax * n.max(p + 1) as f64 * f64::EPSILON;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > tol)
        .map(|(k, _)| k)
        .collect();

    let mut out = Vec::with_capacity(n);
    let coords: Vec<f64> = keep
        .iter()
        .map(|&k| u.column(k).dot(y))
        .collect();
    for i in 0..n {
        let h: f64 = keep.iter().map(|&k| u[(i, k)].powi(2)).sum();
        if h > 1.0 - 1e-8 {
            return None;
        }
        let fitted: f64 = keep.iter().zip(&coords).map(|(&k, c)| u[(i, k)] * c).sum();
        out.push((y[i] - fitted) / (1.0 - h));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], &[2.0, 4.0, 6.0]).unwrap();
        let m = fit_ols(&d);
        assert!(m.intercept().abs() < 1e-10);
        assert!((m.coefficients()[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn constant_response() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, -1.0], vec![0.5, 0.0], vec![4.0, 2.0]];
        let d = Dataset::from_rows(&rows, &[7.5; 4]).unwrap();
        let m = fit_ols(&d);
        assert!((m.intercept() - 7.5).abs() < 1e-10);
        assert!(m.coefficients().iter().all(|b| b.abs() < 1e-10));
    }

    #[test]
    fn linear_prediction() {
        let m = FittedModel::linear(RegressorKind::Ols, 1.0, vec![2.0, 3.0]);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 6.0);
        assert!(m.predict(&[1.0]).is_err());
    }

    #[test]
    fn single_row_and_wide_designs() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0]], &[3.0]).unwrap();
        let m = fit_ols(&d);
        assert_eq!(m.predict(&[1.0, 2.0]).unwrap(), 3.0);

        // p > n: interpolates and picks the minimum-norm slopes
        let rows = vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0]];
        let d = Dataset::from_rows(&rows, &[1.0, 2.0]).unwrap();
        let m = fit_ols(&d);
        for (i, r) in rows.iter().enumerate() {
            assert!((m.predict(r).unwrap() - d.y()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicated_column_is_finite() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + 2.0 * i as f64).collect();
        let m = fit_ols(&Dataset::from_rows(&rows, &y).unwrap());
        assert!((m.coefficients()[0] - 1.0).abs() < 1e-9);
        assert!((m.coefficients()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn loo_shortcut_matches_refits() {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()])
            .collect();
        let y: Vec<f64> = (0..9).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64).collect();
        let d = Dataset::from_rows(&rows, &y).unwrap();
        let fast = ols_loo_residuals(d.x(), d.y()).unwrap();
        for i in 0..d.n() {
            let keep: Vec<usize> = (0..d.n()).filter(|&j| j != i).collect();
            let m = fit_ols(&d.select(&keep));
            let r = d.y()[i] - m.predict(&d.row(i)).unwrap();
            assert!((fast[i] - r).abs() < 1e-9, "row {i}: {} vs {r}", fast[i]);
        }
    }

    #[test]
    fn loo_shortcut_declines_full_leverage() {
        // row 3 is the only one with x != 0, so dropping it loses the slope
        let rows = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        let d = Dataset::from_rows(&rows, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(ols_loo_residuals(d.x(), d.y()).is_none());
    }
}
