//! Seeded synthetic suites.
//!
//! `small`: three settings of 250 rows with two features each, stacked into
//! one 750-row dataset (A: one active feature, B: two active features,
//! C: quadratic head with heteroskedastic noise), one query per setting.
//!
//! `long`: three sparse linear designs with 100 rows, 12 features and two
//! active coefficients (standard, shifted feature means, shifted coefficient
//! means), five queries each.
//!
//! Normal draws follow R's `rnorm(n, mean, sd)` parameterization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dataset::{default_names, Dataset, Query};
use crate::seed;

pub const SMALL_ROWS_PER_SETTING: usize = 250;
pub const LONG_ROWS: usize = 100;
pub const LONG_FEATURES: usize = 12;
pub const LONG_ACTIVE: usize = 2;
pub const LONG_QUERIES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutput {
    pub name: String,
    pub dataset: Dataset,
    /// Queries with their true heads retained for scoring.
    pub queries: Vec<Query>,
    /// Generating setting of every training row.
    pub setting_labels: Vec<String>,
    /// Generating setting of every query.
    pub query_labels: Vec<String>,
    /// True coefficients, for the linear suites.
    pub coefficients: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmallSetting {
    A,
    B,
    C,
}

impl SmallSetting {
    pub const ALL: [SmallSetting; 3] = [SmallSetting::A, SmallSetting::B, SmallSetting::C];

    pub fn label(self) -> &'static str {
        match self {
            SmallSetting::A => "A",
            SmallSetting::B => "B",
            SmallSetting::C => "C",
        }
    }
}

fn rnorm(rng: &mut ChaCha20Rng, mean: f64, sd: f64) -> f64 {
    mean + sd * rng.sample::<f64, _>(StandardNormal)
}

fn rnorm_n(rng: &mut ChaCha20Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n).map(|_| rnorm(rng, mean, sd)).collect()
}

/// Training rows `(x1, x2, y)` of one small-suite setting.
pub fn gen_setting(setting: SmallSetting, n: usize, seed: u64) -> Dataset {
    let mut rng = seed::stream(seed, &format!("small/{}", setting.label()), 0);
    let (x1, x2, y): (Vec<f64>, Vec<f64>, Vec<f64>) = match setting {
        SmallSetting::A => {
            let u = rnorm_n(&mut rng, n, 0.0, 1.0);
            let x1 = rnorm_n(&mut rng, n, 1.0, 1.0);
            let x2 = rnorm_n(&mut rng, n, 2.0, 1.0);
            let y = (0..n).map(|i| 0.5 * x1[i] + u[i]).collect();
            (x1, x2, y)
        }
        SmallSetting::B => {
            let u = rnorm_n(&mut rng, n, 0.0, 1.0);
            let x1 = rnorm_n(&mut rng, n, 3.0, 1.0);
            let x2 = rnorm_n(&mut rng, n, 2.0, 2.0);
            let y = (0..n).map(|i| 0.5 * x1[i] + 0.33 * x2[i] + u[i]).collect();
            (x1, x2, y)
        }
        SmallSetting::C => {
            let x1 = rnorm_n(&mut rng, n, 1.0, 1.0);
            let u: Vec<f64> = (0..n).map(|i| rnorm(&mut rng, 0.0, 1.0) * x1[i] / 2.0).collect();
            let x2 = rnorm_n(&mut rng, n, 3.0, 2.0);
            let y = (0..n)
                .map(|i| 0.5 * x1[i] * x1[i] + 0.33 * x2[i] + u[i])
                .collect();
            (x1, x2, y)
        }
    };
    let x = DMatrix::from_fn(n, 2, |i, j| if j == 0 { x1[i] } else { x2[i] });
    Dataset::new(x, DVector::from_vec(y), default_names(2), "y").expect("finite draws")
}

/// The "new data" row of a small-suite setting.
///
/// The query laws are reproduced as printed: in A the second feature is drawn
/// with sd 2 (training uses 1), and in C the query head is linear in `x01`
/// although the training head is quadratic.
pub fn gen_setting_query(setting: SmallSetting, seed: u64, index: u64) -> Query {
    let mut rng = seed::stream(seed, &format!("small/{}/query", setting.label()), index);
    let (x01, x02, y0) = match setting {
        SmallSetting::A => {
            let x01 = rnorm(&mut rng, 1.0, 1.0);
            let x02 = rnorm(&mut rng, 2.0, 2.0);
            (x01, x02, 0.5 * x01 + rnorm(&mut rng, 0.0, 1.0))
        }
        SmallSetting::B => {
            let x01 = rnorm(&mut rng, 3.0, 1.0);
            let x02 = rnorm(&mut rng, 2.0, 2.0);
            (x01, x02, 0.5 * x01 + 0.33 * x02 + rnorm(&mut rng, 0.0, 1.0))
        }
        SmallSetting::C => {
            let x01 = rnorm(&mut rng, 1.0, 1.0);
            let x02 = rnorm(&mut rng, 3.0, 2.0);
            let noise = rnorm(&mut rng, 0.0, 1.0) * x01 / 2.0;
            (x01, x02, 0.5 * x01 + 0.33 * x02 + noise)
        }
    };
    Query::with_truth(vec![x01, x02], y0)
}

/// The 750-row small suite with one query per setting.
pub fn gen_small(seed: u64) -> SuiteOutput {
    let n = SMALL_ROWS_PER_SETTING;
    let parts: Vec<Dataset> = SmallSetting::ALL
        .iter()
        .map(|&s| gen_setting(s, n, seed))
        .collect();
    let total = 3 * n;
    let x = DMatrix::from_fn(total, 2, |i, j| parts[i / n].x()[(i % n, j)]);
    let y = DVector::from_fn(total, |i, _| parts[i / n].y()[i % n]);
    let dataset = Dataset::new(x, y, default_names(2), "y").expect("finite draws");
    SuiteOutput {
        name: "small".into(),
        dataset,
        queries: SmallSetting::ALL
            .iter()
            .map(|&s| gen_setting_query(s, seed, 0))
            .collect(),
        setting_labels: SmallSetting::ALL
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.label().to_string(), n))
            .collect(),
        query_labels: SmallSetting::ALL.iter().map(|s| s.label().to_string()).collect(),
        coefficients: None,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LongDgp {
    Standard,
    ShiftedFeatures,
    ShiftedCoefficients,
}

impl LongDgp {
    pub const ALL: [LongDgp; 3] = [
        LongDgp::Standard,
        LongDgp::ShiftedFeatures,
        LongDgp::ShiftedCoefficients,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LongDgp::Standard => "DGP_1",
            LongDgp::ShiftedFeatures => "DGP_2",
            LongDgp::ShiftedCoefficients => "DGP_3",
        }
    }

    fn feature_mean(self) -> f64 {
        if self == LongDgp::ShiftedFeatures {
            1.0
        } else {
            0.0
        }
    }

    fn coefficient_mean(self) -> f64 {
        if self == LongDgp::ShiftedCoefficients {
            1.0
        } else {
            0.0
        }
    }
}

/// Column-major fill, as R's `matrix(rnorm(n*p, mean), n, p)`.
fn rnorm_matrix(rng: &mut ChaCha20Rng, n: usize, p: usize, mean: f64) -> DMatrix<f64> {
    DMatrix::from_vec(n, p, rnorm_n(rng, n * p, mean, 1.0))
}

pub fn gen_long_dgp(dgp: LongDgp, seed: u64) -> SuiteOutput {
    let (n, p, s) = (LONG_ROWS, LONG_FEATURES, LONG_ACTIVE);
    let label = dgp.label();
    let mut rng = seed::stream(seed, &format!("long/{label}"), 0);
    let x = rnorm_matrix(&mut rng, n, p, dgp.feature_mean());
    let mut beta = rnorm_n(&mut rng, s, dgp.coefficient_mean(), 1.0);
    beta.resize(p, 0.0);
    let b = DVector::from_column_slice(&beta);
    let y = &x * &b + DVector::from_vec(rnorm_n(&mut rng, n, 0.0, 1.0));

    let mut qrng = seed::stream(seed, &format!("long/{label}/query"), 0);
    let x0 = rnorm_matrix(&mut qrng, LONG_QUERIES, p, dgp.feature_mean());
    let y0 = &x0 * &b + DVector::from_vec(rnorm_n(&mut qrng, LONG_QUERIES, 0.0, 1.0));
    let queries = (0..LONG_QUERIES)
        .map(|i| Query::with_truth(x0.row(i).iter().copied().collect(), y0[i]))
        .collect();

    SuiteOutput {
        name: format!("long_{}", label.to_ascii_lowercase()),
        dataset: Dataset::new(x, y, default_names(p), "y").expect("finite draws"),
        queries,
        setting_labels: vec![label.to_string(); n],
        query_labels: vec![label.to_string(); LONG_QUERIES],
        coefficients: Some(beta),
        seed,
    }
}

/// The three long-suite designs.
pub fn gen_long(seed: u64) -> Vec<SuiteOutput> {
    LongDgp::ALL.iter().map(|&d| gen_long_dgp(d, seed)).collect()
}
