//! Query-specific relevance selection and simulated controls.
//!
//! A selection picks the rows of a dataset that resemble a query tail, either
//! by standardized Euclidean distance (percentile rule) or by the cosine of
//! raw tails. Controls enlarge a selection with synthetic rows: a perturbed
//! clone of every relevant row, or draws from a diagonal Gaussian fitted to
//! the selection.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::conformal::Design;
use crate::dataset::{fmt_num, Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::interval::Similarity;
use crate::seed;

pub const DEFAULT_NOISE_SCALE: f64 = 0.1;
pub const DEFAULT_MIN_RELEVANT: usize = 30;
const MIN_FEATURE_SD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceSelection {
    /// Selected rows of the source dataset, ascending.
    pub indices: Vec<usize>,
    /// Score of every source row: distance for percentile, cosine for cosine.
    pub scores: Vec<f64>,
    pub method: Similarity,
    pub threshold_used: f64,
    /// The rule selected too few rows and the `min_relevant` best were taken instead.
    pub fallback: bool,
}

impl RelevanceSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn ceil_rank(x: f64) -> usize {
    (x - 1e-9).ceil().max(1.0) as usize
}

fn check_inputs(d: &Dataset, x0: &[f64], min_relevant: usize) -> Result<()> {
    if x0.len() != d.p() {
        return Err(Error::Dimension {
            expected: d.p(),
            got: x0.len(),
        });
    }
    if min_relevant == 0 {
        return Err(Error::param("min_relevant", "must be positive"));
    }
    if d.n() < min_relevant {
        return Err(Error::InsufficientData {
            what: "relevance selection",
            needed: min_relevant,
            got: d.n(),
        });
    }
    Ok(())
}

/// Rows ordered best-first; ties keep the lower row index first.
fn ranked(scores: &[f64], higher_is_better: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        if higher_is_better { c.reverse() } else { c }.then(a.cmp(&b))
    });
    order
}

/// Rows whose standardized distance to `x0` is at most the `alpha`-quantile
/// (nearest-rank, `k = ceil(alpha·n)`) of all distances. Ties at the
/// threshold are kept. Falls back to the `min_relevant` nearest rows.
pub fn select_percentile(
    d: &Dataset,
    x0: &[f64],
    alpha: f64,
    min_relevant: usize,
) -> Result<RelevanceSelection> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    check_inputs(d, x0, min_relevant)?;
    let n = d.n();
    let (distances, order) = if n == 1 {
        (vec![0.0], vec![0])
    } else {
        let s = Standardizer::fit(d.x())?;
        let z = s.transform(d.x());
        let z0 = s.transform_row(x0);
        let dist: Vec<f64> = z
            .row_iter()
            .map(|r| r.iter().zip(&z0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        let order = ranked(&dist, false);
        (dist, order)
    };
    let k = ceil_rank(alpha * n as f64).min(n);
    let threshold = distances[order[k - 1]];
    let mut indices: Vec<usize> = (0..n).filter(|&i| distances[i] <= threshold).collect();
    let (threshold_used, fallback) = if indices.len() < min_relevant {
        indices = order[..min_relevant].to_vec();
        indices.sort_unstable();
        (distances[order[min_relevant - 1]], true)
    } else {
        (threshold, false)
    };
    Ok(RelevanceSelection {
        indices,
        scores: distances,
        method: Similarity::Percentile,
        threshold_used,
        fallback,
    })
}

/// Rows whose raw tail has cosine at least `gamma` with `x0`; zero-norm rows
/// score −∞. Falls back to the `min_relevant` most similar rows.
pub fn select_cosine(
    d: &Dataset,
    x0: &[f64],
    gamma: f64,
    min_relevant: usize,
) -> Result<RelevanceSelection> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::param("gamma", format!("must lie in (0,1), got {gamma}")));
    }
    check_inputs(d, x0, min_relevant)?;
    let q_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if q_norm == 0.0 {
        return Err(Error::ZeroNormQuery);
    }
    let scores: Vec<f64> = d
        .x()
        .row_iter()
        .map(|r| {
            let norm = r.norm();
            if norm == 0.0 {
                f64::NEG_INFINITY
            } else {
                r.iter().zip(x0).map(|(a, b)| a * b).sum::<f64>() / (norm * q_norm)
            }
        })
        .collect();
    let mut indices: Vec<usize> = (0..d.n()).filter(|&i| scores[i] >= gamma).collect();
    let (threshold_used, fallback) = if indices.len() < min_relevant {
        let order = ranked(&scores, true);
        indices = order[..min_relevant].to_vec();
        indices.sort_unstable();
        (scores[order[min_relevant - 1]], true)
    } else {
        (gamma, false)
    };
    Ok(RelevanceSelection {
        indices,
        scores,
        method: Similarity::Cosine,
        threshold_used,
        fallback,
    })
}

/// How synthetic controls are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// One noisy clone per relevant row, carrying the source head.
    #[default]
    Perturb,
    /// Draws from a diagonal Gaussian fitted to the relevant tails, each
    /// taking the head of its nearest relevant row.
    GaussianMimic,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "perturb" => Ok(ControlMode::Perturb),
            "gaussian_mimic" | "mimic" => Ok(ControlMode::GaussianMimic),
            other => Err(Error::Config {
                key: "control_mode".into(),
                reason: format!("unknown value `{other}` (expected perturb or gaussian_mimic)"),
            }),
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ControlMode::Perturb => "perturb",
            ControlMode::GaussianMimic => "gaussian_mimic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    RelevantOriginal,
    PerturbedClone,
    GaussianMimic,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::RelevantOriginal => "relevant_original",
            Origin::PerturbedClone => "perturbed_clone",
            Origin::GaussianMimic => "gaussian_mimic",
        }
    }
}

/// A relevant set enlarged with synthetic rows.
///
/// The first `n_r` rows are the relevant originals in selection order;
/// synthetic rows follow. `source[i]` is the position (within the originals)
/// of the row that synthetic row `i` was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub dataset: Dataset,
    pub origin: Vec<Origin>,
    pub source: Vec<usize>,
    /// Standard deviation of the perturbation applied to each feature.
    pub noise_sd: Vec<f64>,
    pub noise_scale_used: f64,
    pub mode: ControlMode,
}

impl ControlSet {
    pub fn originals(&self) -> usize {
        self.origin
            .iter()
            .filter(|o| **o == Origin::RelevantOriginal)
            .count()
    }

    /// Calibration grouping for conformal methods: originals are scored,
    /// synthetic rows train alongside their source, and full conformal pairs
    /// the trial point with one perturbed companion of `x0`.
    pub fn design(&self, x0: &[f64], seed: u64) -> Result<Design<'_>> {
        if x0.len() != self.dataset.p() {
            return Err(Error::Dimension {
                expected: self.dataset.p(),
                got: x0.len(),
            });
        }
        let n_r = self.originals();
        let mut rng = seed::stream(seed, "trial-companion", 0);
        let companion: Vec<f64> = x0
            .iter()
            .zip(&self.noise_sd)
            .map(|(v, sd)| v + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Design::grouped(
            &self.dataset,
            (0..n_r).collect(),
            &self.source,
            vec![companion],
        )
    }

    /// Same layout as a dataset CSV plus a trailing `origin` column.
    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let d = &self.dataset;
        let mut header = vec![d.head_name().to_string()];
        header.extend(d.feature_names().iter().cloned());
        header.push("origin".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..d.n() {
            let mut cells = vec![fmt_num(d.y()[i])];
            cells.extend(d.x().row(i).iter().map(|&v| fmt_num(v)));
            cells.push(self.origin[i].as_str().into());
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), comments)
            .map_err(|e| Error::io(path, e))
    }
}

fn sample_sd(col: impl Iterator<Item = f64> + Clone) -> f64 {
    let v: Vec<f64> = col.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Builds the control set for `rel`. Every relevant original is kept and
/// `n_r` synthetic rows are added, so the result has `2·n_r` rows.
///
/// Perturbation noise for feature `j` has standard deviation
/// `noise_scale · σ_j`, with `σ_j` the sample standard deviation of feature
/// `j` inside the selection (floored at 1e-8). Draws for each synthetic row
/// come from their own seeded stream.
pub fn simulate_controls(
    d: &Dataset,
    rel: &RelevanceSelection,
    noise_scale: f64,
    mode: ControlMode,
    seed: u64,
) -> Result<ControlSet> {
    if rel.is_empty() {
        return Err(Error::EmptySelection);
    }
    if !(noise_scale > 0.0 && noise_scale.is_finite()) {
        return Err(Error::param(
            "noise_scale",
            format!("must be positive, got {noise_scale}"),
        ));
    }
    if let Some(&bad) = rel.indices.iter().find(|&&i| i >= d.n()) {
        return Err(Error::param("selection", format!("row {bad} out of range")));
    }
    let base = d.select(&rel.indices);
    let n_r = base.n();
    let p = base.p();
    let sigma: Vec<f64> = base
        .x()
        .column_iter()
        .map(|c| sample_sd(c.iter().copied()).max(MIN_FEATURE_SD))
        .collect();
    let noise_sd: Vec<f64> = sigma.iter().map(|s| noise_scale * s).collect();

    let mut x = DMatrix::zeros(2 * n_r, p);
    let mut y = DVector::zeros(2 * n_r);
    x.rows_mut(0, n_r).copy_from(base.x());
    y.rows_mut(0, n_r).copy_from(base.y());
    let mut origin = vec![Origin::RelevantOriginal; n_r];
    let mut source: Vec<usize> = (0..n_r).collect();

    match mode {
        ControlMode::Perturb => {
            for (k, &row) in rel.indices.iter().enumerate() {
                let mut rng = seed::stream(seed, "perturb", row as u64);
                for j in 0..p {
                    let eps: f64 = rng.sample(StandardNormal);
                    x[(n_r + k, j)] = base.x()[(k, j)] + noise_sd[j] * eps;
                }
                y[n_r + k] = base.y()[k];
                origin.push(Origin::PerturbedClone);
                source.push(k);
            }
        }
        ControlMode::GaussianMimic => {
            let means: Vec<f64> = base.x().column_iter().map(|c| c.mean()).collect();
            for k in 0..n_r {
                let mut rng = seed::stream(seed, "mimic", k as u64);
                let tail: Vec<f64> = (0..p)
                    .map(|j| means[j] + sigma[j] * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let nearest = (0..n_r)
                    .map(|i| {
                        let d2: f64 = (0..p)
                            .map(|j| ((base.x()[(i, j)] - tail[j]) / sigma[j]).powi(2))
                            .sum();
                        (i, d2)
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(i, _)| i)
                    .expect("selection is non-empty");
                for j in 0..p {
                    x[(n_r + k, j)] = tail[j];
                }
                y[n_r + k] = base.y()[nearest];
                origin.push(Origin::GaussianMimic);
                source.push(nearest);
            }
        }
    }

    let dataset = Dataset::new(
        x,
        y,
        base.feature_names().to_vec(),
        base.head_name().to_string(),
    )?;
    Ok(ControlSet {
        dataset,
        origin,
        source,
        noise_sd,
        noise_scale_used: noise_scale,
        mode,
    })
}

/// Dispatches to the percentile or cosine rule. Percentile uses `alpha`,
/// cosine uses `gamma`.
pub fn select(
    d: &Dataset,
    x0: &[f64],
    similarity: Similarity,
    alpha: f64,
    gamma: f64,
    min_relevant: usize,
) -> Result<RelevanceSelection> {
    match similarity {
        Similarity::Percentile => select_percentile(d, x0, alpha, min_relevant),
        Similarity::Cosine => select_cosine(d, x0, gamma, min_relevant),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(distances: &[f64]) -> Dataset {
        let rows: Vec<Vec<f64>> = distances.iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = (0..distances.len()).map(|i| i as f64).collect();
        Dataset::from_rows(&rows, &y).unwrap()
    }

    #[test]
    fn percentile_by_hand() {
        // query at 0: standardized distances are proportional to 1..10
        let d = line(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let s = select_percentile(&d, &[0.0], 0.3, 2).unwrap();
        assert_eq!(s.indices, vec![0, 1, 2]);
        assert!(!s.fallback);

        let all = select_percentile(&d, &[0.0], 0.99, 2).unwrap();
        assert!(all.len() >= 9);

        let fb = select_percentile(&d, &[0.0], 0.1, 4).unwrap();
        assert!(fb.fallback);
        assert_eq!(fb.indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn percentile_includes_exact_match_and_ties() {
        let d = line(&[5.0, -1.0, 1.0, 3.0, 7.0, 9.0]);
        let s = select_percentile(&d, &[3.0], 0.1, 1).unwrap();
        assert_eq!(s.indices, vec![3]);
        // -1 and 7 are both 4 away from 3 and 1, 5 both 2 away
        let s = select_percentile(&d, &[3.0], 0.4, 1).unwrap();
        assert_eq!(s.indices, vec![0, 2, 3]);
    }

    #[test]
    fn percentile_errors() {
        let d = line(&[1.0, 2.0, 3.0]);
        assert!(select_percentile(&d, &[0.0], 0.5, 4).is_err());
        assert!(select_percentile(&d, &[0.0, 1.0], 0.5, 2).is_err());
        assert!(select_percentile(&d, &[0.0], 1.0, 2).is_err());
    }

    #[test]
    fn cosine_cases() {
        let rows = vec![vec![1.0, 0.0], vec![2.0, 2.0], vec![-1.0, 1.0], vec![0.0, 0.0]];
        let d = Dataset::from_rows(&rows, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = select_cosine(&d, &[1.0, 1.0], 0.7, 1).unwrap();
        assert!((s.scores[0] - 0.70711).abs() < 1e-5);
        assert!((s.scores[1] - 1.0).abs() < 1e-12);
        assert!(s.scores[2].abs() < 1e-12);
        assert_eq!(s.scores[3], f64::NEG_INFINITY);
        assert_eq!(s.indices, vec![0, 1]);
        let s = select_cosine(&d, &[1.0, 1.0], 0.71, 1).unwrap();
        assert_eq!(s.indices, vec![1]);
        assert!(matches!(
            select_cosine(&d, &[0.0, 0.0], 0.5, 1),
            Err(Error::ZeroNormQuery)
        ));
    }

    #[test]
    fn cosine_fallback_takes_best() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.1], vec![-1.0, 0.0]];
        let d = Dataset::from_rows(&rows, &[0.0; 4]).unwrap();
        let s = select_cosine(&d, &[1.0, 0.0], 0.999_999, 2).unwrap();
        assert!(s.fallback);
        assert_eq!(s.indices, vec![0, 2]);
        assert!((s.threshold_used - s.scores[2]).abs() < 1e-15);
    }

    #[test]
    fn perturbed_controls_shape() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let d = Dataset::from_rows(&rows, &(0..10).map(f64::from).collect::<Vec<_>>()).unwrap();
        let rel = RelevanceSelection {
            indices: vec![0, 2, 3, 5, 6, 8, 9],
            scores: vec![0.0; 10],
            method: Similarity::Percentile,
            threshold_used: 0.0,
            fallback: false,
        };
        let cs = simulate_controls(&d, &rel, 0.1, ControlMode::Perturb, 1).unwrap();
        assert_eq!(cs.dataset.n(), 14);
        assert_eq!(cs.originals(), 7);
        for k in 0..7 {
            assert_eq!(cs.dataset.row(k), d.row(rel.indices[k]));
            assert_eq!(cs.dataset.y()[7 + k], d.y()[rel.indices[k]]);
            assert_eq!(cs.source[7 + k], k);
        }
        let again = simulate_controls(&d, &rel, 0.1, ControlMode::Perturb, 1).unwrap();
        assert_eq!(cs, again);

        let mimic = simulate_controls(&d, &rel, 0.1, ControlMode::GaussianMimic, 1).unwrap();
        assert_eq!(mimic.dataset.n(), 14);
        for k in 7..14 {
            assert_eq!(mimic.dataset.y()[k], d.y()[rel.indices[mimic.source[k]]]);
        }
    }

    #[test]
    fn controls_errors() {
        let d = line(&[1.0, 2.0]);
        let mut rel = select_percentile(&d, &[1.0], 0.5, 1).unwrap();
        assert!(simulate_controls(&d, &rel, 0.0, ControlMode::Perturb, 0).is_err());
        rel.indices.clear();
        assert!(matches!(
            simulate_controls(&d, &rel, 0.1, ControlMode::Perturb, 0),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn control_csv_has_origin_column() {
        let d = line(&[1.0, 2.0, 4.0]);
        let rel = select_percentile(&d, &[1.0], 0.5, 2).unwrap();
        let cs = simulate_controls(&d, &rel, 0.1, ControlMode::Perturb, 3).unwrap();
        let mut buf = Vec::new();
        cs.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("y,x1,origin"));
        assert!(lines.next().unwrap().ends_with(",relevant_original"));
        assert_eq!(text.lines().filter(|l| l.ends_with("perturbed_clone")).count(), 2);
    }
}
