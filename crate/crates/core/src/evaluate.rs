//! Forecast-quality metrics per grid cell and their summary tables.

use std::collections::BTreeMap;
use std::io::Write;

use crate::dataset::fmt_num;
use crate::error::{Error, Result};
use crate::interval::{ConformalMethod, Path, PredictionInterval, RegressorKind, Similarity};

/// Metrics of one interval against the realized head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// `|y0 - point|`
    pub a_dist: f64,
    /// `a_dist / y0`, signed; `None` when `y0 == 0`.
    pub b_pct: Option<f64>,
    /// `up - lo`
    pub c_len: f64,
    /// `a_dist / c_len`; `None` for a zero-length interval.
    pub d_norm: Option<f64>,
    /// Closed-interval containment.
    pub covered: bool,
}

pub fn score(interval: &PredictionInterval, y0: f64) -> Metrics {
    let a = (y0 - interval.point).abs();
    let c = interval.up - interval.lo;
    Metrics {
        a_dist: a,
        b_pct: (y0 != 0.0).then(|| a / y0),
        c_len: c,
        d_norm: (c > 0.0).then(|| a / c),
        covered: interval.lo <= y0 && y0 <= interval.up,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub similarity: Similarity,
    pub method: ConformalMethod,
    pub regressor: RegressorKind,
    pub path: Path,
    pub query: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub cell: CellId,
    pub y0: f64,
    pub interval: PredictionInterval,
    pub metrics: Metrics,
}

impl MetricRow {
    pub fn new(similarity: Similarity, query: usize, interval: PredictionInterval, y0: f64) -> Self {
        MetricRow {
            cell: CellId {
                similarity,
                method: interval.conformal_method,
                regressor: interval.regressor,
                path: interval.path,
                query,
            },
            y0,
            interval,
            metrics: score(&interval, y0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Family {
    Diffpred,
    Pctpred,
    Int,
    Ab,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Diffpred, Family::Pctpred, Family::Int, Family::Ab];

    pub fn label(self) -> &'static str {
        match self {
            Family::Diffpred => "diffpred",
            Family::Pctpred => "%pred",
            Family::Int => "int",
            Family::Ab => "ab",
        }
    }

    fn value(self, m: &Metrics) -> Option<f64> {
        match self {
            Family::Diffpred => Some(m.a_dist),
            Family::Pctpred => m.b_pct.map(|b| 100.0 * b),
            Family::Int => Some(m.c_len),
            Family::Ab => m.d_norm,
        }
    }
}

/// Row label such as `diffpred`, `intlr` or `abkrs`.
pub fn summary_label(family: Family, regressor: RegressorKind, path: Path) -> String {
    format!("{}{}{}", family.label(), regressor.suffix(), path.suffix())
}

pub const SUMMARY_COLUMNS: [&str; 4] = ["General", "Conformal", "Split", "Jackknife"];

/// Summary for one similarity: 36 labelled rows of
/// `[General, Conformal, Split, Jackknife]` means. Missing cells are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub similarity: Similarity,
    pub rows: Vec<(String, [f64; 4])>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Means over queries per (family, regressor, path, method), one table per
/// similarity present in `rows`. Undefined metric values are skipped.
pub fn aggregate(rows: &[MetricRow]) -> Result<Vec<SummaryTable>> {
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            what: "aggregation",
            needed: 1,
            got: 0,
        });
    }
    type Key = (Similarity, RegressorKind, Path, ConformalMethod);
    let mut groups: BTreeMap<Key, Vec<&Metrics>> = BTreeMap::new();
    for r in rows {
        let c = r.cell;
        groups
            .entry((c.similarity, c.regressor, c.path, c.method))
            .or_default()
            .push(&r.metrics);
    }
    let mut sims: Vec<Similarity> = rows.iter().map(|r| r.cell.similarity).collect();
    sims.sort();
    sims.dedup();

    let methods = [ConformalMethod::Full, ConformalMethod::Split, ConformalMethod::Jackknife];
    let tables = sims
        .into_iter()
        .map(|sim| {
            let mut out = Vec::with_capacity(36);
            for family in Family::ALL {
                for &reg in RegressorKind::ALL {
                    for &path in Path::ALL {
                        let mut vals = [f64::NAN; 4];
                        for (j, &method) in methods.iter().enumerate() {
                            if let Some(ms) = groups.get(&(sim, reg, path, method)) {
                                let xs: Vec<f64> = ms.iter().filter_map(|m| family.value(m)).collect();
                                vals[j + 1] = mean(&xs);
                            }
                        }
                        let present: Vec<f64> = vals[1..].iter().copied().filter(|v| !v.is_nan()).collect();
                        vals[0] = mean(&present);
                        out.push((summary_label(family, reg, path), vals));
                    }
                }
            }
            SummaryTable { similarity: sim, rows: out }
        })
        .collect();
    Ok(tables)
}

/// Numeric cell text; NaN becomes `NA`.
pub fn fmt_cell(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        fmt_num(v)
    }
}

impl SummaryTable {
    pub fn get(&self, label: &str) -> Option<&[f64; 4]> {
        self.rows.iter().find(|(l, _)| l == label).map(|(_, v)| v)
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{},{}", self.similarity.as_str(), SUMMARY_COLUMNS.join(","))?;
        for (label, vals) in &self.rows {
            let cells: Vec<String> = vals.iter().map(|v| fmt_cell(*v)).collect();
            writeln!(w, "{label},{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(point: f64, lo: f64, up: f64) -> PredictionInterval {
        PredictionInterval {
            point,
            lo,
            up,
            path: Path::Standard,
            conformal_method: ConformalMethod::Full,
            regressor: RegressorKind::Ols,
            degenerate: false,
        }
    }

    #[test]
    fn worked_example_metrics() {
        let m = score(&pi(2.59, 1.36, 3.8), 2.05);
        assert!((m.a_dist - 0.54).abs() < 1e-10);
        assert!((m.c_len - 2.44).abs() < 1e-10);
        assert!((m.d_norm.unwrap() - 0.54 / 2.44).abs() < 1e-10);
        assert!((m.d_norm.unwrap() - 0.2213).abs() < 5e-5);
        assert!(m.covered);
    }

    #[test]
    fn exact_forecast_and_edges() {
        let m = score(&pi(0.96, -0.36, 2.22), 0.96);
        assert_eq!((m.a_dist, m.d_norm, m.covered), (0.0, Some(0.0), true));
        assert!(score(&pi(1.0, 0.5, 2.0), 0.5).covered);
        assert!(score(&pi(1.0, 0.5, 2.0), 2.0).covered);
        assert!(!score(&pi(1.0, 0.5, 2.0), 2.0 + 1e-12).covered);
        let z = score(&pi(1.0, 1.0, 1.0), 0.0);
        assert_eq!((z.b_pct, z.d_norm), (None, None));
        assert!(score(&pi(1.0, 0.0, 2.0), -2.0).b_pct.unwrap() < 0.0);
    }

    fn row(q: usize, method: ConformalMethod, a: f64) -> MetricRow {
        let mut i = pi(1.0 + a, 0.0, 4.0);
        i.conformal_method = method;
        MetricRow::new(Similarity::Cosine, q, i, 1.0)
    }

    #[test]
    fn means_and_general_column() {
        let rows = vec![
            row(0, ConformalMethod::Split, 0.2),
            row(1, ConformalMethod::Split, 0.4),
            row(0, ConformalMethod::Full, 0.6),
            row(0, ConformalMethod::Jackknife, 0.9),
        ];
        let t = &aggregate(&rows).unwrap()[0];
        assert_eq!(t.rows.len(), 36);
        let d = t.get("diffpred").unwrap();
        assert!((d[2] - 0.3).abs() < 1e-12);
        assert!((d[0] - (0.6 + 0.3 + 0.9) / 3.0).abs() < 1e-12);
        let p = t.get("%pred").unwrap();
        assert!((p[2] - 30.0).abs() < 1e-9);
        assert!(t.get("intlrs").unwrap()[0].is_nan());
        assert!(matches!(aggregate(&[]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn single_row_is_itself() {
        let r = row(0, ConformalMethod::Split, 0.25);
        let t = &aggregate(std::slice::from_ref(&r)).unwrap()[0];
        let d = t.get("diffpred").unwrap();
        assert_eq!((d[0], d[2]), (r.metrics.a_dist, r.metrics.a_dist));
        assert_eq!(t.get("ab").unwrap()[2], r.metrics.d_norm.unwrap());
    }

    #[test]
    fn labels_follow_the_naming_scheme() {
        let t = &aggregate(&[row(0, ConformalMethod::Split, 0.1)]).unwrap()[0];
        let labels: Vec<&str> = t.rows.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(&labels[..9], ["diffpred", "diffpredr", "diffpredrs", "diffpredl", "diffpredlr", "diffpredlrs", "diffpredk", "diffpredkr", "diffpredkrs"]);
        assert_eq!(labels[9], "%pred");
        assert_eq!(labels[35], "abkrs");
    }
}
