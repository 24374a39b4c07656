//! Labeled observations, queries, feature standardization and CSV I/O.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A set of labeled observations: tails `x` (n × p) and heads `y` (n).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    feature_names: Vec<String>,
    head_name: String,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        feature_names: Vec<String>,
        head_name: impl Into<String>,
    ) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InsufficientData {
                what: "a dataset",
                needed: 1,
                got: 0,
            });
        }
        if x.ncols() == 0 {
            return Err(Error::param("x", "at least one feature column is required"));
        }
        if x.nrows() != y.len() {
            return Err(Error::Dimension {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::Dimension {
                expected: x.ncols(),
                got: feature_names.len(),
            });
        }
        let bad = (0..x.nrows())
            .flat_map(|r| (0..x.ncols()).map(move |c| (r, c)))
            .find(|&rc| !x[rc].is_finite());
        if let Some((r, c)) = bad {
            return Err(Error::BadCell {
                row: r + 1,
                column: feature_names[c].clone(),
                value: format!("{}", x[(r, c)]),
            });
        }
        let head_name = head_name.into();
        if let Some(r) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadCell {
                row: r + 1,
                column: head_name,
                value: format!("{}", y[r]),
            });
        }
        Ok(Dataset {
            x,
            y,
            feature_names,
            head_name,
        })
    }

    /// Builds a dataset from row vectors with default names `x1..xp` and `y`.
    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::Dimension {
                expected: p,
                got: bad.len(),
            });
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(x, DVector::from_column_slice(y), default_names(p), "y")
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn head_name(&self) -> &str {
        &self.head_name
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.x.row(i).iter().copied().collect()
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            y: DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.y[i])),
            feature_names: self.feature_names.clone(),
            head_name: self.head_name.clone(),
        }
    }

    /// Same tails, different heads.
    pub fn with_heads(&self, y: DVector<f64>) -> Result<Dataset> {
        Dataset::new(
            self.x.clone(),
            y,
            self.feature_names.clone(),
            self.head_name.clone(),
        )
    }

    /// Reads a dataset from a CSV file; `head_column` becomes `y`, every other
    /// column a feature in header order. Lines starting with `#` are ignored.
    pub fn load_csv(path: impl AsRef<Path>, head_column: &str) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, head_column)
    }

    pub fn read_csv<R: Read>(reader: R, head_column: &str) -> Result<Dataset> {
        let table = read_table(reader)?;
        let head_at: Vec<usize> = table
            .header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.as_str() == head_column)
            .map(|(i, _)| i)
            .collect();
        let head_idx = match head_at.as_slice() {
            [] => return Err(Error::MissingColumn(head_column.to_string())),
            [i] => *i,
            _ => return Err(Error::DuplicateColumn(head_column.to_string())),
        };
        let feature_cols: Vec<usize> = (0..table.header.len()).filter(|&c| c != head_idx).collect();
        let n = table.rows.len();
        let x = DMatrix::from_fn(n, feature_cols.len(), |i, j| table.rows[i][feature_cols[j]]);
        let y = DVector::from_iterator(n, table.rows.iter().map(|r| r[head_idx]));
        let names = feature_cols.iter().map(|&c| table.header[c].clone()).collect();
        Dataset::new(x, y, names, head_column)
    }

    /// Writes `head, features...` with optional `#` comment lines first.
    pub fn save_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&mut file, comments)
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        let mut header = vec![self.head_name.clone()];
        header.extend(self.feature_names.iter().cloned());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.n() {
            let mut cells = vec![fmt_num(self.y[i])];
            cells.extend(self.x.row(i).iter().map(|&v| fmt_num(v)));
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Shortest decimal that parses back to the identical `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn read_table<R: Read>(reader: R) -> Result<NumericTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Csv("missing header row".into()));
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let mut row = Vec::with_capacity(header.len());
        for (c, cell) in rec.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(Error::BadCell {
                        row: r + 1,
                        column: header[c].clone(),
                        value: cell.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// An unlabeled tail, optionally paired with its held-out head.
///
/// `y0` is for scoring only; no interval construction reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub x0: Vec<f64>,
    pub y0: Option<f64>,
}

impl Query {
    pub fn new(x0: Vec<f64>) -> Self {
        Query { x0, y0: None }
    }

    pub fn with_truth(x0: Vec<f64>, y0: f64) -> Self {
        Query { x0, y0: Some(y0) }
    }

    pub fn without_truth(&self) -> Query {
        Query::new(self.x0.clone())
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        if self.x0.len() != p {
            return Err(Error::Dimension {
                expected: p,
                got: self.x0.len(),
            });
        }
        Ok(())
    }
}

/// Reads queries whose columns are matched to `features` by name. The head
/// column is optional; when present it fills `y0`.
pub fn read_queries<R: Read>(reader: R, features: &[String], head: &str) -> Result<Vec<Query>> {
    let table = read_table(reader)?;
    let find = |name: &str| table.header.iter().position(|h| h == name);
    let cols = features
        .iter()
        .map(|f| find(f).ok_or_else(|| Error::MissingColumn(f.clone())))
        .collect::<Result<Vec<usize>>>()?;
    let head_idx = find(head);
    Ok(table
        .rows
        .iter()
        .map(|r| Query {
            x0: cols.iter().map(|&c| r[c]).collect(),
            y0: head_idx.map(|h| r[h]),
        })
        .collect())
}

pub fn load_queries(path: impl AsRef<Path>, features: &[String], head: &str) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_queries(file, features, head)
}

/// Writes queries as `head, features...`. The head column appears only when
/// every query carries a truth value.
pub fn write_queries<W: Write>(
    mut w: W,
    queries: &[Query],
    features: &[String],
    head: &str,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    let with_head = !queries.is_empty() && queries.iter().all(|q| q.y0.is_some());
    let mut header = Vec::new();
    if with_head {
        header.push(head.to_string());
    }
    header.extend(features.iter().cloned());
    writeln!(w, "{}", header.join(","))?;
    for q in queries {
        let mut cells = Vec::new();
        if with_head {
            cells.push(fmt_num(q.y0.expect("checked above")));
        }
        cells.extend(q.x0.iter().map(|&v| fmt_num(v)));
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Per-feature affine map to zero mean and unit sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Column means and `n - 1` standard deviations; zero-variance columns get scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InsufficientData {
                what: "standardization",
                needed: 2,
                got: n,
            });
        }
        let (centers, scales) = x
            .column_iter()
            .map(|col| {
                let mean = col.mean();
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                let sd = var.sqrt();
                (mean, if sd > 0.0 { sd } else { 1.0 })
            })
            .unzip();
        Ok(Standardizer { centers, scales })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.centers.iter().zip(&self.scales))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.centers[j]) / self.scales[j]
        })
    }

    pub fn inverse(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| {
            z[(i, j)] * self.scales[j] + self.centers[j]
        })
    }
}

/// Standardizes every feature column of `d`; heads are untouched.
pub fn standardize(d: &Dataset) -> Result<(Dataset, Standardizer)> {
    let s = Standardizer::fit(d.x())?;
    let out = Dataset {
        x: s.transform(d.x()),
        y: d.y.clone(),
        feature_names: d.feature_names.clone(),
        head_name: d.head_name.clone(),
    };
    Ok((out, s))
}
