//! Grid execution and result files.
//!
//! Every (query, method, regressor, similarity) cell is independent and runs
//! on the rayon pool; results are collected in cell order before anything is
//! written, so output bytes never depend on scheduling.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;

use crate::config::{RunManifest, Suite};
use crate::dataset::{fmt_num, load_queries, Dataset, Query};
use crate::dgp;
use crate::error::{Error, Result};
use crate::evaluate::{aggregate, fmt_cell, score, MetricRow, SummaryTable};
use crate::interval::{ConformalMethod, Path, PredictionInterval, RegressorKind, Similarity};
use crate::pipeline::{run_paths, PathSet};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One training set with its queries. The long suite has three.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub name: String,
    pub dataset: Dataset,
    pub queries: Vec<Query>,
    pub query_labels: Vec<String>,
}

impl From<dgp::SuiteOutput> for Part {
    fn from(s: dgp::SuiteOutput) -> Self {
        Part {
            name: s.name,
            dataset: s.dataset,
            queries: s.queries,
            query_labels: s.query_labels,
        }
    }
}

pub fn load_parts(m: &RunManifest) -> Result<Vec<Part>> {
    Ok(match m.suite {
        Suite::Small => vec![dgp::gen_small(m.base.seed).into()],
        Suite::Long => dgp::gen_long(m.base.seed).into_iter().map(Part::from).collect(),
        Suite::Csv => {
            let data_path = m.data.as_ref().ok_or_else(|| Error::Config {
                key: "data".into(),
                reason: "missing".into(),
            })?;
            let query_path = m.queries.as_ref().ok_or_else(|| Error::Config {
                key: "queries".into(),
                reason: "missing".into(),
            })?;
            let dataset = Dataset::load_csv(data_path, &m.head)?;
            let queries = load_queries(query_path, dataset.feature_names(), &m.head)?;
            if queries.is_empty() {
                return Err(Error::InsufficientData {
                    what: "the query file",
                    needed: 1,
                    got: 0,
                });
            }
            let name = data_path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("data")
                .to_string();
            let labels = (1..=queries.len()).map(|i| i.to_string()).collect();
            vec![Part {
                name,
                dataset,
                queries,
                query_labels: labels,
            }]
        }
    })
}

/// One interval of the grid with its identifying coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub part: String,
    pub query: usize,
    pub label: String,
    pub similarity: Similarity,
    pub interval: PredictionInterval,
    pub y0: Option<f64>,
    /// Size of the relevance selection; `None` on the standard path.
    pub n_relevant: Option<usize>,
}

impl CellRecord {
    pub fn metric_row(&self) -> Option<MetricRow> {
        self.y0
            .map(|y0| MetricRow::new(self.similarity, self.query, self.interval, y0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartOutput {
    pub name: String,
    pub n_queries: usize,
    pub queries: Vec<Query>,
    pub records: Vec<CellRecord>,
    pub summaries: Vec<SummaryTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    pub parts: Vec<PartOutput>,
    pub header: Vec<String>,
}

/// Header comment lines stamped on every output file.
pub fn header_lines(m: &RunManifest) -> Vec<String> {
    vec![format!(
        "icp {VERSION} seed={} config={}",
        m.base.seed,
        m.config_hash()
    )]
}

struct Task {
    query: usize,
    method: ConformalMethod,
    regressor: RegressorKind,
}

/// Runs the whole grid of `m` over `parts`.
pub fn run_grid_on(m: &RunManifest, parts: &[Part]) -> Result<GridOutput> {
    m.validate()?;
    let mut offset = 0u64;
    let mut outputs = Vec::with_capacity(parts.len());
    for part in parts {
        let mut tasks = Vec::new();
        for query in 0..part.queries.len() {
            for &method in &m.methods {
                for &regressor in &m.regressors {
                    tasks.push(Task {
                        query,
                        method,
                        regressor,
                    });
                }
            }
        }
        let results: Vec<Result<Vec<CellRecord>>> = tasks
            .par_iter()
            .map(|t| run_task(m, part, t, offset))
            .collect();
        let mut records = Vec::new();
        for r in results {
            records.extend(r?);
        }
        offset += part.queries.len() as u64;
        let rows: Vec<MetricRow> = records.iter().filter_map(CellRecord::metric_row).collect();
        let summaries = if rows.is_empty() { Vec::new() } else { aggregate(&rows)? };
        outputs.push(PartOutput {
            name: part.name.clone(),
            n_queries: part.queries.len(),
            queries: part.queries.clone(),
            records,
            summaries,
        });
    }
    Ok(GridOutput {
        parts: outputs,
        header: header_lines(m),
    })
}

fn run_task(m: &RunManifest, part: &Part, t: &Task, offset: u64) -> Result<Vec<CellRecord>> {
    let q = &part.queries[t.query];
    let qi = offset + t.query as u64;
    let record = |similarity, interval, n_relevant| CellRecord {
        part: part.name.clone(),
        query: t.query,
        label: part.query_labels[t.query].clone(),
        similarity,
        interval,
        y0: q.y0,
        n_relevant,
    };
    // the standard path does not depend on the similarity
    let first = m.cell(t.method, t.regressor, m.similarities[0]);
    let standard = run_paths(&part.dataset, q, &first, qi, PathSet::STANDARD_ONLY)?
        .standard
        .expect("standard path enabled");
    let mut out = Vec::with_capacity(3 * m.similarities.len());
    for &sim in &m.similarities {
        let cfg = m.cell(t.method, t.regressor, sim);
        let paths = PathSet {
            standard: false,
            relevant: true,
            simulated: true,
        };
        let r = run_paths(&part.dataset, q, &cfg, qi, paths)?;
        let n_rel = r.selection.as_ref().map(|s| s.len());
        out.push(record(sim, standard, None));
        out.push(record(sim, r.relevant.expect("enabled"), n_rel));
        out.push(record(sim, r.simulated.expect("enabled"), n_rel));
    }
    Ok(out)
}

pub fn run_grid(m: &RunManifest) -> Result<GridOutput> {
    let parts = load_parts(m)?;
    run_grid_on(m, &parts)
}

/// Row labels of the per-query raw table.
pub fn raw_row_labels() -> Vec<String> {
    let mut labels = vec!["y0".to_string()];
    for stem in ["pred", "lo", "up"] {
        for reg in [RegressorKind::Ols, RegressorKind::Lasso] {
            for &path in Path::ALL {
                labels.push(format!("{stem}{}{}", reg.suffix(), path.suffix()));
            }
        }
    }
    labels
}

/// Raw table: one row per label, one column per (method, query).
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub similarity: Similarity,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl RawTable {
    pub fn build(part: &PartOutput, similarity: Similarity, methods: &[ConformalMethod]) -> RawTable {
        let mut columns = Vec::new();
        let mut keys = Vec::new();
        for &method in methods {
            for q in 0..part.n_queries {
                columns.push(format!("{}_{}", method.title(), q + 1));
                keys.push((method, q));
            }
        }
        let find = |method, q, reg, path| {
            part.records.iter().find(|r| {
                r.similarity == similarity
                    && r.query == q
                    && r.interval.conformal_method == method
                    && r.interval.regressor == reg
                    && r.interval.path == path
            })
        };
        let mut rows = Vec::new();
        let y0: Vec<f64> = keys
            .iter()
            .map(|&(_, q)| part.queries[q].y0.unwrap_or(f64::NAN))
            .collect();
        rows.push(("y0".to_string(), y0));
        for stem in ["pred", "lo", "up"] {
            for reg in [RegressorKind::Ols, RegressorKind::Lasso] {
                for &path in Path::ALL {
                    let vals = keys
                        .iter()
                        .map(|&(method, q)| {
                            find(method, q, reg, path).map_or(f64::NAN, |r| match stem {
                                "pred" => r.interval.point,
                                "lo" => r.interval.lo,
                                _ => r.interval.up,
                            })
                        })
                        .collect();
                    rows.push((format!("{stem}{}{}", reg.suffix(), path.suffix()), vals));
                }
            }
        }
        RawTable {
            similarity,
            columns,
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "{},{}", self.similarity.as_str(), self.columns.join(","))?;
        for (label, vals) in &self.rows {
            let cells: Vec<String> = vals.iter().map(|v| fmt_cell(*v)).collect();
            writeln!(w, "{label},{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub const CELLS_HEADER: &str =
    "part,query,label,similarity,method,regressor,path,y0,point,lo,up,degenerate,n_relevant,a_dist,b_pct,c_len,d_norm,covered";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_num)
}

pub fn write_cells<W: Write>(mut w: W, records: &[CellRecord], comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{CELLS_HEADER}")?;
    for r in records {
        let i = &r.interval;
        let m = r.y0.map(|y0| score(i, y0));
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.part,
            r.query + 1,
            r.label,
            r.similarity,
            i.conformal_method,
            i.regressor,
            i.path,
            opt(r.y0),
            fmt_num(i.point),
            fmt_num(i.lo),
            fmt_num(i.up),
            i.degenerate,
            r.n_relevant.map_or_else(|| "NA".to_string(), |n| n.to_string()),
            opt(m.map(|m| m.a_dist)),
            opt(m.and_then(|m| m.b_pct)),
            opt(m.map(|m| m.c_len)),
            opt(m.and_then(|m| m.d_norm)),
            m.map_or_else(|| "NA".to_string(), |m| m.covered.to_string()),
        )?;
    }
    Ok(())
}

/// Parses a cells file written by [`write_cells`]. Metric columns are ignored
/// and recomputed by the caller.
pub fn read_cells<R: Read>(reader: R) -> Result<Vec<CellRecord>> {
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
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx = [
        "part", "query", "label", "similarity", "method", "regressor", "path", "y0", "point", "lo", "up",
        "degenerate", "n_relevant",
    ]
    .iter()
    .map(|n| col(n))
    .collect::<Result<Vec<usize>>>()?;
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let bad = |k: usize| Error::BadCell {
            row: r + 1,
            column: header[idx[k]].clone(),
            value: get(k).to_string(),
        };
        let num = |k: usize| -> Result<f64> {
            get(k).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(k))
        };
        let query: usize = get(1).parse().ok().filter(|&q| q >= 1).ok_or_else(|| bad(1))?;
        let y0 = if get(7) == "NA" { None } else { Some(num(7)?) };
        let n_relevant = match get(12) {
            "NA" => None,
            s => Some(s.parse().map_err(|_| bad(12))?),
        };
        out.push(CellRecord {
            part: get(0).to_string(),
            query: query - 1,
            label: get(2).to_string(),
            similarity: get(3).parse()?,
            interval: PredictionInterval {
                point: num(8)?,
                lo: num(9)?,
                up: num(10)?,
                path: get(6).parse()?,
                conformal_method: get(4).parse()?,
                regressor: get(5).parse()?,
                degenerate: get(11).parse().map_err(|_| bad(11))?,
            },
            y0,
            n_relevant,
        });
    }
    Ok(out)
}

/// Per-query plot data: truth, forecast, bounds and residual for every cell.
pub fn write_plot_data<W: Write>(
    mut w: W,
    records: &[CellRecord],
    query: usize,
    comments: &[String],
) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "similarity,method,regressor,path,y0,point,lo,up,residual")?;
    for r in records.iter().filter(|r| r.query == query) {
        let i = &r.interval;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.similarity,
            i.conformal_method,
            i.regressor,
            i.path,
            opt(r.y0),
            fmt_num(i.point),
            fmt_num(i.lo),
            fmt_num(i.up),
            opt(r.y0.map(|y0| y0 - i.point)),
        )?;
    }
    Ok(())
}

fn create(path: &FsPath) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &FsPath, r: std::io::Result<()>, w: BufWriter<File>) -> Result<()> {
    r.and_then(|_| w.into_inner().map_err(|e| e.into_error()).map(drop))
        .map_err(|e| Error::io(path, e))
}

/// Writes a file through `body`, mapping failures to the path.
pub fn write_file(
    path: &FsPath,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    let r = body(&mut w);
    finish(path, r, w)
}

/// Writes summary tables for each part; returns the files written.
pub fn write_summaries(dir: &FsPath, part: &PartOutput, header: &[String]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in &part.summaries {
        let path = dir.join(format!("{}_summary_{}.csv", part.name, t.similarity));
        write_file(&path, |w| t.write_csv(w, header))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes every output file of a grid run into `m.output_dir`.
pub fn write_outputs(m: &RunManifest, out: &GridOutput) -> Result<Vec<PathBuf>> {
    let dir = &m.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = &out.header;
    let mut written = Vec::new();

    let manifest_path = dir.join("manifest.txt");
    write_file(&manifest_path, |w| {
        for c in header {
            writeln!(w, "# {c}")?;
        }
        w.write_all(m.canonical().as_bytes())
    })?;
    written.push(manifest_path);

    for part in &out.parts {
        for &sim in &m.similarities {
            let table = RawTable::build(part, sim, &m.methods);
            let path = dir.join(format!("{}_raw_{sim}.csv", part.name));
            write_file(&path, |w| table.write_csv(w, header))?;
            written.push(path);
        }
        written.extend(write_summaries(dir, part, header)?);

        let path = dir.join(format!("{}_cells.csv", part.name));
        write_file(&path, |w| write_cells(w, &part.records, header))?;
        written.push(path);

        for q in 0..part.n_queries {
            let path = dir.join(format!("{}_plot_q{}.csv", part.name, q + 1));
            write_file(&path, |w| write_plot_data(w, &part.records, q, header))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Recomputes summary tables from a cells file, one set per part.
pub fn score_cells(records: &[CellRecord]) -> Result<Vec<(String, Vec<SummaryTable>)>> {
    let mut names: Vec<&str> = Vec::new();
    for r in records {
        if !names.contains(&r.part.as_str()) {
            names.push(&r.part);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rows: Vec<MetricRow> = records
                .iter()
                .filter(|r| r.part == name)
                .filter_map(CellRecord::metric_row)
                .collect();
            Ok((name.to_string(), aggregate(&rows)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_manifest() -> RunManifest {
        let mut m = RunManifest::default();
        m.set("method", "split,jackknife").unwrap();
        m.set("regressor", "ols,lasso").unwrap();
        m
    }

    fn tiny_part() -> Part {
        let s = dgp::gen_setting(dgp::SmallSetting::B, 60, 3);
        Part {
            name: "t".into(),
            dataset: s,
            queries: (0..2).map(|i| dgp::gen_setting_query(dgp::SmallSetting::B, 3, i)).collect(),
            query_labels: vec!["B".into(), "B".into()],
        }
    }

    #[test]
    fn raw_labels() {
        let l = raw_row_labels();
        assert_eq!(l.len(), 19);
        assert_eq!(&l[..7], ["y0", "pred", "predr", "predrs", "predl", "predlr", "predlrs"]);
        assert_eq!(l[18], "uplrs");
    }

    #[test]
    fn grid_shapes_and_cells_round_trip() {
        let m = tiny_manifest();
        let out = run_grid_on(&m, &[tiny_part()]).unwrap();
        let part = &out.parts[0];
        // 2 queries x 2 methods x 2 regressors x 2 similarities x 3 paths
        assert_eq!(part.records.len(), 48);
        let raw = RawTable::build(part, Similarity::Cosine, &m.methods);
        assert_eq!(raw.columns, ["Split_1", "Split_2", "Jackknife_1", "Jackknife_2"]);
        let labels: Vec<String> = raw.rows.iter().map(|(l, _)| l.clone()).collect();
        assert_eq!(labels, raw_row_labels());
        assert!(raw.rows.iter().all(|(_, v)| v.iter().all(|x| x.is_finite())));

        let mut buf = Vec::new();
        write_cells(&mut buf, &part.records, &out.header).unwrap();
        let back = read_cells(&buf[..]).unwrap();
        assert_eq!(back, part.records);
        let rescored = score_cells(&back).unwrap();
        let text = |ts: &[SummaryTable]| {
            let mut b = Vec::new();
            ts.iter().for_each(|t| t.write_csv(&mut b, &[]).unwrap());
            b
        };
        assert_eq!(text(&rescored[0].1), text(&part.summaries));
    }

    #[test]
    fn standard_path_shared_across_similarities() {
        let out = run_grid_on(&tiny_manifest(), &[tiny_part()]).unwrap();
        let std_rows: Vec<_> = out.parts[0]
            .records
            .iter()
            .filter(|r| r.interval.path == Path::Standard && r.query == 0)
            .collect();
        for a in &std_rows {
            for b in &std_rows {
                if a.interval.conformal_method == b.interval.conformal_method
                    && a.interval.regressor == b.interval.regressor
                {
                    assert_eq!(a.interval, b.interval);
                }
            }
        }
    }
}
