use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icp_core::config::{RunManifest, Suite};
use icp_core::dataset::write_queries;
use icp_core::dgp::{self, SuiteOutput};
use icp_core::error::{Error, Result};
use icp_core::runner::{self, read_cells, score_cells, write_file, VERSION};
use icp_core::selftest::run_selftest;

#[derive(Parser)]
#[command(name = "icp", version, about = "Individualized conformal prediction intervals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic suite (training rows, queries, metadata) as CSV.
    Gen {
        /// small or long
        #[arg(long, default_value = "small")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Run the experiment grid and write result tables.
    Run(RunArgs),
    /// Recompute summary tables from a cells file written by `run`.
    Score {
        /// A `*_cells.csv` file.
        cells: PathBuf,
        /// Directory for the summary CSVs; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the numerical routines against independent oracles.
    Selftest {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Miscoverage level [default: 0.1]
    #[arg(long)]
    alpha: Option<String>,
    /// Cosine similarity threshold [default: 0.9]
    #[arg(long)]
    gamma: Option<String>,
    /// Split-conformal training fraction [default: 0.5]
    #[arg(long)]
    rho: Option<String>,
    /// Comma list of full, split, jackknife [default: all]
    #[arg(long)]
    method: Option<String>,
    /// Comma list of ols, lasso, kernel [default: all]
    #[arg(long)]
    regressor: Option<String>,
    /// Comma list of percentile, cosine [default: both]
    #[arg(long)]
    similarity: Option<String>,
    /// small, long or csv [default: small]
    #[arg(long)]
    suite: Option<String>,
    /// Master seed [default: 1]
    #[arg(long)]
    seed: Option<String>,
    /// Control noise as a multiple of each feature's sd [default: 0.1]
    #[arg(long)]
    noise_scale: Option<String>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<String>,
    /// Extra `key=value` settings (repeatable), e.g. `--set min_relevant=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = RunManifest::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                key: "config".into(),
                reason: format!("cannot read {}: {e}", path.display()),
            })?;
            m.apply_text(&text)?;
        }
        let flags = [
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("rho", &self.rho),
            ("method", &self.method),
            ("regressor", &self.regressor),
            ("similarity", &self.similarity),
            ("suite", &self.suite),
            ("seed", &self.seed),
            ("noise_scale", &self.noise_scale),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                m.set(key, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
                key: kv.clone(),
                reason: "expected KEY=VALUE".into(),
            })?;
            m.set(k, v)?;
        }
        m.validate()?;
        Ok(m)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_suite(dir: &Path, s: &SuiteOutput) -> Result<Vec<PathBuf>> {
    let header = vec![format!("icp {VERSION} suite={} seed={}", s.name, s.seed)];
    let train = dir.join(format!("{}_train.csv", s.name));
    write_file(&train, |w| s.dataset.write_csv(w, &header))?;
    let queries = dir.join(format!("{}_queries.csv", s.name));
    write_file(&queries, |w| {
        write_queries(
            w,
            &s.queries,
            s.dataset.feature_names(),
            s.dataset.head_name(),
            &header,
        )
    })?;
    let meta = dir.join(format!("{}_manifest.txt", s.name));
    write_file(&meta, |w| {
        writeln!(w, "# {}", header[0])?;
        writeln!(w, "suite = {}", s.name)?;
        writeln!(w, "seed = {}", s.seed)?;
        writeln!(w, "rows = {}", s.dataset.n())?;
        writeln!(w, "features = {}", s.dataset.p())?;
        writeln!(w, "queries = {}", s.queries.len())?;
        let mut counts: Vec<(String, usize)> = Vec::new();
        for l in &s.setting_labels {
            match counts.iter_mut().find(|(k, _)| k == l) {
                Some((_, c)) => *c += 1,
                None => counts.push((l.clone(), 1)),
            }
        }
        let counts: Vec<String> = counts.iter().map(|(k, c)| format!("{k}:{c}")).collect();
        writeln!(w, "row_settings = {}", counts.join(","))?;
        writeln!(w, "query_settings = {}", s.query_labels.join(","))?;
        if let Some(beta) = &s.coefficients {
            let b: Vec<String> = beta.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "coefficients = {}", b.join(","))?;
        }
        Ok(())
    })?;
    Ok(vec![train, queries, meta])
}

fn gen(suite: &str, seed: u64, out: &Path) -> Result<()> {
    let suites = match suite.parse::<Suite>()? {
        Suite::Small => vec![dgp::gen_small(seed)],
        Suite::Long => dgp::gen_long(seed),
        Suite::Csv => {
            return Err(Error::Config {
                key: "suite".into(),
                reason: "gen supports small and long".into(),
            })
        }
    };
    create_dir(out)?;
    for s in &suites {
        for path in write_suite(out, s)? {
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let m = args.manifest()?;
    let out = runner::run_grid(&m)?;
    for path in runner::write_outputs(&m, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn score(cells: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(cells).map_err(|e| Error::Io {
        path: cells.to_path_buf(),
        source: e,
    })?;
    let records = read_cells(text.as_bytes())?;
    // keep the seed and config stamp of the run that produced the cells
    let header: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_string())
        .collect();
    for (part, tables) in score_cells(&records)? {
        match out {
            Some(dir) => {
                create_dir(dir)?;
                for t in &tables {
                    let path = dir.join(format!("{part}_summary_{}.csv", t.similarity));
                    write_file(&path, |w| t.write_csv(w, &header))?;
                    println!("{}", path.display());
                }
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                for t in &tables {
                    t.write_csv(&mut lock, &header).map_err(|e| Error::Io {
                        path: "<stdout>".into(),
                        source: e,
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn selftest(seed: u64) -> Result<bool> {
    let checks = run_selftest(seed);
    for c in &checks {
        println!("{} {} ({})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gen { suite, seed, out } => gen(suite, *seed, out),
        Command::Run(args) => run(args),
        Command::Score { cells, out } => score(cells, out.as_deref()),
        Command::Selftest { seed } => selftest(*seed).map(|ok| {
            if !ok {
                std::process::exit(2);
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
