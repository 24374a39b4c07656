//! Experiment configuration and its flat `key = value` file format.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::conformal::{ConformalSpec, DEFAULT_GRID_EXPANSION, DEFAULT_GRID_POINTS, DEFAULT_RHO};
use crate::error::{Error, Result};
use crate::individualize::{ControlMode, DEFAULT_MIN_RELEVANT, DEFAULT_NOISE_SCALE};
use crate::interval::{ConformalMethod, RegressorKind, Similarity};
use crate::regress::DEFAULT_FOLDS;

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_SEED: u64 = 1;

/// One cell's worth of choices: regressor, similarity, conformal method and
/// the numeric knobs shared by all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub regressor: RegressorKind,
    pub similarity: Similarity,
    pub conformal_method: ConformalMethod,
    pub noise_scale: f64,
    pub min_relevant: usize,
    pub seed: u64,
    pub control_mode: ControlMode,
    pub grid_points: usize,
    pub grid_expansion: f64,
    pub lasso_folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: DEFAULT_ALPHA,
            gamma: DEFAULT_GAMMA,
            rho: DEFAULT_RHO,
            regressor: RegressorKind::Ols,
            similarity: Similarity::Percentile,
            conformal_method: ConformalMethod::Split,
            noise_scale: DEFAULT_NOISE_SCALE,
            min_relevant: DEFAULT_MIN_RELEVANT,
            seed: DEFAULT_SEED,
            control_mode: ControlMode::Perturb,
            grid_points: DEFAULT_GRID_POINTS,
            grid_expansion: DEFAULT_GRID_EXPANSION,
            lasso_folds: DEFAULT_FOLDS,
        }
    }
}

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie strictly inside (0,1), got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        open_unit("alpha", self.alpha)?;
        open_unit("gamma", self.gamma)?;
        open_unit("rho", self.rho)?;
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::param(
                "noise_scale",
                format!("must be positive, got {}", self.noise_scale),
            ));
        }
        if self.min_relevant < 2 {
            return Err(Error::param(
                "min_relevant",
                format!("must be at least 2, got {}", self.min_relevant),
            ));
        }
        if self.lasso_folds < 2 {
            return Err(Error::param("folds", "must be at least 2"));
        }
        self.conformal_spec().validate()
    }

    pub fn conformal_spec(&self) -> ConformalSpec {
        ConformalSpec {
            method: self.conformal_method,
            alpha: self.alpha,
            rho: self.rho,
            grid_points: self.grid_points,
            grid_expansion: self.grid_expansion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Small,
    Long,
    /// User-supplied training and query CSV files.
    Csv,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "small" => Ok(Suite::Small),
            "long" => Ok(Suite::Long),
            "csv" | "external-csv" => Ok(Suite::Csv),
            other => Err(Error::Config {
                key: "suite".into(),
                reason: format!("unknown suite `{other}` (expected small, long or csv)"),
            }),
        }
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suite::Small => "small",
            Suite::Long => "long",
            Suite::Csv => "csv",
        })
    }
}

/// A full experiment grid: the base config plus lists for each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub base: ExperimentConfig,
    pub methods: Vec<ConformalMethod>,
    pub regressors: Vec<RegressorKind>,
    pub similarities: Vec<Similarity>,
    pub suite: Suite,
    pub output_dir: PathBuf,
    pub data: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub head: String,
}

impl Default for RunManifest {
    fn default() -> Self {
        RunManifest {
            base: ExperimentConfig::default(),
            methods: ConformalMethod::ALL.to_vec(),
            regressors: RegressorKind::ALL.to_vec(),
            similarities: Similarity::ALL.to_vec(),
            suite: Suite::Small,
            output_dir: PathBuf::from("out"),
            data: None,
            queries: None,
            head: "y".into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config {
        key: key.into(),
        reason: format!("cannot parse `{v}`"),
    })
}

fn parse_list<T>(key: &str, v: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr<Err = Error> + PartialEq,
{
    let mut out = Vec::new();
    for part in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let item: T = part.parse().map_err(|e: Error| Error::Config {
            key: key.into(),
            reason: match e {
                Error::Config { reason, .. } => reason,
                other => other.to_string(),
            },
        })?;
        if !out.contains(&item) {
            out.push(item);
        }
    }
    if out.is_empty() {
        return Err(Error::Config {
            key: key.into(),
            reason: "empty list".into(),
        });
    }
    Ok(out)
}

pub const CONFIG_KEYS: &[&str] = &[
    "alpha",
    "gamma",
    "rho",
    "method",
    "regressor",
    "similarity",
    "suite",
    "seed",
    "noise_scale",
    "min_relevant",
    "control_mode",
    "grid_points",
    "grid_expansion",
    "folds",
    "out",
    "data",
    "queries",
    "head",
];

impl RunManifest {
    /// Applies one `key = value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key.trim().replace('-', "_");
        let v = value.trim();
        let b = &mut self.base;
        match k.as_str() {
            "alpha" => b.alpha = parse_num(&k, v)?,
            "gamma" => b.gamma = parse_num(&k, v)?,
            "rho" => b.rho = parse_num(&k, v)?,
            "seed" => b.seed = parse_num(&k, v)?,
            "noise_scale" => b.noise_scale = parse_num(&k, v)?,
            "min_relevant" => b.min_relevant = parse_num(&k, v)?,
            "grid_points" => b.grid_points = parse_num(&k, v)?,
            "grid_expansion" => b.grid_expansion = parse_num(&k, v)?,
            "folds" => b.lasso_folds = parse_num(&k, v)?,
            "control_mode" => b.control_mode = v.parse()?,
            "method" => self.methods = parse_list(&k, v)?,
            "regressor" => self.regressors = parse_list(&k, v)?,
            "similarity" => self.similarities = parse_list(&k, v)?,
            "suite" => self.suite = v.parse()?,
            "out" => self.output_dir = PathBuf::from(v),
            "data" => self.data = Some(PathBuf::from(v)),
            "queries" => self.queries = Some(PathBuf::from(v)),
            "head" => self.head = v.to_string(),
            _ => {
                return Err(Error::Config {
                    key: key.trim().to_string(),
                    reason: format!("unknown key (known: {})", CONFIG_KEYS.join(", ")),
                })
            }
        }
        Ok(())
    }

    /// Parses a flat config file: one `key = value` per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                reason: format!("line {}: expected `key = value`", lineno + 1),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.suite == Suite::Csv && self.data.is_none() {
            return Err(Error::Config {
                key: "data".into(),
                reason: "suite csv requires a training file".into(),
            });
        }
        if self.suite == Suite::Csv && self.queries.is_none() {
            return Err(Error::Config {
                key: "queries".into(),
                reason: "suite csv requires a query file".into(),
            });
        }
        Ok(())
    }

    /// Canonical `key = value` listing of everything that affects results.
    pub fn canonical(&self) -> String {
        let b = &self.base;
        let join = |v: Vec<&str>| v.join(",");
        let mut m = BTreeMap::new();
        m.insert("alpha", format!("{:?}", b.alpha));
        m.insert("gamma", format!("{:?}", b.gamma));
        m.insert("rho", format!("{:?}", b.rho));
        m.insert("seed", b.seed.to_string());
        m.insert("noise_scale", format!("{:?}", b.noise_scale));
        m.insert("min_relevant", b.min_relevant.to_string());
        m.insert("grid_points", b.grid_points.to_string());
        m.insert("grid_expansion", format!("{:?}", b.grid_expansion));
        m.insert("folds", b.lasso_folds.to_string());
        m.insert("control_mode", b.control_mode.to_string());
        m.insert("method", join(self.methods.iter().map(|m| m.as_str()).collect()));
        m.insert("regressor", join(self.regressors.iter().map(|m| m.as_str()).collect()));
        m.insert("similarity", join(self.similarities.iter().map(|m| m.as_str()).collect()));
        m.insert("suite", self.suite.to_string());
        m.insert("head", self.head.clone());
        if let Some(d) = &self.data {
            m.insert("data", d.display().to_string());
        }
        if let Some(q) = &self.queries {
            m.insert("queries", q.display().to_string());
        }
        m.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of SHA-256 over [`canonical`](Self::canonical).
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The config of one grid cell.
    pub fn cell(
        &self,
        method: ConformalMethod,
        regressor: RegressorKind,
        similarity: Similarity,
    ) -> ExperimentConfig {
        ExperimentConfig {
            conformal_method: method,
            regressor,
            similarity,
            ..self.base.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
        RunManifest::default().validate().unwrap();
    }

    #[test]
    fn parses_flat_file() {
        let mut m = RunManifest::default();
        m.apply_text(
            "# experiment\nalpha = 0.2\nmethod = split, jackknife\nregressor=ols\nnoise-scale = 0.05 # inline\n",
        )
        .unwrap();
        assert_eq!(m.base.alpha, 0.2);
        assert_eq!(m.base.noise_scale, 0.05);
        assert_eq!(m.methods, vec![ConformalMethod::Split, ConformalMethod::Jackknife]);
        assert_eq!(m.regressors, vec![RegressorKind::Ols]);
    }

    #[test]
    fn unknown_key_is_named() {
        let mut m = RunManifest::default();
        match m.apply_text("alpah = 0.1") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "alpah"),
            other => panic!("{other:?}"),
        }
        let e = m.set("method", "bootstrap").unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "method"));
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn range_checks() {
        for (k, v) in [("alpha", "1.0"), ("gamma", "0"), ("rho", "-0.5"), ("min_relevant", "1"), ("noise_scale", "0")] {
            let mut m = RunManifest::default();
            m.set(k, v).unwrap();
            assert!(m.validate().is_err(), "{k}={v}");
        }
    }

    #[test]
    fn hash_tracks_settings() {
        let a = RunManifest::default();
        let mut b = RunManifest::default();
        assert_eq!(a.config_hash(), b.config_hash());
        b.set("seed", "2").unwrap();
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }
}
