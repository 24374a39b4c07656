//! The three-path individualized pipeline for a single query.
//!
//! 1. conformal interval on the full dataset;
//! 2. relevance selection, then the same conformal method on the selection;
//! 3. simulated controls built on that same selection, then conformal on the
//!    control set.
//!
//! Random streams are keyed by `(seed, purpose, query index)` so disabling a
//! path never perturbs another, and paths 1 and 2 share their split seed.

use crate::conformal::{conformal_interval, Design};
use crate::config::ExperimentConfig;
use crate::dataset::{Dataset, Query};
use crate::error::{Error, Result};
use crate::individualize::{select, simulate_controls, RelevanceSelection};
use crate::interval::{Path, PredictionInterval};
use crate::regress::Regressor;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathSet {
    pub standard: bool,
    pub relevant: bool,
    pub simulated: bool,
}

impl PathSet {
    pub const ALL: PathSet = PathSet {
        standard: true,
        relevant: true,
        simulated: true,
    };
    pub const STANDARD_ONLY: PathSet = PathSet {
        standard: true,
        relevant: false,
        simulated: false,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathIntervals {
    pub standard: Option<PredictionInterval>,
    pub relevant: Option<PredictionInterval>,
    pub simulated: Option<PredictionInterval>,
    /// Shared by the relevant and simulated paths.
    pub selection: Option<RelevanceSelection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllPaths {
    pub standard: PredictionInterval,
    pub relevant: PredictionInterval,
    pub simulated: PredictionInterval,
    pub selection: RelevanceSelection,
}

/// Per-query seeds derived from the master seed.
#[derive(Debug, Clone, Copy)]
struct Streams {
    split: u64,
    lasso: u64,
    controls: u64,
}

impl Streams {
    fn new(master: u64, query_index: u64) -> Self {
        Streams {
            split: derive_seed(master, "split", query_index),
            lasso: derive_seed(master, "lasso-cv", query_index),
            controls: derive_seed(master, "controls", query_index),
        }
    }
}

/// Runs all three paths for one query.
pub fn run_all_paths(
    d: &Dataset,
    q: &Query,
    cfg: &ExperimentConfig,
    query_index: u64,
) -> Result<AllPaths> {
    let out = run_paths(d, q, cfg, query_index, PathSet::ALL)?;
    Ok(AllPaths {
        standard: out.standard.expect("path enabled"),
        relevant: out.relevant.expect("path enabled"),
        simulated: out.simulated.expect("path enabled"),
        selection: out.selection.expect("path enabled"),
    })
}

/// Runs the chosen subset of paths for one query. `q.y0` is never read.
pub fn run_paths(
    d: &Dataset,
    q: &Query,
    cfg: &ExperimentConfig,
    query_index: u64,
    paths: PathSet,
) -> Result<PathIntervals> {
    cfg.validate()?;
    q.check_dim(d.p())?;
    let x0 = q.x0.as_slice();
    let spec = cfg.conformal_spec();
    let streams = Streams::new(cfg.seed, query_index);
    let reg = Regressor::new(cfg.regressor, streams.lasso);

    let min_n = spec.min_groups();
    if d.n() < min_n {
        return Err(Error::InsufficientData {
            what: "the conformal method",
            needed: min_n,
            got: d.n(),
        });
    }

    let standard = if paths.standard {
        Some(conformal_interval(&Design::plain(d), &reg, x0, &spec, streams.split)?)
    } else {
        None
    };

    if !(paths.relevant || paths.simulated) {
        return Ok(PathIntervals {
            standard,
            relevant: None,
            simulated: None,
            selection: None,
        });
    }

    let floor = cfg.min_relevant.max(min_n).min(d.n());
    let selection = select(d, x0, cfg.similarity, cfg.alpha, cfg.gamma, floor)?;
    let relevant_data = d.select(&selection.indices);

    let relevant = if paths.relevant {
        let pi = conformal_interval(&Design::plain(&relevant_data), &reg, x0, &spec, streams.split)?;
        Some(pi.with_path(Path::Relevant))
    } else {
        None
    };

    let simulated = if paths.simulated {
        let controls = simulate_controls(d, &selection, cfg.noise_scale, cfg.control_mode, streams.controls)?;
        let design = controls.design(x0, streams.controls)?;
        let pi = conformal_interval(&design, &reg, x0, &spec, streams.split)?;
        Some(pi.with_path(Path::RelevantSimulated))
    } else {
        None
    };

    Ok(PathIntervals {
        standard,
        relevant,
        simulated,
        selection: Some(selection),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{gen_setting, gen_setting_query, SmallSetting};
    use crate::interval::{ConformalMethod, RegressorKind, Similarity};

    #[test]
    fn three_tagged_paths() {
        let d = gen_setting(SmallSetting::B, 120, 2);
        let q = gen_setting_query(SmallSetting::B, 2, 0);
        for method in ConformalMethod::ALL {
            let cfg = ExperimentConfig {
                conformal_method: *method,
                ..Default::default()
            };
            let out = run_all_paths(&d, &q, &cfg, 0).unwrap();
            let tags = [out.standard.path, out.relevant.path, out.simulated.path];
            assert_eq!(tags, [Path::Standard, Path::Relevant, Path::RelevantSimulated]);
            for pi in [out.standard, out.relevant, out.simulated] {
                assert!(pi.lo <= pi.up);
                assert_eq!(pi.conformal_method, *method);
            }
        }
    }

    #[test]
    fn truth_is_never_read() {
        let d = gen_setting(SmallSetting::C, 80, 4);
        let q = gen_setting_query(SmallSetting::C, 4, 0);
        for kind in RegressorKind::ALL {
            let cfg = ExperimentConfig {
                regressor: *kind,
                similarity: Similarity::Cosine,
                ..Default::default()
            };
            let with = run_all_paths(&d, &q, &cfg, 3).unwrap();
            let without = run_all_paths(&d, &q.without_truth(), &cfg, 3).unwrap();
            assert_eq!(with, without);
        }
    }

    #[test]
    fn disabling_paths_leaves_standard_alone() {
        let d = gen_setting(SmallSetting::A, 60, 8);
        let q = gen_setting_query(SmallSetting::A, 8, 0);
        let cfg = ExperimentConfig {
            regressor: RegressorKind::Lasso,
            ..Default::default()
        };
        let all = run_paths(&d, &q, &cfg, 1, PathSet::ALL).unwrap();
        let one = run_paths(&d, &q, &cfg, 1, PathSet::STANDARD_ONLY).unwrap();
        assert_eq!(all.standard, one.standard);
        assert!(one.relevant.is_none() && one.selection.is_none());
    }

    #[test]
    fn tiny_dataset_is_an_error() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], &[1.0, 2.0, 3.0]).unwrap();
        let cfg = ExperimentConfig::default();
        assert!(matches!(
            run_all_paths(&d, &Query::new(vec![1.5]), &cfg, 0),
            Err(Error::InsufficientData { .. })
        ));
    }
}
