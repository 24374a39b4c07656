//! C ABI for `icp-core`.
//!
//! Datasets are opaque handles created by `icp_dataset_new` or
//! `icp_dataset_load_csv` and released with `icp_dataset_free`. Every fallible
//! call returns an [`IcpStatus`]; on failure `icp_last_error_message` returns
//! a description that stays valid until the next failing call on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use icp_core::config::ExperimentConfig;
use icp_core::dataset::{Dataset, Query};
use icp_core::error::Error;
use icp_core::evaluate::score;
use icp_core::individualize::ControlMode;
use icp_core::interval::{ConformalMethod, Path, PredictionInterval, RegressorKind, Similarity};
use icp_core::pipeline::run_all_paths;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    DataError = 4,
    IoError = 5,
    Panic = 6,
}

pub const ICP_METHOD_FULL: i32 = 0;
pub const ICP_METHOD_SPLIT: i32 = 1;
pub const ICP_METHOD_JACKKNIFE: i32 = 2;

pub const ICP_REGRESSOR_OLS: i32 = 0;
pub const ICP_REGRESSOR_LASSO: i32 = 1;
pub const ICP_REGRESSOR_KERNEL: i32 = 2;

pub const ICP_SIMILARITY_PERCENTILE: i32 = 0;
pub const ICP_SIMILARITY_COSINE: i32 = 1;

pub const ICP_CONTROLS_PERTURB: i32 = 0;
pub const ICP_CONTROLS_GAUSSIAN_MIMIC: i32 = 1;

pub const ICP_PATH_STANDARD: i32 = 0;
pub const ICP_PATH_RELEVANT: i32 = 1;
pub const ICP_PATH_RELEVANT_SIMULATED: i32 = 2;

/// Opaque training set.
pub struct IcpDataset {
    inner: Dataset,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub noise_scale: f64,
    pub grid_expansion: f64,
    pub seed: u64,
    pub min_relevant: u32,
    pub grid_points: u32,
    pub lasso_folds: u32,
    /// One of the `ICP_METHOD_*` constants.
    pub method: i32,
    /// One of the `ICP_REGRESSOR_*` constants.
    pub regressor: i32,
    /// One of the `ICP_SIMILARITY_*` constants.
    pub similarity: i32,
    /// One of the `ICP_CONTROLS_*` constants.
    pub control_mode: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpInterval {
    pub point: f64,
    pub lo: f64,
    pub up: f64,
    /// One of the `ICP_PATH_*` constants.
    pub path: i32,
    pub method: i32,
    pub regressor: i32,
    /// Nonzero when full conformal accepted no trial value.
    pub degenerate: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpMetrics {
    pub a_dist: f64,
    /// Meaningful only when `b_defined` is nonzero.
    pub b_pct: f64,
    pub c_len: f64,
    /// Meaningful only when `d_defined` is nonzero.
    pub d_norm: f64,
    pub b_defined: i32,
    pub d_defined: i32,
    pub covered: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: IcpStatus, msg: impl Into<String>) -> IcpStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> IcpStatus {
    let status = match &e {
        Error::Config { .. } | Error::InvalidParameter { .. } => IcpStatus::ConfigError,
        Error::Io { .. } => IcpStatus::IoError,
        _ => IcpStatus::DataError,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> IcpStatus) -> IcpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(IcpStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn pick<T: Copy>(name: &str, v: i32, all: &[T]) -> Result<T, IcpStatus> {
    usize::try_from(v)
        .ok()
        .and_then(|i| all.get(i).copied())
        .ok_or_else(|| fail(IcpStatus::InvalidArgument, format!("unknown {name} code {v}")))
}

const METHODS: [ConformalMethod; 3] = [ConformalMethod::Full, ConformalMethod::Split, ConformalMethod::Jackknife];
const REGRESSORS: [RegressorKind; 3] = [RegressorKind::Ols, RegressorKind::Lasso, RegressorKind::Kernel];
const SIMILARITIES: [Similarity; 2] = [Similarity::Percentile, Similarity::Cosine];
const CONTROLS: [ControlMode; 2] = [ControlMode::Perturb, ControlMode::GaussianMimic];
const PATHS: [Path; 3] = [Path::Standard, Path::Relevant, Path::RelevantSimulated];

fn code_of<T: PartialEq>(v: T, all: &[T]) -> i32 {
    all.iter().position(|x| *x == v).expect("listed") as i32
}

impl IcpConfig {
    fn to_core(self) -> Result<ExperimentConfig, IcpStatus> {
        Ok(ExperimentConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            rho: self.rho,
            regressor: pick("regressor", self.regressor, &REGRESSORS)?,
            similarity: pick("similarity", self.similarity, &SIMILARITIES)?,
            conformal_method: pick("method", self.method, &METHODS)?,
            noise_scale: self.noise_scale,
            min_relevant: self.min_relevant as usize,
            seed: self.seed,
            control_mode: pick("control mode", self.control_mode, &CONTROLS)?,
            grid_points: self.grid_points as usize,
            grid_expansion: self.grid_expansion,
            lasso_folds: self.lasso_folds as usize,
        })
    }

    fn from_core(c: &ExperimentConfig) -> Self {
        IcpConfig {
            alpha: c.alpha,
            gamma: c.gamma,
            rho: c.rho,
            noise_scale: c.noise_scale,
            grid_expansion: c.grid_expansion,
            seed: c.seed,
            min_relevant: c.min_relevant as u32,
            grid_points: c.grid_points as u32,
            lasso_folds: c.lasso_folds as u32,
            method: code_of(c.conformal_method, &METHODS),
            regressor: code_of(c.regressor, &REGRESSORS),
            similarity: code_of(c.similarity, &SIMILARITIES),
            control_mode: code_of(c.control_mode, &CONTROLS),
        }
    }
}

impl IcpInterval {
    fn from_core(pi: &PredictionInterval) -> Self {
        IcpInterval {
            point: pi.point,
            lo: pi.lo,
            up: pi.up,
            path: code_of(pi.path, &PATHS),
            method: code_of(pi.conformal_method, &METHODS),
            regressor: code_of(pi.regressor, &REGRESSORS),
            degenerate: pi.degenerate as i32,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn icp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on this thread, or NULL.
#[no_mangle]
pub extern "C" fn icp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Fills `out` with the library defaults.
///
/// # Safety
/// `out` must be NULL or point to writable memory for one `IcpConfig`.
#[no_mangle]
pub unsafe extern "C" fn icp_config_default(out: *mut IcpConfig) -> IcpStatus {
    if out.is_null() {
        return fail(IcpStatus::NullPointer, "out is NULL");
    }
    out.write(IcpConfig::from_core(&ExperimentConfig::default()));
    IcpStatus::Ok
}

/// Copies a row-major `n × p` feature matrix and `n` heads into a new dataset.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles, and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn icp_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut IcpDataset,
) -> IcpStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out.is_null() {
            return fail(IcpStatus::NullPointer, "x, y and out must be non-NULL");
        }
        let Some(len) = n.checked_mul(p) else {
            return fail(IcpStatus::InvalidArgument, "n * p overflows");
        };
        let xs = std::slice::from_raw_parts(x, len);
        let ys = std::slice::from_raw_parts(y, n);
        let rows: Vec<Vec<f64>> = xs.chunks(p.max(1)).take(n).map(<[f64]>::to_vec).collect();
        match Dataset::from_rows(&rows, ys) {
            Ok(d) => {
                out.write(Box::into_raw(Box::new(IcpDataset { inner: d })));
                IcpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Loads a CSV file; `head` names the response column.
///
/// # Safety
/// `path` and `head` must be NUL-terminated strings; `out` a writable slot.
#[no_mangle]
pub unsafe extern "C" fn icp_dataset_load_csv(
    path: *const c_char,
    head: *const c_char,
    out: *mut *mut IcpDataset,
) -> IcpStatus {
    guard(|| {
        if path.is_null() || head.is_null() || out.is_null() {
            return fail(IcpStatus::NullPointer, "path, head and out must be non-NULL");
        }
        let (Ok(path), Ok(head)) = (CStr::from_ptr(path).to_str(), CStr::from_ptr(head).to_str()) else {
            return fail(IcpStatus::InvalidArgument, "strings must be UTF-8");
        };
        match Dataset::load_csv(path, head) {
            Ok(d) => {
                out.write(Box::into_raw(Box::new(IcpDataset { inner: d })));
                IcpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `d` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn icp_dataset_free(d: *mut IcpDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn icp_dataset_rows(d: *const IcpDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.n())
}

/// Number of feature columns, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn icp_dataset_cols(d: *const IcpDataset) -> usize {
    d.as_ref().map_or(0, |d| d.inner.p())
}

/// Computes the standard, relevant and relevant-plus-controls intervals for
/// the query `x0` (length `p`), written to `out[0..3]` in that order.
/// `n_relevant` may be NULL; otherwise it receives the selection size.
///
/// # Safety
/// `d` must be a live handle, `x0` must point to `p` doubles, `cfg` to one
/// config, `out` to three writable intervals.
#[no_mangle]
pub unsafe extern "C" fn icp_run(
    d: *const IcpDataset,
    x0: *const f64,
    p: usize,
    cfg: *const IcpConfig,
    query_index: u64,
    out: *mut IcpInterval,
    n_relevant: *mut usize,
) -> IcpStatus {
    guard(|| {
        if d.is_null() || x0.is_null() || cfg.is_null() || out.is_null() {
            return fail(IcpStatus::NullPointer, "d, x0, cfg and out must be non-NULL");
        }
        let config = match (*cfg).to_core() {
            Ok(c) => c,
            Err(s) => return s,
        };
        let q = Query::new(std::slice::from_raw_parts(x0, p).to_vec());
        match run_all_paths(&(*d).inner, &q, &config, query_index) {
            Ok(r) => {
                let all = [r.standard, r.relevant, r.simulated];
                for (k, pi) in all.iter().enumerate() {
                    out.add(k).write(IcpInterval::from_core(pi));
                }
                if !n_relevant.is_null() {
                    n_relevant.write(r.selection.len());
                }
                IcpStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Scores an interval against the realized head `y0`.
///
/// # Safety
/// `interval` must point to one interval and `out` to writable metrics.
#[no_mangle]
pub unsafe extern "C" fn icp_score(interval: *const IcpInterval, y0: f64, out: *mut IcpMetrics) -> IcpStatus {
    guard(|| {
        if interval.is_null() || out.is_null() {
            return fail(IcpStatus::NullPointer, "interval and out must be non-NULL");
        }
        if !y0.is_finite() {
            return fail(IcpStatus::InvalidArgument, "y0 must be finite");
        }
        let i = &*interval;
        let pi = PredictionInterval {
            point: i.point,
            lo: i.lo,
            up: i.up,
            path: Path::Standard,
            conformal_method: ConformalMethod::Split,
            regressor: RegressorKind::Ols,
            degenerate: i.degenerate != 0,
        };
        let m = score(&pi, y0);
        out.write(IcpMetrics {
            a_dist: m.a_dist,
            b_pct: m.b_pct.unwrap_or(f64::NAN),
            c_len: m.c_len,
            d_norm: m.d_norm.unwrap_or(f64::NAN),
            b_defined: m.b_pct.is_some() as i32,
            d_defined: m.d_norm.is_some() as i32,
            covered: m.covered as i32,
        });
        IcpStatus::Ok
    })
}
