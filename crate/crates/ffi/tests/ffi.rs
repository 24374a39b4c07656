use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use icp_ffi::*;

fn linear_data(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (i as f64, ((i * 7) % 5) as f64);
        x.extend([a, b]);
        y.push(1.0 + 0.5 * a - 0.25 * b + 0.1 * ((i * 3) % 4) as f64);
    }
    (x, y)
}

fn new_dataset(n: usize) -> *mut IcpDataset {
    let (x, y) = linear_data(n);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { icp_dataset_new(x.as_ptr(), y.as_ptr(), n, 2, &mut d) }, IcpStatus::Ok);
    d
}

fn last_error() -> String {
    let p = icp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(icp_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_matches_core() {
    let d = new_dataset(40);
    assert_eq!(unsafe { (icp_dataset_rows(d), icp_dataset_cols(d)) }, (40, 2));
    let mut cfg = unsafe { std::mem::zeroed::<IcpConfig>() };
    assert_eq!(unsafe { icp_config_default(&mut cfg) }, IcpStatus::Ok);
    cfg.min_relevant = 10;
    cfg.method = ICP_METHOD_JACKKNIFE;
    cfg.regressor = ICP_REGRESSOR_LASSO;
    let x0 = [12.0, 1.0];
    let mut out = [unsafe { std::mem::zeroed::<IcpInterval>() }; 3];
    let mut n_rel = 0usize;
    let status = unsafe { icp_run(d, x0.as_ptr(), 2, &cfg, 4, out.as_mut_ptr(), &mut n_rel) };
    assert_eq!(status, IcpStatus::Ok);

    let (x, y) = linear_data(40);
    let rows: Vec<Vec<f64>> = x.chunks(2).map(<[f64]>::to_vec).collect();
    let data = icp_core::dataset::Dataset::from_rows(&rows, &y).unwrap();
    let core_cfg = icp_core::config::ExperimentConfig {
        min_relevant: 10,
        conformal_method: icp_core::interval::ConformalMethod::Jackknife,
        regressor: icp_core::interval::RegressorKind::Lasso,
        ..Default::default()
    };
    let want = icp_core::pipeline::run_all_paths(&data, &icp_core::dataset::Query::new(x0.to_vec()), &core_cfg, 4).unwrap();
    for (got, want) in out.iter().zip([want.standard, want.relevant, want.simulated]) {
        assert_eq!((got.point, got.lo, got.up), (want.point, want.lo, want.up));
        assert_eq!(got.method, ICP_METHOD_JACKKNIFE);
        assert_eq!(got.regressor, ICP_REGRESSOR_LASSO);
    }
    assert_eq!([out[0].path, out[1].path, out[2].path], [ICP_PATH_STANDARD, ICP_PATH_RELEVANT, ICP_PATH_RELEVANT_SIMULATED]);
    assert_eq!(n_rel, want.selection.len());
    unsafe { icp_dataset_free(d) };
}

#[test]
fn error_codes() {
    let d = new_dataset(30);
    let mut cfg = unsafe { std::mem::zeroed::<IcpConfig>() };
    unsafe { icp_config_default(&mut cfg) };
    let mut out = [unsafe { std::mem::zeroed::<IcpInterval>() }; 3];
    let x0 = [1.0, 1.0];

    let run = |cfg: &IcpConfig, p: usize, out: &mut [IcpInterval; 3]| unsafe {
        icp_run(d, x0.as_ptr(), p, cfg, 0, out.as_mut_ptr(), ptr::null_mut())
    };
    let mut bad = cfg;
    bad.alpha = 1.5;
    assert_eq!(run(&bad, 2, &mut out), IcpStatus::ConfigError);
    assert!(last_error().contains("alpha"));

    let mut bad = cfg;
    bad.regressor = 9;
    assert_eq!(run(&bad, 2, &mut out), IcpStatus::InvalidArgument);

    assert_eq!(run(&cfg, 3, &mut out), IcpStatus::DataError);
    assert!(last_error().contains("dimension"));

    assert_eq!(
        unsafe { icp_run(ptr::null(), x0.as_ptr(), 2, &cfg, 0, out.as_mut_ptr(), ptr::null_mut()) },
        IcpStatus::NullPointer
    );
    assert_eq!(unsafe { icp_config_default(ptr::null_mut()) }, IcpStatus::NullPointer);

    let nan = [f64::NAN, 1.0];
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { icp_dataset_new(nan.as_ptr(), [1.0].as_ptr(), 1, 2, &mut h) }, IcpStatus::DataError);
    assert!(h.is_null());

    unsafe {
        icp_dataset_free(d);
        icp_dataset_free(ptr::null_mut());
        assert_eq!(icp_dataset_rows(ptr::null()), 0);
    }
}

#[test]
fn csv_loading() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    std::fs::write(&path, "# note\ny,a,b\n1,2,3\n4,5,6\n7,8,10\n").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    let head = CString::new("y").unwrap();
    assert_eq!(unsafe { icp_dataset_load_csv(p.as_ptr(), head.as_ptr(), &mut d) }, IcpStatus::Ok);
    assert_eq!(unsafe { (icp_dataset_rows(d), icp_dataset_cols(d)) }, (3, 2));
    unsafe { icp_dataset_free(d) };

    let missing = CString::new(dir.path().join("none.csv").to_str().unwrap()).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { icp_dataset_load_csv(missing.as_ptr(), head.as_ptr(), &mut d) }, IcpStatus::IoError);
    let other = CString::new("z").unwrap();
    assert_eq!(unsafe { icp_dataset_load_csv(p.as_ptr(), other.as_ptr(), &mut d) }, IcpStatus::DataError);
}

#[test]
fn scoring() {
    let i = IcpInterval {
        point: 2.59,
        lo: 1.36,
        up: 3.8,
        path: ICP_PATH_STANDARD,
        method: ICP_METHOD_FULL,
        regressor: ICP_REGRESSOR_OLS,
        degenerate: 0,
    };
    let mut m = unsafe { std::mem::zeroed::<IcpMetrics>() };
    assert_eq!(unsafe { icp_score(&i, 2.05, &mut m) }, IcpStatus::Ok);
    assert!((m.a_dist - 0.54).abs() < 1e-10 && (m.c_len - 2.44).abs() < 1e-10);
    assert_eq!((m.covered, m.b_defined, m.d_defined), (1, 1, 1));
    assert_eq!(unsafe { icp_score(&i, 0.0, &mut m) }, IcpStatus::Ok);
    assert_eq!(m.b_defined, 0);
    assert_eq!(unsafe { icp_score(&i, f64::INFINITY, &mut m) }, IcpStatus::InvalidArgument);
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header_dir().join("icp.h")).unwrap();
    for name in [
        "icp_version", "icp_last_error_message", "icp_config_default", "icp_dataset_new", "icp_dataset_load_csv",
        "icp_dataset_free", "icp_dataset_rows", "icp_dataset_cols", "icp_run", "icp_score",
        "typedef struct IcpDataset IcpDataset", "ICP_STATUS_CONFIG_ERROR",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the static library when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libicp_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/c/smoke.c");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
