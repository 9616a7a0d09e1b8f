use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use fourwire_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(fw_last_error()) }.to_string_lossy().into_owned()
}

fn fixture(name: &str) -> *mut FwNetwork {
    let mut net = ptr::null_mut();
    let st = unsafe { fw_network_fixture(c(name).as_ptr(), &mut net) };
    assert_eq!(st, FwStatus::Ok, "{}", last_error());
    net
}

#[test]
fn power_flow_round_trip() {
    let net = fixture("f1");
    let mut sol = ptr::null_mut();
    let st = unsafe { fw_solve(net, FwProblem::PowerFlow, FwForm::Ivr, FwModel::FourWire, ptr::null(), &mut sol) };
    assert_eq!(st, FwStatus::Ok, "{}", last_error());

    let mut status = FwSolveStatus::NumericalFailure;
    assert_eq!(unsafe { fw_solution_status(sol, &mut status) }, FwStatus::Ok);
    assert_eq!(status, FwSolveStatus::Optimal);

    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { fw_solution_voltage(sol, c("b1").as_ptr(), c("a").as_ptr(), &mut re, &mut im) }, FwStatus::Ok);
    let mag = re.hypot(im);
    assert!(mag > 200.0 && mag < 235.0, "|U_b1a| = {mag}");

    let st = unsafe { fw_solution_voltage(sol, c("b1").as_ptr(), c("x").as_ptr(), &mut re, &mut im) };
    assert_eq!(st, FwStatus::NotFound);
    assert!(last_error().contains("b1.x"));

    let mut js = ptr::null_mut();
    assert_eq!(unsafe { fw_solution_to_json(sol, &mut js) }, FwStatus::Ok);
    let text = unsafe { CStr::from_ptr(js) }.to_str().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["status"], "optimal");
    unsafe {
        fw_string_free(js);
        fw_solution_free(sol);
        fw_network_free(net);
    }
}

#[test]
fn opf_on_reduced_model() {
    let net = fixture("f1-opf");
    let mut sol = ptr::null_mut();
    let opts = c(r#"{"start": "no-load"}"#);
    let st = unsafe { fw_solve(net, FwProblem::OptimalPowerFlow, FwForm::Acr, FwModel::Kron, opts.as_ptr(), &mut sol) };
    assert_eq!(st, FwStatus::Ok, "{}", last_error());
    let (mut obj, mut iters) = (f64::NAN, 0usize);
    assert_eq!(unsafe { fw_solution_summary(sol, &mut obj, &mut iters) }, FwStatus::Ok);
    assert!(obj.is_finite() && iters > 0);
    unsafe {
        fw_solution_free(sol);
        fw_network_free(net);
    }
}

#[test]
fn json_round_trip_and_validation() {
    let net = fixture("f2");
    let mut js = ptr::null_mut();
    assert_eq!(unsafe { fw_network_to_json(net, &mut js) }, FwStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { fw_network_from_json(js, &mut back) }, FwStatus::Ok, "{}", last_error());
    let mut count = usize::MAX;
    assert_eq!(unsafe { fw_network_validate(back, &mut count) }, FwStatus::Ok);
    assert_eq!(count, 0);

    let mut reduced = ptr::null_mut();
    assert_eq!(unsafe { fw_network_reduce(back, FwModel::Balanced, &mut reduced) }, FwStatus::Ok, "{}", last_error());
    unsafe {
        fw_string_free(js);
        fw_network_free(reduced);
        fw_network_free(back);
        fw_network_free(net);
    }
}

#[test]
fn error_codes() {
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { fw_network_fixture(c("nope").as_ptr(), &mut net) }, FwStatus::NotFound);
    assert!(net.is_null());
    assert_eq!(unsafe { fw_network_fixture(ptr::null(), &mut net) }, FwStatus::NullPointer);
    assert_eq!(unsafe { fw_network_fixture(c("f1").as_ptr(), ptr::null_mut()) }, FwStatus::NullPointer);
    assert_eq!(unsafe { fw_network_from_json(c("{not json").as_ptr(), &mut net) }, FwStatus::Parse);
    assert!(!last_error().is_empty());

    let bad = [0xffu8, 0xfe, 0];
    assert_eq!(unsafe { fw_network_from_json(bad.as_ptr().cast(), &mut net) }, FwStatus::InvalidUtf8);

    let f1 = fixture("f1");
    let mut sol = ptr::null_mut();
    let opts = c(r#"{"no_such_key": 1}"#);
    let st = unsafe { fw_solve(f1, FwProblem::PowerFlow, FwForm::Ivr, FwModel::FourWire, opts.as_ptr(), &mut sol) };
    assert_eq!(st, FwStatus::Parse);
    assert!(sol.is_null());

    let mut status = FwSolveStatus::Optimal;
    assert_eq!(unsafe { fw_solution_status(ptr::null(), &mut status) }, FwStatus::NullPointer);
    unsafe {
        fw_network_free(f1);
        fw_network_free(ptr::null_mut());
        fw_solution_free(ptr::null_mut());
        fw_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_set() {
    let v = unsafe { CStr::from_ptr(fw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/fourwire.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["fw_solve", "fw_solution_voltage", "FW_STATUS_NOT_FOUND", "typedef struct FwNetwork FwNetwork"] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(cc) = which("cc") else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ FwNetwork *n = 0; FwStatus s = fw_network_fixture(\"f1\", &n); fw_network_free(n); return s == FW_STATUS_OK ? 0 : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for lang in ["c", "c++"] {
        let out = Command::new(&cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang]).arg(&src).output().unwrap();
        assert!(out.status.success(), "{lang}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn which(name: &str) -> Result<std::path::PathBuf, ()> {
    std::env::var_os("PATH")
        .and_then(|p| std::env::split_paths(&p).map(|d| d.join(name)).find(|p| p.is_file()))
        .ok_or(())
}
