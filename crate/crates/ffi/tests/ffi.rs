use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use fsn_ffi::*;

fn last_error() -> String {
    let p = fsn_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn duopoly(lambda: f64) -> *mut FsnGame {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { fsn_game_duopoly(lambda, &mut g) }, FsnStatus::Ok);
    g
}

#[test]
fn duopoly_round_trip() {
    unsafe {
        let g = duopoly(0.1);
        let (mut n, mut k) = (0, 0);
        assert_eq!(fsn_game_dims(g, &mut n, &mut k), FsnStatus::Ok);
        assert_eq!((n, k), (4, 14));

        let mut o = ptr::null_mut();
        assert_eq!(fsn_solve(g, &mut o), FsnStatus::Ok);
        assert!(fsn_outcome_verified(o));
        let mut j = [0.0; 2];
        assert_eq!(fsn_outcome_costs(o, j.as_mut_ptr()), FsnStatus::Ok);
        assert!((j[0] + 35.2466).abs() < 1e-3 && (j[1] + 31.4820).abs() < 1e-3);

        let mut buf = [0.0; 4];
        let mut written = 0;
        assert_eq!(fsn_outcome_series(o, FsnSeries::State as u32, 0, buf.as_mut_ptr(), 4, &mut written), FsnStatus::Ok);
        assert_eq!((written, buf), (4, [5.0, 5.0, 4.0, 4.0]));
        assert_eq!(
            fsn_outcome_series(o, FsnSeries::Simultaneous as u32, 0, buf.as_mut_ptr(), 4, &mut written),
            FsnStatus::Ok
        );
        assert_eq!(written, 2);
        assert!((buf[0] - 8.0 / 3.0).abs() < 1e-9);
        assert_eq!(
            fsn_outcome_series(o, FsnSeries::LeaderControl as u32, 14, buf.as_mut_ptr(), 4, &mut written),
            FsnStatus::OutOfRange
        );
        assert_eq!(fsn_outcome_series(o, 99, 0, buf.as_mut_ptr(), 4, &mut written), FsnStatus::OutOfRange);
        assert_eq!(
            fsn_outcome_series(o, FsnSeries::State as u32, 0, buf.as_mut_ptr(), 2, &mut written),
            FsnStatus::OutOfRange
        );
        assert!(last_error().contains("buffer"));

        let mut js = ptr::null_mut();
        assert_eq!(fsn_outcome_to_json(o, &mut js), FsnStatus::Ok);
        let mut passed = false;
        assert_eq!(fsn_verify_json(g, js, &mut passed), FsnStatus::Ok);
        assert!(passed);

        // perturb the leader's first feedforward term
        let text = CStr::from_ptr(js).to_str().unwrap().to_owned();
        fsn_string_free(js);
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let f = doc["gains"][0]["F"][0][0].as_f64().unwrap();
        doc["gains"][0]["F"][0][0] = (f + 1e-3).into();
        let bad = CString::new(doc.to_string()).unwrap();
        assert_eq!(fsn_verify_json(g, bad.as_ptr(), &mut passed), FsnStatus::VerificationFailed);
        assert!(!passed);
        assert!(last_error().contains("foc_leader"));

        fsn_outcome_free(o);
        fsn_game_free(g);
    }
}

#[test]
fn invalid_inputs_report_status_and_message() {
    unsafe {
        let mut g = ptr::null_mut();
        let bad = CString::new("{\"dims\": 1").unwrap();
        assert_eq!(fsn_game_from_json(bad.as_ptr(), &mut g), FsnStatus::InvalidInput);
        assert!(g.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(fsn_game_from_json(ptr::null(), &mut g), FsnStatus::NullPointer);
        assert_eq!(fsn_game_duopoly(1.5, &mut g), FsnStatus::InvalidInput);
        assert!(last_error().contains("spillover"));
        assert_eq!(fsn_solve(ptr::null(), &mut ptr::null_mut()), FsnStatus::NullPointer);
        assert!(!fsn_outcome_verified(ptr::null()));

        // null handles are accepted by the release functions
        fsn_game_free(ptr::null_mut());
        fsn_outcome_free(ptr::null_mut());
        fsn_string_free(ptr::null_mut());
    }
}

#[test]
fn json_game_with_flat_simultaneous_costs_is_rejected() {
    let spec = fsn_core::duopoly::build_duopoly_spec(&Default::default()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&spec.to_json_string()).unwrap();
    for st in doc["stages"].as_array_mut().unwrap() {
        for pl in st["players"].as_array_mut().unwrap() {
            pl["D"] = serde_json::json!([[0.0, 0.0], [0.0, 0.0]]);
        }
    }
    let text = CString::new(doc.to_string()).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { fsn_game_from_json(text.as_ptr(), &mut g) }, FsnStatus::InvalidInput);
    assert!(last_error().contains("positive definite"));
}

#[test]
fn infeasible_first_stage() {
    let spec = fsn_core::duopoly::build_duopoly_spec(&Default::default()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&spec.to_json_string()).unwrap();
    doc["stages"][0]["players"][1]["r"] = serde_json::json!([-50.0]);
    let text = CString::new(doc.to_string()).unwrap();
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(fsn_game_from_json(text.as_ptr(), &mut g), FsnStatus::Ok);
        let mut o = ptr::null_mut();
        assert_eq!(fsn_solve(g, &mut o), FsnStatus::Infeasible);
        assert!(o.is_null());
        assert!(last_error().contains("stage 0"));
        fsn_game_free(g);
    }
}

#[test]
fn lcp_entry_point() {
    let m = [2.0, 1.0, 1.0, 2.0];
    let q = [-5.0, -6.0];
    let mut z = [0.0; 2];
    let mut pivots = 0;
    unsafe {
        assert_eq!(fsn_lcp_solve(2, m.as_ptr(), q.as_ptr(), z.as_mut_ptr(), &mut pivots), FsnStatus::Ok);
    }
    // interior solution of Mz = -q
    assert!((z[0] - 4.0 / 3.0).abs() < 1e-12 && (z[1] - 7.0 / 3.0).abs() < 1e-12);
    assert!(pivots > 0);

    // w = -z - 1 is negative for every z ≥ 0
    let m = [-1.0];
    let q = [-1.0];
    let mut z = [0.0];
    let status = unsafe { fsn_lcp_solve(1, m.as_ptr(), q.as_ptr(), z.as_mut_ptr(), &mut pivots) };
    assert_eq!(status, FsnStatus::Infeasible);
}

fn target_dir() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("fsn.h")).unwrap();
    for name in ["fsn_solve", "fsn_lcp_solve", "fsn_last_error_message", "typedef struct FsnGame FsnGame"] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let lib = target_dir().join("libfsn_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link test: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "fsn.h"
int main(void) {
    FsnGame *g = NULL;
    FsnOutcome *o = NULL;
    double j[2];
    if (fsn_game_duopoly(0.4, &g) != FSN_STATUS_OK) return 10;
    if (fsn_solve(g, &o) != FSN_STATUS_OK) return 11;
    if (fsn_outcome_costs(o, j) != FSN_STATUS_OK) return 12;
    printf("%.4f %.4f\n", j[0], j[1]);
    fsn_outcome_free(o);
    fsn_game_free(g);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "C program exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "-135.0391 -143.6161");
}
