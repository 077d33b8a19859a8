use std::ffi::{CStr, CString};
use std::ptr;

use branchflow_ffi::*;

fn last_error() -> String {
    let p = bf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn law_pgf_and_mean() {
    let probs = [0.5, 0.0, 0.5];
    let mut law = ptr::null_mut();
    unsafe {
        assert_eq!(bf_law_new(probs.as_ptr(), 3, &mut law), BfStatus::BfOk);
        let mut v = 0.0;
        assert_eq!(bf_law_pgf(law, 0.5, &mut v), BfStatus::BfOk);
        assert!((v - 0.625).abs() < 1e-15);
        assert_eq!(bf_law_mean(law, &mut v), BfStatus::BfOk);
        assert_eq!(v, 1.0);
        assert_eq!(bf_law_pgf(law, 1.5, &mut v), BfStatus::BfDomain);
        assert!(last_error().contains("domain"));
        bf_law_free(law);
    }
}

#[test]
fn bad_inputs_map_to_codes() {
    let probs = [0.5, 0.6];
    let mut law = ptr::null_mut();
    unsafe {
        assert_ne!(bf_law_new(probs.as_ptr(), 2, &mut law), BfStatus::BfOk);
        assert!(law.is_null());
        assert_eq!(bf_law_new(ptr::null(), 2, &mut law), BfStatus::BfNullPointer);
        assert!(last_error().contains("probs"));
        let name = CString::new("nope").unwrap();
        let mut fam = ptr::null_mut();
        assert_eq!(bf_family_from_catalog(name.as_ptr(), &mut fam), BfStatus::BfInput);
        bf_law_free(ptr::null_mut());
        bf_path_free(ptr::null_mut());
    }
}

#[test]
fn family_and_discretization() {
    let name = CString::new("feller").unwrap();
    let mut fam = ptr::null_mut();
    unsafe {
        assert_eq!(bf_family_from_catalog(name.as_ptr(), &mut fam), BfStatus::BfOk);
        let mut v = 0.0;
        assert_eq!(bf_family_phi_theta(fam, 0.5, 2.0, &mut v), BfStatus::BfOk);
        assert!((v - 2.0).abs() < 1e-12);

        let mut disc = ptr::null_mut();
        let mut sigma = 0.0;
        assert_eq!(bf_discrete_family_build(fam, 100, &mut disc, &mut sigma), BfStatus::BfOk);
        assert!(sigma > 0.0);
        let mut d = 0.0;
        assert_eq!(bf_discrete_mechanism(disc, 1.0, 1.0, &mut d), BfStatus::BfOk);
        assert!((d - 0.5).abs() < 0.01, "{d}");

        let mut law = ptr::null_mut();
        assert_eq!(bf_discrete_law_at(disc, 100.0, &mut law), BfStatus::BfOk);
        let mut m = 0.0;
        bf_law_mean(law, &mut m);
        assert!((m - 1.0).abs() < 1e-12);

        let mut cb = 0.0;
        assert_eq!(bf_solve_cb_cumulant(fam, 1.0, 1.0, 1.0, 0.0, &mut cb), BfStatus::BfOk);
        assert!((cb - 2.0 / 3.0).abs() < 1e-9);
        let levels = [0.5, 1.0];
        let lambdas = [0.0, 1.0];
        let mut vals = [0.0; 2];
        assert_eq!(
            bf_solve_nonlocal_step(fam, levels.as_ptr(), lambdas.as_ptr(), 2, 200, 1.0, 0.0, vals.as_mut_ptr()),
            BfStatus::BfOk
        );
        assert!((vals[0] - cb).abs() < 1e-9 && (vals[1] - cb).abs() < 1e-9);

        bf_law_free(law);
        bf_discrete_family_free(disc);
        bf_family_free(fam);
    }
}

#[test]
fn simulate_save_load_verify() {
    let name = CString::new("nonlocal").unwrap();
    let mut fam = ptr::null_mut();
    let mut disc = ptr::null_mut();
    let mut path = ptr::null_mut();
    let levels = [0.5, 1.0];
    let x0 = [10u64, 20];
    let dir = tempfile::tempdir().unwrap();
    let file = CString::new(dir.path().join("p.path").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(bf_family_from_catalog(name.as_ptr(), &mut fam), BfStatus::BfOk);
        assert_eq!(bf_discrete_family_build(fam, 20, &mut disc, ptr::null_mut()), BfStatus::BfOk);
        assert_eq!(
            bf_simulate_flow(disc, levels.as_ptr(), x0.as_ptr(), 2, 0.5, 3, 0, &mut path),
            BfStatus::BfOk
        );
        assert_eq!(bf_path_num_levels(path), 2);
        let mut ok = false;
        assert_eq!(bf_path_verify(path, &mut ok), BfStatus::BfOk);
        assert!(ok);
        let mut start = [0u64; 2];
        assert_eq!(bf_path_counts_at(path, 0.0, start.as_mut_ptr(), 2), BfStatus::BfOk);
        assert!(start[0] <= start[1]);
        assert_eq!(bf_path_counts_at(path, 0.0, start.as_mut_ptr(), 3), BfStatus::BfGridMismatch);

        assert_eq!(bf_path_save(path, file.as_ptr()), BfStatus::BfOk);
        let mut back = ptr::null_mut();
        assert_eq!(bf_path_load(file.as_ptr(), &mut back), BfStatus::BfOk);
        assert_eq!(bf_path_num_events(back), bf_path_num_events(path));
        let (mut a, mut b) = ([0u64; 2], [0u64; 2]);
        bf_path_counts_at(path, 0.5, a.as_mut_ptr(), 2);
        bf_path_counts_at(back, 0.5, b.as_mut_ptr(), 2);
        assert_eq!(a, b);

        let missing = CString::new(dir.path().join("none").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(bf_path_load(missing.as_ptr(), &mut none), BfStatus::BfIo);

        bf_path_free(back);
        bf_path_free(path);
        bf_discrete_family_free(disc);
        bf_family_free(fam);
    }
}

#[test]
fn single_process_and_pgf_ode() {
    let probs = [0.5, 0.0, 0.5];
    let mut law = ptr::null_mut();
    let mut path = ptr::null_mut();
    unsafe {
        bf_law_new(probs.as_ptr(), 3, &mut law);
        assert_eq!(bf_simulate_single(law, 1.0, 5, 1.0, 11, 2, &mut path), BfStatus::BfOk);
        assert_eq!(bf_path_num_levels(path), 1);
        let mut v = 0.0;
        assert_eq!(bf_solve_pgf_ode(law, 1.0, 2.0, 0.0, 0.0, &mut v), BfStatus::BfOk);
        // Critical binary splitting: P(X_t = 0) = t / (2 + t) at rate 1.
        assert!((v - 0.5).abs() < 1e-9);
        bf_path_free(path);
        bf_law_free(law);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/branchflow.h");
    let source = include_str!("../src/lib.rs");
    let exports: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let version = unsafe { CStr::from_ptr(bf_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/branchflow.h");
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .status()
    else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(status.success());
}
