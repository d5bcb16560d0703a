use std::ffi::CStr;
use std::ptr;

use gmeasure_ffi::*;

fn table1() -> *mut GmGFunction {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gm_gfunction_new_binary_markov(0.3, 0.6, &mut g) }, GmStatus::Ok);
    g
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(gm_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn handle_round_trip() {
    let g = table1();
    let mut v = 0.0;
    // g(1 . 0) = P(1 | 0)
    assert_eq!(unsafe { gm_gfunction_eval(g, [1usize, 0].as_ptr(), 2, &mut v) }, GmStatus::Ok);
    assert!((v - 0.6).abs() < 1e-15);
    assert_eq!(unsafe { gm_gfunction_variation(g, 1, &mut v) }, GmStatus::Ok);
    assert!((v - 2f64.ln()).abs() < 1e-15);
    let mut rec = GmRhoRecord::default();
    assert_eq!(unsafe { gm_rho_block(g, 0, 1, &mut rec) }, GmStatus::Ok);
    assert!((rec.exact + 0.7f64.ln()).abs() < 1e-12);
    assert!(rec.exact <= rec.bound_log && rec.bound_log <= rec.bound_sqrt);
    assert_eq!(rec.attained, 1);
    assert_eq!(unsafe { gm_h_block(g, 0, 1, &mut v) }, GmStatus::Ok);
    assert!((v - rec.h).abs() < 1e-15);
    unsafe { gm_gfunction_free(g) };
    unsafe { gm_gfunction_free(ptr::null_mut()) };
}

#[test]
fn table_layout_matches_binary_markov() {
    // rows: history 0 then history 1, entries g(0 . h), g(1 . h)
    let values = [0.4, 0.6, 0.7, 0.3];
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { gm_gfunction_new_table(2, 1, values.as_ptr(), 4, &mut g) }, GmStatus::Ok);
    let t1 = table1();
    for w in [[0usize, 0], [0, 1], [1, 0], [1, 1]] {
        let (mut a, mut b) = (0.0, 0.0);
        unsafe {
            gm_gfunction_eval(g, w.as_ptr(), 2, &mut a);
            gm_gfunction_eval(t1, w.as_ptr(), 2, &mut b);
        }
        assert_eq!(a, b);
    }
    unsafe {
        gm_gfunction_free(g);
        gm_gfunction_free(t1);
    }
}

#[test]
fn pair_functions() {
    let b = [1usize, 1];
    let r = [2f64.ln(), 2f64.ln()];
    let mut v = 0.0;
    assert_eq!(unsafe { gm_delta_bar(b.as_ptr(), r.as_ptr(), 2, &mut v) }, GmStatus::Ok);
    assert!((v - 7.0 / 6.0).abs() < 1e-15);
    assert_eq!(unsafe { gm_renewal_limit(b.as_ptr(), r.as_ptr(), 2, &mut v) }, GmStatus::Ok);
    assert!((v - 7.0 / 6.0).abs() < 1e-12);
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    unsafe {
        gm_simulate_y_frequency(b.as_ptr(), r.as_ptr(), 1, 100_000, 9, &mut f1);
        gm_simulate_y_frequency(b.as_ptr(), r.as_ptr(), 1, 100_000, 9, &mut f2);
    }
    assert_eq!(f1, f2);
    assert!((f1 - 0.75).abs() < 0.01);
}

#[test]
fn wasserstein_point_masses() {
    let mu = [1.0, 0.0, 0.0, 0.0];
    let nu = [0.0, 1.0, 0.0, 0.0];
    let mut v = 0.0;
    assert_eq!(unsafe { gm_wasserstein_ultra(2, 2, mu.as_ptr(), nu.as_ptr(), 4, &mut v) }, GmStatus::Ok);
    // words 00 and 01 agree in one coordinate
    assert!((v - 0.5).abs() < 1e-15);
}

#[test]
fn errors_are_reported() {
    let mut g = ptr::null_mut();
    let bad = [0.5, 0.6];
    assert_eq!(unsafe { gm_gfunction_new_table(2, 0, bad.as_ptr(), 2, &mut g) }, GmStatus::InvalidInput);
    assert!(g.is_null());
    assert!(last_error().contains("invalid input"));
    assert_eq!(unsafe { gm_gfunction_new_table(2, 1, bad.as_ptr(), 2, &mut g) }, GmStatus::InvalidInput);
    let mut v = 0.0;
    assert_eq!(unsafe { gm_gfunction_variation(ptr::null(), 0, &mut v) }, GmStatus::NullPointer);
    assert!(last_error().contains("null pointer"));
    assert_eq!(unsafe { gm_delta_bar(ptr::null(), ptr::null(), 0, &mut v) }, GmStatus::InvalidInput);
    let t1 = table1();
    assert_eq!(unsafe { gm_gfunction_eval(t1, [2usize, 0].as_ptr(), 2, &mut v) }, GmStatus::InvalidInput);
    unsafe { gm_gfunction_free(t1) };
    let version = unsafe { CStr::from_ptr(gm_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gmeasure.h")).unwrap();
    for name in [
        "typedef struct GmGFunction GmGFunction;",
        "GM_STATUS_PANIC = 4",
        "gm_gfunction_new_table",
        "gm_gfunction_new_logistic",
        "gm_gfunction_free",
        "gm_rho_block",
        "gm_delta_bar",
        "gm_simulate_y_frequency",
        "gm_wasserstein_ultra",
        "gm_last_error_message",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        return;
    };
    if !cc.status.success() {
        return;
    }
    let src = std::env::temp_dir().join(format!("gmeasure-header-{}.c", std::process::id()));
    std::fs::write(
        &src,
        "#include \"gmeasure.h\"\nint main(void) { GmGFunction *g = 0; GmStatus s = gm_gfunction_new_binary_markov(0.3, 0.6, &g); return (int)s; }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .output()
        .unwrap();
    let _ = std::fs::remove_file(&src);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
