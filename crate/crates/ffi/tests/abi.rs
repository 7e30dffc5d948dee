use kinetic_harris_ffi::*;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

const SCENARIO: &str = r#"
scenario = "torus-bgk"
dim = 1
particles = 2000
t_final = 1.0
seed = 3

[initial]
law = "dirac"
x = [0.5]
v = [1.0]

[snapshots]
count = 4
"#;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; kh_last_error_length() + 1];
    assert_eq!(
        unsafe { kh_last_error_message(buf.as_mut_ptr(), buf.len()) },
        KhStatus::Ok
    );
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn scenario(text: &str) -> *mut KhScenario {
    let c = CString::new(text).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { kh_scenario_from_toml(c.as_ptr(), &mut s) },
        KhStatus::Ok,
        "{}",
        last_error()
    );
    s
}

fn take_string(p: *mut c_char) -> String {
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { kh_string_free(p) };
    s
}

#[test]
fn null_arguments_are_reported() {
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { kh_scenario_from_toml(ptr::null(), &mut s) },
        KhStatus::NullPointer
    );
    assert!(s.is_null());
    assert!(last_error().contains("toml"));
    let mut dim = 0;
    let mut n = 0;
    assert_eq!(
        unsafe { kh_scenario_shape(ptr::null(), &mut dim, &mut n) },
        KhStatus::NullPointer
    );
    unsafe {
        kh_scenario_free(ptr::null_mut());
        kh_run_free(ptr::null_mut());
        kh_string_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_carry_field_messages() {
    let bad = SCENARIO.replace("dim = 1", "dim = 7");
    let c = CString::new(bad).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { kh_scenario_from_toml(c.as_ptr(), &mut s) }, KhStatus::Config);
    assert!(s.is_null());
    assert!(last_error().contains("dim"), "{}", last_error());
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes = [0xffu8, 0xfe, 0];
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { kh_scenario_from_toml(bytes.as_ptr().cast(), &mut s) },
        KhStatus::InvalidUtf8
    );
}

#[test]
fn error_buffer_too_small() {
    let mut s = ptr::null_mut();
    unsafe { kh_scenario_from_toml(ptr::null(), &mut s) };
    let mut buf = [0 as c_char; 2];
    assert_eq!(
        unsafe { kh_last_error_message(buf.as_mut_ptr(), 2) },
        KhStatus::BufferTooSmall
    );
}

#[test]
fn success_clears_the_error() {
    let mut s = ptr::null_mut();
    unsafe { kh_scenario_from_toml(ptr::null(), &mut s) };
    assert!(kh_last_error_length() > 0);
    let s = scenario(SCENARIO);
    assert_eq!(kh_last_error_length(), 0);
    unsafe { kh_scenario_free(s) };
}

#[test]
fn validate_and_certificate() {
    let s = scenario(SCENARIO);
    let mut passed: c_int = 0;
    let mut report = ptr::null_mut();
    assert_eq!(
        unsafe { kh_scenario_validate(s, &mut passed, &mut report) },
        KhStatus::Ok
    );
    assert_eq!(passed, 1);
    assert!(take_string(report).contains("PASS binning"));

    let mut c = ptr::null_mut();
    assert_eq!(
        unsafe { kh_certificate_new(s, &mut c) },
        KhStatus::Ok,
        "{}",
        last_error()
    );
    let mut kind = KhRateKind::AlgebraicExponent;
    let mut value = 0.0;
    assert_eq!(unsafe { kh_certificate_rate(c, &mut kind, &mut value) }, KhStatus::Ok);
    assert_eq!(kind, KhRateKind::LnRate);
    // Optimised torus BGK rate in d = 1 is about 9.57e-5.
    assert!((value.exp() / 9.57e-5 - 1.0).abs() < 0.01, "{}", value.exp());
    let mut audit = ptr::null_mut();
    assert_eq!(unsafe { kh_certificate_audit(c, &mut audit) }, KhStatus::Ok);
    assert!(take_string(audit).contains("t_star = "));
    unsafe {
        kh_certificate_free(c);
        kh_scenario_free(s);
    }
}

#[test]
fn doeblin_rate_matches_closed_form() {
    let (mut rate, mut pre) = (0.0, 0.0);
    assert_eq!(unsafe { kh_doeblin_rate(2.0, 0.5, &mut rate, &mut pre) }, KhStatus::Ok);
    assert!((rate - 2f64.ln() / 2.0).abs() < 1e-15);
    assert!((pre - 2.0).abs() < 1e-15);
    assert_eq!(
        unsafe { kh_doeblin_rate(2.0, 1.5, &mut rate, &mut pre) },
        KhStatus::Runtime
    );
}

#[test]
fn run_rows_match_csv() {
    let s = scenario(SCENARIO);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { kh_run(s, &mut r) }, KhStatus::Ok, "{}", last_error());
    let mut n = 0;
    assert_eq!(unsafe { kh_run_len(r, &mut n) }, KhStatus::Ok);
    assert!(n >= 4);
    let mut csv = ptr::null_mut();
    assert_eq!(unsafe { kh_run_csv(r, &mut csv) }, KhStatus::Ok);
    let csv = take_string(csv);
    let lines: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(lines.len(), n);
    for (i, line) in lines.iter().enumerate() {
        let mut row = KhRow::default();
        assert_eq!(unsafe { kh_run_row(r, i, &mut row) }, KhStatus::Ok);
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(
            cols,
            vec![row.t, row.tv, row.tv_stderr, row.wtv, row.wtv_stderr, row.bound]
        );
        assert!(row.tv_floor >= 0.0 && row.tv <= 2.0);
    }
    let mut row = KhRow::default();
    assert_eq!(unsafe { kh_run_row(r, n, &mut row) }, KhStatus::OutOfRange);
    let mut code = -1;
    assert_eq!(unsafe { kh_run_exit_code(r, &mut code) }, KhStatus::Ok);
    assert_eq!(code, 0);
    unsafe {
        kh_run_free(r);
        kh_scenario_free(s);
    }
}

#[test]
fn ensemble_advances_and_copies_state() {
    let s = scenario(SCENARIO);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { kh_ensemble_new(s, &mut e) }, KhStatus::Ok, "{}", last_error());
    let mut x = vec![0.0; 2000];
    let mut v = vec![0.0; 2000];
    assert_eq!(
        unsafe { kh_ensemble_state(e, x.as_mut_ptr(), v.as_mut_ptr(), 1999) },
        KhStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { kh_ensemble_state(e, x.as_mut_ptr(), v.as_mut_ptr(), 2000) },
        KhStatus::Ok
    );
    assert!(x.iter().all(|&xi| xi == 0.5) && v.iter().all(|&vi| vi == 1.0));

    assert_eq!(unsafe { kh_ensemble_advance(e, 2.0) }, KhStatus::Ok);
    let mut t = 0.0;
    assert_eq!(unsafe { kh_ensemble_time(e, &mut t) }, KhStatus::Ok);
    assert_eq!(t, 2.0);
    assert_eq!(
        unsafe { kh_ensemble_state(e, x.as_mut_ptr(), v.as_mut_ptr(), 2000) },
        KhStatus::Ok
    );
    assert!(x.iter().all(|&xi| (0.0..1.0).contains(&xi)));
    // Rate-1 BGK: a fraction e^{-2} keeps its initial velocity.
    let kept = v.iter().filter(|&&vi| vi == 1.0).count() as f64 / 2000.0;
    assert!((kept - (-2f64).exp()).abs() < 0.04, "{kept}");
    assert_eq!(unsafe { kh_ensemble_advance(e, 1.0) }, KhStatus::Runtime);
    unsafe {
        kh_ensemble_free(e);
        kh_scenario_free(s);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps/<test-binary>.
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

fn have_cc() -> bool {
    Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn header_is_valid_c() {
    if !have_cc() {
        eprintln!("cc not found; header check skipped");
        return;
    }
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/kinetic_harris.h");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-x", "c"])
        .arg(&header)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("cc not found; link check skipped");
        return;
    }
    let lib = target_dir().join("libkinetic_harris_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let bin = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("kh_smoke");
    let out = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("out of range"), "{stdout}");
}
