use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;

use toffoli_distill_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(td_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scalar_calls() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(td_alpha3_decoherent(8, 0.05, &mut x), TdStatus::Ok);
        assert!((x - 0.398145).abs() < 1e-6);
        assert_eq!(td_fidelity_after(0.5, 3, &mut x), TdStatus::Ok);
        assert!((x - 3.0 / (3.0 + 0.5f64.powi(8))).abs() < 1e-15);
        assert_eq!(td_success_probability(0.0, 0.0, &mut x), TdStatus::Ok);
        assert!((x - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(td_expected_ops(3, 0.25, 0.0, &mut x), TdStatus::Ok);
        assert_eq!(x, 512.0);
        assert_eq!(
            td_block_failure(-3.0, 1000.0, 1e-2, 1.0, 2f64.ln() / 9f64.ln(), &mut x),
            TdStatus::Ok
        );
        assert!((x + 8.8388).abs() < 1e-3);
        let mut r = 0u64;
        assert_eq!(td_majority_repeats(1e-9, 1e-2, &mut r), TdStatus::Ok);
        assert_eq!(r, 5);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut x = 0.0;
    unsafe {
        assert_eq!(
            td_block_failure(-1.0, 10.0, 1e-2, 1.0, 0.3, &mut x),
            TdStatus::AboveThreshold
        );
        assert!(last_error().contains("threshold"), "{}", last_error());
        assert_eq!(td_max_block_size(1.5, &mut x), TdStatus::InvalidArgument);
        assert_eq!(
            td_max_block_size(0.5, std::ptr::null_mut()),
            TdStatus::NullPointer
        );
        assert_eq!(td_max_block_size(1e-3, &mut x), TdStatus::Ok);
        assert_eq!(last_error(), "");
        let (mut p, mut t) = (0usize, 0usize);
        assert_eq!(td_verify_eq5(20, &mut p, &mut t), TdStatus::CapExceeded);
    }
}

#[test]
fn simulations() {
    let (mut p, mut t) = (0usize, 0usize);
    let (mut e, mut s) = (0.0, 0.0);
    let mut f = 0.0;
    unsafe {
        assert_eq!(td_verify_eq5(2, &mut p, &mut t), TdStatus::Ok);
        assert_eq!((p, t), (16, 16));
        assert_eq!(
            td_estimate_alpha3(8, 0.05, 20_000, 3, &mut e, &mut s),
            TdStatus::Ok
        );
        assert!((e - 0.398145).abs() < 4.0 * s);
        assert_eq!(td_gadget_min_fidelity(4, 1, &mut f), TdStatus::Ok);
        assert!(f > 1.0 - 1e-10);
    }
}

#[test]
fn schedule_handle() {
    let mut h: *mut TdSchedule = std::ptr::null_mut();
    unsafe {
        assert_eq!(
            td_schedule_new(-100.0, (2e-3f64).log10(), 0.0, 0.0, 0.0, true, &mut h),
            TdStatus::Ok
        );
        assert_eq!(td_schedule_len(h), 2);
        let mut l = TdLevel::default();
        assert_eq!(td_schedule_level(h, 1, &mut l), TdStatus::Ok);
        assert!((l.log10_n - 2e7f64.log10()).abs() < 1e-12);
        assert!(l.log10_eps < -810.0 && l.log10_eps > -850.0);
        assert_eq!(td_schedule_level(h, 2, &mut l), TdStatus::InvalidArgument);
        td_schedule_free(h);
        td_schedule_free(std::ptr::null_mut());
        assert_eq!(td_schedule_len(std::ptr::null()), 0);
        let mut bad: *mut TdSchedule = std::ptr::null_mut();
        assert_eq!(
            td_schedule_new(-9.0, -1.0, 0.0, 0.0, 0.0, false, &mut bad),
            TdStatus::AboveThreshold
        );
        assert!(bad.is_null());
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/toffoli_distill.h")
}

#[test]
fn header_declares_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "TD_STATUS_OK = 0",
        "typedef struct TdSchedule TdSchedule;",
        "td_schedule_new(",
        "td_schedule_free(",
        "td_last_error_message(void)",
        "td_estimate_alpha3(",
    ] {
        assert!(text.contains(sym), "missing {sym}");
    }
}

const C_SRC: &str = r#"
#include <stdio.h>
#include <string.h>
#include "toffoli_distill.h"

int main(void) {
    double x = 0.0;
    if (td_alpha3_decoherent(8, 0.05, &x) != TD_STATUS_OK) return 1;
    if (x < 0.398 || x > 0.3982) return 2;
    if (td_max_block_size(2.0, &x) != TD_STATUS_INVALID_ARGUMENT) return 3;
    if (strlen(td_last_error_message()) == 0) return 4;
    TdSchedule *s = NULL;
    if (td_schedule_new(-9.0, -2.69897, 0, 0, 0, true, &s) != TD_STATUS_OK) return 5;
    if (td_schedule_len(s) != 1) return 6;
    TdLevel l;
    if (td_schedule_level(s, 0, &l) != TD_STATUS_OK) return 7;
    td_schedule_free(s);
    printf("%.4f\n", l.log10_eps);
    return 0;
}
"#;

/// Compiles a C program against the header and the static library when a C
/// compiler is available.
#[test]
fn c_program_links() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    // target/<profile>/deps/<test> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libtoffoli_distill_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipped", lib.display());
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = dir.join("ffi_smoke.c");
    let bin = dir.join("ffi_smoke");
    std::fs::write(&src, C_SRC).unwrap();
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let v: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!((v + 8.8388).abs() < 1e-3);
}
