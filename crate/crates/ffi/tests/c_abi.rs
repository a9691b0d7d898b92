use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use psynorm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(psynorm_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn scalar_parse() {
    let text = CString::new("I'd say 0.73.").unwrap();
    let (mut v, mut s) = (0.0, PsynormScalarStatus::NoNumber);
    let rc = unsafe { psynorm_parse_scalar(text.as_ptr(), &mut v, &mut s) };
    assert_eq!(rc, PsynormStatus::Ok);
    assert_eq!(v, 0.73);
    assert_eq!(s, PsynormScalarStatus::Ok);

    let none = CString::new("no idea").unwrap();
    unsafe { psynorm_parse_scalar(none.as_ptr(), &mut v, &mut s) };
    assert!(v.is_nan());
    assert_eq!(s, PsynormScalarStatus::NoNumber);

    let rc = unsafe { psynorm_parse_scalar(ptr::null(), &mut v, &mut s) };
    assert_eq!(rc, PsynormStatus::NullPointer);
    assert!(!last_error().is_empty());
}

#[test]
fn duration_map_handle() {
    let text = CString::new("{'I':200, 'like': 200, 'cats': 200}").unwrap();
    let mut map = ptr::null_mut();
    assert_eq!(
        unsafe { psynorm_duration_map_parse(text.as_ptr(), &mut map) },
        PsynormStatus::Ok
    );
    unsafe {
        assert_eq!(psynorm_duration_map_len(map), 3);
        assert_eq!(psynorm_duration_map_status(map), PsynormMapStatus::Ok);
        let mut word: *const c_char = ptr::null();
        let mut ms = 0.0;
        assert_eq!(psynorm_duration_map_get(map, 2, &mut word, &mut ms), PsynormStatus::Ok);
        assert_eq!(CStr::from_ptr(word).to_str().unwrap(), "cats");
        assert_eq!(ms, 200.0);
        assert_eq!(
            psynorm_duration_map_get(map, 3, &mut word, &mut ms),
            PsynormStatus::IndexOutOfRange
        );
        psynorm_duration_map_free(map);
    }
}

#[test]
fn alignment_handle() {
    let r: Vec<CString> = ["the", "cat", "sat"]
        .iter()
        .map(|s| CString::new(*s).unwrap())
        .collect();
    let h: Vec<CString> = ["The", "sat"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let rp: Vec<*const c_char> = r.iter().map(|s| s.as_ptr()).collect();
    let hp: Vec<*const c_char> = h.iter().map(|s| s.as_ptr()).collect();
    let mut a = ptr::null_mut();
    unsafe {
        assert_eq!(psynorm_align(rp.as_ptr(), 3, hp.as_ptr(), 2, &mut a), PsynormStatus::Ok);
        assert_eq!(psynorm_alignment_cost(a), 1);
        assert_eq!(psynorm_alignment_len(a), 3);
        let mut step = PsynormAlignStep {
            op: PsynormEditOp::Match,
            ref_index: 0,
            hyp_index: 0,
        };
        assert_eq!(psynorm_alignment_step(a, 1, &mut step), PsynormStatus::Ok);
        assert_eq!(step.op, PsynormEditOp::Delete);
        assert_eq!((step.ref_index, step.hyp_index), (1, -1));
        psynorm_alignment_free(a);
    }
}

#[test]
fn metrics_and_undefined() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 1.0, 4.0, 3.0];
    let mut r = 0.0;
    unsafe {
        assert_eq!(psynorm_pearson(x.as_ptr(), y.as_ptr(), 4, &mut r), PsynormStatus::Ok);
        assert!((r - 0.6).abs() < 1e-12);
        assert_eq!(
            psynorm_r2(x.as_ptr(), y.as_ptr(), 4, PsynormR2Mode::SquaredPearson, &mut r),
            PsynormStatus::Ok
        );
        assert!((r - 0.36).abs() < 1e-12);
        let flat = [0.5; 4];
        assert_eq!(
            psynorm_pearson(flat.as_ptr(), y.as_ptr(), 4, &mut r),
            PsynormStatus::Undefined
        );
        assert!(last_error().contains("variance"), "{}", last_error());
    }
}

#[test]
fn regression_handle() {
    let n = 10;
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let mut fit = ptr::null_mut();
    unsafe {
        assert_eq!(
            psynorm_fit_ols(x.as_ptr(), n, 1, y.as_ptr(), 0.0, &mut fit),
            PsynormStatus::Ok
        );
        assert!((psynorm_fit_intercept(fit) - 1.0).abs() < 1e-10);
        assert_eq!(psynorm_fit_rank(fit), 1);
        let mut c = [0.0];
        assert_eq!(psynorm_fit_coefficients(fit, c.as_mut_ptr(), 1), PsynormStatus::Ok);
        assert!((c[0] - 2.0).abs() < 1e-10);
        assert_eq!(
            psynorm_fit_coefficients(fit, c.as_mut_ptr(), 2),
            PsynormStatus::InvalidArgument
        );
        let mut pred = [0.0; 2];
        let q = [20.0, -1.0];
        assert_eq!(
            psynorm_fit_predict(fit, q.as_ptr(), 2, 1, pred.as_mut_ptr()),
            PsynormStatus::Ok
        );
        assert!((pred[0] - 41.0).abs() < 1e-9 && (pred[1] + 1.0).abs() < 1e-9);
        psynorm_fit_free(fit);

        let mut bad = ptr::null_mut();
        assert_eq!(
            psynorm_fit_ols(x.as_ptr(), 1, 1, y.as_ptr(), 0.0, &mut bad),
            PsynormStatus::InvalidArgument
        );
        assert!(bad.is_null());
    }
}

#[test]
fn prompt_rendering() {
    let word = CString::new("cats").unwrap();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(
            psynorm_render_zero_shot(PsynormPromptKind::WordMem, word.as_ptr(), &mut out),
            PsynormStatus::Ok
        );
        let s = CStr::from_ptr(out).to_str().unwrap().to_string();
        psynorm_string_free(out);
        assert!(s.ends_with("cats"), "{s}");
        assert!(!s.contains("{word}"));
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/psynorm.h")
}

#[test]
fn header_is_valid_c() {
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(header())
        .status()
    else {
        eprintln!("no C compiler available; skipping header check");
        return;
    };
    assert!(status.success());
}

#[test]
fn c_program_links_against_static_library() {
    let target = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/debug");
    let lib = target.join("libpsynorm_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping link test", lib.display());
        return;
    }
    let dir = tempfile_dir();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "psynorm.h"
int main(void) {
    PsynormDurationMap *m = NULL;
    if (psynorm_duration_map_parse("{'I':200, 'like': 200, 'cats': 200}", &m) != PSYNORM_STATUS_OK) return 1;
    if (psynorm_duration_map_len(m) != 3) return 2;
    psynorm_duration_map_free(m);
    double x[4] = {1, 2, 3, 4}, y[4] = {2, 1, 4, 3}, r = 0;
    if (psynorm_pearson(x, y, 4, &r) != PSYNORM_STATUS_OK) return 3;
    printf("%.6f\n", r);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("main");
    let Ok(out) = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-lssl", "-lcrypto", "-o"])
        .arg(&exe)
        .output()
    else {
        eprintln!("no C compiler available; skipping link test");
        return;
    };
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr);
        if err.contains("cannot find -lssl") || err.contains("cannot find -lcrypto") {
            eprintln!("system TLS libraries missing; skipping link test");
            return;
        }
        panic!("link failed: {err}");
    }
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.600000");
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("psynorm-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
