use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use fracpoho_ffi::*;

fn new_green(dim: usize, s: f64, radius: f64) -> *mut FpGreen {
    let mut h = ptr::null_mut();
    let st = unsafe { fp_green_new(dim, s, radius, &mut h) };
    assert_eq!(st, FpStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(fp_last_error_message()) }.to_str().unwrap().to_owned()
}

#[test]
fn kernels_through_the_handle() {
    let h = new_green(3, 0.5, 1.0);
    let x = [0.1, -0.2, 0.3];
    let y = [-0.3, 0.1, 0.2];
    let (mut f, mut g, mut hv, mut r) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(fp_green_dim(h), 3);
        assert_eq!(fp_green_fundamental(h, x.as_ptr(), y.as_ptr(), &mut f), FpStatus::Ok);
        assert_eq!(fp_green_g(h, x.as_ptr(), y.as_ptr(), &mut g), FpStatus::Ok);
        assert_eq!(fp_green_h(h, x.as_ptr(), y.as_ptr(), &mut hv), FpStatus::Ok);
        assert_eq!(fp_green_robin(h, [0.0; 3].as_ptr(), &mut r), FpStatus::Ok);
    }
    assert!(0.0 < g && g < f);
    assert!(((f - g) - hv).abs() <= 1e-13 * f);
    // N = 3, s = 1/2, R = 1: R(0) = 1/(4π²)
    assert!((r - 1.0 / (4.0 * std::f64::consts::PI.powi(2))).abs() < 1e-14);

    let mut grad = [0.0; 3];
    let eps = 1e-6;
    unsafe {
        assert_eq!(fp_green_grad_h(h, x.as_ptr(), y.as_ptr(), FpSlot::Second, grad.as_mut_ptr()), FpStatus::Ok);
    }
    for i in 0..3 {
        let (mut yp, mut ym) = (y, y);
        yp[i] += eps;
        ym[i] -= eps;
        let (mut hp, mut hm) = (0.0, 0.0);
        unsafe {
            fp_green_h(h, x.as_ptr(), yp.as_ptr(), &mut hp);
            fp_green_h(h, x.as_ptr(), ym.as_ptr(), &mut hm);
        }
        assert!((grad[i] - (hp - hm) / (2.0 * eps)).abs() < 1e-6);
    }
    unsafe { fp_green_free(h) };
}

#[test]
fn errors_map_to_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { fp_green_new(3, 1.5, 1.0, &mut h) }, FpStatus::InvalidParams);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    let h = new_green(2, 0.5, 1.0);
    let mut out = 0.0;
    let inside = [0.1, 0.0];
    let outside = [2.0, 0.0];
    unsafe {
        assert_eq!(fp_green_g(h, inside.as_ptr(), outside.as_ptr(), &mut out), FpStatus::OutsideDomain);
        assert_eq!(fp_green_g(h, inside.as_ptr(), inside.as_ptr(), &mut out), FpStatus::CoincidentPoints);
        assert_eq!(fp_green_g(h, ptr::null(), inside.as_ptr(), &mut out), FpStatus::NullPointer);
        assert_eq!(fp_green_g(h, inside.as_ptr(), [0.0, 0.5].as_ptr(), ptr::null_mut()), FpStatus::NullPointer);
        assert_eq!(fp_green_robin(ptr::null(), inside.as_ptr(), &mut out), FpStatus::NullPointer);
        assert_eq!(fp_green_robin(h, inside.as_ptr(), &mut out), FpStatus::Ok);
    }
    assert!(last_error().is_empty());
    unsafe {
        fp_green_free(h);
        fp_green_free(ptr::null_mut());
        fp_string_free(ptr::null_mut());
    }
}

fn problem(identity: &CStr, dim: usize, s: f64, x: &[f64], y: Option<&[f64]>, orders: &[usize]) -> FpProblem {
    FpProblem {
        identity: identity.as_ptr(),
        dim,
        s,
        radius: 1.0,
        x: x.as_ptr(),
        y: y.map_or(ptr::null(), |y| y.as_ptr()),
        xi: ptr::null(),
        axis: -1,
        seed: 0,
        orders: orders.as_ptr(),
        n_orders: orders.len(),
    }
}

#[test]
fn verify_returns_json_report() {
    let id = CString::new("bilinear").unwrap();
    let x = [0.1, 0.0, 0.2];
    let y = [-0.2, 0.1, 0.0];
    let p = problem(&id, 3, 0.5, &x, Some(&y), &[16, 32]);
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { fp_verify(&p, &mut json) }, FpStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { fp_string_free(json) };
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["identity_id"], "bilinear");
    assert!(doc["rel_residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(doc["history"].as_array().unwrap().len(), 2);
    assert_eq!(doc["wall_time_s"].as_f64(), Some(0.0));
}

#[test]
fn verify_rejects_bad_problems() {
    let x = [0.1, 0.0, 0.2];
    let y = [-0.2, 0.1, 0.0];
    let mut json = ptr::null_mut();

    let id = CString::new("bilinear-general").unwrap();
    let p = problem(&id, 3, 0.5, &x, Some(&y), &[16]);
    assert_eq!(unsafe { fp_verify(&p, &mut json) }, FpStatus::Hypothesis);
    assert!(last_error().contains("1/2 < s < 1"));

    let id = CString::new("no-such-identity").unwrap();
    let p = problem(&id, 3, 0.5, &x, Some(&y), &[16]);
    assert_eq!(unsafe { fp_verify(&p, &mut json) }, FpStatus::Config);

    let id = CString::new("robin").unwrap();
    let p = problem(&id, 3, 0.5, &x, None, &[]);
    assert_eq!(unsafe { fp_verify(&p, &mut json) }, FpStatus::InvalidOrder);
    assert!(json.is_null());
}

fn target_dir() -> PathBuf {
    // <target>/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("fracpoho.h")).unwrap();
    for sym in ["fp_green_new", "fp_green_free", "fp_verify", "fp_string_free", "fp_last_error_message"] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
    let lib = target_dir().join("libfracpoho_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping C link check: no C compiler or static library");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <math.h>
#include <stdio.h>
#include "fracpoho.h"
int main(void) {
    fp_green *g = NULL;
    if (fp_green_new(3, 0.5, 1.0, &g) != FP_STATUS_OK) return 2;
    double x[3] = {0.0, 0.0, 0.0}, r = 0.0;
    if (fp_green_robin(g, x, &r) != FP_STATUS_OK) return 3;
    fp_green_free(g);
    if (fabs(r - 1.0 / (4.0 * M_PI * M_PI)) > 1e-14) return 4;
    if (fp_green_new(3, 2.0, 1.0, &g) != FP_STATUS_INVALID_PARAMS) return 5;
    printf("%s\n", fp_last_error_message());
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "C smoke test exited with {:?}", run.status.code());
}
