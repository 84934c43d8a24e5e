use std::ffi::{c_int, c_void, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use blcirk_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { blcirk_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8_lossy(&bytes).into_owned()
}

fn data(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn quadrature_round_trip() {
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { blcirk_quadrature_build(40.0, 1e-10, &mut q) }, BlcirkStatus::Ok);
    let m = unsafe { blcirk_quadrature_m(q) };
    assert!(m > 10);
    let (mut x, mut w) = (vec![0.0; m], vec![0.0; m]);
    assert_eq!(unsafe { blcirk_quadrature_copy(q, x.as_mut_ptr(), w.as_mut_ptr(), m) }, BlcirkStatus::Ok);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    assert!(x.windows(2).all(|p| p[0] < p[1]));
    assert_eq!(
        unsafe { blcirk_quadrature_copy(q, x.as_mut_ptr(), w.as_mut_ptr(), m - 1) },
        BlcirkStatus::BufferTooSmall
    );
    unsafe { blcirk_quadrature_free(q) };
}

#[test]
fn invalid_arguments_set_last_error() {
    let mut q = ptr::null_mut();
    assert_eq!(unsafe { blcirk_quadrature_build(-1.0, 1e-10, &mut q) }, BlcirkStatus::InvalidArgument);
    assert!(q.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { blcirk_quadrature_build(10.0, 1e-10, ptr::null_mut()) }, BlcirkStatus::NullPointer);
    assert_eq!(unsafe { blcirk_quadrature_m(ptr::null()) }, 0);
    unsafe { blcirk_tableau_free(ptr::null_mut()) };

    let mut g = ptr::null_mut();
    let missing = CString::new("/nonexistent/model.txt").unwrap();
    assert_eq!(unsafe { blcirk_gravity_load(missing.as_ptr(), &mut g) }, BlcirkStatus::Io);
}

#[test]
fn tableau_is_symplectic_and_stable() {
    let mut t = ptr::null_mut();
    assert_eq!(
        unsafe { blcirk_tableau_build(0.0, 0.0, 8, BlcirkMethod::GaussLegendre, &mut t) },
        BlcirkStatus::Ok,
        "{}",
        last_error()
    );
    let m = unsafe { blcirk_tableau_m(t) };
    assert_eq!(m, 8);
    let (mut x, mut w, mut s) = (vec![0.0; m], vec![0.0; m], vec![0.0; m * m]);
    assert_eq!(
        unsafe { blcirk_tableau_copy(t, x.as_mut_ptr(), w.as_mut_ptr(), s.as_mut_ptr(), s.len()) },
        BlcirkStatus::Ok
    );
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    for i in 0..m {
        for j in 0..m {
            let r = w[i] * s[i * m + j] + w[j] * s[j * m + i] - w[i] * w[j];
            assert!(r.abs() < 1e-15);
        }
    }
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { blcirk_tableau_stability(t, 0.0, 3.0, &mut re, &mut im) }, BlcirkStatus::Ok);
    assert!((re.hypot(im) - 1.0).abs() < 1e-13);
    unsafe { blcirk_tableau_free(t) };
}

extern "C" fn harmonic(_t: f64, y: *const f64, out: *mut f64, dim: usize, _user: *mut c_void) -> c_int {
    assert_eq!(dim, 2);
    unsafe {
        *out = *y.add(1);
        *out.add(1) = -*y;
    }
    0
}

extern "C" fn failing(_t: f64, _y: *const f64, _out: *mut f64, _dim: usize, user: *mut c_void) -> c_int {
    unsafe { *(user as *mut u32) += 1 };
    7
}

#[test]
fn propagate_harmonic_oscillator() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { blcirk_tableau_build(0.0, 0.0, 12, BlcirkMethod::GaussLegendre, &mut t) }, BlcirkStatus::Ok);
    let y0 = [1.0, 0.0];
    let mut y = [0.0; 2];
    let t1 = 10.0;
    let st = unsafe { blcirk_propagate(t, Some(harmonic), ptr::null_mut(), 2, y0.as_ptr(), 0.0, t1, 10, 1e-15, 100, y.as_mut_ptr()) };
    assert_eq!(st, BlcirkStatus::Ok, "{}", last_error());
    assert!((y[0] - t1.cos()).abs() < 1e-13 && (y[1] + t1.sin()).abs() < 1e-13, "{y:?}");

    let mut calls = 0u32;
    let st = unsafe {
        blcirk_propagate(t, Some(failing), &mut calls as *mut u32 as *mut c_void, 2, y0.as_ptr(), 0.0, t1, 10, 1e-15, 100, y.as_mut_ptr())
    };
    assert_eq!(st, BlcirkStatus::Callback);
    assert_eq!(calls, 1);
    unsafe { blcirk_tableau_free(t) };
}

#[test]
fn gravity_model_from_file() {
    let mut g = ptr::null_mut();
    let path = data("egm96_deg2.txt");
    assert_eq!(unsafe { blcirk_gravity_load(path.as_ptr(), &mut g) }, BlcirkStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { blcirk_gravity_degree(g) }, 2);
    let r = [7000.0, 0.0, 0.0];
    let mut a = [0.0; 3];
    let mut v = 0.0;
    assert_eq!(unsafe { blcirk_gravity_acceleration(g, r.as_ptr(), 0, a.as_mut_ptr()) }, BlcirkStatus::Ok);
    assert!((a[0] + 398600.4418 / 49e6).abs() < 1e-18);
    assert_eq!(unsafe { blcirk_gravity_potential(g, r.as_ptr(), 2, &mut v) }, BlcirkStatus::Ok);
    assert!(v > 398600.4418 / 7000.0 * 0.99);
    let inside = [100.0, 0.0, 0.0];
    assert_eq!(unsafe { blcirk_gravity_potential(g, inside.as_ptr(), 2, &mut v) }, BlcirkStatus::InvalidArgument);
    unsafe { blcirk_gravity_free(g) };
}

/// The generated header compiles and links against the static library.
#[test]
fn c_program_links() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler; skipped");
        return;
    };
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // Integration tests only get the rlib; build the static library into a
    // separate target directory so the outer build lock is not contended.
    let target = root.join("../../target/capi-test");
    let status = Command::new(env!("CARGO"))
        .args(["build", "--release", "--quiet", "-p", "blcirk-ffi", "--target-dir"])
        .arg(&target)
        .current_dir(&root)
        .status()
        .unwrap();
    assert!(status.success());
    let lib = target.join("release/libblcirk_ffi.a");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "blcirk.h"
int main(void) {
    BlcirkQuadrature *q = NULL;
    if (blcirk_quadrature_build(30.0, 1e-10, &q) != BLCIRK_STATUS_OK) return 1;
    size_t m = blcirk_quadrature_m(q);
    double x[256], w[256], s = 0.0;
    if (m > 256 || blcirk_quadrature_copy(q, x, w, 256) != BLCIRK_STATUS_OK) return 2;
    for (size_t k = 0; k < m; k++) s += w[k];
    blcirk_quadrature_free(q);
    if (blcirk_quadrature_build(-1.0, 1e-10, &q) != BLCIRK_STATUS_INVALID_ARGUMENT) return 3;
    char msg[128];
    if (blcirk_last_error(msg, sizeof msg) == 0) return 4;
    printf("%zu %.15f\n", m, s);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let sum: f64 = text.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((sum - 2.0).abs() < 1e-13);
}
