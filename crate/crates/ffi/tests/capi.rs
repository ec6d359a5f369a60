use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use peierls_lab_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { pl_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn lattice(n_t: usize, n_x: usize) -> *mut PlLattice {
    let mut lat = ptr::null_mut();
    let st = unsafe { pl_lattice_new(n_t, n_x, 1.0 / n_x as f64, 2.0 / n_x as f64, &mut lat) };
    assert_eq!(st, PlStatus::Ok);
    lat
}

fn model(
    lat: *mut PlLattice,
    lagrangian: &CStr,
    target: &CStr,
    dim: usize,
    values: &[f64],
) -> *mut PlModel {
    let mut m = ptr::null_mut();
    let st = unsafe {
        pl_model_new(
            lat,
            lagrangian.as_ptr(),
            target.as_ptr(),
            dim,
            values.as_ptr(),
            values.len(),
            &mut m,
        )
    };
    assert_eq!(st, PlStatus::Ok, "{}", last_error());
    m
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn errors_map_to_codes_and_messages() {
    let mut lat = ptr::null_mut();
    assert_eq!(
        unsafe { pl_lattice_new(1, 8, 0.1, 0.2, &mut lat) },
        PlStatus::InvalidLattice
    );
    assert!(lat.is_null());
    assert!(last_error().contains("n_t"));
    assert_eq!(
        unsafe { pl_lattice_new(9, 8, 0.1, 0.2, ptr::null_mut()) },
        PlStatus::NullPointer
    );
    let lat = lattice(9, 8);
    let vals = vec![0.0; 72];
    let mut m = ptr::null_mut();
    let st = unsafe {
        pl_model_new(
            lat,
            c"nope".as_ptr(),
            c"flat".as_ptr(),
            1,
            vals.as_ptr(),
            72,
            &mut m,
        )
    };
    assert_eq!(st, PlStatus::UnknownName);
    let st = unsafe {
        pl_model_new(
            lat,
            c"free_scalar".as_ptr(),
            c"flat".as_ptr(),
            1,
            vals.as_ptr(),
            71,
            &mut m,
        )
    };
    assert_eq!(st, PlStatus::DimensionMismatch);
    let m = model(lat, c"free_scalar", c"flat", 1, &vals);
    let mut out = vec![0.0; 72];
    assert_eq!(
        unsafe { pl_green_apply(m, 7, vals.as_ptr(), out.as_mut_ptr(), 72) },
        PlStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { pl_el_kernel(m, out.as_mut_ptr(), 10) },
        PlStatus::BufferTooSmall
    );
    assert_eq!(
        unsafe { pl_el_kernel(ptr::null(), out.as_mut_ptr(), 72) },
        PlStatus::NullPointer
    );
    // A successful call clears the message.
    assert_eq!(
        unsafe { pl_el_kernel(m, out.as_mut_ptr(), 72) },
        PlStatus::Ok
    );
    assert_eq!(last_error(), "");
    let needed = unsafe { pl_last_error(ptr::null_mut(), 0) };
    assert_eq!(needed, 0);
    unsafe {
        pl_model_free(m);
        pl_lattice_free(lat);
        pl_model_free(ptr::null_mut());
        pl_lattice_free(ptr::null_mut());
    }
}

#[test]
fn green_apply_is_causal_and_consistent() {
    let lat = lattice(17, 16);
    let n = unsafe { pl_lattice_n_sites(lat) };
    let m = model(lat, c"free_scalar", c"flat", 1, &vec![0.0; n]);
    assert_eq!(unsafe { pl_model_len(m) }, n);
    let mut src = vec![0.0; n];
    src[8 * 16 + 8] = 1.0;
    let apply = |kind: PlGreenKind| {
        let mut out = vec![0.0; n];
        assert_eq!(
            unsafe { pl_green_apply(m, kind as u32, src.as_ptr(), out.as_mut_ptr(), n) },
            PlStatus::Ok
        );
        out
    };
    let (r, a, c) = (
        apply(PlGreenKind::Retarded),
        apply(PlGreenKind::Advanced),
        apply(PlGreenKind::Causal),
    );
    for s in 0..n {
        let it = s / 16;
        if it < 8 {
            assert_eq!(r[s], 0.0);
        }
        if it > 8 {
            assert_eq!(a[s], 0.0);
        }
        assert!((c[s] - (r[s] - a[s])).abs() < 1e-15);
    }
    assert!(r.iter().any(|v| *v != 0.0));
    unsafe {
        pl_model_free(m);
        pl_lattice_free(lat);
    }
}

#[test]
fn bracket_of_linear_functionals() {
    let lat = lattice(33, 32);
    let n = unsafe { pl_lattice_n_sites(lat) };
    let m = model(lat, c"kg_mass(1)", c"flat", 1, &vec![0.1; n]);
    let bump = |it0: usize, ix0: usize| -> Vec<f64> {
        (0..n)
            .map(|s| {
                if s / 32 == it0 && (s % 32).abs_diff(ix0) <= 1 {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (f, g) = (bump(10, 16), bump(20, 17));
    let mut b = PlBracket::default();
    assert_eq!(
        unsafe { pl_bracket_linear(m, f.as_ptr(), g.as_ptr(), n, &mut b) },
        PlStatus::Ok
    );
    assert!(b.value != 0.0);
    assert!((b.value - (b.retarded_product - b.advanced_product)).abs() < 1e-12 * b.value.abs());
    let mut back = PlBracket::default();
    unsafe { pl_bracket_linear(m, g.as_ptr(), f.as_ptr(), n, &mut back) };
    assert!((b.value + back.value).abs() < 1e-12 * b.value.abs());
    // Spacelike separated supports commute.
    let (f, g) = (bump(16, 4), bump(16, 20));
    assert_eq!(
        unsafe { pl_bracket_linear(m, f.as_ptr(), g.as_ptr(), n, &mut b) },
        PlStatus::Ok
    );
    assert_eq!(b.value, 0.0);
    unsafe {
        pl_model_free(m);
        pl_lattice_free(lat);
    }
}

#[test]
fn sphere_model_el_kernel_vanishes_on_constants() {
    let lat = lattice(9, 8);
    let n = unsafe { pl_lattice_n_sites(lat) };
    let vals: Vec<f64> = (0..n).flat_map(|_| [0.3, -0.2]).collect();
    let m = model(lat, c"wave_map", c"sphere2", 2, &vals);
    let mut out = vec![1.0; 2 * n];
    assert_eq!(
        unsafe { pl_el_kernel(m, out.as_mut_ptr(), out.len()) },
        PlStatus::Ok
    );
    assert!(out.iter().all(|v| *v == 0.0));
    unsafe {
        pl_model_free(m);
        pl_lattice_free(lat);
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn header_compiles_and_links_from_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let staticlib = profile_dir.join("libpeierls_lab_ffi.a");
    if !staticlib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            staticlib.display()
        );
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "peierls_lab.h"
int main(void) {
    PlLattice *lat = NULL;
    PlModel *m = NULL;
    if (pl_lattice_new(9, 8, 0.125, 0.25, &lat) != PL_STATUS_OK) return 1;
    size_t n = pl_lattice_n_sites(lat);
    double vals[72] = {0}, src[72] = {0}, out[72];
    src[40] = 1.0;
    if (pl_model_new(lat, "free_scalar", "flat", 1, vals, n, &m) != PL_STATUS_OK) return 2;
    if (pl_green_apply(m, PL_GREEN_KIND_CAUSAL, src, out, n) != PL_STATUS_OK) return 3;
    if (pl_lattice_new(0, 8, 0.1, 0.1, &lat) != PL_STATUS_INVALID_LATTICE) return 4;
    char msg[128];
    pl_last_error(msg, sizeof msg);
    printf("%s %s\n", pl_version(), msg);
    pl_model_free(m);
    pl_lattice_free(lat);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.path().join("smoke");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(root.join("include"))
        .arg(&staticlib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        cc.status.success(),
        "{}",
        String::from_utf8_lossy(&cc.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(
        stdout.starts_with(env!("CARGO_PKG_VERSION")) && stdout.contains("n_t"),
        "{stdout}"
    );
}
