//! C ABI for peierls-lab.
//!
//! Every entry point returns a [`PlStatus`]; on failure a message is kept per
//! thread and can be read with [`pl_last_error`]. Handles are opaque and must be
//! released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use peierls_lab::field::FieldConfig;
use peierls_lab::geometry::TargetGeometry;
use peierls_lab::green::{GreenKind, GreenOperator};
use peierls_lab::lattice::LorentzianLattice;
use peierls_lab::observables::PointPolynomial;
use peierls_lab::peierls::PeierlsContext;
use peierls_lab::variational::{el_kernel, linearize, GeneralizedLagrangian};
use peierls_lab::Error;

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidLattice = 3,
    DimensionMismatch = 4,
    UnknownName = 5,
    ChartOverflow = 6,
    NotNormallyHyperbolic = 7,
    Unstable = 8,
    BufferTooSmall = 9,
    Internal = 10,
}

/// Values accepted by the `kind` argument of [`pl_green_apply`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlGreenKind {
    Retarded = 0,
    Advanced = 1,
    Causal = 2,
}

/// Peierls bracket of two linear functionals and its two constituent products.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlBracket {
    pub value: f64,
    pub retarded_product: f64,
    pub advanced_product: f64,
}

/// Opaque lattice handle.
pub struct PlLattice {
    lattice: Arc<LorentzianLattice>,
}

/// Opaque model handle: a Lagrangian linearized at a background field.
pub struct PlModel {
    lagrangian: GeneralizedLagrangian,
    phi: FieldConfig,
    green: GreenOperator,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PlStatus {
    match e {
        Error::InvalidLattice(_) => PlStatus::InvalidLattice,
        Error::DimensionMismatch { .. } | Error::MismatchedLattice => PlStatus::DimensionMismatch,
        Error::UnknownName(_) => PlStatus::UnknownName,
        Error::ChartOverflow | Error::ChartOverflowAt(_) | Error::OutsideInjectivity => {
            PlStatus::ChartOverflow
        }
        Error::NotNormallyHyperbolic | Error::SingularTimeCoupling(_) => {
            PlStatus::NotNormallyHyperbolic
        }
        Error::UnstableDiscretization => PlStatus::Unstable,
        _ => PlStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (PlStatus, String)>) -> PlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PlStatus::Internal
        }
    }
}

fn lib(e: Error) -> (PlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PlStatus, String) {
    (PlStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a>(
    ptr: *const f64,
    len: usize,
    what: &str,
) -> Result<&'a [f64], (PlStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn string(ptr: *const c_char, what: &str) -> Result<String, (PlStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (PlStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates an `n_t x n_x` Minkowski lattice with spacings `dt`, `dx`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pl_lattice_new(
    n_t: usize,
    n_x: usize,
    dt: f64,
    dx: f64,
    out: *mut *mut PlLattice,
) -> PlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let lattice = LorentzianLattice::minkowski(n_t, n_x, dt, dx).map_err(lib)?;
        *out = Box::into_raw(Box::new(PlLattice {
            lattice: Arc::new(lattice),
        }));
        Ok(())
    })
}

/// Number of lattice sites, or 0 for a null handle.
///
/// # Safety
/// `lat` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_lattice_n_sites(lat: *const PlLattice) -> usize {
    lat.as_ref().map_or(0, |l| l.lattice.n_sites())
}

/// # Safety
/// `lat` must be null or a handle from [`pl_lattice_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_lattice_free(lat: *mut PlLattice) {
    if !lat.is_null() {
        drop(Box::from_raw(lat));
    }
}

/// Linearizes the Lagrangian `lagrangian` (`"free_scalar"`, `"wave_map"`,
/// `"kg_mass(m)"`) on target `target` (`"flat"` with `dim`, or `"sphere2"`) at the
/// background `values` (site-major, `n_sites * dim` entries).
///
/// # Safety
/// `lat` must be a live handle, the strings NUL-terminated, `values` valid for
/// `len` reads and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn pl_model_new(
    lat: *const PlLattice,
    lagrangian: *const c_char,
    target: *const c_char,
    dim: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut PlModel,
) -> PlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let lat = lat.as_ref().ok_or_else(|| null("lat"))?;
        let target =
            Arc::new(TargetGeometry::builtin(&string(target, "target")?, dim).map_err(lib)?);
        let gl = GeneralizedLagrangian::builtin(&string(lagrangian, "lagrangian")?, &target)
            .map_err(lib)?;
        let values = slice(values, len, "values")?.to_vec();
        let phi = FieldConfig::new(lat.lattice.clone(), target, values).map_err(lib)?;
        let op = linearize(&gl, &phi, &phi.target).map_err(lib)?;
        let green = GreenOperator::new(Arc::new(op), GreenKind::Retarded).map_err(lib)?;
        *out = Box::into_raw(Box::new(PlModel {
            lagrangian: gl,
            phi,
            green,
        }));
        Ok(())
    })
}

/// Length of the model's field vectors (`n_sites * dim`), or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pl_model_len(model: *const PlModel) -> usize {
    model.as_ref().map_or(0, |m| m.phi.values.len())
}

/// # Safety
/// `model` must be null or a handle from [`pl_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pl_model_free(model: *mut PlModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Applies the Green operator `kind` (a [`PlGreenKind`] value) to the density
/// `source`, writing `len` values to `out`.
///
/// # Safety
/// `model` must be a live handle; `source` and `out` valid for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pl_green_apply(
    model: *const PlModel,
    kind: u32,
    source: *const f64,
    out: *mut f64,
    len: usize,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let source = slice(source, len, "source")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match kind {
            k if k == PlGreenKind::Retarded as u32 => GreenKind::Retarded,
            k if k == PlGreenKind::Advanced as u32 => GreenKind::Advanced,
            k if k == PlGreenKind::Causal as u32 => GreenKind::Causal,
            k => return Err((PlStatus::InvalidArgument, format!("unknown green kind {k}"))),
        };
        let r = m.green.with_kind(kind).apply_raw(source).map_err(lib)?;
        std::ptr::copy_nonoverlapping(r.as_ptr(), out, r.len());
        Ok(())
    })
}

/// Writes the Euler-Lagrange kernel of the background (density-weighted) to `out`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn pl_el_kernel(
    model: *const PlModel,
    out: *mut f64,
    len: usize,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let k = el_kernel(&m.lagrangian, &m.phi).map_err(lib)?;
        if len < k.components.len() {
            return Err((
                PlStatus::BufferTooSmall,
                format!("need {} values, got {len}", k.components.len()),
            ));
        }
        std::ptr::copy_nonoverlapping(k.components.as_ptr(), out, k.components.len());
        Ok(())
    })
}

/// Bracket of `F = sum_x vol(x) f(x) . phi(x)` and `G` likewise with `g`,
/// at the model's background.
///
/// # Safety
/// `model` must be a live handle; `f`, `g` valid for `len` reads; `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn pl_bracket_linear(
    model: *const PlModel,
    f: *const f64,
    g: *const f64,
    len: usize,
    out: *mut PlBracket,
) -> PlStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let (f, g) = (slice(f, len, "f")?, slice(g, len, "g")?);
        if out.is_null() {
            return Err(null("out"));
        }
        let expected = m.phi.values.len();
        if len != expected {
            return Err(lib(Error::DimensionMismatch { expected, got: len }));
        }
        let lat = &m.phi.lattice;
        let n = m.phi.n();
        let (ff, gg) = (
            PointPolynomial::linear(lat, n, f.to_vec()),
            PointPolynomial::linear(lat, n, g.to_vec()),
        );
        let ctx = PeierlsContext {
            lagrangian: m.lagrangian.clone(),
            phi: m.phi.clone(),
            green: m.green.clone(),
        };
        *out = PlBracket {
            value: ctx.bracket(&ff, &gg).map_err(lib)?,
            retarded_product: ctx.retarded_product(&ff, &gg).map_err(lib)?,
            advanced_product: ctx.advanced_product(&ff, &gg).map_err(lib)?,
        };
        Ok(())
    })
}
