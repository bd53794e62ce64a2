//! C ABI for the `sparsegrid` library.
//!
//! Grids are opaque `SgGrid` handles created by `sg_grid_build` or
//! `sg_grid_load` and released with `sg_grid_free`. Every fallible call
//! returns an `SgStatus`; on failure `sg_last_error` gives a message that
//! stays valid until the next failing call on the same thread. Arrays are
//! point-major: knot `p` occupies `knots[p*dim .. (p+1)*dim]`, and value
//! `k` at point `p` is `values[p*outputs + k]`.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use sparsegrid::evalkit::{quadrature, EvaluationTable, Interpolant};
use sparsegrid::grid::{build_sparse_grid, reduce, ReducedGrid, SparseGrid};
use sparsegrid::io::{self, GridBundle};
use sparsegrid::knots::KnotFamily;
use sparsegrid::midx::{generate_rule_set, preset, Preset};
use sparsegrid::SgError;

/// Status codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Io = 4,
    Format = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// A sparse grid with its reduced knots.
pub struct SgGrid {
    bundle: GridBundle,
}

/// Function called by `sg_quadrature_fn`: writes `outputs` values at the
/// `dim` coordinates `y` into `out`, returning 0 on success.
pub type SgCallback =
    Option<extern "C" fn(y: *const f64, dim: usize, out: *mut f64, outputs: usize, user: *mut c_void) -> i32>;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(SgStatus, String);

impl From<SgError> for Fail {
    fn from(e: SgError) -> Self {
        let code = match &e {
            SgError::Io(_) => SgStatus::Io,
            SgError::Format { .. } | SgError::Version { .. } => SgStatus::Format,
            e if e.is_numerical() => SgStatus::Numerical,
            _ => SgStatus::InvalidArgument,
        };
        Fail(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SgStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(&msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            SgStatus::Panic
        }
    }
}

fn null() -> Fail {
    Fail(SgStatus::NullPointer, "null pointer argument".into())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(SgStatus::InvalidArgument, "string is not UTF-8".into()))
}

unsafe fn grid<'a>(g: *const SgGrid) -> Result<&'a SgGrid, Fail> {
    g.as_ref().ok_or_else(null)
}

unsafe fn input<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if len < need {
        return Err(Fail(SgStatus::BufferTooSmall, format!("buffer holds {len} values, {need} needed")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null());
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

fn table(r: &ReducedGrid, values: &[f64], outputs: usize) -> Result<EvaluationTable, Fail> {
    Ok(EvaluationTable::new(outputs, r.size, values.to_vec())?)
}

fn build(dim: usize, preset_name: &str, w: f64, knots: &str, lower: &[f64], upper: &[f64]) -> Result<SparseGrid, Fail> {
    let p: Preset = preset_name.parse()?;
    let (rule, map) = preset(p, dim, None)?;
    let set = generate_rule_set(dim, &|i| rule.eval(i), w, 1)?;
    let fams = (0..dim).map(|n| KnotFamily::from_name(knots, lower[n], upper[n])).collect::<Result<Vec<_>, _>>()?;
    Ok(build_sparse_grid(&set, &fams, map, None)?)
}

/// Message of the last failing call on this thread (empty if none).
#[no_mangle]
pub extern "C" fn sg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds the grid of `preset` ("TP", "TD", "HC", "SM") at level `w` with
/// knot family `knots` (e.g. "cc", "leja", "gauss") whose parameters per
/// dimension are `lower[n], upper[n]` (interval, or mean and deviation).
///
/// # Safety
/// String arguments must be NUL-terminated; `lower` and `upper` must hold
/// `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_build(
    dim: usize,
    preset_name: *const c_char,
    w: f64,
    knots: *const c_char,
    lower: *const f64,
    upper: *const f64,
    out: *mut *mut SgGrid,
) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let s = build(dim, text(preset_name)?, w, text(knots)?, input(lower, dim)?, input(upper, dim)?)?;
        let r = reduce(&s, None)?;
        *out = Box::into_raw(Box::new(SgGrid { bundle: GridBundle::new(s, r) }));
        Ok(())
    })
}

/// Loads a JSON grid file.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_load(path: *const c_char, out: *mut *mut SgGrid) -> SgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        *out = ptr::null_mut();
        let bundle = io::load_grid(Path::new(text(path)?))?;
        *out = Box::into_raw(Box::new(SgGrid { bundle }));
        Ok(())
    })
}

/// Saves a grid as a JSON grid file.
///
/// # Safety
/// `g` must come from this library and `path` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_save(g: *const SgGrid, path: *const c_char) -> SgStatus {
    guard(|| Ok(io::save_grid(Path::new(text(path)?), &grid(g)?.bundle)?))
}

/// Releases a grid; null is ignored.
///
/// # Safety
/// `g` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_free(g: *mut SgGrid) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Number of dimensions, 0 for null.
///
/// # Safety
/// `g` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_dim(g: *const SgGrid) -> usize {
    g.as_ref().map_or(0, |g| g.bundle.grid.dim)
}

/// Number of reduced knots, 0 for null.
///
/// # Safety
/// `g` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_size(g: *const SgGrid) -> usize {
    g.as_ref().map_or(0, |g| g.bundle.reduced.size)
}

/// Copies the `size * dim` reduced knot coordinates into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_knots(g: *const SgGrid, out: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let k = &grid(g)?.bundle.reduced.knots;
        output(out, len, k.len())?.copy_from_slice(k);
        Ok(())
    })
}

/// Copies the `size` quadrature weights into `out`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_grid_weights(g: *const SgGrid, out: *mut f64, len: usize) -> SgStatus {
    guard(|| {
        let w = &grid(g)?.bundle.reduced.weights;
        output(out, len, w.len())?.copy_from_slice(w);
        Ok(())
    })
}

/// Quadrature of `outputs` components whose values at the reduced knots are
/// `values` (`size * outputs`, point-major); writes `outputs` results.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_quadrature(
    g: *const SgGrid,
    values: *const f64,
    outputs: usize,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let r = &grid(g)?.bundle.reduced;
        let t = table(r, input(values, r.size * outputs)?, outputs)?;
        let q = quadrature(&t, r)?;
        output(out, outputs, outputs)?.copy_from_slice(&q);
        Ok(())
    })
}

/// Evaluates `f` at every reduced knot (sequentially, in knot order) and
/// writes the `outputs` quadrature results.
///
/// # Safety
/// `out` must hold `outputs` doubles; `f` must honor its contract.
#[no_mangle]
pub unsafe extern "C" fn sg_quadrature_fn(
    g: *const SgGrid,
    f: SgCallback,
    outputs: usize,
    user: *mut c_void,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let f = f.ok_or_else(null)?;
        let r = &grid(g)?.bundle.reduced;
        let mut values = vec![0.0; r.size * outputs];
        for (p, v) in values.chunks_exact_mut(outputs.max(1)).enumerate().take(r.size) {
            let y = r.knot(p);
            if f(y.as_ptr(), r.dim, v.as_mut_ptr(), outputs, user) != 0 {
                return Err(Fail(SgStatus::Numerical, format!("callback failed at knot {y:?}")));
            }
        }
        let q = quadrature(&table(r, &values, outputs)?, r)?;
        output(out, outputs, outputs)?.copy_from_slice(&q);
        Ok(())
    })
}

/// Sparse interpolant of `values` (as in `sg_quadrature`) at `npoints`
/// points (`npoints * dim`, point-major); writes `npoints * outputs` values.
///
/// # Safety
/// Buffers must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn sg_interpolate(
    g: *const SgGrid,
    values: *const f64,
    outputs: usize,
    points: *const f64,
    npoints: usize,
    out: *mut f64,
) -> SgStatus {
    guard(|| {
        let b = &grid(g)?.bundle;
        let r = &b.reduced;
        let t = table(r, input(values, r.size * outputs)?, outputs)?;
        let pts = input(points, npoints * r.dim)?;
        let v = Interpolant::new(&b.grid, r, &t)?.eval(pts)?;
        output(out, npoints * outputs, v.len())?.copy_from_slice(&v);
        Ok(())
    })
}
