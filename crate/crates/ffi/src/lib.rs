//! C ABI over the `frost` library.
//!
//! Every fallible call returns a [`FrostStatus`]; on failure the message is kept
//! per thread and can be fetched with [`frost_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_load` and released by the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use frost::estimation::{relative_l2_error, Reconstructor};
use frost::mesh::{build_grid, CaseGeometry, StructuredGrid};
use frost::observation::{ObservationMatrix, SensorLayout};
use frost::pipeline::{cmd_pipeline, PipelineConfig};
use frost::rom::PODBasis;
use frost::Error;

/// Result codes of every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrostStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DimensionMismatch = 4,
    Geometry = 5,
    NonFinite = 6,
    Solver = 7,
    IllConditioned = 8,
    WellPosedness = 9,
    GridMismatch = 10,
    PoolExhausted = 11,
    Undefined = 12,
    Format = 13,
    Io = 14,
    BufferTooSmall = 15,
    Panic = 99,
}

impl From<&Error> for FrostStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Geometry(_) | Error::OutsideDomain { .. } | Error::DisconnectedFluid(_) => FrostStatus::Geometry,
            Error::InvalidArgument(_) | Error::OverlappingSensors(..) => FrostStatus::InvalidArgument,
            Error::DimensionMismatch { .. } => FrostStatus::DimensionMismatch,
            Error::NonFinite(_) => FrostStatus::NonFinite,
            Error::PicardDivergence { .. } | Error::LinearSolver(_) => FrostStatus::Solver,
            Error::IllConditioned { .. } => FrostStatus::IllConditioned,
            Error::WellPosedness { .. } => FrostStatus::WellPosedness,
            Error::GridMismatch(_) => FrostStatus::GridMismatch,
            Error::PoolExhausted { .. } => FrostStatus::PoolExhausted,
            Error::Undefined(_) => FrostStatus::Undefined,
            Error::Format(_) | Error::Json(_) => FrostStatus::Format,
            Error::Io(_) => FrostStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(FrostStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn fail<T>(status: FrostStatus, msg: &str) -> FfiResult<T> {
    Err(Failure(status, msg.to_string()))
}

/// Runs `f`, records any failure and converts panics into [`FrostStatus::Panic`].
fn guard(f: impl FnOnce() -> FfiResult<()>) -> FrostStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            FrostStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FrostStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    if p.is_null() {
        return fail(FrostStatus::NullPointer, &format!("{what} is null"));
    }
    Ok(&*p)
}

unsafe fn path_arg(p: *const c_char, what: &str) -> FfiResult<PathBuf> {
    if p.is_null() {
        return fail(FrostStatus::NullPointer, &format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(FrostStatus::InvalidUtf8, &format!("{what} is not UTF-8")),
    }
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if p.is_null() {
        return fail(FrostStatus::NullPointer, &format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(FrostStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn frost_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frost_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Finite-volume grid of the reference freezer cabinet.
pub struct FrostGrid(StructuredGrid);

/// Builds the `nx` x `ny` grid of the reference cabinet.
///
/// # Safety
/// `out` must be a valid pointer; the handle is released with [`frost_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn frost_grid_new(nx: usize, ny: usize, out: *mut *mut FrostGrid) -> FrostStatus {
    guard(|| {
        let grid = build_grid(&CaseGeometry::paper(), nx, ny)?;
        write_out(out, Box::into_raw(Box::new(FrostGrid(grid))))
    })
}

/// Number of cells (the field length).
///
/// # Safety
/// `grid` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn frost_grid_cell_count(grid: *const FrostGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// # Safety
/// `grid` must come from [`frost_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn frost_grid_free(grid: *mut FrostGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// POD basis read from a FROM1 file.
pub struct FrostBasis(PODBasis);

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn frost_basis_load(path: *const c_char, out: *mut *mut FrostBasis) -> FrostStatus {
    guard(|| {
        let basis = PODBasis::load(&path_arg(path, "path")?)?;
        write_out(out, Box::into_raw(Box::new(FrostBasis(basis))))
    })
}

/// Number of stored modes.
///
/// # Safety
/// `basis` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn frost_basis_mode_count(basis: *const FrostBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.n_max())
}

/// Field length of the modes.
///
/// # Safety
/// `basis` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn frost_basis_field_len(basis: *const FrostBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.0.field_len())
}

/// Copies the leading `len` singular values into `out`.
///
/// # Safety
/// `basis` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn frost_basis_singular_values(basis: *const FrostBasis, out: *mut f64, len: usize) -> FrostStatus {
    guard(|| {
        let b = as_ref(basis, "basis")?;
        if len > b.0.sigma.len() {
            return fail(FrostStatus::BufferTooSmall, "more singular values requested than stored");
        }
        if out.is_null() {
            return fail(FrostStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(b.0.sigma.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `basis` must come from [`frost_basis_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn frost_basis_free(basis: *mut FrostBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Observation operator of a sensor layout.
pub struct FrostSensors(ObservationMatrix);

/// Reads a sensor layout JSON and binds it to `grid`.
///
/// # Safety
/// `grid` must be a live handle, `path` NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn frost_sensors_load(
    grid: *const FrostGrid,
    path: *const c_char,
    out: *mut *mut FrostSensors,
) -> FrostStatus {
    guard(|| {
        let g = as_ref(grid, "grid")?;
        let w = SensorLayout::load(&path_arg(path, "path")?)?.observer(&g.0)?;
        write_out(out, Box::into_raw(Box::new(FrostSensors(w))))
    })
}

/// Number of sensors `m`.
///
/// # Safety
/// `sensors` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn frost_sensors_count(sensors: *const FrostSensors) -> usize {
    sensors.as_ref().map_or(0, |s| s.0.m())
}

/// Noise-free measurements `W^T T` of a field of length `field_len` into `out` (length `m`).
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn frost_sensors_measure(
    sensors: *const FrostSensors,
    field: *const f64,
    field_len: usize,
    out: *mut f64,
    out_len: usize,
) -> FrostStatus {
    guard(|| {
        let w = &as_ref(sensors, "sensors")?.0;
        let ell = w.apply_transpose(slice_arg(field, field_len, "field")?)?;
        if out_len < ell.len() {
            return fail(FrostStatus::BufferTooSmall, "measurement buffer too small");
        }
        if out.is_null() {
            return fail(FrostStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(ell.as_ptr(), out, ell.len());
        Ok(())
    })
}

/// # Safety
/// `sensors` must come from [`frost_sensors_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn frost_sensors_free(sensors: *mut FrostSensors) {
    if !sensors.is_null() {
        drop(Box::from_raw(sensors));
    }
}

/// Least-squares field estimator for a fixed basis, sensor set and dimension.
pub struct FrostReconstructor {
    basis: PODBasis,
    w: ObservationMatrix,
    n: usize,
    smallest: f64,
}

/// Checks well-posedness and conditioning for dimension `n`; the basis and
/// sensor handles may be freed afterwards.
///
/// # Safety
/// Handles must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn frost_reconstructor_new(
    basis: *const FrostBasis,
    sensors: *const FrostSensors,
    n: usize,
    out: *mut *mut FrostReconstructor,
) -> FrostStatus {
    guard(|| {
        let b = &as_ref(basis, "basis")?.0;
        let w = &as_ref(sensors, "sensors")?.0;
        let smallest = Reconstructor::new(b, w, n)?.gramian().smallest();
        let r = FrostReconstructor { basis: b.clone(), w: w.clone(), n, smallest };
        write_out(out, Box::into_raw(Box::new(r)))
    })
}

/// Smallest singular value of the cross-Gramian.
///
/// # Safety
/// `rec` must be a live handle or null (returns NaN).
#[no_mangle]
pub unsafe extern "C" fn frost_reconstructor_smallest_singular_value(rec: *const FrostReconstructor) -> f64 {
    rec.as_ref().map_or(f64::NAN, |r| r.smallest)
}

/// Estimates the full field (length `field_len`) from `m` measurements.
///
/// # Safety
/// Pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn frost_reconstruct(
    rec: *const FrostReconstructor,
    measurements: *const f64,
    m: usize,
    field: *mut f64,
    field_len: usize,
) -> FrostStatus {
    guard(|| {
        let r = as_ref(rec, "reconstructor")?;
        let ell = slice_arg(measurements, m, "measurements")?;
        let est = Reconstructor::new(&r.basis, &r.w, r.n)?.reconstruct(ell)?;
        if field_len < est.field.len() {
            return fail(FrostStatus::BufferTooSmall, "field buffer too small");
        }
        if field.is_null() {
            return fail(FrostStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(est.field.as_ptr(), field, est.field.len());
        Ok(())
    })
}

/// # Safety
/// `rec` must come from [`frost_reconstructor_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn frost_reconstructor_free(rec: *mut FrostReconstructor) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// `||truth - estimate|| / ||truth|| * 100`.
///
/// # Safety
/// Both arrays must hold `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn frost_relative_l2_error(
    truth: *const f64,
    estimate: *const f64,
    len: usize,
    out: *mut f64,
) -> FrostStatus {
    guard(|| {
        let e = relative_l2_error(slice_arg(truth, len, "truth")?, slice_arg(estimate, len, "estimate")?)?;
        write_out(out, e)
    })
}

/// Runs simulate, POD, sensor placement and evaluation into `out_dir`.
/// `config_path` may be null for the default desk configuration. The
/// time-averaged error of each held-out run is written to `errors` (capacity
/// `cap`) and their number to `count`.
///
/// # Safety
/// Strings must be NUL-terminated; `errors` must hold `cap` doubles; `count` valid.
#[no_mangle]
pub unsafe extern "C" fn frost_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    errors: *mut f64,
    cap: usize,
    count: *mut usize,
) -> FrostStatus {
    guard(|| {
        let cfg = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::load(&path_arg(config_path, "config_path")?)?
        };
        cfg.validate()?;
        let reports = cmd_pipeline(&cfg, &path_arg(out_dir, "out_dir")?)?;
        write_out(count, reports.len())?;
        if reports.len() > cap {
            return fail(FrostStatus::BufferTooSmall, "error buffer too small");
        }
        if errors.is_null() && !reports.is_empty() {
            return fail(FrostStatus::NullPointer, "error buffer is null");
        }
        for (k, r) in reports.iter().enumerate() {
            *errors.add(k) = r.time_averaged;
        }
        Ok(())
    })
}
