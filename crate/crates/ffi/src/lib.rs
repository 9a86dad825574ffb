//! C ABI for the stkde engine.
//!
//! Conventions: every object is an opaque handle created by a `*_new`-style
//! call and released by the matching `*_free`; every fallible call returns a
//! [`StkdeStatus`] and stores a human-readable message retrievable with
//! [`stkde_last_error_message`] (thread-local, caller frees the string with
//! [`stkde_string_free`]). Output parameters are written only on
//! `STKDE_STATUS_OK`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use stkde::io::{self, synth::generate_synthetic, OobPolicy};
use stkde::{Algorithm, DensityVolume, Error, GridSpec, Point, RunConfig, RunStats};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StkdeStatus {
    Ok = 0,
    /// File I/O failure or malformed input data.
    Io = 1,
    /// Invalid parameter (bad algorithm name, decomposition, domain, point).
    Validation = 2,
    /// A memory estimate exceeded the configured budget; nothing ran.
    MemBudget = 3,
    NullPointer = 5,
    Utf8 = 6,
    /// A panic was caught at the FFI boundary.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let cmsg = CString::new(msg).unwrap_or_else(|_| CString::new("stkde error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cmsg));
}

fn status_of(err: &Error) -> StkdeStatus {
    match err.exit_code() {
        1 => StkdeStatus::Io,
        3 => StkdeStatus::MemBudget,
        _ => StkdeStatus::Validation,
    }
}

fn fail(err: Error) -> StkdeStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guarded(f: impl FnOnce() -> StkdeStatus) -> StkdeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("panic inside the stkde library".to_string());
            StkdeStatus::Panic
        }
    }
}

/// Last error message of this thread, or NULL. Caller frees the returned
/// string with [`stkde_string_free`].
#[no_mangle]
pub extern "C" fn stkde_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => std::ptr::null_mut(),
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from an stkde call and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn stkde_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn stkde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque domain grid (world box, resolutions, bandwidths).
pub struct StkdeGrid(GridSpec);

/// Opaque point set.
pub struct StkdePoints(Vec<Point>);

/// Opaque run result: the density volume plus the run statistics.
pub struct StkdeResult {
    volume: DensityVolume,
    stats: RunStats,
}

unsafe fn opt_ref<'a, T>(ptr: *const T) -> Option<&'a T> {
    ptr.as_ref()
}

fn null_arg(what: &str) -> StkdeStatus {
    set_error(format!("{what} must not be NULL"));
    StkdeStatus::NullPointer
}

unsafe fn path_from(ptr: *const c_char, what: &str) -> Result<PathBuf, StkdeStatus> {
    if ptr.is_null() {
        return Err(null_arg(what));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error(format!("{what} is not valid UTF-8"));
            Err(StkdeStatus::Utf8)
        }
    }
}

/// Creates a grid over the half-open box `[origin, origin + extent)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stkde_grid_new(
    x0: f64,
    y0: f64,
    t0: f64,
    extent_x: f64,
    extent_y: f64,
    extent_t: f64,
    sres: f64,
    tres: f64,
    hs: f64,
    ht: f64,
    out: *mut *mut StkdeGrid,
) -> StkdeStatus {
    guarded(|| {
        if out.is_null() {
            return null_arg("out");
        }
        match GridSpec::new((x0, y0, t0), (extent_x, extent_y, extent_t), sres, tres, hs, ht) {
            Ok(grid) => {
                *out = Box::into_raw(Box::new(StkdeGrid(grid)));
                StkdeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Voxel counts of the grid.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stkde_grid_dims(
    grid: *const StkdeGrid,
    nx: *mut usize,
    ny: *mut usize,
    nt: *mut usize,
) -> StkdeStatus {
    guarded(|| {
        let Some(g) = opt_ref(grid) else { return null_arg("grid") };
        if nx.is_null() || ny.is_null() || nt.is_null() {
            return null_arg("dims out");
        }
        *nx = g.0.nx;
        *ny = g.0.ny;
        *nt = g.0.nt;
        StkdeStatus::Ok
    })
}

/// # Safety
/// `grid` must come from [`stkde_grid_new`] and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn stkde_grid_free(grid: *mut StkdeGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Builds a point set from `n` (x, y, t) triples laid out row-major.
/// Coordinates must be finite.
///
/// # Safety
/// `xyt` must point to `3·n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn stkde_points_from_array(
    xyt: *const f64,
    n: usize,
    out: *mut *mut StkdePoints,
) -> StkdeStatus {
    guarded(|| {
        if out.is_null() || (n > 0 && xyt.is_null()) {
            return null_arg("points input");
        }
        let raw = std::slice::from_raw_parts(xyt, n * 3);
        let mut points = Vec::with_capacity(n);
        for triple in raw.chunks_exact(3) {
            match Point::new(triple[0], triple[1], triple[2]) {
                Ok(p) => points.push(p),
                Err(e) => return fail(e),
            }
        }
        *out = Box::into_raw(Box::new(StkdePoints(points)));
        StkdeStatus::Ok
    })
}

/// Loads a 3-column x,y,t CSV and applies the out-of-domain policy
/// (`fail_on_oob != 0` fails, otherwise skips and counts into `skipped`).
///
/// # Safety
/// `path` must be a valid C string; `grid`, `out`, `skipped` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn stkde_points_from_csv(
    path: *const c_char,
    grid: *const StkdeGrid,
    fail_on_oob: c_int,
    out: *mut *mut StkdePoints,
    skipped: *mut usize,
) -> StkdeStatus {
    guarded(|| {
        let Some(g) = opt_ref(grid) else { return null_arg("grid") };
        if out.is_null() || skipped.is_null() {
            return null_arg("out");
        }
        let path = match path_from(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        let policy = if fail_on_oob != 0 { OobPolicy::Fail } else { OobPolicy::Skip };
        match io::load_points_csv(&path, &g.0, policy) {
            Ok((points, skip_count)) => {
                *skipped = skip_count;
                *out = Box::into_raw(Box::new(StkdePoints(points)));
                StkdeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Deterministic synthetic point set inside the grid's domain box.
///
/// # Safety
/// `grid` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn stkde_points_synthetic(
    n: usize,
    clusters: usize,
    sigma_xy: f64,
    sigma_t: f64,
    grid: *const StkdeGrid,
    seed: u64,
    out: *mut *mut StkdePoints,
) -> StkdeStatus {
    guarded(|| {
        let Some(g) = opt_ref(grid) else { return null_arg("grid") };
        if out.is_null() {
            return null_arg("out");
        }
        match generate_synthetic(n, clusters, sigma_xy, sigma_t, &g.0, seed) {
            Ok(points) => {
                *out = Box::into_raw(Box::new(StkdePoints(points)));
                StkdeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `points` must come from an stkde call and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn stkde_points_len(points: *const StkdePoints) -> usize {
    opt_ref(points).map_or(0, |p| p.0.len())
}

/// # Safety
/// `points` must come from an stkde call and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn stkde_points_free(points: *mut StkdePoints) {
    if !points.is_null() {
        drop(Box::from_raw(points));
    }
}

/// Runs an algorithm by CLI name ("vb", "pb-sym", "pb-sym-pd-sched", ...).
/// `dec_*` is the requested decomposition (pass 1,1,1 when unused),
/// `mem_budget` of 0 means unlimited. Points must lie inside the grid's
/// domain box.
///
/// # Safety
/// `algo` must be a valid C string; handle and out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stkde_run(
    algo: *const c_char,
    points: *const StkdePoints,
    grid: *const StkdeGrid,
    dec_a: usize,
    dec_b: usize,
    dec_c: usize,
    threads: usize,
    mem_budget: u64,
    out: *mut *mut StkdeResult,
) -> StkdeStatus {
    guarded(|| {
        let Some(p) = opt_ref(points) else { return null_arg("points") };
        let Some(g) = opt_ref(grid) else { return null_arg("grid") };
        if out.is_null() {
            return null_arg("out");
        }
        if algo.is_null() {
            return null_arg("algo");
        }
        let name = match CStr::from_ptr(algo).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("algo is not valid UTF-8".to_string());
                return StkdeStatus::Utf8;
            }
        };
        let algorithm: Algorithm = match name.parse() {
            Ok(a) => a,
            Err(e) => return fail(e),
        };
        let config = RunConfig {
            decomp: (dec_a, dec_b, dec_c),
            threads: threads.max(1),
            mem_budget: (mem_budget > 0).then_some(mem_budget),
        };
        match stkde::run_algorithm(algorithm, &p.0, &g.0, &config) {
            Ok((volume, stats)) => {
                *out = Box::into_raw(Box::new(StkdeResult { volume, stats }));
                StkdeStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Voxel counts of the result volume.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_dims(
    result: *const StkdeResult,
    nx: *mut usize,
    ny: *mut usize,
    nt: *mut usize,
) -> StkdeStatus {
    guarded(|| {
        let Some(r) = opt_ref(result) else { return null_arg("result") };
        if nx.is_null() || ny.is_null() || nt.is_null() {
            return null_arg("dims out");
        }
        *nx = r.volume.grid.nx;
        *ny = r.volume.grid.ny;
        *nt = r.volume.grid.nt;
        StkdeStatus::Ok
    })
}

/// Borrowed pointer to the densities, laid out `(x·G_y + y)·G_t + t`; valid
/// until the result is freed. `len` receives the element count.
///
/// # Safety
/// `result` must be a live handle; `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_values(
    result: *const StkdeResult,
    len: *mut usize,
) -> *const f64 {
    let Some(r) = opt_ref(result) else { return std::ptr::null() };
    if !len.is_null() {
        *len = r.volume.values.len();
    }
    r.volume.values.as_ptr()
}

/// One density sample.
///
/// # Safety
/// `result` must be a live handle; `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_value_at(
    result: *const StkdeResult,
    x: usize,
    y: usize,
    t: usize,
    value: *mut f64,
) -> StkdeStatus {
    guarded(|| {
        let Some(r) = opt_ref(result) else { return null_arg("result") };
        if value.is_null() {
            return null_arg("value");
        }
        let g = &r.volume.grid;
        if x >= g.nx || y >= g.ny || t >= g.nt {
            set_error(format!(
                "voxel ({x}, {y}, {t}) outside {}x{}x{}",
                g.nx, g.ny, g.nt
            ));
            return StkdeStatus::Validation;
        }
        *value = r.volume.get(x, y, t);
        StkdeStatus::Ok
    })
}

/// Writes the result volume as an STKDE1 file.
///
/// # Safety
/// `result` must be a live handle; `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_write_volume(
    result: *const StkdeResult,
    path: *const c_char,
) -> StkdeStatus {
    guarded(|| {
        let Some(r) = opt_ref(result) else { return null_arg("result") };
        let path = match path_from(path, "path") {
            Ok(p) => p,
            Err(status) => return status,
        };
        match io::write_volume(&r.volume, &path) {
            Ok(()) => StkdeStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Run statistics as a JSON string (same schema as the CLI's --stats file).
/// Caller frees with [`stkde_string_free`]; NULL on error.
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_stats_json(result: *const StkdeResult) -> *mut c_char {
    let Some(r) = opt_ref(result) else {
        null_arg("result");
        return std::ptr::null_mut();
    };
    CString::new(r.stats.to_json()).map_or(std::ptr::null_mut(), CString::into_raw)
}

/// # Safety
/// `result` must come from [`stkde_run`] and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn stkde_result_free(result: *mut StkdeResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
