//! C ABI for punctorus.
//!
//! Objects cross the boundary as opaque handles created by `pt_*_new`-style
//! constructors and released by the matching `pt_*_free`. Every fallible
//! function returns a [`PtStatus`]; on failure a message describing the
//! error is kept per thread and can be read with
//! [`pt_last_error_message`]. Strings returned to the caller are owned by
//! the caller and released with [`pt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use punctorus::bridge::{flatten, uniformize};
use punctorus::experiments::{
    asymmetry_stat, balanced_lemma_stat, bc_vs_cobounded, candidate_gap_stat, contraction_sweep,
    fellow_travel_sweep, length_formula_stat, minsky_gap_stat, ExperimentReport, Format, Metric,
    BRIDGE_TOL,
};
use punctorus::flat::{teich_distance, FlatPoint};
use punctorus::metrics::{lipschitz_brute, lipschitz_candidates};
use punctorus::{Config, Error, Slope, TracePoint};

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PtStatus {
    Ok = 0,
    /// A handle or output pointer was null.
    NullPointer = 1,
    /// An argument is outside the function's domain.
    InvalidArgument = 2,
    /// A point or geodesic is too thin for the conformal bridge.
    Thin = 3,
    /// An optimizer or sampler gave up.
    NotConverged = 4,
    /// Text input could not be parsed.
    Parse = 5,
    /// A file could not be read or written.
    Io = 6,
    /// The library panicked; this is a bug.
    Panic = 7,
}

/// Output formats of experiment reports.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PtFormat {
    Csv = 0,
    Json = 1,
}

/// A hyperbolic structure on the punctured torus.
pub struct PtPoint(TracePoint);

/// A conformal structure, given by a point of the upper half-plane.
pub struct PtFlat(FlatPoint);

/// Run configuration.
pub struct PtConfig(Config);

/// The result of a seeded experiment.
pub struct PtReport(ExperimentReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul bytes were replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PtStatus {
    match e {
        Error::Thin { .. } | Error::ThinAlong { .. } => PtStatus::Thin,
        Error::NonConvergence(_) | Error::SamplingFailed(_) => PtStatus::NotConverged,
        Error::Config { .. } | Error::Parse(_) | Error::Json(_) => PtStatus::Parse,
        Error::Io(_) => PtStatus::Io,
        _ => PtStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PtStatus>) -> PtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PtStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PtStatus::Panic
        }
    }
}

fn fail(e: Error) -> PtStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> PtStatus {
    set_error(format!("{what} is null"));
    PtStatus::NullPointer
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, PtStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), PtStatus> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, PtStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        PtStatus::Parse
    })
}

fn owned_string(s: String) -> Result<*mut c_char, PtStatus> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        set_error("output contains a nul byte".into());
        PtStatus::InvalidArgument
    })
}

fn slope(p: i64, q: i64) -> Result<Slope, PtStatus> {
    Slope::new(p, q).map_err(fail)
}

// ---------------------------------------------------------------------------
// Errors and strings

/// The message of the last failed call on this thread, or null when no call
/// has failed. The pointer stays valid until the next failing call on the
/// same thread.
#[no_mangle]
pub extern "C" fn pt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Forgets the last error message of this thread.
#[no_mangle]
pub extern "C" fn pt_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Configuration

/// The default configuration.
#[no_mangle]
pub extern "C" fn pt_config_default() -> *mut PtConfig {
    Box::into_raw(Box::new(PtConfig(Config::default())))
}

/// Parses a `key=value` configuration over the defaults.
///
/// # Safety
/// `text_kv` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_config_parse(
    text_kv: *const c_char,
    out: *mut *mut PtConfig,
) -> PtStatus {
    guard(|| {
        let cfg = Config::from_kv(text(text_kv, "text")?).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtConfig(cfg))), "out")
    })
}

/// Sets the RNG seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pt_config_set_seed(cfg: *mut PtConfig, seed: u64) -> PtStatus {
    guard(|| {
        cfg.as_mut().ok_or_else(|| null("cfg"))?.0.rng_seed = seed;
        Ok(())
    })
}

/// The canonical `key=value` text of the configuration.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_config_to_text(
    cfg: *const PtConfig,
    out: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let s = owned_string(get(cfg, "cfg")?.0.to_kv())?;
        put(out, s, "out")
    })
}

/// Releases a configuration. Null is ignored.
///
/// # Safety
/// `cfg` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_config_free(cfg: *mut PtConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ---------------------------------------------------------------------------
// Hyperbolic points

/// The modular torus, with all three basis traces equal to 3.
#[no_mangle]
pub extern "C" fn pt_point_modular() -> *mut PtPoint {
    Box::into_raw(Box::new(PtPoint(TracePoint::modular())))
}

/// The point with `0/1` of length `len` and twist coordinate `t`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_from_fn(len: f64, t: f64, out: *mut *mut PtPoint) -> PtStatus {
    guard(|| {
        let p = TracePoint::from_fn(len, t).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtPoint(p))), "out")
    })
}

/// Reads a point from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_from_json(
    json: *const c_char,
    out: *mut *mut PtPoint,
) -> PtStatus {
    guard(|| {
        let p: TracePoint =
            serde_json::from_str(text(json, "json")?).map_err(|e| fail(e.into()))?;
        put(out, Box::into_raw(Box::new(PtPoint(p))), "out")
    })
}

/// The JSON form of a point.
///
/// # Safety
/// `pt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_to_json(pt: *const PtPoint, out: *mut *mut c_char) -> PtStatus {
    guard(|| {
        let s = serde_json::to_string(&get(pt, "pt")?.0).map_err(|e| fail(e.into()))?;
        put(out, owned_string(s)?, "out")
    })
}

/// Hyperbolic length of the slope `p/q`.
///
/// # Safety
/// `pt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_length(
    pt: *const PtPoint,
    p: i64,
    q: i64,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        let s = slope(p, q)?;
        put(out, get(pt, "pt")?.0.hyp_length(s), "out")
    })
}

/// Natural log of the trace of the slope `p/q`.
///
/// # Safety
/// `pt` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_trace_ln(
    pt: *const PtPoint,
    p: i64,
    q: i64,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        let s = slope(p, q)?;
        put(out, get(pt, "pt")?.0.trace_of(s).ln(), "out")
    })
}

/// The shortest curve `p/q` and its length.
///
/// # Safety
/// `pt` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pt_point_systole(
    pt: *const PtPoint,
    out_p: *mut i64,
    out_q: *mut i64,
    out_length: *mut f64,
) -> PtStatus {
    guard(|| {
        let (s, l) = get(pt, "pt")?.0.systole_with_length();
        put(out_p, s.p(), "out_p")?;
        put(out_q, s.q(), "out_q")?;
        put(out_length, l, "out_length")
    })
}

/// Releases a point. Null is ignored.
///
/// # Safety
/// `pt` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_point_free(pt: *mut PtPoint) {
    if !pt.is_null() {
        drop(Box::from_raw(pt));
    }
}

// ---------------------------------------------------------------------------
// Distances

/// The Lipschitz distance from `x` to `y` by brute force over slopes with
/// `|p|, q ≤ n`, with the maximizing slope.
///
/// # Safety
/// `x`, `y` must be live handles and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pt_lipschitz_brute(
    x: *const PtPoint,
    y: *const PtPoint,
    n: i64,
    out_value: *mut f64,
    out_p: *mut i64,
    out_q: *mut i64,
) -> PtStatus {
    guard(|| {
        if n < 1 {
            set_error(format!("denominator bound must be positive, got {n}"));
            return Err(PtStatus::InvalidArgument);
        }
        let (v, s) = lipschitz_brute(&get(x, "x")?.0, &get(y, "y")?.0, n);
        put(out_value, v, "out_value")?;
        put(out_p, s.p(), "out_p")?;
        put(out_q, s.q(), "out_q")
    })
}

/// The Lipschitz distance from `x` to `y` over the short curves of `x`.
///
/// # Safety
/// `x`, `y` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_lipschitz_candidates(
    x: *const PtPoint,
    y: *const PtPoint,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        put(
            out,
            lipschitz_candidates(&get(x, "x")?.0, &get(y, "y")?.0).0,
            "out",
        )
    })
}

// ---------------------------------------------------------------------------
// Conformal points and the bridge

/// The conformal point `re + i·im`, `im > 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pt_flat_new(re: f64, im: f64, out: *mut *mut PtFlat) -> PtStatus {
    guard(|| {
        let f = FlatPoint::new(re, im).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtFlat(f))), "out")
    })
}

/// Real and imaginary parts.
///
/// # Safety
/// `f` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn pt_flat_tau(
    f: *const PtFlat,
    out_re: *mut f64,
    out_im: *mut f64,
) -> PtStatus {
    guard(|| {
        let f = get(f, "f")?;
        put(out_re, f.0.re(), "out_re")?;
        put(out_im, f.0.im(), "out_im")
    })
}

/// The Teichmüller distance.
///
/// # Safety
/// `a`, `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_teich_distance(
    a: *const PtFlat,
    b: *const PtFlat,
    out: *mut f64,
) -> PtStatus {
    guard(|| put(out, teich_distance(&get(a, "a")?.0, &get(b, "b")?.0), "out"))
}

/// The hyperbolic point matched to a conformal one. Fails with
/// `PT_STATUS_THIN` below the configured thickness.
///
/// # Safety
/// `f`, `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_uniformize(
    f: *const PtFlat,
    cfg: *const PtConfig,
    out: *mut *mut PtPoint,
) -> PtStatus {
    guard(|| {
        let p = uniformize(&get(f, "f")?.0, None, BRIDGE_TOL, &get(cfg, "cfg")?.0).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtPoint(p))), "out")
    })
}

/// The conformal point matched to a hyperbolic one. Fails with
/// `PT_STATUS_THIN` below the configured thickness.
///
/// # Safety
/// `pt`, `cfg` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_flatten(
    pt: *const PtPoint,
    cfg: *const PtConfig,
    out: *mut *mut PtFlat,
) -> PtStatus {
    guard(|| {
        let f = flatten(&get(pt, "pt")?.0, BRIDGE_TOL, &get(cfg, "cfg")?.0).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtFlat(f))), "out")
    })
}

/// Releases a conformal point. Null is ignored.
///
/// # Safety
/// `f` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_flat_free(f: *mut PtFlat) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

// ---------------------------------------------------------------------------
// Experiments

fn run_experiment(name: &str, cfg: &Config, n: usize) -> punctorus::Result<ExperimentReport> {
    match name {
        "balanced" => balanced_lemma_stat(cfg, n),
        "minsky" => minsky_gap_stat(cfg, n),
        "asymmetry" => asymmetry_stat(cfg, n),
        "bc" => bc_vs_cobounded(cfg, n),
        "lengths" => length_formula_stat(cfg, n),
        "candidate" => candidate_gap_stat(cfg, n, cfg.denominator_bound, 2 * cfg.denominator_bound),
        "contraction_lipschitz" => contraction_sweep(cfg, n, 8, Metric::Lipschitz),
        "contraction_teichmuller" => contraction_sweep(cfg, n, 8, Metric::Teichmuller),
        "fellow" => fellow_travel_sweep(cfg, n),
        other => Err(Error::InvalidArgument(format!(
            "unknown experiment {other:?}; expected balanced, minsky, asymmetry, bc, lengths, \
             candidate, contraction_lipschitz, contraction_teichmuller or fellow"
        ))),
    }
}

/// Runs a named seeded experiment with `n` samples: `balanced`, `minsky`,
/// `asymmetry`, `bc`, `lengths`, `candidate`, `contraction_lipschitz`,
/// `contraction_teichmuller` or `fellow`.
///
/// # Safety
/// `name` must be a nul-terminated string, `cfg` a live handle and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pt_experiment_run(
    name: *const c_char,
    cfg: *const PtConfig,
    n: usize,
    out: *mut *mut PtReport,
) -> PtStatus {
    guard(|| {
        let r = run_experiment(text(name, "name")?, &get(cfg, "cfg")?.0, n).map_err(fail)?;
        put(out, Box::into_raw(Box::new(PtReport(r))), "out")
    })
}

/// A calibrated constant of a report by name.
///
/// # Safety
/// `report` must be a live handle, `key` a nul-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pt_report_constant(
    report: *const PtReport,
    key: *const c_char,
    out: *mut f64,
) -> PtStatus {
    guard(|| {
        let key = text(key, "key")?;
        let r = get(report, "report")?;
        let v = r.0.constant(key).ok_or_else(|| {
            set_error(format!("report {} has no constant {key:?}", r.0.name));
            PtStatus::InvalidArgument
        })?;
        put(out, v, "out")
    })
}

/// The report rendered as CSV or JSON.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pt_report_render(
    report: *const PtReport,
    format: PtFormat,
    out: *mut *mut c_char,
) -> PtStatus {
    guard(|| {
        let f = match format {
            PtFormat::Csv => Format::Csv,
            PtFormat::Json => Format::Json,
        };
        let s = get(report, "report")?.0.render(f).map_err(fail)?;
        put(out, owned_string(s)?, "out")
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pt_report_free(report: *mut PtReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
