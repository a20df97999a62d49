//! C ABI for `pnopt`.
//!
//! Conventions:
//!
//! - Every fallible function returns a [`PnoptStatus`]; results come back
//!   through out-pointers, which are left untouched on failure.
//! - On failure the message is kept per thread and read with
//!   [`pnopt_last_error_message`].
//! - Constellations and channel parameters are opaque handles. Each
//!   `*_new`/`*_builtin`/`*_read`/`pnopt_optimize_*` result must be released
//!   with the matching `*_free`. Freeing NULL is a no-op.
//! - Panics never cross the boundary; they surface as `PNOPT_STATUS_PANIC`.
//! - Handles are immutable and may be shared between threads.
//! - Enum arguments must hold one of the listed values.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pnopt::metrics::{mi_dc, mi_dd, sep_floor, sep_union_bound, QuadratureGrid};
use pnopt::montecarlo::{empirical_sep, SimConfig};
use pnopt::optimize::{objective, optimize_global, Criterion, SearchConfig};
use pnopt::{detect, ChannelParams, ComplexPoint, Constellation, DetectorKind, Error, LikelihoodKind};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnoptStatus {
    Ok = 0,
    /// A required pointer was NULL or a string was not UTF-8.
    InvalidArgument = 1,
    InvalidParameter = 2,
    EmptyConstellation = 3,
    ZeroPower = 4,
    OriginPoint = 5,
    InvalidIndex = 6,
    Parse = 7,
    Optimization = 8,
    Io = 9,
    /// Output buffer too small.
    BufferTooSmall = 10,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnoptDetector {
    GapD = 0,
    LpnD = 1,
    Euclidean = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnoptLikelihood {
    Snr = 0,
    Phn = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnoptCriterion {
    SepA = 0,
    MiA = 1,
    MiB = 2,
}

/// Opaque constellation handle.
pub struct PnoptConstellation(Constellation);

/// Opaque channel parameter handle.
pub struct PnoptParams(ChannelParams);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PnoptStatus {
    match e {
        Error::InvalidParameter(_) => PnoptStatus::InvalidParameter,
        Error::EmptyConstellation => PnoptStatus::EmptyConstellation,
        Error::ZeroPower => PnoptStatus::ZeroPower,
        Error::OriginPoint { .. } => PnoptStatus::OriginPoint,
        Error::InvalidIndex(_) => PnoptStatus::InvalidIndex,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => PnoptStatus::Parse,
        Error::Optimization(_) => PnoptStatus::Optimization,
        Error::Io(_) => PnoptStatus::Io,
    }
}

/// Failure raised on this side of the boundary.
struct Fail(PnoptStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn bad(msg: &str) -> Fail {
    Fail(PnoptStatus::InvalidArgument, msg.to_owned())
}

/// Runs `f`, recording any failure or panic.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PnoptStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PnoptStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PnoptStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| bad(&format!("{what} is NULL")))
}

unsafe fn put<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(bad(&format!("{what} is NULL")));
    }
    p.write(v);
    Ok(())
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(bad(&format!("{what} is NULL")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| bad(&format!("{what} is not UTF-8")))
}

fn detector(d: PnoptDetector) -> DetectorKind {
    match d {
        PnoptDetector::GapD => DetectorKind::GapD,
        PnoptDetector::LpnD => DetectorKind::LpnD,
        PnoptDetector::Euclidean => DetectorKind::Euclidean,
    }
}

fn likelihood(l: PnoptLikelihood) -> LikelihoodKind {
    match l {
        PnoptLikelihood::Snr => LikelihoodKind::Snr,
        PnoptLikelihood::Phn => LikelihoodKind::Phn,
    }
}

fn criterion(c: PnoptCriterion) -> Criterion {
    match c {
        PnoptCriterion::SepA => Criterion::SepA,
        PnoptCriterion::MiA => Criterion::MiA,
        PnoptCriterion::MiB => Criterion::MiB,
    }
}

/// Hands a new handle to the caller; nothing is allocated when `out` is NULL.
unsafe fn hand_out<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(bad("out is NULL"));
    }
    out.write(Box::into_raw(Box::new(v)));
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pnopt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on the calling thread, or NULL if none.
/// Valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn pnopt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a constellation from `m` interleaved `(re, im)` pairs, scaled to
/// average power `power`.
///
/// # Safety
/// `re_im` must point to `2*m` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_new(
    re_im: *const f64,
    m: usize,
    power: f64,
    out: *mut *mut PnoptConstellation,
) -> PnoptStatus {
    guard(|| {
        if re_im.is_null() {
            return Err(bad("re_im is NULL"));
        }
        let flat = std::slice::from_raw_parts(re_im, 2 * m);
        let pts = flat.chunks_exact(2).map(|p| ComplexPoint::new(p[0], p[1])).collect();
        let c = Constellation::normalized(pts, power)?;
        hand_out(out, PnoptConstellation(c))
    })
}

/// Builtin constellation by name: `psk`, `qam`, `spiral-qam`,
/// `apsk:<n1,n2,...>` or `file:<path>`, at unit power.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_builtin(
    name: *const c_char,
    m: usize,
    out: *mut *mut PnoptConstellation,
) -> PnoptStatus {
    guard(|| {
        let c = pnopt::cli::builtin_constellation(text(name, "name")?, m)?;
        hand_out(out, PnoptConstellation(c))
    })
}

/// Reads a JSON or CSV constellation file as stored, without rescaling.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_read(
    path: *const c_char,
    out: *mut *mut PnoptConstellation,
) -> PnoptStatus {
    guard(|| {
        let c = Constellation::read_from(text(path, "path")?)?;
        hand_out(out, PnoptConstellation(c))
    })
}

/// Number of points; 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_len(c: *const PnoptConstellation) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// Power budget; 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_power(c: *const PnoptConstellation) -> f64 {
    c.as_ref().map_or(0.0, |c| c.0.power())
}

/// Copies the points as interleaved `(re, im)` pairs into `buf`, which holds
/// `cap` doubles. Returns `PNOPT_STATUS_BUFFER_TOO_SMALL` when `cap < 2*M`.
///
/// # Safety
/// `c` must be a live handle; `buf` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_points(
    c: *const PnoptConstellation,
    buf: *mut f64,
    cap: usize,
) -> PnoptStatus {
    guard(|| {
        let c = &get(c, "constellation")?.0;
        let need = 2 * c.len();
        if buf.is_null() {
            return Err(bad("buf is NULL"));
        }
        if cap < need {
            return Err(Fail(
                PnoptStatus::BufferTooSmall,
                format!("need {need} doubles, got {cap}"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, need);
        for (dst, p) in out.chunks_exact_mut(2).zip(c.points()) {
            dst[0] = p.re;
            dst[1] = p.im;
        }
        Ok(())
    })
}

/// Releases a constellation handle.
///
/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pnopt_constellation_free(c: *mut PnoptConstellation) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Channel with phase-noise variance `sigma_p2` (rad²) and noise density `n0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_params_new(sigma_p2: f64, n0: f64, out: *mut *mut PnoptParams) -> PnoptStatus {
    guard(|| hand_out(out, PnoptParams(ChannelParams::new(sigma_p2, n0)?)))
}

/// Channel from Eb/N0 in dB for an `m`-point constellation of power `power`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_params_from_eb_n0(
    sigma_p2: f64,
    eb_n0_db: f64,
    m: usize,
    power: f64,
    out: *mut *mut PnoptParams,
) -> PnoptStatus {
    guard(|| {
        let p = ChannelParams::from_eb_n0(sigma_p2, eb_n0_db, m, power)?;
        hand_out(out, PnoptParams(p))
    })
}

/// Noise density; NaN for NULL.
///
/// # Safety
/// `p` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pnopt_params_n0(p: *const PnoptParams) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.0.n0)
}

/// Releases a parameter handle.
///
/// # Safety
/// `p` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pnopt_params_free(p: *mut PnoptParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Index of the symbol chosen for the received sample `(re, im)`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_detect(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    kind: PnoptDetector,
    re: f64,
    im: f64,
    out: *mut usize,
) -> PnoptStatus {
    guard(|| {
        let (c, p) = (&get(c, "constellation")?.0, &get(p, "params")?.0);
        put(out, detect(ComplexPoint::new(re, im), c, p, detector(kind))?, "out")
    })
}

/// Union bound on the GAP-D symbol error probability. `raw` (optional) gets
/// the unclipped sum.
///
/// # Safety
/// Handles must be live; `value` must be writable; `raw` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn pnopt_sep_union_bound(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    value: *mut f64,
    raw: *mut f64,
) -> PnoptStatus {
    guard(|| {
        let b = sep_union_bound(&get(c, "constellation")?.0, &get(p, "params")?.0)?;
        put(value, b.value, "value")?;
        if !raw.is_null() {
            raw.write(b.raw);
        }
        Ok(())
    })
}

/// High-SNR error floor at phase-noise variance `sigma_p2`.
///
/// # Safety
/// `c` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_sep_floor(c: *const PnoptConstellation, sigma_p2: f64, out: *mut f64) -> PnoptStatus {
    guard(|| put(out, sep_floor(&get(c, "constellation")?.0, sigma_p2)?, "out"))
}

/// Mutual information (bits) of the GAP-D decision channel.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_mi_dd(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    out: *mut f64,
) -> PnoptStatus {
    guard(|| put(out, mi_dd(&get(c, "constellation")?.0, &get(p, "params")?.0)?, "out"))
}

/// Continuous-output mutual information (bits) under `kind`, on an
/// `n_r × n_phi` polar grid (0 for either selects the default resolution).
/// `error_estimate` may be NULL.
///
/// # Safety
/// Handles must be live; `bits` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_mi_dc(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    kind: PnoptLikelihood,
    n_r: usize,
    n_phi: usize,
    bits: *mut f64,
    error_estimate: *mut f64,
) -> PnoptStatus {
    guard(|| {
        let (c, p) = (&get(c, "constellation")?.0, &get(p, "params")?.0);
        let grid = if n_r == 0 || n_phi == 0 {
            QuadratureGrid::default_for(c, p)?
        } else {
            QuadratureGrid::for_constellation(c, p, n_r, n_phi)?
        };
        let e = mi_dc(c, p, likelihood(kind), &grid)?;
        put(bits, e.bits, "bits")?;
        if !error_estimate.is_null() {
            error_estimate.write(e.error_estimate);
        }
        Ok(())
    })
}

/// Design objective in minimization sense: the SEP bound, `-I_DD` or `-I_DC`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_objective(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    crit: PnoptCriterion,
    out: *mut f64,
) -> PnoptStatus {
    guard(|| {
        put(
            out,
            objective(&get(c, "constellation")?.0, criterion(crit), &get(p, "params")?.0)?,
            "out",
        )
    })
}

/// Monte Carlo symbol error rate with its standard error (`std_error` may be NULL).
///
/// # Safety
/// Handles must be live; `estimate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_empirical_sep(
    c: *const PnoptConstellation,
    p: *const PnoptParams,
    kind: PnoptDetector,
    n_samples: u64,
    seed: u64,
    estimate: *mut f64,
    std_error: *mut f64,
) -> PnoptStatus {
    guard(|| {
        let (c, p) = (&get(c, "constellation")?.0, &get(p, "params")?.0);
        let r = empirical_sep(c, p, detector(kind), &SimConfig::new(n_samples, seed))?;
        put(estimate, r.estimate, "estimate")?;
        if !std_error.is_null() {
            std_error.write(r.std_error);
        }
        Ok(())
    })
}

/// Multi-start design of an `m`-point unit-power constellation. Writes a new
/// handle to `out` and its objective to `value` (may be NULL).
///
/// # Safety
/// `p` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pnopt_optimize_global(
    p: *const PnoptParams,
    crit: PnoptCriterion,
    m: usize,
    n_starts: usize,
    max_iterations: usize,
    seed: u64,
    out: *mut *mut PnoptConstellation,
    value: *mut f64,
) -> PnoptStatus {
    guard(|| {
        let search = SearchConfig {
            n_starts,
            max_iterations,
            seed,
            ..SearchConfig::default()
        };
        let r = optimize_global(criterion(crit), &get(p, "params")?.0, m, &search)?;
        hand_out(out, PnoptConstellation(r.constellation))?;
        if !value.is_null() {
            value.write(r.value);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::ZeroPower), PnoptStatus::ZeroPower);
        assert_eq!(status_of(&Error::OriginPoint { index: 0 }), PnoptStatus::OriginPoint);
        assert_eq!(status_of(&Error::Parse("x".into())), PnoptStatus::Parse);
    }

    #[test]
    fn panics_are_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, PnoptStatus::Panic);
        let msg = unsafe { CStr::from_ptr(pnopt_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }

    #[test]
    fn version_is_terminated() {
        let v = unsafe { CStr::from_ptr(pnopt_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
