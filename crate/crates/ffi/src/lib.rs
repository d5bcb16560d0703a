//! C ABI for the `gmeasure` library.
//!
//! Every fallible function returns a [`GmStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`gm_last_error_message`] on the same thread. Panics never cross the
//! boundary; they are reported as [`GmStatus::Panic`].
//!
//! Words are arrays of `size_t` symbols with index 0 the most recent one.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gmeasure::blockvar::{delta_bar, h_block, rho_block, BlockStructure, BlockVariationPair};
use gmeasure::measures::CylinderMeasure;
use gmeasure::metrics::wasserstein_ultra;
use gmeasure::renewal::{build_spec, simulate_y};
use gmeasure::symbolic::{variation, Couplings};
use gmeasure::{Alphabet, Error, GFunction};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Unsupported = 3,
    Panic = 4,
}

/// Opaque g-function handle. Create with one of the `gm_gfunction_new_*`
/// functions and release with [`gm_gfunction_free`].
pub struct GmGFunction {
    inner: GFunction,
}

/// Block variation and its bounds, see [`gm_rho_block`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GmRhoRecord {
    pub exact: f64,
    pub bound_log: f64,
    pub bound_sqrt: f64,
    pub bound_w: f64,
    pub h: f64,
    pub slack: f64,
    /// Nonzero when `bound_w` is only asymptotic.
    pub w_caveat: u8,
    /// Nonzero when `exact` and `h` are attained suprema.
    pub attained: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> GmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GmStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GmStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            let status = match e {
                Error::InvalidInput(_) => GmStatus::InvalidInput,
                Error::Unsupported(_) => GmStatus::Unsupported,
            };
            set_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            GmStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(what))
}

unsafe fn handle<'a>(g: *const GmGFunction) -> Result<&'a GFunction, Failure> {
    g.as_ref().map(|h| &h.inner).ok_or(Failure::Null("g"))
}

unsafe fn pair(b: *const usize, r: *const f64, levels: usize) -> Result<BlockVariationPair, Failure> {
    let b = slice(b, levels, "b")?;
    let r = slice(r, levels, "r")?;
    Ok(BlockVariationPair::new(BlockStructure::new(b.to_vec())?, r.to_vec())?)
}

fn boxed(g: GFunction) -> *mut GmGFunction {
    Box::into_raw(Box::new(GmGFunction { inner: g }))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Finite-memory g-function over `alphabet` symbols. `values` holds
/// `alphabet^memory` rows of `alphabet` entries: row `h` lists `g(a . h)`
/// for `a = 0 .. alphabet - 1`, where `h` encodes the history with its most
/// recent symbol as the most significant digit.
///
/// # Safety
/// `values` must point to `len` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_new_table(
    alphabet: usize,
    memory: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut GmGFunction,
) -> GmStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let a = Alphabet::new(alphabet)?;
        let rows = a
            .word_count(memory)
            .ok_or_else(|| Error::InvalidInput("table too large".into()))?;
        if rows.checked_mul(alphabet) != Some(len) {
            return Err(Error::InvalidInput(format!(
                "expected {alphabet}^{memory} x {alphabet} values, got {len}"
            ))
            .into());
        }
        let values = slice(values, len, "values")?;
        let columns = values.chunks(alphabet).map(<[f64]>::to_vec).collect();
        *out = boxed(GFunction::table(a, memory, columns)?);
        Ok(())
    })
}

/// Binary Markov g-function with `g(1 | 1) = p11` and `g(1 | 0) = p10`.
///
/// # Safety
/// `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_new_binary_markov(p11: f64, p10: f64, out: *mut *mut GmGFunction) -> GmStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        *out = boxed(GFunction::binary_markov(p11, p10)?);
        Ok(())
    })
}

/// Binary logistic g-function with couplings `theta[0..n]` for lags
/// `1..=n`, `tail_bound >= sum_{k > n} |theta_k|`, evaluated at `depth`.
///
/// # Safety
/// `theta` must point to `n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_new_logistic(
    theta0: f64,
    theta: *const f64,
    n: usize,
    tail_bound: f64,
    depth: usize,
    out: *mut *mut GmGFunction,
) -> GmStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let theta = slice(theta, n, "theta")?.to_vec();
        *out = boxed(GFunction::logistic(theta0, Couplings::Explicit { theta, tail_bound }, depth)?);
        Ok(())
    })
}

/// Release a handle; null is ignored.
///
/// # Safety
/// `g` must come from a `gm_gfunction_new_*` call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_free(g: *mut GmGFunction) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// `g(word)`, where `word[0]` is the new symbol and the rest its past.
///
/// # Safety
/// `word` must point to `len` symbols.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_eval(
    g: *const GmGFunction,
    word: *const usize,
    len: usize,
    out: *mut f64,
) -> GmStatus {
    guard(|| {
        let g = handle(g)?;
        let out = self::out(out, "out")?;
        *out = g.eval(slice(word, len, "word")?)?;
        Ok(())
    })
}

/// `var_n log g` (exact for tables, an upper bound for logistic families).
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_gfunction_variation(g: *const GmGFunction, n: usize, out: *mut f64) -> GmStatus {
    guard(|| {
        let g = handle(g)?;
        *self::out(out, "out")? = variation(g, n).value;
        Ok(())
    })
}

/// `delta_bar` of block lengths `b` and rates `r`, both of length `levels`.
///
/// # Safety
/// `b` and `r` must point to `levels` entries.
#[no_mangle]
pub unsafe extern "C" fn gm_delta_bar(b: *const usize, r: *const f64, levels: usize, out: *mut f64) -> GmStatus {
    guard(|| {
        let p = pair(b, r, levels)?;
        *self::out(out, "out")? = delta_bar(&p);
        Ok(())
    })
}

/// Limit `sum a_j / E[T_1]` of the renewal equation of the pair.
///
/// # Safety
/// `b` and `r` must point to `levels` entries.
#[no_mangle]
pub unsafe extern "C" fn gm_renewal_limit(b: *const usize, r: *const f64, levels: usize, out: *mut f64) -> GmStatus {
    guard(|| {
        let p = pair(b, r, levels)?;
        *self::out(out, "out")? = build_spec(&p).limit();
        Ok(())
    })
}

/// Frequency of `Y_n <= 0` over `steps` transitions of the dominating chain.
///
/// # Safety
/// `b` and `r` must point to `levels` entries.
#[no_mangle]
pub unsafe extern "C" fn gm_simulate_y_frequency(
    b: *const usize,
    r: *const f64,
    levels: usize,
    steps: usize,
    seed: u64,
    out: *mut f64,
) -> GmStatus {
    guard(|| {
        let p = pair(b, r, levels)?;
        *self::out(out, "out")? = simulate_y(&p, steps, seed, false)?.frequency;
        Ok(())
    })
}

/// Worst-case block Hellinger distance `h(B, b)`.
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_h_block(g: *const GmGFunction, big_b: usize, b: usize, out: *mut f64) -> GmStatus {
    guard(|| {
        let g = handle(g)?;
        *self::out(out, "out")? = h_block(g, big_b, b)?;
        Ok(())
    })
}

/// Coupling block variation `rho(B, b)` with its Hellinger bounds.
///
/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gm_rho_block(
    g: *const GmGFunction,
    big_b: usize,
    b: usize,
    out: *mut GmRhoRecord,
) -> GmStatus {
    guard(|| {
        let g = handle(g)?;
        let out = self::out(out, "out")?;
        let r = rho_block(g, big_b, b)?;
        *out = GmRhoRecord {
            exact: r.exact,
            bound_log: r.bound_log,
            bound_sqrt: r.bound_sqrt,
            bound_w: r.bound_w,
            h: r.h,
            slack: r.slack,
            w_caveat: r.w_caveat.into(),
            attained: r.attained.into(),
        };
        Ok(())
    })
}

/// Ultrametric Wasserstein distance of two depth-`depth` cylinder measures
/// given as `alphabet^depth` masses each.
///
/// # Safety
/// `mu` and `nu` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn gm_wasserstein_ultra(
    alphabet: usize,
    depth: usize,
    mu: *const f64,
    nu: *const f64,
    len: usize,
    out: *mut f64,
) -> GmStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let a = Alphabet::new(alphabet)?;
        let mu = CylinderMeasure::new(a, depth, slice(mu, len, "mu")?.to_vec())?;
        let nu = CylinderMeasure::new(a, depth, slice(nu, len, "nu")?.to_vec())?;
        *out = wasserstein_ultra(&mu, &nu)?;
        Ok(())
    })
}
