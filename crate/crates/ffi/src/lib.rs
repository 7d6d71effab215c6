//! C ABI over `finpop`.
//!
//! Conventions:
//!
//! * Every fallible function returns a [`FinpopStatus`]; results go through
//!   out-pointers that are written only on success.
//! * After a failure, [`finpop_last_error`] copies the message for the
//!   calling thread.
//! * Handles (`FinpopMatrix`, `FinpopPaResult`) are opaque, created by
//!   `*_new`/`*_run` and released by the matching `*_free`. Freeing NULL is a
//!   no-op.
//! * Strings returned by the library are released with [`finpop_string_free`].
//! * Panics never cross the boundary; they surface as `FINPOP_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use finpop::edge::{edge_params, johnstone_edge, spearman_edge, EdgeParams, PopulationShape};
use finpop::eig::{eigs_sym, top_eigs_gram};
use finpop::matrix::{DataMatrix, SymMatrix};
use finpop::pa::{self, PaConfig, PaMethod, PaResult, PaVariant};
use finpop::tw::{tw1_cdf, tw1_pvalue, tw1_quantile};
use finpop::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinpopStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Degenerate = 3,
    Numerical = 4,
    Domain = 5,
    Config = 6,
    Unsupported = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinpopMethod {
    MonteCarlo = 0,
    TwDirect = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinpopVariant {
    Raw = 0,
    CenteredB1 = 1,
    StandardizedB2 = 2,
}

/// Opaque `p × n` data matrix (rows are variables).
pub struct FinpopMatrix(DataMatrix);

/// Opaque result of a parallel analysis run.
pub struct FinpopPaResult(PaResult);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FinpopPaConfig {
    pub method: FinpopMethod,
    pub variant: FinpopVariant,
    pub percentile: f64,
    pub num_permutations: usize,
    pub max_factors: usize,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FinpopPaStep {
    /// 1-based.
    pub factor_index: usize,
    pub observed_eigenvalue: f64,
    pub threshold: f64,
    /// NaN when the variant has no edge constants.
    pub normalized_stat: f64,
    pub p_value: f64,
    pub selected: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FinpopEdgeParams {
    pub xi_plus: f64,
    pub e_plus: f64,
    pub gamma0: f64,
    /// Set when the edge sits within 1e-8 of the population's singular point.
    pub ill_conditioned: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> FinpopStatus {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) => FinpopStatus::InvalidInput,
        Error::DegenerateInput(_) | Error::DegenerateRows { .. } => FinpopStatus::Degenerate,
        Error::Numerical { .. } => FinpopStatus::Numerical,
        Error::Domain(_) => FinpopStatus::Domain,
        Error::Config(_) => FinpopStatus::Config,
        Error::UnsupportedVariant(_) => FinpopStatus::Unsupported,
    }
}

/// Runs `f`, converting errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), FinpopStatus>) -> FinpopStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FinpopStatus::Ok,
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FinpopStatus::Panic
        }
    }
}

fn fail(e: Error) -> FinpopStatus {
    let status = status_of(&e);
    set_error(e.to_string());
    status
}

fn null(what: &str) -> FinpopStatus {
    set_error(format!("null pointer: {what}"));
    FinpopStatus::NullPointer
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], FinpopStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

fn edge_out(ep: &EdgeParams) -> FinpopEdgeParams {
    FinpopEdgeParams {
        xi_plus: ep.xi_plus,
        e_plus: ep.e_plus,
        gamma0: ep.gamma0,
        ill_conditioned: ep.warning.is_some(),
    }
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length in bytes.
#[no_mangle]
pub unsafe extern "C" fn finpop_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn finpop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a `rows × cols` matrix from row-major `values`.
#[no_mangle]
pub unsafe extern "C" fn finpop_matrix_new(
    rows: usize,
    cols: usize,
    values: *const f64,
    out: *mut *mut FinpopMatrix,
) -> FinpopStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| fail(Error::InvalidInput("size overflow".into())))?;
        let data = slice(values, len, "values")?;
        let m = DataMatrix::new(rows, cols, data.to_vec()).map_err(fail)?;
        *out = Box::into_raw(Box::new(FinpopMatrix(m)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn finpop_matrix_free(m: *mut FinpopMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of rows, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn finpop_matrix_rows(m: *const FinpopMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// Number of columns, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn finpop_matrix_cols(m: *const FinpopMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Defaults: Monte Carlo, standardized variant, 95th percentile, 1000 permutations.
#[no_mangle]
pub extern "C" fn finpop_pa_config_default(max_factors: usize, seed: u64) -> FinpopPaConfig {
    FinpopPaConfig {
        method: FinpopMethod::MonteCarlo,
        variant: FinpopVariant::StandardizedB2,
        percentile: 0.95,
        num_permutations: 1000,
        max_factors,
        seed,
    }
}

/// Runs parallel analysis on `data` and stores a new result handle in `out`.
#[no_mangle]
pub unsafe extern "C" fn finpop_pa_run(
    data: *const FinpopMatrix,
    config: *const FinpopPaConfig,
    out: *mut *mut FinpopPaResult,
) -> FinpopStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = PaConfig {
            method: match c.method {
                FinpopMethod::MonteCarlo => PaMethod::MonteCarlo,
                FinpopMethod::TwDirect => PaMethod::TwDirect,
            },
            variant: match c.variant {
                FinpopVariant::Raw => PaVariant::Raw,
                FinpopVariant::CenteredB1 => PaVariant::CenteredB1,
                FinpopVariant::StandardizedB2 => PaVariant::StandardizedB2,
            },
            percentile: c.percentile,
            num_permutations: c.num_permutations,
            max_factors: c.max_factors,
            seed: c.seed,
        };
        let result = pa::run(&data.0, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(FinpopPaResult(result)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn finpop_pa_result_free(r: *mut FinpopPaResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of selected factors, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn finpop_pa_result_k_selected(r: *const FinpopPaResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.k_selected)
}

/// Number of evaluated steps, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn finpop_pa_result_num_steps(r: *const FinpopPaResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.steps.len())
}

/// Copies step `index` (0-based) into `out`.
#[no_mangle]
pub unsafe extern "C" fn finpop_pa_result_step(
    r: *const FinpopPaResult,
    index: usize,
    out: *mut FinpopPaStep,
) -> FinpopStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("result"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = r.0.steps.get(index).ok_or_else(|| {
            fail(Error::InvalidInput(format!(
                "step index {index} out of range ({} steps)",
                r.0.steps.len()
            )))
        })?;
        *out = FinpopPaStep {
            factor_index: s.factor_index,
            observed_eigenvalue: s.observed_eigenvalue,
            threshold: s.threshold,
            normalized_stat: s.normalized_stat.unwrap_or(f64::NAN),
            p_value: s.p_value,
            selected: s.selected,
        };
        Ok(())
    })
}

/// JSON rendering of the result; release with [`finpop_string_free`].
/// Returns NULL for a NULL handle.
#[no_mangle]
pub unsafe extern "C" fn finpop_pa_result_to_json(r: *const FinpopPaResult) -> *mut c_char {
    let Some(r) = r.as_ref() else {
        set_error("null pointer: result".into());
        return ptr::null_mut();
    };
    let text = serde_json::to_string(&r.0).expect("serializable");
    CString::new(text).map_or(ptr::null_mut(), CString::into_raw)
}

#[no_mangle]
pub unsafe extern "C" fn finpop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Edge constants for population spectrum `tvals[0..len]`, ratio `c = p/n`
/// and sampling fraction `y = n/N`.
#[no_mangle]
pub unsafe extern "C" fn finpop_edge_params(
    tvals: *const f64,
    len: usize,
    c: f64,
    y: f64,
    out: *mut FinpopEdgeParams,
) -> FinpopStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let t = slice(tvals, len, "tvals")?;
        let shape = PopulationShape::new(t.to_vec(), c, y).map_err(fail)?;
        *out = edge_out(&edge_params(&shape));
        Ok(())
    })
}

/// Closed-form constants for `T = I`.
#[no_mangle]
pub unsafe extern "C" fn finpop_spearman_edge(c: f64, out: *mut FinpopEdgeParams) -> FinpopStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = edge_out(&spearman_edge(c).map_err(fail)?);
        Ok(())
    })
}

/// Finite-sample centering and scale.
#[no_mangle]
pub unsafe extern "C" fn finpop_johnstone_edge(n: usize, p: usize, out: *mut FinpopEdgeParams) -> FinpopStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = edge_out(&johnstone_edge(n, p).map_err(fail)?);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn finpop_tw1_cdf(s: f64) -> f64 {
    tw1_cdf(s)
}

#[no_mangle]
pub extern "C" fn finpop_tw1_pvalue(s: f64) -> f64 {
    tw1_pvalue(s)
}

/// Quantile at level `q` in (0, 1).
#[no_mangle]
pub unsafe extern "C" fn finpop_tw1_quantile(q: f64, out: *mut f64) -> FinpopStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = tw1_quantile(q).map_err(fail)?;
        Ok(())
    })
}

/// All eigenvalues, descending, of the symmetric `dim × dim` row-major matrix
/// `a`; only the upper triangle is read. `out` holds `dim` values.
#[no_mangle]
pub unsafe extern "C" fn finpop_eigs_sym(dim: usize, a: *const f64, out: *mut f64) -> FinpopStatus {
    guard(|| {
        let len = dim.checked_mul(dim).ok_or_else(|| fail(Error::InvalidInput("size overflow".into())))?;
        let dense = slice(a, len, "a")?;
        if dim > 0 && out.is_null() {
            return Err(null("out"));
        }
        let sym = SymMatrix::from_fn(dim, |i, j| dense[i * dim + j]);
        let spectrum = eigs_sym(&sym).map_err(fail)?;
        if dim > 0 {
            std::slice::from_raw_parts_mut(out, dim).copy_from_slice(spectrum.values());
        }
        Ok(())
    })
}

/// The `k` largest eigenvalues, descending, of `(1/n)·B·Bᵀ` for the `p × n`
/// matrix `data`. `out` holds `k` values.
#[no_mangle]
pub unsafe extern "C" fn finpop_top_eigs(data: *const FinpopMatrix, k: usize, out: *mut f64) -> FinpopStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spectrum = top_eigs_gram(&data.0, k).map_err(fail)?;
        std::slice::from_raw_parts_mut(out, k).copy_from_slice(spectrum.values());
        Ok(())
    })
}
