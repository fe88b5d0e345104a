//! C interface to drtune.
//!
//! Every function returns a [`DrtuneStatus`]. On failure a message is kept
//! per thread and can be read with [`drtune_last_error`]. Objects are handed
//! out as opaque pointers and must be released with the matching `_free`
//! function. Rows are stored row-major.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use drtune::analysis::pareto::pareto_front;
use drtune::analysis::sobol::sobol_indices;
use drtune::config::RunConfig;
use drtune::data::{generate_sine, generate_two_cluster};
use drtune::history::TuningHistory;
use drtune::matrix::DataMatrix;
use drtune::metrics::{MetricKind, MetricSpec};
use drtune::tsne::{run_tsne, TsneConfig};
use drtune::tuner::run_tuning;
use drtune::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrtuneStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad UTF-8, mismatched lengths or an unknown name.
    InvalidArgument = 2,
    Domain = 3,
    Config = 4,
    Engine = 5,
    Io = 6,
    Runtime = 7,
    Panic = 8,
}

/// Owned data matrix with optional labels.
pub struct DrtuneMatrix(DataMatrix);

/// Result of a tuning run.
pub struct DrtuneHistory(TuningHistory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DrtuneStatus {
    match err {
        Error::Domain(_) => DrtuneStatus::Domain,
        Error::Config { .. } => DrtuneStatus::Config,
        Error::Engine { .. } => DrtuneStatus::Engine,
        Error::Ingestion { .. } | Error::Format(_) | Error::Io(_) => DrtuneStatus::Io,
        Error::Trial { source, .. } => status_of(source),
        _ => DrtuneStatus::Runtime,
    }
}

struct Failure(DrtuneStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let mut msg = e.to_string();
        if let Error::Engine { stderr, .. } = &e {
            if !stderr.is_empty() {
                msg = format!("{msg}\n{stderr}");
            }
        }
        Failure(status_of(&e), msg)
    }
}

fn null(what: &str) -> Failure {
    Failure(DrtuneStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(DrtuneStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DrtuneStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DrtuneStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DrtuneStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn drtune_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn drtune_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `rows * cols` values into a new matrix. `labels` may be null;
/// otherwise it holds `rows` class labels.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_new(
    values: *const f64,
    rows: usize,
    cols: usize,
    labels: *const usize,
    out: *mut *mut DrtuneMatrix,
) -> DrtuneStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| invalid("rows * cols overflows"))?;
        let v = slice(values, len, "values")?.to_vec();
        let mut m = DataMatrix::new(v, rows, cols)?;
        if !labels.is_null() {
            m = m.with_labels(slice(labels, rows, "labels")?.to_vec())?;
        }
        put(out, DrtuneMatrix(m), "out")
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_free(m: *mut DrtuneMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a valid matrix or null.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_rows(m: *const DrtuneMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// # Safety
/// `m` must be a valid matrix or null.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_cols(m: *const DrtuneMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the values into `out`, which must hold exactly `rows * cols`.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_values(m: *const DrtuneMatrix, out: *mut f64, len: usize) -> DrtuneStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let v = m.0.values();
        if len != v.len() {
            return Err(invalid(format!("buffer holds {len} values, matrix has {}", v.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Copies the labels into `out` (length `rows`). Fails with
/// `InvalidArgument` when the matrix has none.
///
/// # Safety
/// `out` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn drtune_matrix_labels(m: *const DrtuneMatrix, out: *mut usize, len: usize) -> DrtuneStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let labels = m.0.labels().ok_or_else(|| invalid("matrix has no labels"))?;
        if len != labels.len() {
            return Err(invalid(format!("buffer holds {len} labels, matrix has {}", labels.len())));
        }
        slice_mut(out, len, "out")?.copy_from_slice(labels);
        Ok(())
    })
}

/// Two labelled Gaussian clusters; see the `generate` command.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_generate_two_cluster(
    n_small: usize,
    n_large: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    out: *mut *mut DrtuneMatrix,
) -> DrtuneStatus {
    guard(|| put(out, DrtuneMatrix(generate_two_cluster(n_small, n_large, dim, separation, seed)?), "out"))
}

/// The four-column sine dataset with `n` rows.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_generate_sine(n: usize, out: *mut *mut DrtuneMatrix) -> DrtuneStatus {
    guard(|| put(out, DrtuneMatrix(generate_sine(n)?), "out"))
}

/// Exact t-SNE with default optimizer settings. Labels are carried over.
///
/// # Safety
/// `x` must be a valid matrix and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_tsne(
    x: *const DrtuneMatrix,
    perplexity: f64,
    output_dim: usize,
    seed: u64,
    out: *mut *mut DrtuneMatrix,
) -> DrtuneStatus {
    guard(|| {
        let x = deref(x, "x")?;
        let config = TsneConfig {
            output_dim,
            ..TsneConfig::default().with_perplexity(perplexity).with_seed(seed)
        };
        let emb = run_tsne(&x.0, &config)?;
        put(out, DrtuneMatrix(emb.coords), "out")
    })
}

/// Loss in `[0, 1]` of embedding `x_star` of `x` under the named metric
/// (`auc`, `q_local`, `q_global`, `avg_ratio`, `pearson_dist`, `nmi`,
/// `misclass`). Label metrics read the labels of `x`.
///
/// # Safety
/// Matrices must be valid, `metric` NUL-terminated, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_metric_loss(
    x: *const DrtuneMatrix,
    x_star: *const DrtuneMatrix,
    metric: *const c_char,
    seed: u64,
    out: *mut f64,
) -> DrtuneStatus {
    guard(|| {
        let (x, x_star) = (deref(x, "x")?, deref(x_star, "x_star")?);
        let name = string(metric, "metric")?;
        let kind = MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| invalid(format!("unknown metric `{name}`")))?;
        let loss = MetricSpec::new(kind).loss(&x.0, &x_star.0, seed)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = loss;
        Ok(())
    })
}

/// Parses a run configuration and tunes on its dataset. Relative paths in
/// the text resolve against `base_dir`, or the working directory when it
/// is null. Nothing is written to disk.
///
/// # Safety
/// Strings must be NUL-terminated, `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_tune_toml(
    config_toml: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut DrtuneHistory,
) -> DrtuneStatus {
    guard(|| {
        let text = string(config_toml, "config_toml")?;
        let base = if base_dir.is_null() { "." } else { string(base_dir, "base_dir")? };
        let cfg = RunConfig::from_toml(text, Path::new(base))?;
        let x = cfg.dataset.load()?;
        put(out, DrtuneHistory(run_tuning(&x, &cfg.tune)?), "out")
    })
}

/// # Safety
/// `h` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn drtune_history_free(h: *mut DrtuneHistory) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of trials.
///
/// # Safety
/// `h` must be a valid history or null.
#[no_mangle]
pub unsafe extern "C" fn drtune_history_len(h: *const DrtuneHistory) -> usize {
    h.as_ref().map_or(0, |h| h.0.len())
}

/// Number of hyperparameters.
///
/// # Safety
/// `h` must be a valid history or null.
#[no_mangle]
pub unsafe extern "C" fn drtune_history_dim(h: *const DrtuneHistory) -> usize {
    h.as_ref().map_or(0, |h| h.0.space.len())
}

/// Best trial: `normalized` and `raw` receive `dim` values each (either may
/// be null), `aggregate` its loss.
///
/// # Safety
/// Buffers must be valid for `dim` writes; `aggregate` for one.
#[no_mangle]
pub unsafe extern "C" fn drtune_history_best(
    h: *const DrtuneHistory,
    normalized: *mut f64,
    raw: *mut f64,
    dim: usize,
    aggregate: *mut f64,
) -> DrtuneStatus {
    guard(|| {
        let h = deref(h, "h")?;
        let best = h.0.best().ok_or_else(|| invalid("history is empty"))?;
        if dim != best.point.normalized.len() {
            return Err(invalid(format!("buffers hold {dim} values, space has {}", best.point.normalized.len())));
        }
        if !normalized.is_null() {
            slice_mut(normalized, dim, "normalized")?.copy_from_slice(&best.point.normalized);
        }
        if !raw.is_null() {
            slice_mut(raw, dim, "raw")?.copy_from_slice(&best.point.raw);
        }
        if aggregate.is_null() {
            return Err(null("aggregate"));
        }
        *aggregate = best.aggregate;
        Ok(())
    })
}

/// The history as JSON. Release with [`drtune_string_free`].
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn drtune_history_json(h: *const DrtuneHistory, out: *mut *mut c_char) -> DrtuneStatus {
    guard(|| {
        let h = deref(h, "h")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string_pretty(&h.0).map_err(Error::from)?;
        *out = CString::new(text).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn drtune_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Pareto front of `n` loss pairs. `on_front[i]` is set to 1 or 0; `knee`
/// receives the knee index, or -1 when the front has fewer than three
/// distinct points.
///
/// # Safety
/// Inputs valid for `n` reads, `on_front` for `n` writes, `knee` for one.
#[no_mangle]
pub unsafe extern "C" fn drtune_pareto(
    loss1: *const f64,
    loss2: *const f64,
    n: usize,
    on_front: *mut u8,
    knee: *mut isize,
) -> DrtuneStatus {
    guard(|| {
        let (a, b) = (slice(loss1, n, "loss1")?, slice(loss2, n, "loss2")?);
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(Failure(DrtuneStatus::Domain, "losses must be finite".into()));
        }
        let pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
        let res = pareto_front(&pairs);
        let flags = slice_mut(on_front, n, "on_front")?;
        flags.fill(0);
        for &i in &res.front {
            flags[i] = 1;
        }
        if knee.is_null() {
            return Err(null("knee"));
        }
        *knee = res.knee.map_or(-1, |k| k as isize);
        Ok(())
    })
}

/// Sobol indices of `f` over `[0, 1]^dim`. The four output arrays hold
/// `dim` values each; `degenerate` is set to 1 for a constant function.
/// `n_base` must be a power of two of at least 64. `f` receives a point of
/// length `dim` and the caller's `user_data`.
///
/// # Safety
/// Output pointers must be valid for the stated lengths. `f` must not unwind.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn drtune_sobol(
    f: Option<extern "C" fn(point: *const f64, dim: usize, user_data: *mut c_void) -> f64>,
    user_data: *mut c_void,
    dim: usize,
    n_base: usize,
    seed: u64,
    n_bootstrap: usize,
    s1: *mut f64,
    s1_conf: *mut f64,
    st: *mut f64,
    st_conf: *mut f64,
    degenerate: *mut u8,
) -> DrtuneStatus {
    guard(|| {
        let f = f.ok_or_else(|| null("f"))?;
        let outs = [
            slice_mut(s1, dim, "s1")?,
            slice_mut(s1_conf, dim, "s1_conf")?,
            slice_mut(st, dim, "st")?,
            slice_mut(st_conf, dim, "st_conf")?,
        ];
        if degenerate.is_null() {
            return Err(null("degenerate"));
        }
        let res = sobol_indices(|p: &[f64]| f(p.as_ptr(), p.len(), user_data), dim, n_base, seed, n_bootstrap)?;
        for (dst, src) in outs.into_iter().zip([&res.s1, &res.s1_conf, &res.st, &res.st_conf]) {
            dst.copy_from_slice(src);
        }
        *degenerate = u8::from(res.degenerate);
        Ok(())
    })
}
