//! C ABI over the `fesc` core crate.
//!
//! Every function returns a [`FescStatus`]. On failure the message is kept in
//! a thread-local slot readable with [`fesc_last_error`]. Objects cross the
//! boundary as opaque handles that the caller releases with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fesc::cluster::{PointSet, SimilarityGraph};
use fesc::config::PipelineConfig;
use fesc::consensus::{select_features, ConsensusParams, Selection};
use fesc::sigproc::Label;
use fesc::spectral::FeatureMatrix;
use fesc::svm::{KernelKind, SvmModel, SvmParams};
use fesc::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FescStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// Eigen-solver, SVM convergence or graph connectivity failure.
    Numerical = 4,
    /// No consensus parameters produced a feature set.
    Infeasible = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FescKernel {
    Linear = 0,
    Rbf = 1,
}

impl From<FescKernel> for KernelKind {
    fn from(k: FescKernel) -> Self {
        match k {
            FescKernel::Linear => KernelKind::Linear,
            FescKernel::Rbf => KernelKind::Rbf,
        }
    }
}

/// Pipeline configuration.
pub struct FescConfig(PipelineConfig);

/// Feature matrix loaded from CSV.
pub struct FescFeatures(FeatureMatrix);

/// Trained SVM.
pub struct FescSvm(SvmModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> FescStatus {
    match err {
        Error::Io { .. } | Error::Malformed { .. } => FescStatus::Io,
        Error::Solver(_) | Error::Convergence { .. } | Error::DisconnectedGraph { .. } => FescStatus::Numerical,
        Error::NoFeasibleModel => FescStatus::Infeasible,
        _ => FescStatus::InvalidArgument,
    }
}

enum Failure {
    Status(FescStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(FescStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(FescStatus::InvalidArgument, msg.into())
}

/// Runs `f`, records any error or panic, and maps it to a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FescStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FescStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FescStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn rows_of(data: &[f64], n_rows: usize, n_cols: usize) -> Vec<Vec<f64>> {
    (0..n_rows).map(|r| data[r * n_cols..(r + 1) * n_cols].to_vec()).collect()
}

fn label_of(code: u8) -> Result<Label, Failure> {
    match code {
        1 => Ok(Label::Class1),
        2 => Ok(Label::Class2),
        _ => Err(invalid(format!("label {code} is not 1 or 2"))),
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, 0 if none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fesc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fesc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Number of frequency bins [`fesc_msc`] produces for trials of `len` samples.
#[no_mangle]
pub extern "C" fn fesc_msc_bins(len: usize) -> usize {
    if len == 0 {
        0
    } else {
        len.next_power_of_two() / 2 + 1
    }
}

/// Magnitude-squared coherence between paired trials.
///
/// `eeg` and `emg` hold `n_trials * len` samples, trial-major. `freqs_out` and
/// `msc_out` receive `fesc_msc_bins(len)` values each; `freqs_out` may be null.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn fesc_msc(
    eeg: *const f64,
    emg: *const f64,
    n_trials: usize,
    len: usize,
    sample_rate_hz: f64,
    freqs_out: *mut f64,
    msc_out: *mut f64,
) -> FescStatus {
    guard(|| {
        if len == 0 {
            return Err(invalid("trial length is zero"));
        }
        let total = n_trials.checked_mul(len).ok_or_else(|| invalid("trial buffer size overflows"))?;
        let x = slice_arg(eeg, total, "eeg")?;
        let y = slice_arg(emg, total, "emg")?;
        if msc_out.is_null() {
            return Err(null("msc_out"));
        }
        let xs: Vec<&[f64]> = x.chunks(len).collect();
        let ys: Vec<&[f64]> = y.chunks(len).collect();
        let (freqs, msc) = fesc::spectral::msc(&xs, &ys, sample_rate_hz)?;
        ptr::copy_nonoverlapping(msc.as_ptr(), msc_out, msc.len());
        if !freqs_out.is_null() {
            ptr::copy_nonoverlapping(freqs.as_ptr(), freqs_out, freqs.len());
        }
        Ok(())
    })
}

/// Consensus feature selection over `n` pooled points (`points` holds
/// `n * 2` values, class1 mean then class2 mean per feature).
///
/// On success `indices_out` (capacity `m`) receives the selected feature
/// indices in ascending order and `count_out` their number. An infeasible
/// combination returns [`FescStatus::Infeasible`].
///
/// # Safety
/// `points` must hold `2 * n` values and `indices_out` at least `m` slots.
#[no_mangle]
pub unsafe extern "C" fn fesc_select_features(
    points: *const f64,
    n: usize,
    m: usize,
    sigma: f64,
    nu: usize,
    seed: u64,
    indices_out: *mut usize,
    count_out: *mut usize,
) -> FescStatus {
    guard(|| {
        let pts = slice_arg(points, n.checked_mul(2).ok_or_else(|| invalid("point count overflows"))?, "points")?;
        let count = out_arg(count_out, "count_out")?;
        if indices_out.is_null() {
            return Err(null("indices_out"));
        }
        let set = PointSet::new(pts.chunks(2).map(<[f64]>::to_vec).collect())?;
        let params = ConsensusParams::new(m, sigma, nu)?;
        match select_features(&set, params, &SimilarityGraph::default(), seed)? {
            Selection::Feasible(sel) => {
                ptr::copy_nonoverlapping(sel.selected.as_ptr(), indices_out, sel.selected.len());
                *count = sel.selected.len();
                Ok(())
            }
            Selection::Infeasible { survivors } => {
                *count = 0;
                Err(Failure::Status(
                    FescStatus::Infeasible,
                    format!("{survivors} features survive the filter, fewer than m = {m}"),
                ))
            }
        }
    })
}

/// Trains an SVM on `n_rows x n_cols` row-major data with labels 1 or 2.
///
/// # Safety
/// `rows` must hold `n_rows * n_cols` values, `labels` `n_rows` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fesc_svm_train(
    rows: *const f64,
    labels: *const u8,
    n_rows: usize,
    n_cols: usize,
    kernel: FescKernel,
    c: f64,
    out: *mut *mut FescSvm,
) -> FescStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let total = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let data = slice_arg(rows, total, "rows")?;
        let labels: Vec<Label> = slice_arg(labels, n_rows, "labels")?.iter().map(|&l| label_of(l)).collect::<Result<_, _>>()?;
        let params = SvmParams { c, ..SvmParams::default() }.with_kernel(kernel.into());
        let model = fesc::svm::train(&rows_of(data, n_rows, n_cols), &labels, &params)?;
        *out = Box::into_raw(Box::new(FescSvm(model)));
        Ok(())
    })
}

/// Predicts labels (1 or 2) for `n_rows x n_cols` row-major data.
///
/// # Safety
/// `model` must come from [`fesc_svm_train`]; buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn fesc_svm_predict(
    model: *const FescSvm,
    rows: *const f64,
    n_rows: usize,
    n_cols: usize,
    labels_out: *mut u8,
) -> FescStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let total = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("matrix size overflows"))?;
        let data = slice_arg(rows, total, "rows")?;
        if n_rows > 0 && labels_out.is_null() {
            return Err(null("labels_out"));
        }
        let pred = model.0.predict(&rows_of(data, n_rows, n_cols))?;
        for (i, l) in pred.into_iter().enumerate() {
            *labels_out.add(i) = l.index() as u8 + 1;
        }
        Ok(())
    })
}

/// Number of support vectors of a trained model, 0 for null.
///
/// # Safety
/// `model` must be null or come from [`fesc_svm_train`].
#[no_mangle]
pub unsafe extern "C" fn fesc_svm_support_vectors(model: *const FescSvm) -> usize {
    model.as_ref().map_or(0, |m| m.0.support_vectors.len())
}

/// # Safety
/// `model` must be null or come from [`fesc_svm_train`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fesc_svm_free(model: *mut FescSvm) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Default pipeline configuration.
#[no_mangle]
pub extern "C" fn fesc_config_default() -> *mut FescConfig {
    Box::into_raw(Box::new(FescConfig(PipelineConfig::default())))
}

/// Loads a TOML configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fesc_config_from_file(path: *const c_char, out: *mut *mut FescConfig) -> FescStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = PipelineConfig::load(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FescConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fesc_config_set_seed(cfg: *mut FescConfig, seed: u64) -> FescStatus {
    guard(|| {
        out_arg(cfg, "cfg")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn fesc_config_set_kernel(cfg: *mut FescConfig, kernel: FescKernel) -> FescStatus {
    guard(|| {
        out_arg(cfg, "cfg")?.0.svm.kernel = kernel.into();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fesc_config_free(cfg: *mut FescConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Reads a feature-matrix CSV as written by `fesc features`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fesc_features_read(path: *const c_char, out: *mut *mut FescFeatures) -> FescStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let fm = FeatureMatrix::read_csv(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FescFeatures(fm)));
        Ok(())
    })
}

/// # Safety
/// `fm` must be null or come from [`fesc_features_read`].
#[no_mangle]
pub unsafe extern "C" fn fesc_features_rows(fm: *const FescFeatures) -> usize {
    fm.as_ref().map_or(0, |f| f.0.n_rows())
}

/// # Safety
/// `fm` must be null or come from [`fesc_features_read`].
#[no_mangle]
pub unsafe extern "C" fn fesc_features_cols(fm: *const FescFeatures) -> usize {
    fm.as_ref().map_or(0, |f| f.0.n_features())
}

/// # Safety
/// `fm` must be null or come from [`fesc_features_read`], and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fesc_features_free(fm: *mut FescFeatures) {
    if !fm.is_null() {
        drop(Box::from_raw(fm));
    }
}

/// Nested cross-validation on `features` with `cfg`, writing `report.json`,
/// the grid CSVs and `selected_features.csv` into `out_dir`. Holdout
/// accuracy is stored in `holdout_accuracy_out` when it is not null.
///
/// # Safety
/// Handles must come from this library; `out_dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fesc_run(
    features: *const FescFeatures,
    cfg: *const FescConfig,
    out_dir: *const c_char,
    holdout_accuracy_out: *mut f64,
) -> FescStatus {
    guard(|| {
        let fm = &features.as_ref().ok_or_else(|| null("features"))?.0;
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.0;
        let dir = path_arg(out_dir, "out_dir")?;
        cfg.validate()?;
        let nested = fesc::pipeline::nested_cv(fm, cfg)?;
        fesc::pipeline::write_grid_csv(&dir, &nested.folds)?;
        let report = fesc::pipeline::finish(fm, cfg, &nested)?;
        fesc::pipeline::write_outputs(&dir, &report, &nested)?;
        if let Some(acc) = holdout_accuracy_out.as_mut() {
            *acc = report.holdout_accuracy;
        }
        Ok(())
    })
}
