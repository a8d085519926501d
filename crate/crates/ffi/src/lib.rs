//! C ABI over `mvfs`.
//!
//! Every entry point returns an [`MvfsStatus`]; on failure the message is kept
//! in a thread-local slot readable with [`mvfs_last_error`]. Handles are
//! opaque heap objects released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mvfs::dataset::{synth_generate, FeatureId, FeatureView, MultiViewDataset, SynthSpec};
use mvfs::evaluation::evaluate_scores;
use mvfs::redundancy::{RedundancyConfig, RedundancyMetric};
use mvfs::selector::{select, SelectionMode, SelectorConfig};
use mvfs::Error;
use ndarray::{Array2, ArrayView2};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvfsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Shape = 5,
    Infeasible = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvfsMetric {
    Correlation = 0,
    MutualInformation = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvfsSelectorConfig {
    pub lambda: f64,
    pub beta: f64,
    pub enable_cross: bool,
    pub enable_static: bool,
    pub enable_dynamic: bool,
    pub static_metric: MvfsMetric,
    pub dynamic_metric: MvfsMetric,
    pub mi_bins: usize,
    /// Refresh the dynamic term after every pick instead of once per view.
    pub greedy: bool,
    pub signed_importance: bool,
    /// Use absolute cross-correlations in the cross term.
    pub absolute_cross: bool,
    pub k: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvfsFeature {
    pub view: usize,
    pub column: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvfsMetrics {
    pub average_precision: f64,
    pub auc: f64,
    pub coverage: f64,
    pub ranking_loss: f64,
}

/// Opaque dataset handle.
pub struct MvfsDataset {
    inner: MultiViewDataset,
}

/// Opaque selection result handle.
pub struct MvfsSelection {
    selected: Vec<FeatureId>,
    importance: Vec<f64>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(MvfsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape(_) => MvfsStatus::Shape,
            Error::InfeasibleK { .. } => MvfsStatus::Infeasible,
            Error::Io { .. } => MvfsStatus::Io,
            Error::Manifest { .. } | Error::Csv { .. } | Error::Report(_) => MvfsStatus::Parse,
            _ => MvfsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MvfsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(MvfsStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MvfsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            MvfsStatus::Ok
        }
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
            MvfsStatus::Panic
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

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn box_dataset(inner: MultiViewDataset) -> *mut MvfsDataset {
    Box::into_raw(Box::new(MvfsDataset { inner }))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn mvfs_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a dataset from a manifest file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_load_manifest(
    path: *const c_char,
    out: *mut *mut MvfsDataset,
) -> MvfsStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let ds = mvfs::dataset::load_manifest(Path::new(path))?;
        write_out(out, box_dataset(ds), "out")
    })
}

/// Builds a dataset from row-major buffers. `views[v]` holds
/// `n_samples * view_dims[v]` values; `labels` holds `n_samples * n_labels`
/// entries in {0, 1}.
///
/// # Safety
/// All pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_from_buffers(
    n_samples: usize,
    n_views: usize,
    view_dims: *const usize,
    views: *const *const f64,
    n_labels: usize,
    labels: *const u8,
    out: *mut *mut MvfsDataset,
) -> MvfsStatus {
    guard(|| {
        let dims = slice(view_dims, n_views, "view_dims")?;
        let ptrs = slice(views, n_views, "views")?;
        let mut built = Vec::with_capacity(n_views);
        for (v, (&d, &p)) in dims.iter().zip(ptrs).enumerate() {
            let len = n_samples.checked_mul(d).ok_or_else(|| invalid("view size overflows"))?;
            let data = slice(p, len, "view buffer")?;
            let arr = Array2::from_shape_vec((n_samples, d), data.to_vec())
                .map_err(|e| Failure(MvfsStatus::Shape, e.to_string()))?;
            built.push(FeatureView::new(format!("view{v}"), arr)?);
        }
        let len = n_samples.checked_mul(n_labels).ok_or_else(|| invalid("label size overflows"))?;
        let y = slice(labels, len, "labels")?;
        let y = Array2::from_shape_vec((n_samples, n_labels), y.to_vec())
            .map_err(|e| Failure(MvfsStatus::Shape, e.to_string()))?;
        let ds = MultiViewDataset::new(built, y)?;
        write_out(out, box_dataset(ds), "out")
    })
}

/// Generates a planted-feature synthetic dataset.
///
/// # Safety
/// `view_dims` must hold `n_views` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_synthetic(
    n_samples: usize,
    n_views: usize,
    view_dims: *const usize,
    n_labels: usize,
    n_planted: usize,
    n_duplicates: usize,
    noise_std: f64,
    seed: u64,
    out: *mut *mut MvfsDataset,
) -> MvfsStatus {
    guard(|| {
        let spec = SynthSpec {
            n_samples,
            view_dims: slice(view_dims, n_views, "view_dims")?.to_vec(),
            n_labels,
            n_planted,
            n_duplicates,
            noise_std,
            seed,
        };
        let syn = synth_generate(&spec)?;
        write_out(out, box_dataset(syn.dataset), "out")
    })
}

/// Z-scores every view in place.
///
/// # Safety
/// `ds` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_normalize(ds: *mut MvfsDataset) -> MvfsStatus {
    guard(|| {
        let ds = ds.as_mut().ok_or_else(|| null("dataset"))?;
        ds.inner = ds.inner.normalized()?;
        Ok(())
    })
}

/// Writes the sample, view, label and total feature counts. Any output
/// pointer may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_shape(
    ds: *const MvfsDataset,
    n_samples: *mut usize,
    n_views: *mut usize,
    n_labels: *mut usize,
    total_features: *mut usize,
) -> MvfsStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.inner;
        for (p, v) in [
            (n_samples, ds.n_samples()),
            (n_views, ds.n_views()),
            (n_labels, ds.n_labels()),
            (total_features, ds.total_features()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Feature count of view `v`.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_view_dim(
    ds: *const MvfsDataset,
    v: usize,
    out: *mut usize,
) -> MvfsStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.inner;
        if v >= ds.n_views() {
            return Err(invalid(format!("view {v} out of range ({} views)", ds.n_views())));
        }
        write_out(out, ds.view(v).n_features(), "out")
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvfs_dataset_free(ds: *mut MvfsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub extern "C" fn mvfs_selector_config_default() -> MvfsSelectorConfig {
    let d = SelectorConfig::default();
    MvfsSelectorConfig {
        lambda: d.lambda,
        beta: d.beta,
        enable_cross: d.enable_cross,
        enable_static: d.enable_static,
        enable_dynamic: d.enable_dynamic,
        static_metric: MvfsMetric::Correlation,
        dynamic_metric: MvfsMetric::MutualInformation,
        mi_bins: d.redundancy.mi_bins,
        greedy: false,
        signed_importance: d.signed_importance,
        absolute_cross: false,
        k: d.k,
    }
}

fn metric(m: MvfsMetric) -> RedundancyMetric {
    match m {
        MvfsMetric::Correlation => RedundancyMetric::Correlation,
        MvfsMetric::MutualInformation => RedundancyMetric::MutualInformation,
    }
}

impl From<&MvfsSelectorConfig> for SelectorConfig {
    fn from(c: &MvfsSelectorConfig) -> Self {
        SelectorConfig {
            lambda: c.lambda,
            beta: c.beta,
            enable_cross: c.enable_cross,
            enable_static: c.enable_static,
            enable_dynamic: c.enable_dynamic,
            redundancy: RedundancyConfig {
                static_metric: metric(c.static_metric),
                dynamic_metric: metric(c.dynamic_metric),
                mi_bins: c.mi_bins,
            },
            selection_mode: if c.greedy {
                SelectionMode::GreedyPerFeature
            } else {
                SelectionMode::BlockPerView
            },
            signed_importance: c.signed_importance,
            cross_projection: if c.absolute_cross {
                mvfs::attention::CrossProjection::Absolute
            } else {
                mvfs::attention::CrossProjection::Signed
            },
            k: c.k,
        }
    }
}

/// Runs the selector. The dataset must have been normalized.
///
/// # Safety
/// `ds` must be a live handle, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_select(
    ds: *const MvfsDataset,
    config: *const MvfsSelectorConfig,
    out: *mut *mut MvfsSelection,
) -> MvfsStatus {
    guard(|| {
        let ds = &deref(ds, "dataset")?.inner;
        let cfg = SelectorConfig::from(deref(config, "config")?);
        let res = select(ds, &cfg)?;
        let importance = res
            .selected
            .iter()
            .map(|id| res.scores.views[id.view].importance[id.column])
            .collect();
        let sel = MvfsSelection {
            selected: res.selected,
            importance,
        };
        write_out(out, Box::into_raw(Box::new(sel)), "out")
    })
}

/// Number of selected features; 0 for a null handle.
///
/// # Safety
/// `sel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mvfs_selection_len(sel: *const MvfsSelection) -> usize {
    sel.as_ref().map_or(0, |s| s.selected.len())
}

/// The `i`-th selected feature (selection order) and its importance.
/// `importance` may be null.
///
/// # Safety
/// `sel` must be a live handle; `feature` writable; `importance` null or writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_selection_get(
    sel: *const MvfsSelection,
    i: usize,
    feature: *mut MvfsFeature,
    importance: *mut f64,
) -> MvfsStatus {
    guard(|| {
        let sel = deref(sel, "selection")?;
        let id = sel
            .selected
            .get(i)
            .ok_or_else(|| invalid(format!("index {i} out of range ({} selected)", sel.selected.len())))?;
        write_out(
            feature,
            MvfsFeature {
                view: id.view,
                column: id.column,
            },
            "feature",
        )?;
        if !importance.is_null() {
            importance.write(sel.importance[i]);
        }
        Ok(())
    })
}

/// Releases a selection handle. Null is ignored.
///
/// # Safety
/// `sel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mvfs_selection_free(sel: *mut MvfsSelection) {
    if !sel.is_null() {
        drop(Box::from_raw(sel));
    }
}

/// Ranking metrics of row-major `n_samples x n_labels` scores against truth.
///
/// # Safety
/// `scores` and `truth` must hold `n_samples * n_labels` entries; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mvfs_evaluate_metrics(
    scores: *const f64,
    truth: *const u8,
    n_samples: usize,
    n_labels: usize,
    out: *mut MvfsMetrics,
) -> MvfsStatus {
    guard(|| {
        let len = n_samples.checked_mul(n_labels).ok_or_else(|| invalid("size overflows"))?;
        let s = slice(scores, len, "scores")?;
        let t = slice(truth, len, "truth")?;
        let shape_err = |e: ndarray::ShapeError| Failure(MvfsStatus::Shape, e.to_string());
        let s = ArrayView2::from_shape((n_samples, n_labels), s).map_err(shape_err)?;
        let t = ArrayView2::from_shape((n_samples, n_labels), t).map_err(shape_err)?;
        let r = evaluate_scores(s, t)?;
        write_out(
            out,
            MvfsMetrics {
                average_precision: r.ap,
                auc: r.auc,
                coverage: r.coverage,
                ranking_loss: r.ranking_loss,
            },
            "out",
        )
    })
}
