//! C ABI for slgb-core.
//!
//! Handles are opaque pointers created by `*_load`, `*_fit` or `*_from_json`
//! and released with the matching `*_free`. Every function returns an
//! [`SlgbStatus`]; on failure [`slgb_last_error`] describes the error for the
//! calling thread. Strings returned through out-parameters are owned by the
//! caller and released with [`slgb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slgb::dataset::{load_dataset, load_path, Format, LoadOptions};
use slgb::metrics::{kappa, simplicity, utility, ConfusionMatrix, SimplicityParams};
use slgb::pipeline::{fit, ModelBundle, SlgbConfig};
use slgb::{Dataset, Error};

/// Result code of every exported function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlgbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    EmptyDataset = 5,
    InvalidParameter = 6,
    Config = 7,
    Panic = 8,
}

/// Opaque dataset handle.
pub struct SlgbDataset {
    inner: Dataset,
}

/// Opaque fitted-model handle.
pub struct SlgbModel {
    inner: ModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(SlgbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => SlgbStatus::Io,
            Error::Schema(_) | Error::Row { .. } | Error::Csv(_) | Error::Serde(_) => SlgbStatus::Parse,
            Error::EmptyDataset => SlgbStatus::EmptyDataset,
            Error::Parameter(_) => SlgbStatus::InvalidParameter,
            Error::Config(_) => SlgbStatus::Config,
        };
        Failure(code, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

fn null(what: &str) -> Failure {
    Failure(SlgbStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> SlgbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SlgbStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            SlgbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(SlgbStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_text<'a>(p: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

unsafe fn row<'a>(model: &SlgbModel, values: *const f64, len: usize) -> FfiResult<&'a [f64]> {
    let want = model.inner.surrogate.schema.len();
    if len != want {
        return Err(Failure(SlgbStatus::InvalidParameter, format!("expected {want} values, got {len}")));
    }
    if values.is_null() {
        return Err(null("values"));
    }
    Ok(std::slice::from_raw_parts(values, len))
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn slgb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn slgb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV, ARFF or KEEL file. `class_column` may be NULL for the last
/// column. Unlabeled rows carry `?` as their class.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_dataset_load(
    path: *const c_char,
    class_column: *const c_char,
    out: *mut *mut SlgbDataset,
) -> SlgbStatus {
    guard(|| {
        let path = text(path, "path")?;
        let opts = LoadOptions { class_column: opt_text(class_column, "class_column")?.map(String::from) };
        let d = load_path(Path::new(path), &opts)?;
        write(out, Box::into_raw(Box::new(SlgbDataset { inner: d })), "out")
    })
}

/// Parses CSV text with a header row.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_dataset_from_csv(
    csv: *const c_char,
    class_column: *const c_char,
    out: *mut *mut SlgbDataset,
) -> SlgbStatus {
    guard(|| {
        let csv = text(csv, "csv")?;
        let opts = LoadOptions { class_column: opt_text(class_column, "class_column")?.map(String::from) };
        let d = load_dataset(csv.as_bytes(), Format::Csv, &opts)?;
        write(out, Box::into_raw(Box::new(SlgbDataset { inner: d })), "out")
    })
}

/// Number of rows.
///
/// # Safety
/// `d` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_dataset_len(d: *const SlgbDataset, out: *mut usize) -> SlgbStatus {
    guard(|| write(out, deref(d, "dataset")?.inner.len(), "out"))
}

/// Number of attributes, excluding the class.
///
/// # Safety
/// `d` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_dataset_num_attributes(d: *const SlgbDataset, out: *mut usize) -> SlgbStatus {
    guard(|| write(out, deref(d, "dataset")?.inner.num_attributes(), "out"))
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `d` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn slgb_dataset_free(d: *mut SlgbDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Fits a grey box. `config` names the configuration, e.g. `rf-part-rst`.
/// Rows of `data` without a label form the unlabeled set; `unlabeled` may add
/// more and may be NULL.
///
/// # Safety
/// Handles must be live; `config` must be NUL-terminated; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_fit(
    data: *const SlgbDataset,
    unlabeled: *const SlgbDataset,
    config: *const c_char,
    seed: u64,
    out: *mut *mut SlgbModel,
) -> SlgbStatus {
    guard(|| {
        let (labeled, mut unl) = deref(data, "data")?.inner.partition_by_label();
        if let Some(extra) = unlabeled.as_ref() {
            unl = unl.concat(&extra.inner.without_labels())?;
        }
        let (wb, am) = SlgbConfig::parse_name(text(config, "config")?)?;
        let mut cfg = SlgbConfig::new(wb, am);
        cfg.seed = seed;
        let m = fit(&labeled, &unl, &cfg)?;
        write(out, Box::into_raw(Box::new(SlgbModel { inner: m.bundle() })), "out")
    })
}

/// Predicted class index for one row of `len` attribute values in schema
/// order. NaN marks a missing value; nominal values are category indices.
///
/// # Safety
/// `m` must be live; `values` must point to `len` doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_predict(
    m: *const SlgbModel,
    values: *const f64,
    len: usize,
    out: *mut usize,
) -> SlgbStatus {
    guard(|| {
        let m = deref(m, "model")?;
        write(out, m.inner.predict(row(m, values, len)?), "out")
    })
}

/// Predicted class and the text of the deciding rule.
///
/// # Safety
/// As for [`slgb_model_predict`]; `out_text` receives a string to release
/// with [`slgb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn slgb_model_explain(
    m: *const SlgbModel,
    values: *const f64,
    len: usize,
    out_class: *mut usize,
    out_text: *mut *mut c_char,
) -> SlgbStatus {
    guard(|| {
        let m = deref(m, "model")?;
        let e = m.inner.explain(row(m, values, len)?);
        if out_text.is_null() {
            return Err(null("out_text"));
        }
        write(out_class, e.rule.consequent, "out_class")?;
        write(out_text, owned_string(e.text), "out_text")
    })
}

/// Number of rules in the surrogate.
///
/// # Safety
/// `m` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_rule_count(m: *const SlgbModel, out: *mut usize) -> SlgbStatus {
    guard(|| write(out, deref(m, "model")?.inner.surrogate.count_rules(), "out"))
}

/// Number of classes.
///
/// # Safety
/// `m` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_num_classes(m: *const SlgbModel, out: *mut usize) -> SlgbStatus {
    guard(|| write(out, deref(m, "model")?.inner.surrogate.classes.len(), "out"))
}

/// Name of class `index`.
///
/// # Safety
/// `m` must be live; `out` receives a string to release with
/// [`slgb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn slgb_model_class_name(m: *const SlgbModel, index: usize, out: *mut *mut c_char) -> SlgbStatus {
    guard(|| {
        let classes = &deref(m, "model")?.inner.surrogate.classes;
        let name = classes
            .get(index)
            .ok_or_else(|| Failure(SlgbStatus::InvalidParameter, format!("class index {index} out of range")))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, owned_string(name.clone()), "out")
    })
}

/// The surrogate's rules, one per line.
///
/// # Safety
/// `m` must be live; `out` receives a string to release with
/// [`slgb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn slgb_model_render(m: *const SlgbModel, out: *mut *mut c_char) -> SlgbStatus {
    guard(|| {
        let s = deref(m, "model")?.inner.surrogate.render();
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, owned_string(s), "out")
    })
}

/// Serializes a model.
///
/// # Safety
/// `m` must be live; `out` receives a string to release with
/// [`slgb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn slgb_model_to_json(m: *const SlgbModel, out: *mut *mut c_char) -> SlgbStatus {
    guard(|| {
        let s = deref(m, "model")?.inner.to_json()?;
        if out.is_null() {
            return Err(null("out"));
        }
        write(out, owned_string(s), "out")
    })
}

/// Restores a model serialized by [`slgb_model_to_json`].
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_from_json(json: *const c_char, out: *mut *mut SlgbModel) -> SlgbStatus {
    guard(|| {
        let b = ModelBundle::from_json(text(json, "json")?)?;
        write(out, Box::into_raw(Box::new(SlgbModel { inner: b })), "out")
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `m` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn slgb_model_free(m: *mut SlgbModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Cohen's kappa of a `k` x `k` row-major confusion matrix (rows actual).
///
/// # Safety
/// `counts` must point to `k * k` integers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_kappa(counts: *const u64, k: usize, out: *mut f64) -> SlgbStatus {
    guard(|| {
        if counts.is_null() {
            return Err(null("counts"));
        }
        let n = k.checked_mul(k).ok_or_else(|| Failure(SlgbStatus::InvalidParameter, "k too large".into()))?;
        let flat = std::slice::from_raw_parts(counts, n);
        let cm = ConfusionMatrix::from_counts(flat.chunks(k.max(1)).map(<[u64]>::to_vec).collect())?;
        write(out, kappa(&cm)?, "out")
    })
}

/// Simplicity score of a model with `rules` rules.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_simplicity(rules: usize, lambda: f64, eta: f64, nu: f64, out: *mut f64) -> SlgbStatus {
    guard(|| {
        let p = SimplicityParams { lambda, eta, nu };
        p.validate()?;
        write(out, simplicity(rules, &p), "out")
    })
}

/// Weighted combination of kappa and simplicity.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slgb_utility(kappa_value: f64, simplicity_value: f64, alpha: f64, out: *mut f64) -> SlgbStatus {
    guard(|| write(out, utility(kappa_value, simplicity_value, alpha)?, "out"))
}
