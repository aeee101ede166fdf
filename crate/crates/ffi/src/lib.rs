//! C ABI over `moses-core`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every call returns a [`MosesStatus`]; on failure
//! the message is available from [`moses_last_error`] on the same thread until
//! the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use moses_core::error::Error;
use moses_core::features::TokenizerConfig;
use moses_core::pipeline::{fit_pipeline, PipelineConfig, PipelineModel};
use moses_core::repository::Repository;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosesStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    IoError = 4,
    Panic = 5,
}

/// Reference repository built from labelled samples.
pub struct MosesRepository(Repository);

/// Fitted detector.
pub struct MosesModel(PipelineModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MosesVerdict {
    /// 1 for human, 0 for AI.
    pub label: i32,
    /// Probability that the text is human-written.
    pub probability: f64,
    pub confidence: f64,
    pub threshold_estimate: f64,
    /// Zero when `has_variance` is false.
    pub threshold_variance: f64,
    pub has_variance: bool,
    pub n_activated: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> MosesStatus {
    match err {
        Error::Io { .. } => MosesStatus::IoError,
        e if e.is_usage() => MosesStatus::InvalidArgument,
        _ => MosesStatus::DataError,
    }
}

struct Failure(MosesStatus, String);

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Failure(status_of(&err), err.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MosesStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MosesStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MosesStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            MosesStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MosesStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn moses_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn moses_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Ingests a labelled JSONL file, compressing embeddings to `r` dimensions.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moses_repository_ingest_jsonl(
    path: *const c_char,
    r: usize,
    out: *mut *mut MosesRepository,
) -> MosesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let repo = Repository::from_jsonl_path(Path::new(path), r, TokenizerConfig::default())?;
        store(out, MosesRepository(repo));
        Ok(())
    })
}

/// Loads a repository snapshot.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moses_repository_load(path: *const c_char, out: *mut *mut MosesRepository) -> MosesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let repo = Repository::load(Path::new(str_arg(path, "path")?))?;
        store(out, MosesRepository(repo));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `repo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn moses_repository_len(repo: *const MosesRepository) -> usize {
    repo.as_ref().map_or(0, |r| r.0.len())
}

/// # Safety
/// `repo` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moses_repository_free(repo: *mut MosesRepository) {
    if !repo.is_null() {
        drop(Box::from_raw(repo));
    }
}

/// Fits a detector. `config_toml` may be null for defaults; otherwise it holds
/// the same keys as the CLI config file.
///
/// # Safety
/// `repo` must be a live handle, `config_toml` null or NUL-terminated, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moses_model_fit(
    repo: *const MosesRepository,
    config_toml: *const c_char,
    out: *mut *mut MosesModel,
) -> MosesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let repo = repo.as_ref().ok_or_else(|| null("repo"))?;
        let config = if config_toml.is_null() {
            PipelineConfig::default()
        } else {
            let text = str_arg(config_toml, "config_toml")?;
            toml::from_str(text).map_err(|e| Failure(MosesStatus::InvalidArgument, format!("config: {e}")))?
        };
        config.validate()?;
        store(out, MosesModel(fit_pipeline(&repo.0, &config)?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moses_model_load(path: *const c_char, out: *mut *mut MosesModel) -> MosesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = PipelineModel::load(Path::new(str_arg(path, "path")?))?;
        store(out, MosesModel(model));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn moses_model_save(model: *const MosesModel, path: *const c_char) -> MosesStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        model.0.snapshot(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Classifies one text. `token_logprobs` may be null only when `lps_len` is 0.
///
/// # Safety
/// `model` must be a live handle, `text` NUL-terminated, the arrays valid for
/// their stated lengths, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn moses_model_detect(
    model: *const MosesModel,
    text: *const c_char,
    embedding: *const f64,
    emb_len: usize,
    token_logprobs: *const f64,
    lps_len: usize,
    score: f64,
    out: *mut MosesVerdict,
) -> MosesStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let text = str_arg(text, "text")?;
        let embedding = slice_arg(embedding, emb_len, "embedding")?;
        let lps = slice_arg(token_logprobs, lps_len, "token_logprobs")?;
        let v = model.0.detect(text, embedding, lps, score)?;
        *out = MosesVerdict {
            label: i32::from(v.label.bit()),
            probability: v.probability,
            confidence: v.confidence,
            threshold_estimate: v.threshold_estimate,
            threshold_variance: v.threshold_variance.unwrap_or(0.0),
            has_variance: v.threshold_variance.is_some(),
            n_activated: v.activation.prototypes.len(),
        };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moses_model_free(model: *mut MosesModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
