//! C ABI over the `ltgcd` library.
//!
//! Datasets and trained runs are opaque heap handles owned by the caller
//! and released with their `*_free` function. Every fallible call returns
//! an [`LtgcdStatus`]; on failure `ltgcd_last_error` describes the most
//! recent error on the calling thread. Panics never cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ltgcd::datagen::{generate_mixture, load_embeddings};
use ltgcd::eval::{evaluate, hungarian};
use ltgcd::harness::train::{train_one, RunRecord};
use ltgcd::model::ModelSnapshot;
use ltgcd::rng::{RngService, STREAM_SPLIT};
use ltgcd::{EmbeddingDataset, Error, Hyperparams, Matrix, MetricsReport, SplitSpec, TrainSettings};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtgcdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Io = 4,
    Parse = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque dataset handle.
pub struct LtgcdDataset(EmbeddingDataset);

/// Opaque handle to a finished training run.
pub struct LtgcdRun(RunRecord);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LtgcdHyperparams {
    pub tau: f64,
    pub tau_p: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: u64,
    pub batch_size: u64,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LtgcdSplit {
    pub num_classes: u64,
    pub num_known: u64,
    pub samples_per_known: u64,
    pub rho: f64,
    pub labeled_fraction: f64,
    pub dim: u64,
    /// Radius of the sphere holding the class means.
    pub sep: f64,
}

/// Accuracies in `[0, 1]`. A `has_*` flag of 0 marks the metric absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LtgcdMetrics {
    pub all: f64,
    pub known: f64,
    pub un1: f64,
    pub un2: f64,
    pub has_known: i32,
    pub has_un1: i32,
    pub has_un2: i32,
    pub n_all: u64,
    pub n_known: u64,
    pub n_novel: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> LtgcdStatus {
    match err {
        Error::Invalid { .. } | Error::Config { .. } | Error::LabeledUnknownClass { .. } => LtgcdStatus::InvalidArgument,
        Error::NotFound { .. } => LtgcdStatus::NotFound,
        Error::Io { .. } => LtgcdStatus::Io,
        Error::Malformed { .. } | Error::Json(_) => LtgcdStatus::Parse,
        Error::Numerical(_) => LtgcdStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (LtgcdStatus, String)>) -> LtgcdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LtgcdStatus::Ok,
        Ok(Err((status, msg))) => {
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
            LtgcdStatus::Panic
        }
    }
}

fn lift<T>(r: ltgcd::Result<T>) -> Result<T, (LtgcdStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (LtgcdStatus, String) {
    (LtgcdStatus::NullPointer, format!("{name} is null"))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, (LtgcdStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LtgcdStatus::InvalidArgument, format!("{name} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

impl From<Hyperparams> for LtgcdHyperparams {
    fn from(h: Hyperparams) -> Self {
        Self {
            tau: h.tau,
            tau_p: h.tau_p,
            lambda: h.lambda,
            alpha: h.alpha,
            beta: h.beta,
            mu: h.mu,
            lr0: h.lr0,
            momentum: h.momentum,
            weight_decay: h.weight_decay,
            epochs: h.epochs as u64,
            batch_size: h.batch_size as u64,
            seed: h.seed,
        }
    }
}

impl From<LtgcdHyperparams> for Hyperparams {
    fn from(h: LtgcdHyperparams) -> Self {
        Self {
            tau: h.tau,
            tau_p: h.tau_p,
            lambda: h.lambda,
            alpha: h.alpha,
            beta: h.beta,
            mu: h.mu,
            lr0: h.lr0,
            momentum: h.momentum,
            weight_decay: h.weight_decay,
            epochs: h.epochs as usize,
            batch_size: h.batch_size as usize,
            seed: h.seed,
        }
    }
}

impl From<&MetricsReport> for LtgcdMetrics {
    fn from(m: &MetricsReport) -> Self {
        Self {
            all: m.all_acc,
            known: m.known_acc.unwrap_or(0.0),
            un1: m.un1_acc.unwrap_or(0.0),
            un2: m.un2_acc.unwrap_or(0.0),
            has_known: i32::from(m.known_acc.is_some()),
            has_un1: i32::from(m.un1_acc.is_some()),
            has_un2: i32::from(m.un2_acc.is_some()),
            n_all: m.n_all as u64,
            n_known: m.n_known as u64,
            n_novel: m.n_novel as u64,
        }
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ltgcd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ltgcd_status_str(status: LtgcdStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        LtgcdStatus::Ok => b"ok\0",
        LtgcdStatus::NullPointer => b"null pointer\0",
        LtgcdStatus::InvalidArgument => b"invalid argument\0",
        LtgcdStatus::NotFound => b"file not found\0",
        LtgcdStatus::Io => b"io error\0",
        LtgcdStatus::Parse => b"parse error\0",
        LtgcdStatus::Numerical => b"numerical failure\0",
        LtgcdStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_hyperparams_default(out: *mut LtgcdHyperparams) -> LtgcdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = Hyperparams::default().into();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_split_default(out: *mut LtgcdSplit) -> LtgcdStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = SplitSpec::default();
        *out = LtgcdSplit {
            num_classes: s.num_classes as u64,
            num_known: s.num_known as u64,
            samples_per_known: s.samples_per_known as u64,
            rho: s.rho,
            labeled_fraction: s.labeled_fraction,
            dim: s.dim as u64,
            sep: 5.0,
        };
        Ok(())
    })
}

/// Synthetic long-tailed mixture drawn from `seed`'s split stream.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_generate(
    split: *const LtgcdSplit,
    seed: u64,
    out: *mut *mut LtgcdDataset,
) -> LtgcdStatus {
    guard(|| {
        let s = split.as_ref().ok_or_else(|| null("split"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = SplitSpec {
            num_classes: s.num_classes as usize,
            num_known: s.num_known as usize,
            samples_per_known: s.samples_per_known as usize,
            rho: s.rho,
            labeled_fraction: s.labeled_fraction,
            dim: s.dim as usize,
        };
        let data = lift(generate_mixture(&spec, s.sep, &mut RngService::derive_stream(seed, STREAM_SPLIT)))?;
        *out = Box::into_raw(Box::new(LtgcdDataset(data)));
        Ok(())
    })
}

/// Loads a dataset from its JSON manifest.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_load(manifest: *const c_char, out: *mut *mut LtgcdDataset) -> LtgcdStatus {
    guard(|| {
        let path = path_arg(manifest, "manifest")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let data = lift(load_embeddings(&path))?;
        *out = Box::into_raw(Box::new(LtgcdDataset(data)));
        Ok(())
    })
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.json`.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_write(data: *const LtgcdDataset, dir: *const c_char, stem: *const c_char) -> LtgcdStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let dir = path_arg(dir, "dir")?;
        let stem = path_arg(stem, "stem")?;
        lift(data.0.write(&dir, &stem.to_string_lossy()))?;
        Ok(())
    })
}

/// Row count; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_len(data: *const LtgcdDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_dim(data: *const LtgcdDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.dim())
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_num_classes(data: *const LtgcdDataset) -> usize {
    data.as_ref().map_or(0, |d| d.0.num_classes)
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_dataset_free(data: *mut LtgcdDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Trains with default model settings and evaluates. An aborted run is
/// returned as `LTGCD_STATUS_NUMERICAL` with no handle.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_train(
    data: *const LtgcdDataset,
    hp: *const LtgcdHyperparams,
    out: *mut *mut LtgcdRun,
) -> LtgcdStatus {
    guard(|| {
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let hp: Hyperparams = (*hp.as_ref().ok_or_else(|| null("hp"))?).into();
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let record = lift(train_one(&data.0, &hp, &TrainSettings::default()))?;
        if let Some(reason) = &record.aborted {
            return Err((LtgcdStatus::Numerical, reason.clone()));
        }
        *out = Box::into_raw(Box::new(LtgcdRun(record)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_run_metrics(run: *const LtgcdRun, out: *mut LtgcdMetrics) -> LtgcdStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = run
            .0
            .metrics
            .as_ref()
            .ok_or_else(|| (LtgcdStatus::Numerical, "run has no metrics".to_string()))?;
        *out = m.into();
        Ok(())
    })
}

/// Number of epochs in the run's training log; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_run_epochs(run: *const LtgcdRun) -> usize {
    run.as_ref().map_or(0, |r| r.0.log.len())
}

/// Copies the final class prior (model slot order) into `out[0..len]`.
/// `len` must equal the number of classes.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_run_prior(run: *const LtgcdRun, out: *mut f64, len: usize) -> LtgcdStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let prior = run
            .0
            .log
            .last()
            .map(|e| e.prior.clone())
            .unwrap_or_else(|| vec![1.0 / run.0.class_order.len() as f64; run.0.class_order.len()]);
        if len != prior.len() {
            return Err((LtgcdStatus::InvalidArgument, format!("len {len}, run has {} classes", prior.len())));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&prior);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_run_save_checkpoint(run: *const LtgcdRun, path: *const c_char) -> LtgcdStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let path = path_arg(path, "path")?;
        lift(run.0.snapshot.save(&path))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ltgcd_run_free(run: *mut LtgcdRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Loads a checkpoint and evaluates it on `data`.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_evaluate_checkpoint(
    path: *const c_char,
    data: *const LtgcdDataset,
    seed: u64,
    out: *mut LtgcdMetrics,
) -> LtgcdStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        let data = data.as_ref().ok_or_else(|| null("data"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let snapshot = lift(ModelSnapshot::load(&path))?;
        if snapshot.head.input_dim() != data.0.dim() {
            return Err((LtgcdStatus::InvalidArgument, "checkpoint and dataset dimensions differ".into()));
        }
        let m = lift(evaluate(&snapshot, &data.0, seed, TrainSettings::default().eval_restarts))?;
        *out = (&m).into();
        Ok(())
    })
}

/// Minimum-cost assignment on a row-major `n x n` matrix. Writes the column
/// of each row into `perm_out[0..n]` and the total into `cost_out`.
#[no_mangle]
pub unsafe extern "C" fn ltgcd_hungarian(cost: *const f64, n: usize, perm_out: *mut usize, cost_out: *mut f64) -> LtgcdStatus {
    guard(|| {
        if n > 0 && (cost.is_null() || perm_out.is_null()) {
            return Err(null("cost or perm_out"));
        }
        let values = if n == 0 { Vec::new() } else { std::slice::from_raw_parts(cost, n * n).to_vec() };
        let m = lift(Matrix::from_vec(n, n, values))?;
        let a = lift(hungarian(&m))?;
        if n > 0 {
            std::slice::from_raw_parts_mut(perm_out, n).copy_from_slice(&a.perm);
        }
        if let Some(c) = cost_out.as_mut() {
            *c = a.cost;
        }
        Ok(())
    })
}
