//! C ABI over the lesionkit primitives.
//!
//! Every fallible call returns an [`LkStatus`]. Objects are opaque handles
//! created by `lk_*_new` and released by the matching `lk_*_free`; passing
//! NULL to a free function is a no-op. The text of the most recent failure
//! on the calling thread is available from [`lk_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use lesionkit::dedup::{dhash_raster, hamming_distance, PerceptualHash};
use lesionkit::metrics::{compute_metrics, ConfusionMatrix};
use lesionkit::raster::Raster;
use lesionkit::refmodel::{adamax_step, argmax, AdaMaxState, LinearHead};
use lesionkit::trainctl::{EarlyStopper, PlateauScheduler};
use lesionkit::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidMetric = 3,
    DimensionMismatch = 4,
    NonFinite = 5,
    Empty = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn remember(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn fail(status: LkStatus, message: impl Into<String>) -> LkStatus {
    remember(message.into());
    status
}

fn from_error(e: Error) -> LkStatus {
    let status = match e {
        Error::InvalidMetric(_) => LkStatus::InvalidMetric,
        Error::DimensionMismatch { .. } => LkStatus::DimensionMismatch,
        Error::NonFiniteGradient(_) => LkStatus::NonFinite,
        Error::EmptyMatrix | Error::Empty(_) => LkStatus::Empty,
        _ => LkStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> LkStatus) -> LkStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(LkStatus::Panic, "panic inside lesionkit"))
}

macro_rules! deref {
    ($p:expr) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(LkStatus::NullPointer, concat!(stringify!($p), " is null")),
        }
    };
}

/// Message for the last non-OK status on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn lk_status_name(status: LkStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        LkStatus::Ok => b"ok\0",
        LkStatus::NullPointer => b"null_pointer\0",
        LkStatus::InvalidArgument => b"invalid_argument\0",
        LkStatus::InvalidMetric => b"invalid_metric\0",
        LkStatus::DimensionMismatch => b"dimension_mismatch\0",
        LkStatus::NonFinite => b"non_finite\0",
        LkStatus::Empty => b"empty\0",
        LkStatus::Panic => b"panic\0",
    };
    s.as_ptr().cast()
}

fn hash_pixels(
    pixels: *const u8,
    width: u32,
    height: u32,
    channels: usize,
    out: *mut u64,
) -> LkStatus {
    guard(|| {
        let out = deref!(out);
        if pixels.is_null() {
            return fail(LkStatus::NullPointer, "pixels is null");
        }
        if width == 0 || height == 0 {
            return fail(LkStatus::InvalidArgument, "image has zero extent");
        }
        let (w, h) = (width as usize, height as usize);
        let buf = unsafe { slice::from_raw_parts(pixels, w * h * channels) };
        let raster = Raster::new(w, h, channels, buf.iter().map(|&v| v as f64).collect());
        *out = dhash_raster(&raster).0;
        LkStatus::Ok
    })
}

/// 64-bit difference hash of a packed RGB8 buffer of `width * height * 3` bytes.
///
/// # Safety
/// `pixels` must point to that many readable bytes and `out` to a writable u64.
#[no_mangle]
pub unsafe extern "C" fn lk_dhash_rgb8(
    pixels: *const u8,
    width: u32,
    height: u32,
    out: *mut u64,
) -> LkStatus {
    hash_pixels(pixels, width, height, 3, out)
}

/// Same as [`lk_dhash_rgb8`] for a packed 8-bit gray buffer.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes and `out` to a writable u64.
#[no_mangle]
pub unsafe extern "C" fn lk_dhash_gray8(
    pixels: *const u8,
    width: u32,
    height: u32,
    out: *mut u64,
) -> LkStatus {
    hash_pixels(pixels, width, height, 1, out)
}

#[no_mangle]
pub extern "C" fn lk_hamming(a: u64, b: u64) -> u32 {
    hamming_distance(PerceptualHash(a), PerceptualHash(b))
}

pub struct LkScheduler(PlateauScheduler);

/// # Safety
/// `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn lk_scheduler_new(
    initial_lr: f64,
    factor: f64,
    patience: u32,
    min_lr: f64,
    out: *mut *mut LkScheduler,
) -> LkStatus {
    guard(|| {
        let out = deref!(out);
        match PlateauScheduler::new(initial_lr, factor, patience as usize, min_lr) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(LkScheduler(s)));
                LkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Feed one validation loss. `reduced` (may be NULL) receives whether the
/// learning rate dropped on this step.
///
/// # Safety
/// `s` must come from [`lk_scheduler_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_scheduler_step(
    s: *mut LkScheduler,
    val_loss: f64,
    reduced: *mut bool,
) -> LkStatus {
    guard(|| {
        let s = deref!(s);
        match s.0.step(val_loss) {
            Ok(r) => {
                if let Some(slot) = unsafe { reduced.as_mut() } {
                    *slot = r;
                }
                LkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Current learning rate, NaN for a NULL handle.
///
/// # Safety
/// `s` must be NULL or come from [`lk_scheduler_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_scheduler_lr(s: *const LkScheduler) -> f64 {
    unsafe { s.as_ref() }.map_or(f64::NAN, |s| s.0.lr())
}

/// # Safety
/// `s` must be NULL or come from [`lk_scheduler_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_scheduler_free(s: *mut LkScheduler) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

pub struct LkStopper(EarlyStopper);

#[no_mangle]
pub extern "C" fn lk_stopper_new(patience: u32) -> *mut LkStopper {
    Box::into_raw(Box::new(LkStopper(EarlyStopper::new(patience as usize))))
}

/// Feed one validation accuracy in [0, 1]. `improved` (may be NULL) receives
/// whether it beat the best so far.
///
/// # Safety
/// `s` must come from [`lk_stopper_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_stopper_step(
    s: *mut LkStopper,
    val_acc: f64,
    improved: *mut bool,
) -> LkStatus {
    guard(|| {
        let s = deref!(s);
        match s.0.step(val_acc) {
            Ok(i) => {
                if let Some(slot) = unsafe { improved.as_mut() } {
                    *slot = i;
                }
                LkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or come from [`lk_stopper_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_stopper_stopped(s: *const LkStopper) -> bool {
    unsafe { s.as_ref() }.is_some_and(|s| s.0.stopped())
}

/// # Safety
/// `s` must be NULL or come from [`lk_stopper_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_stopper_free(s: *mut LkStopper) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

pub struct LkAdaMax(AdaMaxState);

#[no_mangle]
pub extern "C" fn lk_adamax_new(len: usize, alpha: f64, beta1: f64, beta2: f64) -> *mut LkAdaMax {
    Box::into_raw(Box::new(LkAdaMax(AdaMaxState::with_betas(
        len, alpha, beta1, beta2,
    ))))
}

/// One in-place update of `params` from `grads`, both of length `len`.
///
/// # Safety
/// `s` must come from [`lk_adamax_new`]; `params` and `grads` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lk_adamax_step(
    s: *mut LkAdaMax,
    params: *mut f64,
    grads: *const f64,
    len: usize,
) -> LkStatus {
    guard(|| {
        let s = deref!(s);
        if params.is_null() || grads.is_null() {
            return fail(LkStatus::NullPointer, "params or grads is null");
        }
        let params = unsafe { slice::from_raw_parts_mut(params, len) };
        let grads = unsafe { slice::from_raw_parts(grads, len) };
        match adamax_step(params, grads, &mut s.0) {
            Ok(()) => LkStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `s` must be NULL or come from [`lk_adamax_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_adamax_free(s: *mut LkAdaMax) {
    if !s.is_null() {
        drop(unsafe { Box::from_raw(s) });
    }
}

pub struct LkConfusion(ConfusionMatrix);

/// Summary scores of a confusion matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LkMetrics {
    pub total: u64,
    pub accuracy: f64,
    /// Mean one-vs-rest accuracy over classes.
    pub accuracy_one_vs_rest: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

/// Empty matrix over `classes` labels, NULL when `classes` is 0.
#[no_mangle]
pub extern "C" fn lk_confusion_new(classes: u32) -> *mut LkConfusion {
    if classes == 0 {
        remember("confusion matrix needs at least one class".into());
        return ptr::null_mut();
    }
    let names = (0..classes).map(|c| c.to_string()).collect();
    Box::into_raw(Box::new(LkConfusion(ConfusionMatrix::zeros(names))))
}

/// # Safety
/// `cm` must come from [`lk_confusion_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_confusion_add(
    cm: *mut LkConfusion,
    truth: u32,
    predicted: u32,
) -> LkStatus {
    guard(|| {
        let cm = deref!(cm);
        let n = cm.0.n();
        if truth as usize >= n || predicted as usize >= n {
            return fail(
                LkStatus::InvalidArgument,
                format!("label out of range for {n} classes"),
            );
        }
        cm.0.add(truth as usize, predicted as usize);
        LkStatus::Ok
    })
}

/// Count in row `truth`, column `predicted`; 0 when out of range.
///
/// # Safety
/// `cm` must be NULL or come from [`lk_confusion_new`].
#[no_mangle]
pub unsafe extern "C" fn lk_confusion_count(
    cm: *const LkConfusion,
    truth: u32,
    predicted: u32,
) -> u64 {
    unsafe { cm.as_ref() }
        .and_then(|cm| {
            cm.0.counts
                .get(truth as usize)?
                .get(predicted as usize)
                .copied()
        })
        .unwrap_or(0)
}

/// # Safety
/// `cm` must come from [`lk_confusion_new`] and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lk_confusion_metrics(
    cm: *const LkConfusion,
    out: *mut LkMetrics,
) -> LkStatus {
    guard(|| {
        let cm = deref!(cm.cast_mut());
        let out = deref!(out);
        match compute_metrics(&cm.0) {
            Ok(r) => {
                *out = LkMetrics {
                    total: r.total,
                    accuracy: r.accuracy_std,
                    accuracy_one_vs_rest: r.accuracy_eq1,
                    macro_precision: r.macro_avg.precision,
                    macro_recall: r.macro_avg.recall,
                    macro_f1: r.macro_avg.f1,
                    weighted_precision: r.weighted.precision,
                    weighted_recall: r.weighted.recall,
                    weighted_f1: r.weighted.f1,
                };
                LkStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `cm` must be NULL or come from [`lk_confusion_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_confusion_free(cm: *mut LkConfusion) {
    if !cm.is_null() {
        drop(unsafe { Box::from_raw(cm) });
    }
}

pub struct LkHead(LinearHead);

/// Linear softmax head. `params` holds the row-major `classes x dim` weights
/// followed by `classes` biases; NULL `params` gives an all-zero head.
///
/// # Safety
/// `params` must be NULL or hold `len` doubles; `out` must be a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn lk_head_new(
    classes: u32,
    dim: u32,
    params: *const f64,
    len: usize,
    out: *mut *mut LkHead,
) -> LkStatus {
    guard(|| {
        let out = deref!(out);
        if classes == 0 {
            return fail(LkStatus::InvalidArgument, "head needs at least one class");
        }
        let mut head = LinearHead::zeros(classes as usize, dim as usize);
        if !params.is_null() {
            if let Err(e) = head.set_params(unsafe { slice::from_raw_parts(params, len) }) {
                return from_error(e);
            }
        }
        *out = Box::into_raw(Box::new(LkHead(head)));
        LkStatus::Ok
    })
}

/// Class probabilities for one feature vector. `probs` must hold `classes`
/// doubles; `predicted` (may be NULL) receives the arg-max.
///
/// # Safety
/// `head` must come from [`lk_head_new`]; `x` must hold `dim` doubles and
/// `probs` `probs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lk_head_forward(
    head: *const LkHead,
    x: *const f64,
    dim: usize,
    probs: *mut f64,
    probs_len: usize,
    predicted: *mut u32,
) -> LkStatus {
    guard(|| {
        let head = deref!(head.cast_mut());
        if x.is_null() || probs.is_null() {
            return fail(LkStatus::NullPointer, "x or probs is null");
        }
        if probs_len != head.0.num_classes {
            return from_error(Error::DimensionMismatch {
                expected: head.0.num_classes,
                got: probs_len,
            });
        }
        let p = match head.0.forward(unsafe { slice::from_raw_parts(x, dim) }) {
            Ok(p) => p,
            Err(e) => return from_error(e),
        };
        unsafe { slice::from_raw_parts_mut(probs, probs_len) }.copy_from_slice(&p);
        if let Some(slot) = unsafe { predicted.as_mut() } {
            *slot = argmax(&p) as u32;
        }
        LkStatus::Ok
    })
}

/// # Safety
/// `head` must be NULL or come from [`lk_head_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lk_head_free(head: *mut LkHead) {
    if !head.is_null() {
        drop(unsafe { Box::from_raw(head) });
    }
}
