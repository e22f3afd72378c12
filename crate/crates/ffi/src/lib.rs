//! C ABI over the simulator.
//!
//! Every entry point returns a [`PclStatus`]; on failure a description is
//! kept per thread and can be read with [`pcl_last_error_message`]. Runs are
//! handed out as opaque [`PclTrace`] pointers that must be released with
//! [`pcl_trace_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pcl_sim::env::CostModel;
use pcl_sim::metrics::write_csv;
use pcl_sim::runner::{run, RunConfig, RunTrace, Termination};
use pcl_sim::SimError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PclStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    NonFinite = 5,
    UndefinedMetric = 6,
    OutOfRange = 7,
    Internal = 8,
    Panic = 9,
}

/// A finished run.
pub struct PclTrace {
    inner: RunTrace,
}

/// Numeric view of one step. Missing values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PclRecord {
    pub step: u64,
    pub cumulative_sim_time_s: f64,
    pub train_reward_pre_filter: f64,
    pub train_reward_post_filter: f64,
    pub effective_ratio: f64,
    pub grad_norm: f64,
    pub value_ev: f64,
    pub wasted_rollouts: u64,
    pub mean_staleness: f64,
    pub pi_ref_difficulty_of_selected: f64,
    pub mean_success_analytic: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &SimError) -> PclStatus {
    match err {
        SimError::Config(_) | SimError::EmptyFilter { .. } | SimError::Toml(_) => PclStatus::Config,
        SimError::DimensionMismatch { .. } => PclStatus::InvalidArgument,
        SimError::Io(_) | SimError::Csv(_) | SimError::Json(_) => PclStatus::Io,
        SimError::NonFinite(_) => PclStatus::NonFinite,
        SimError::UndefinedMetric(_) => PclStatus::UndefinedMetric,
        SimError::Stale { .. } | SimError::Starvation { .. } => PclStatus::Internal,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (PclStatus, String)>) -> PclStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            PclStatus::Ok
        }
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
            set_error(msg);
            PclStatus::Panic
        }
    }
}

fn sim_err(e: SimError) -> (PclStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (PclStatus, String) {
    (PclStatus::NullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PclStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PclStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (PclStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pcl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn pcl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parses a TOML run configuration and runs it to completion.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_run_from_toml(config_toml: *const c_char, out: *mut *mut PclTrace) -> PclStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = c_str(config_toml, "config_toml")?;
        let cfg = RunConfig::from_toml_str(text).map_err(sim_err)?;
        let trace = run(&cfg).map_err(sim_err)?;
        *out = Box::into_raw(Box::new(PclTrace { inner: trace }));
        Ok(())
    })
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `trace` must come from [`pcl_run_from_toml`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_free(trace: *mut PclTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

unsafe fn trace_ref<'a>(trace: *const PclTrace) -> Result<&'a RunTrace, (PclStatus, String)> {
    trace.as_ref().map(|t| &t.inner).ok_or_else(|| null("trace"))
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_len(trace: *const PclTrace, out: *mut usize) -> PclStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out.as_mut().ok_or_else(|| null("out"))? = t.records.len();
        Ok(())
    })
}

/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_record(trace: *const PclTrace, index: usize, out: *mut PclRecord) -> PclStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = t.records.get(index).ok_or_else(|| {
            (PclStatus::OutOfRange, format!("record {index} of {}", t.records.len()))
        })?;
        *out = PclRecord {
            step: r.step,
            cumulative_sim_time_s: r.cumulative_sim_time_s,
            train_reward_pre_filter: r.train_reward_pre_filter,
            train_reward_post_filter: r.train_reward_post_filter,
            effective_ratio: r.effective_ratio,
            grad_norm: r.grad_norm,
            value_ev: r.value_ev.unwrap_or(f64::NAN),
            wasted_rollouts: r.wasted_rollouts as u64,
            mean_staleness: r.mean_staleness,
            pi_ref_difficulty_of_selected: r.pi_ref_difficulty_of_selected,
            mean_success_analytic: r.mean_success_analytic,
        };
        Ok(())
    })
}

/// Final mean success, total rollouts generated and total wasted.
///
/// # Safety
/// `trace` must be a live handle; each out pointer must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_summary(
    trace: *const PclTrace,
    final_mean_success: *mut f64,
    generated_rollouts: *mut u64,
    wasted_rollouts: *mut u64,
) -> PclStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        if let Some(o) = final_mean_success.as_mut() {
            *o = t.final_mean_success;
        }
        if let Some(o) = generated_rollouts.as_mut() {
            *o = t.total_generated_rollouts as u64;
        }
        if let Some(o) = wasted_rollouts.as_mut() {
            *o = t.total_wasted_rollouts as u64;
        }
        Ok(())
    })
}

/// 1 if selection starved before the budget ran out, else 0.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_starved(trace: *const PclTrace, out: *mut i32) -> PclStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        *out.as_mut().ok_or_else(|| null("out"))? = matches!(t.termination, Termination::Starvation { .. }) as i32;
        Ok(())
    })
}

/// Writes the trace in the run CSV schema.
///
/// # Safety
/// `trace` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pcl_trace_write_csv(trace: *const PclTrace, path: *const c_char) -> PclStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let path = c_str(path, "path")?;
        let file = File::create(Path::new(path)).map_err(|e| (PclStatus::Io, e.to_string()))?;
        write_csv(&t.records, BufWriter::new(file)).map_err(sim_err)
    })
}

/// Simulated seconds to generate responses of the given lengths.
///
/// # Safety
/// `lengths` must point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_generation_time(
    lengths: *const u32,
    len: usize,
    per_stream_rate: f64,
    capacity: u32,
    out: *mut f64,
) -> PclStatus {
    guard(|| {
        let lengths = slice(lengths, len, "lengths")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if lengths.is_empty() {
            return Err((PclStatus::InvalidArgument, "empty batch".into()));
        }
        let cost = CostModel { per_stream_rate, capacity, ..CostModel::default() };
        cost.validate().map_err(sim_err)?;
        *out = cost.generation_time(lengths.iter().copied());
        Ok(())
    })
}

/// `1 - Var(truth - pred) / Var(truth)`.
///
/// # Safety
/// `truths` and `preds` must each point to `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_explained_variance(
    truths: *const f64,
    preds: *const f64,
    len: usize,
    out: *mut f64,
) -> PclStatus {
    guard(|| {
        let truths = slice(truths, len, "truths")?;
        let preds = slice(preds, len, "preds")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = pcl_sim::value::explained_variance(truths, preds).map_err(sim_err)?;
        Ok(())
    })
}

/// `p (1 - p)`, the expected squared advantage of a binary reward.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pcl_expected_sq_advantage(p: f64, out: *mut f64) -> PclStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(0.0..=1.0).contains(&p) {
            return Err((PclStatus::InvalidArgument, format!("p = {p} is not a probability")));
        }
        *out = pcl_sim::objective::expected_sq_advantage(p);
        Ok(())
    })
}

/// Writes the indices of the `m` scores closest to `target` into `out`.
///
/// # Safety
/// `scores` must point to `len` values and `out` to `m` writable slots.
#[no_mangle]
pub unsafe extern "C" fn pcl_greedy_downsample(
    scores: *const f64,
    len: usize,
    target: f64,
    m: usize,
    out: *mut usize,
) -> PclStatus {
    guard(|| {
        let scores = slice(scores, len, "scores")?;
        let picked = pcl_sim::strategies::greedy_downsample(scores, target, m).map_err(sim_err)?;
        if m > 0 && out.is_null() {
            return Err(null("out"));
        }
        for (i, idx) in picked.into_iter().enumerate() {
            *out.add(i) = idx;
        }
        Ok(())
    })
}
