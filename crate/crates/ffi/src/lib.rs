//! C ABI over the `anchorsdr` library.
//!
//! Every function returns an [`AsdrStatus`]; on failure a message is kept per
//! thread and can be read with [`asdr_last_error`]. Objects are opaque
//! handles created by `*_new`/`*_from_*` functions and released with the
//! matching `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use anchorsdr::config::{CodeSpec, ExperimentConfig};
use anchorsdr::harness::{BerRecord, Experiment};
use anchorsdr::ldpc::{spa_decode, CodeDefinition};
use anchorsdr::mimo::{BitIndexMap, RealBlockObservation};
use anchorsdr::turbo::{run_turbo, TurboConfig, TurboMode};
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsdrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsdrTurboMode {
    Multi = 0,
    Single = 1,
    FullList = 2,
}

/// An LDPC code.
pub struct AsdrCode {
    code: CodeDefinition,
}

/// A validated experiment ready to run.
pub struct AsdrExperiment {
    exp: Experiment,
}

/// Records produced by [`asdr_experiment_run_ber`].
pub struct AsdrBerResult {
    records: Vec<BerRecord>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AsdrBerRecord {
    pub snr_db: f64,
    pub iteration: usize,
    pub codewords: usize,
    pub bits: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub avg_runtime_s: f64,
    pub info_bits: usize,
    pub info_bit_errors: usize,
    pub failed_codewords: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AsdrStatus, String);

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Self(AsdrStatus::InvalidArgument, msg.into())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AsdrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AsdrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AsdrStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure(AsdrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(Failure(AsdrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Failure> {
    if p.is_null() {
        return Err(Failure(AsdrStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(AsdrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::invalid(format!("{name} is not UTF-8")))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(AsdrStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn config_failure(e: impl std::fmt::Display) -> Failure {
    Failure(AsdrStatus::Config, e.to_string())
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn asdr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Random regular code with `n` bits, `checks` rows and column weight
/// `column_weight`.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_new_regular(
    n: usize,
    checks: usize,
    column_weight: usize,
    seed: u64,
    out: *mut *mut AsdrCode,
) -> AsdrStatus {
    guard(|| {
        let spec = CodeSpec { n, checks, column_weight, seed, alist: None };
        emit(out, AsdrCode { code: spec.build().map_err(config_failure)? })
    })
}

/// Reads a code from an alist file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_from_alist(path: *const c_char, out: *mut *mut AsdrCode) -> AsdrStatus {
    guard(|| {
        let path = PathBuf::from(c_str(path, "path")?);
        let spec = CodeSpec { alist: Some(path), ..CodeSpec::default() };
        let code = spec.build().map_err(|e| match e {
            anchorsdr::config::ConfigError::Io { .. } => Failure(AsdrStatus::Io, e.to_string()),
            other => config_failure(other),
        })?;
        emit(out, AsdrCode { code })
    })
}

/// # Safety
/// `code` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_free(code: *mut AsdrCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Code length, or 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_n(code: *const AsdrCode) -> usize {
    code.as_ref().map_or(0, |c| c.code.n())
}

/// Code dimension, or 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_k(code: *const AsdrCode) -> usize {
    code.as_ref().map_or(0, |c| c.code.k())
}

/// Encodes `k` information bits into `n` codeword bits.
///
/// # Safety
/// Buffers must hold `info_len` and `codeword_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_encode(
    code: *const AsdrCode,
    info: *const u8,
    info_len: usize,
    codeword: *mut u8,
    codeword_len: usize,
) -> AsdrStatus {
    guard(|| {
        let code = &borrow(code, "code")?.code;
        if codeword_len != code.n() {
            return Err(Failure::invalid(format!("codeword buffer holds {codeword_len}, need {}", code.n())));
        }
        let cw = code.encode(slice(info, info_len, "info")?).map_err(|e| Failure::invalid(e.to_string()))?;
        slice_mut(codeword, codeword_len, "codeword")?.copy_from_slice(&cw);
        Ok(())
    })
}

/// # Safety
/// `bits` must hold `len` bytes; `satisfied` must be writable.
#[no_mangle]
pub unsafe extern "C" fn asdr_code_check_parity(
    code: *const AsdrCode,
    bits: *const u8,
    len: usize,
    satisfied: *mut bool,
) -> AsdrStatus {
    guard(|| {
        let code = &borrow(code, "code")?.code;
        let ok = code.check_parity(slice(bits, len, "bits")?).map_err(|e| Failure::invalid(e.to_string()))?;
        *slice_mut(satisfied, 1, "satisfied")?.first_mut().unwrap() = ok;
        Ok(())
    })
}

/// Sum-product decoding of channel LLRs (positive favours bit 0).
///
/// # Safety
/// `llr` and `hard` must hold `len` elements; `parity_ok` may be null.
#[no_mangle]
pub unsafe extern "C" fn asdr_spa_decode(
    code: *const AsdrCode,
    llr: *const f64,
    len: usize,
    max_iter: usize,
    hard: *mut u8,
    parity_ok: *mut bool,
) -> AsdrStatus {
    guard(|| {
        let code = &borrow(code, "code")?.code;
        let out = spa_decode(slice(llr, len, "llr")?, code, max_iter)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        slice_mut(hard, len, "hard")?.copy_from_slice(&out.hard);
        if !parity_ok.is_null() {
            *parity_ok = out.parity_ok;
        }
        Ok(())
    })
}

/// Iterative SDR detection and decoding of one codeword with default turbo
/// settings. `channels` holds `n / (2 nt)` real channel matrices of size
/// `2 nr x 2 nt`, row-major, back to back; `received` the matching real
/// vectors of length `2 nr`.
///
/// # Safety
/// Buffers must match the sizes above; `decoded` must hold `n` bytes and
/// `iterations` may be null.
#[no_mangle]
pub unsafe extern "C" fn asdr_turbo_decode(
    code: *const AsdrCode,
    nt: usize,
    nr: usize,
    mode: AsdrTurboMode,
    channels: *const f64,
    received: *const f64,
    noise_var: f64,
    decoded: *mut u8,
    iterations: *mut usize,
) -> AsdrStatus {
    guard(|| {
        let code = &borrow(code, "code")?.code;
        if nt == 0 || nr == 0 || code.n() % (2 * nt) != 0 {
            return Err(Failure::invalid(format!("code length {} does not fit nt = {nt}", code.n())));
        }
        let map = BitIndexMap::for_codeword(nt, code.n()).map_err(|e| Failure::invalid(e.to_string()))?;
        let k = map.snapshots();
        let (rows, cols) = (2 * nr, 2 * nt);
        let h = slice(channels, k * rows * cols, "channels")?;
        let y = slice(received, k * rows, "received")?;
        let obs = (0..k)
            .map(|s| {
                RealBlockObservation::new(
                    DMatrix::from_row_slice(rows, cols, &h[s * rows * cols..(s + 1) * rows * cols]),
                    DVector::from_column_slice(&y[s * rows..(s + 1) * rows]),
                    noise_var,
                )
                .map_err(|e| Failure::invalid(e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mode = match mode {
            AsdrTurboMode::Multi => TurboMode::Multi,
            AsdrTurboMode::Single => TurboMode::Single,
            AsdrTurboMode::FullList => TurboMode::FullList,
        };
        let out = run_turbo(&obs, code, &map, &TurboConfig::with_mode(mode))
            .map_err(|e| Failure(AsdrStatus::Numerical, e.to_string()))?;
        slice_mut(decoded, code.n(), "decoded")?.copy_from_slice(&out.decoded);
        if !iterations.is_null() {
            *iterations = out.trace.iterations.len();
        }
        Ok(())
    })
}

/// Parses and validates a TOML experiment description.
///
/// # Safety
/// `toml` must be a NUL-terminated string, `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn asdr_experiment_from_toml(
    toml: *const c_char,
    out: *mut *mut AsdrExperiment,
) -> AsdrStatus {
    guard(|| {
        let cfg = ExperimentConfig::from_toml_str(c_str(toml, "toml")?).map_err(config_failure)?;
        emit(out, AsdrExperiment { exp: Experiment::new(cfg).map_err(config_failure)? })
    })
}

/// # Safety
/// `exp` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asdr_experiment_free(exp: *mut AsdrExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Runs the configured BER sweep.
///
/// # Safety
/// `exp` must be a live handle, `out` valid for one pointer.
#[no_mangle]
pub unsafe extern "C" fn asdr_experiment_run_ber(
    exp: *const AsdrExperiment,
    out: *mut *mut AsdrBerResult,
) -> AsdrStatus {
    guard(|| {
        let records = borrow(exp, "experiment")?
            .exp
            .run_ber()
            .map_err(|e| Failure(AsdrStatus::Numerical, e.to_string()))?;
        emit(out, AsdrBerResult { records })
    })
}

/// Number of records, or 0 for a null handle.
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn asdr_ber_result_len(res: *const AsdrBerResult) -> usize {
    res.as_ref().map_or(0, |r| r.records.len())
}

/// # Safety
/// `res` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn asdr_ber_result_get(
    res: *const AsdrBerResult,
    index: usize,
    out: *mut AsdrBerRecord,
) -> AsdrStatus {
    guard(|| {
        let records = &borrow(res, "result")?.records;
        let r = records
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("index {index} out of {} records", records.len())))?;
        let out = out.as_mut().ok_or_else(|| Failure(AsdrStatus::NullPointer, "out is null".into()))?;
        *out = AsdrBerRecord {
            snr_db: r.snr_db,
            iteration: r.iteration,
            codewords: r.codewords,
            bits: r.bits,
            bit_errors: r.bit_errors,
            ber: r.ber,
            avg_runtime_s: r.avg_runtime_s,
            info_bits: r.info_bits,
            info_bit_errors: r.info_bit_errors,
            failed_codewords: r.failed_codewords,
        };
        Ok(())
    })
}

/// # Safety
/// `res` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn asdr_ber_result_free(res: *mut AsdrBerResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
