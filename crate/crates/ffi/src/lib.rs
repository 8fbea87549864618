//! C ABI over the scrisk pipeline: load or generate a network, calibrate,
//! score the risk profile, rewire under the annealed MH chain, and pull
//! metrics — all behind opaque handles.
//!
//! Conventions:
//! - Every fallible call returns a status code (`SCRISK_OK` = 0; 1 bad
//!   argument, 2 config, 3 data, 4 runtime, 5 panic) and reports details via
//!   `scrisk_last_error()` (thread-local, valid until the next failing call
//!   on the same thread).
//! - Handles are created through out-parameters and released with their
//!   `_free` function; `_free` accepts NULL.
//! - The generated header lives at `include/scrisk.h` and is kept in sync
//!   with this surface (see `cbindgen.toml`; a test cross-checks the names).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use scrisk::cascade::{self, CascadeConfig, RiskProfile};
use scrisk::edgelist::{self, LoadOptions};
use scrisk::error::Error;
use scrisk::network::{Mode, ScNetwork};
use scrisk::optimizer::{self, AnnealSchedule, RunConfig};
use scrisk::production::{self, Essentiality, EssentialityMatrix, ProductionModel};
use scrisk::rewire::SwapConstraints;
use scrisk::synth::{self, SynthSpec};
use scrisk::weight::Weight;

pub const SCRISK_OK: i32 = 0;
pub const SCRISK_ERR_ARGUMENT: i32 = 1;
pub const SCRISK_ERR_CONFIG: i32 = 2;
pub const SCRISK_ERR_DATA: i32 = 3;
pub const SCRISK_ERR_RUNTIME: i32 = 4;
pub const SCRISK_ERR_PANIC: i32 = 5;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> i32 {
    match err.exit_code() {
        2 => SCRISK_ERR_CONFIG,
        3 => SCRISK_ERR_DATA,
        _ => SCRISK_ERR_RUNTIME,
    }
}

fn fail(err: Error) -> i32 {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

fn bad_arg(msg: &str) -> i32 {
    set_error(msg.to_string());
    SCRISK_ERR_ARGUMENT
}

fn guarded(body: impl FnOnce() -> i32) -> i32 {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic".to_string());
            SCRISK_ERR_PANIC
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated UTF-8 string.
unsafe fn path_arg(ptr: *const c_char) -> Result<PathBuf, i32> {
    if ptr.is_null() {
        return Err(bad_arg("path is NULL"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => Err(bad_arg("path is not valid UTF-8")),
    }
}

unsafe fn out_param<'a, T>(ptr: *mut *mut T) -> Result<&'a mut *mut T, i32> {
    if ptr.is_null() {
        Err(bad_arg("out parameter is NULL"))
    } else {
        Ok(&mut *ptr)
    }
}

macro_rules! deref_handle {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(h) => h,
            None => return bad_arg("handle is NULL"),
        }
    };
}

/// Opaque network handle.
pub struct ScriskNetwork(ScNetwork);
/// Opaque essentiality-matrix handle.
pub struct ScriskEssentiality(EssentialityMatrix);
/// Opaque calibrated-model handle.
pub struct ScriskModel(ProductionModel);
/// Opaque risk-profile handle.
pub struct ScriskProfile(RiskProfile);

/// Optimization parameters. `beta_kind` 0 = fixed β, 1 = linear ramp to
/// `beta` over `beta_total_steps`.
#[repr(C)]
pub struct ScriskRunParams {
    pub steps: u64,
    pub beta_kind: i32,
    pub beta: f64,
    pub beta_total_steps: u64,
    pub epsilon: f64,
    pub out_strength_band: f64,
    pub seed: u64,
    pub record_every: u64,
    pub cascade_tol: f64,
    pub cascade_t_max: u64,
    pub recompute_shares: i32,
}

/// Run outcome summary.
#[repr(C)]
pub struct ScriskRunSummary {
    pub initial_mean: f64,
    pub final_mean: f64,
    pub best_mean: f64,
    pub accepted: u64,
    pub steps: u64,
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn scrisk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the last error on this thread, or NULL.
#[no_mangle]
pub extern "C" fn scrisk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Loads an edge-list CSV. `weighted` 0 loads unweighted (weight column
/// optional), nonzero loads weighted. `min_weight` < 0 keeps the default
/// ingestion threshold of 3000.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be a valid
/// pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_load(
    path: *const c_char,
    weighted: i32,
    min_weight: f64,
    out: *mut *mut ScriskNetwork,
) -> i32 {
    guarded(|| {
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(c) => return c,
        };
        let mode = if weighted != 0 {
            Mode::Weighted
        } else {
            Mode::Unweighted
        };
        let opts = if min_weight < 0.0 {
            LoadOptions::default()
        } else {
            match Weight::from_f64(min_weight) {
                Ok(w) => LoadOptions { min_weight: w },
                Err(e) => return fail(e),
            }
        };
        match edgelist::load_edge_list(&path, mode, &opts) {
            Ok(net) => {
                *out = Box::into_raw(Box::new(ScriskNetwork(net)));
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Generates a synthetic network and its essentiality matrix.
///
/// # Safety
/// `out_net` and `out_ess` must be valid pointers to handle slots.
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_generate(
    n_firms: u64,
    n_sectors: u64,
    degree_exponent: f64,
    weight_exponent: f64,
    reciprocity: f64,
    essentiality_density: f64,
    seed: u64,
    out_net: *mut *mut ScriskNetwork,
    out_ess: *mut *mut ScriskEssentiality,
) -> i32 {
    guarded(|| {
        let out_net = match out_param(out_net) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let out_ess = match out_param(out_ess) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let spec = SynthSpec {
            n_firms: n_firms as usize,
            n_sectors: n_sectors as usize,
            degree_exponent,
            weight_exponent,
            reciprocity_target: reciprocity,
            essentiality_density,
            seed,
        };
        match synth::generate_synthetic(&spec) {
            Ok((net, ess)) => {
                *out_net = Box::into_raw(Box::new(ScriskNetwork(net)));
                *out_ess = Box::into_raw(Box::new(ScriskEssentiality(ess)));
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Writes the network as an edge-list CSV.
///
/// # Safety
/// `net` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_write(
    net: *const ScriskNetwork,
    path: *const c_char,
) -> i32 {
    guarded(|| {
        let net = deref_handle!(net);
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(c) => return c,
        };
        match edgelist::write_edge_list(&net.0, &path) {
            Ok(()) => SCRISK_OK,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `net` must be a live handle (or NULL, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_n_firms(net: *const ScriskNetwork) -> u64 {
    net.as_ref().map(|n| n.0.n_firms() as u64).unwrap_or(0)
}

/// # Safety
/// `net` must be a live handle (or NULL, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_n_links(net: *const ScriskNetwork) -> u64 {
    net.as_ref().map(|n| n.0.n_links() as u64).unwrap_or(0)
}

/// Deep copy (optimization mutates its input network).
///
/// # Safety
/// `net` must be a live handle; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_clone(
    net: *const ScriskNetwork,
    out: *mut *mut ScriskNetwork,
) -> i32 {
    guarded(|| {
        let net = deref_handle!(net);
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        *out = Box::into_raw(Box::new(ScriskNetwork(net.0.clone())));
        SCRISK_OK
    })
}

/// # Safety
/// `net` must be NULL or a handle produced by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scrisk_network_free(net: *mut ScriskNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Loads an essentiality CSV. `default_class` is the fallback for missing
/// pairs: 'E', 'N' or 'I'.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_essentiality_load(
    path: *const c_char,
    default_class: c_char,
    out: *mut *mut ScriskEssentiality,
) -> i32 {
    guarded(|| {
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(c) => return c,
        };
        let class = match class_arg(default_class) {
            Ok(c) => c,
            Err(code) => return code,
        };
        match EssentialityMatrix::load_csv(&path, class) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(ScriskEssentiality(m)));
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

fn class_arg(c: c_char) -> Result<Essentiality, i32> {
    match c as u8 {
        b'E' => Ok(Essentiality::Essential),
        b'N' => Ok(Essentiality::NonEssential),
        b'I' => Ok(Essentiality::Irrelevant),
        other => Err(bad_arg(&format!(
            "unknown essentiality class '{}'",
            other as char
        ))),
    }
}

/// Matrix with no entries; every pair takes `class`.
///
/// # Safety
/// `out` must be a valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_essentiality_uniform(
    class: c_char,
    out: *mut *mut ScriskEssentiality,
) -> i32 {
    guarded(|| {
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let class = match class_arg(class) {
            Ok(c) => c,
            Err(code) => return code,
        };
        *out = Box::into_raw(Box::new(ScriskEssentiality(EssentialityMatrix::uniform(
            class,
        ))));
        SCRISK_OK
    })
}

/// # Safety
/// `ess` must be NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scrisk_essentiality_free(ess: *mut ScriskEssentiality) {
    if !ess.is_null() {
        drop(Box::from_raw(ess));
    }
}

/// Calibrates per-firm production functions on the network's observed
/// inputs. `gamma_ne` ∈ [0,1].
///
/// # Safety
/// `net` and `ess` must be live handles; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_model_calibrate(
    net: *const ScriskNetwork,
    ess: *const ScriskEssentiality,
    gamma_ne: f64,
    out: *mut *mut ScriskModel,
) -> i32 {
    guarded(|| {
        let net = deref_handle!(net);
        let ess = deref_handle!(ess);
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        match production::calibrate(&net.0, &ess.0, gamma_ne) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(ScriskModel(model)));
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must be NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scrisk_model_free(model: *mut ScriskModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Computes the full per-firm risk profile (parallel over shock origins).
///
/// # Safety
/// `net` and `model` must be live handles over the same firm set; `out` a
/// valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_compute(
    net: *const ScriskNetwork,
    model: *const ScriskModel,
    tol: f64,
    t_max: u64,
    out: *mut *mut ScriskProfile,
) -> i32 {
    guarded(|| {
        let net = deref_handle!(net);
        let model = deref_handle!(model);
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let cfg = CascadeConfig {
            tol,
            t_max: t_max as usize,
        };
        match cascade::risk_profile(&net.0, &model.0, &cfg) {
            Ok(profile) => {
                *out = Box::into_raw(Box::new(ScriskProfile(profile)));
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `profile` must be a live handle (or NULL, yielding NaN).
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_mean(profile: *const ScriskProfile) -> f64 {
    profile.as_ref().map(|p| p.0.mean).unwrap_or(f64::NAN)
}

/// # Safety
/// `profile` must be a live handle (or NULL, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_len(profile: *const ScriskProfile) -> u64 {
    profile.as_ref().map(|p| p.0.len() as u64).unwrap_or(0)
}

/// ESRI of the firm at `index` (dense id order); NaN when out of range.
///
/// # Safety
/// `profile` must be a live handle (or NULL, yielding NaN).
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_esri(profile: *const ScriskProfile, index: u64) -> f64 {
    profile
        .as_ref()
        .and_then(|p| p.0.esri.get(index as usize).copied())
        .unwrap_or(f64::NAN)
}

/// 1 when every cascade converged below tol before t_max.
///
/// # Safety
/// `profile` must be a live handle (or NULL, yielding 0).
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_converged(profile: *const ScriskProfile) -> i32 {
    profile
        .as_ref()
        .map(|p| p.0.converged() as i32)
        .unwrap_or(0)
}

/// Writes `firm,esri,rank` CSV for the profile over its network.
///
/// # Safety
/// `profile` and `net` must be live handles; `path` a NUL-terminated UTF-8
/// string.
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_write_csv(
    profile: *const ScriskProfile,
    net: *const ScriskNetwork,
    path: *const c_char,
) -> i32 {
    guarded(|| {
        let profile = deref_handle!(profile);
        let net = deref_handle!(net);
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(c) => return c,
        };
        match scrisk::artifacts::write_profile_csv(&net.0, &profile.0, &path) {
            Ok(()) => SCRISK_OK,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `profile` must be NULL or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scrisk_profile_free(profile: *mut ScriskProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Runs the MH/annealing chain in place on `net`. When `trajectory_csv` is
/// non-NULL the trajectory is streamed there; `summary` (optional) receives
/// the run totals.
///
/// # Safety
/// `net` must be a live mutable handle not aliased elsewhere, `model` a live
/// handle; `params` must point to a valid parameter struct; `trajectory_csv`
/// NULL or a NUL-terminated UTF-8 string; `summary` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn scrisk_optimize(
    net: *mut ScriskNetwork,
    model: *const ScriskModel,
    params: *const ScriskRunParams,
    trajectory_csv: *const c_char,
    summary: *mut ScriskRunSummary,
) -> i32 {
    guarded(|| {
        let net = match net.as_mut() {
            Some(n) => n,
            None => return bad_arg("handle is NULL"),
        };
        let model = deref_handle!(model);
        let params = match params.as_ref() {
            Some(p) => p,
            None => return bad_arg("params is NULL"),
        };
        let schedule = match params.beta_kind {
            0 => AnnealSchedule::fixed(params.beta),
            1 => AnnealSchedule::linear(params.beta, params.beta_total_steps),
            _ => return bad_arg("beta_kind must be 0 (fixed) or 1 (linear)"),
        };
        let epsilon = match Weight::from_f64(params.epsilon) {
            Ok(w) => w,
            Err(e) => return fail(e),
        };
        let cfg = RunConfig {
            steps: params.steps,
            schedule,
            constraints: SwapConstraints {
                epsilon,
                out_strength_band: params.out_strength_band,
                resample_factor: 10,
            },
            cascade: CascadeConfig {
                tol: params.cascade_tol,
                t_max: params.cascade_t_max as usize,
            },
            seed: params.seed,
            record_every: params.record_every.max(1),
            snapshot_every: 0,
            recompute_shares: params.recompute_shares != 0,
        };
        let result = if trajectory_csv.is_null() {
            optimizer::run(&mut net.0, &model.0, &cfg, &mut optimizer::NullSink)
        } else {
            let path = match path_arg(trajectory_csv) {
                Ok(p) => p,
                Err(c) => return c,
            };
            let dir = path.parent().map(|p| p.to_path_buf()).unwrap_or_default();
            match TrajectoryOnlySink::create(&dir, &path) {
                Ok(mut sink) => optimizer::run(&mut net.0, &model.0, &cfg, &mut sink),
                Err(e) => return fail(e),
            }
        };
        match result {
            Ok(r) => {
                if let Some(s) = summary.as_mut() {
                    *s = ScriskRunSummary {
                        initial_mean: r.initial_mean,
                        final_mean: r.final_mean,
                        best_mean: r.best_mean,
                        accepted: r.accepted,
                        steps: r.steps,
                    };
                }
                SCRISK_OK
            }
            Err(e) => fail(e),
        }
    })
}

struct TrajectoryOnlySink {
    file: std::io::BufWriter<std::fs::File>,
    path: String,
}

impl TrajectoryOnlySink {
    fn create(dir: &std::path::Path, path: &std::path::Path) -> scrisk::Result<TrajectoryOnlySink> {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::io(dir.display().to_string(), e))?;
        }
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
        );
        use std::io::Write;
        writeln!(file, "{}", optimizer::TrajectoryRecord::CSV_HEADER)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(TrajectoryOnlySink {
            file,
            path: path.display().to_string(),
        })
    }
}

impl optimizer::RunSink for TrajectoryOnlySink {
    fn record(&mut self, record: &optimizer::TrajectoryRecord) -> scrisk::Result<()> {
        use std::io::Write;
        writeln!(self.file, "{}", record.csv_row())
            .map_err(|e| Error::io(self.path.clone(), e))?;
        self.file
            .flush()
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

/// Network measures as a JSON object string; free with
/// `scrisk_string_free`.
///
/// # Safety
/// `net` must be a live handle; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn scrisk_metrics_json(
    net: *const ScriskNetwork,
    out: *mut *mut c_char,
) -> i32 {
    guarded(|| {
        let net = deref_handle!(net);
        let out = match out_param(out) {
            Ok(o) => o,
            Err(c) => return c,
        };
        let report = scrisk::metrics::compute_metrics(&net.0);
        match serde_json::to_string(&report) {
            Ok(json) => match CString::new(json) {
                Ok(c) => {
                    *out = c.into_raw();
                    SCRISK_OK
                }
                Err(_) => bad_arg("metrics JSON contained NUL"),
            },
            Err(e) => {
                set_error(format!("metrics serialization: {e}"));
                SCRISK_ERR_RUNTIME
            }
        }
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scrisk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
