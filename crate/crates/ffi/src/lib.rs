//! C ABI over scenario configs, certificates, full runs and particle
//! ensembles. Every entry point returns a [`KhStatus`]; on failure the
//! message is kept per thread and read with [`kh_last_error_message`].
//! Handles are opaque and owned by the caller until passed to their
//! `_free` function.

use kinetic_harris::certificate::doeblin_rate;
use kinetic_harris::config::ScenarioConfig;
use kinetic_harris::domain::EquilibriumSpec;
use kinetic_harris::error::Error;
use kinetic_harris::experiment::{self, CertificateReport, RunOutcome};
use kinetic_harris::jump::{simulate, Ensemble, ProcessSpec};
use kinetic_harris::numerics::QuadratureConfig;
use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Configuration parse, check or validation failure.
    Config = 3,
    /// Numerical or simulation failure.
    Runtime = 4,
    OutOfRange = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// What a certificate's rate value means.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KhRateKind {
    /// Natural log of an exponential rate.
    LnRate = 0,
    /// Exponent of an algebraic decay.
    AlgebraicExponent = 1,
}

/// One snapshot of a run.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KhRow {
    pub t: f64,
    pub tv: f64,
    pub tv_stderr: f64,
    pub tv_floor: f64,
    pub wtv: f64,
    pub wtv_stderr: f64,
    pub wtv_floor: f64,
    /// NaN when no certified bound is available.
    pub bound: f64,
}

/// A parsed and checked scenario.
pub struct KhScenario {
    config: ScenarioConfig,
}

pub struct KhCertificate {
    report: CertificateReport,
}

pub struct KhRun {
    outcome: RunOutcome,
}

/// Particles drawn from the scenario's initial law, advanced on demand.
pub struct KhEnsemble {
    ensemble: Ensemble,
    process: ProcessSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: KhStatus, msg: impl Into<String>) -> KhStatus {
    set_error(msg.into());
    status
}

fn from_core(err: Error) -> KhStatus {
    let status = match err {
        Error::Config(_) => KhStatus::Config,
        _ => KhStatus::Runtime,
    };
    fail(status, err.to_string())
}

/// Runs `f`, turning panics into [`KhStatus::Panic`].
fn guard<F: FnOnce() -> Result<(), KhStatus>>(f: F) -> KhStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KhStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(KhStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, KhStatus> {
    if p.is_null() {
        return Err(fail(KhStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(KhStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, KhStatus> {
    p.as_ref()
        .ok_or_else(|| fail(KhStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, KhStatus> {
    p.as_mut()
        .ok_or_else(|| fail(KhStatus::NullPointer, format!("{name} is null")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NULs removed")
        .into_raw()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn kh_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message on this thread into `buf` with a
/// terminating NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kh_last_error_message(buf: *mut c_char, len: usize) -> KhStatus {
    if buf.is_null() {
        return KhStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[0u8][..], |c| c.as_bytes_with_nul());
        if bytes.len() > len {
            return KhStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
        KhStatus::Ok
    })
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and checks a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_scenario_from_toml(toml: *const c_char, out: *mut *mut KhScenario) -> KhStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        let config = ScenarioConfig::from_toml(text).map_err(from_core)?;
        *out = Box::into_raw(Box::new(KhScenario { config }));
        Ok(())
    })
}

/// Loads and checks a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_scenario_load(path: *const c_char, out: *mut *mut KhScenario) -> KhStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let config = ScenarioConfig::load(Path::new(path)).map_err(from_core)?;
        *out = Box::into_raw(Box::new(KhScenario { config }));
        Ok(())
    })
}

/// # Safety
/// `s` must come from a scenario constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kh_scenario_free(s: *mut KhScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Phase-space dimension d and particle count.
///
/// # Safety
/// `s` must be a live scenario; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_scenario_shape(s: *const KhScenario, dim: *mut usize, particles: *mut usize) -> KhStatus {
    guard(|| {
        let s = ref_arg(s, "scenario")?;
        *out_arg(dim, "dim")? = s.config.dim;
        *out_arg(particles, "particles")? = s.config.particles;
        Ok(())
    })
}

/// Runs the pre-flight checks. `passed` is 1 when all pass. When `report`
/// is non-null it receives the rendered report, freed with
/// [`kh_string_free`].
///
/// # Safety
/// `s` must be a live scenario; `passed` must be writable; `report` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn kh_scenario_validate(
    s: *const KhScenario,
    passed: *mut c_int,
    report: *mut *mut c_char,
) -> KhStatus {
    guard(|| {
        let s = ref_arg(s, "scenario")?;
        let passed = out_arg(passed, "passed")?;
        let r = experiment::validate(&s.config, &QuadratureConfig::default());
        *passed = c_int::from(r.passed());
        if let Some(out) = report.as_mut() {
            *out = into_c_string(r.render());
        }
        Ok(())
    })
}

/// Assembles the scenario's certificate.
///
/// # Safety
/// `s` must be a live scenario; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_certificate_new(s: *const KhScenario, out: *mut *mut KhCertificate) -> KhStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "scenario")?;
        let report = experiment::certificate(&s.config).map_err(from_core)?;
        *out = Box::into_raw(Box::new(KhCertificate { report }));
        Ok(())
    })
}

/// # Safety
/// `c` must come from [`kh_certificate_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kh_certificate_free(c: *mut KhCertificate) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// The certified rate and what it measures.
///
/// # Safety
/// `c` must be a live certificate; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_certificate_rate(
    c: *const KhCertificate,
    kind: *mut KhRateKind,
    value: *mut f64,
) -> KhStatus {
    guard(|| {
        let c = ref_arg(c, "certificate")?;
        let (name, v) = c.report.certificate.rate_summary();
        *out_arg(kind, "kind")? = if name == "ln_rate" {
            KhRateKind::LnRate
        } else {
            KhRateKind::AlgebraicExponent
        };
        *out_arg(value, "value")? = v;
        Ok(())
    })
}

/// Audit text, one `name = value  # description` line per constant; free
/// with [`kh_string_free`].
///
/// # Safety
/// `c` must be a live certificate; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_certificate_audit(c: *const KhCertificate, out: *mut *mut c_char) -> KhStatus {
    guard(|| {
        let c = ref_arg(c, "certificate")?;
        *out_arg(out, "out")? = into_c_string(c.report.render());
        Ok(())
    })
}

/// Exponential rate −ln(1−α)/t* and prefactor 1/(1−α) of a Doeblin
/// minorisation with mass α at time t*.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_doeblin_rate(t_star: f64, alpha: f64, rate: *mut f64, prefactor: *mut f64) -> KhStatus {
    guard(|| {
        let rate = out_arg(rate, "rate")?;
        let prefactor = out_arg(prefactor, "prefactor")?;
        let (r, p) = doeblin_rate(t_star, alpha).map_err(from_core)?;
        *rate = r;
        *prefactor = p;
        Ok(())
    })
}

/// Certifies, simulates and estimates distances at every snapshot. Bound
/// violations do not fail the call; read them with [`kh_run_exit_code`].
///
/// # Safety
/// `s` must be a live scenario; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_run(s: *const KhScenario, out: *mut *mut KhRun) -> KhStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let s = ref_arg(s, "scenario")?;
        let outcome = experiment::run(&s.config, &QuadratureConfig::default()).map_err(from_core)?;
        *out = Box::into_raw(Box::new(KhRun { outcome }));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`kh_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kh_run_free(r: *mut KhRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of snapshots.
///
/// # Safety
/// `r` must be a live run; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_run_len(r: *const KhRun, len: *mut usize) -> KhStatus {
    guard(|| {
        *out_arg(len, "len")? = ref_arg(r, "run")?.outcome.rows.len();
        Ok(())
    })
}

/// Snapshot `index` in time order.
///
/// # Safety
/// `r` must be a live run; `row` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_run_row(r: *const KhRun, index: usize, row: *mut KhRow) -> KhStatus {
    guard(|| {
        let r = ref_arg(r, "run")?;
        let row = out_arg(row, "row")?;
        let x = r.outcome.rows.get(index).ok_or_else(|| {
            fail(
                KhStatus::OutOfRange,
                format!("row {index} out of range for {} snapshots", r.outcome.rows.len()),
            )
        })?;
        *row = KhRow {
            t: x.t,
            tv: x.tv.value,
            tv_stderr: x.tv.stderr,
            tv_floor: x.tv.floor,
            wtv: x.wtv.value,
            wtv_stderr: x.wtv.stderr,
            wtv_floor: x.wtv.floor,
            bound: x.bound,
        };
        Ok(())
    })
}

/// The command-line exit code for this run: 0, or 3 on a bound violation.
///
/// # Safety
/// `r` must be a live run; `code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_run_exit_code(r: *const KhRun, code: *mut c_int) -> KhStatus {
    guard(|| {
        *out_arg(code, "code")? = ref_arg(r, "run")?.outcome.exit_code();
        Ok(())
    })
}

/// Distances as CSV with columns t,tv,tv_stderr,wtv,wtv_stderr,bound; free
/// with [`kh_string_free`].
///
/// # Safety
/// `r` must be a live run; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_run_csv(r: *const KhRun, out: *mut *mut c_char) -> KhStatus {
    guard(|| {
        *out_arg(out, "out")? = into_c_string(ref_arg(r, "run")?.outcome.csv());
        Ok(())
    })
}

/// Draws the scenario's initial ensemble at t = 0.
///
/// # Safety
/// `s` must be a live scenario; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_ensemble_new(s: *const KhScenario, out: *mut *mut KhEnsemble) -> KhStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = &ref_arg(s, "scenario")?.config;
        let process = cfg.process().map_err(from_core)?;
        let eq = EquilibriumSpec::new(process.domain.clone(), &QuadratureConfig::default()).map_err(from_core)?;
        let points = experiment::initial_points(cfg, &eq).map_err(from_core)?;
        let ensemble = Ensemble::new(points, cfg.seed);
        *out = Box::into_raw(Box::new(KhEnsemble { ensemble, process }));
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`kh_ensemble_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn kh_ensemble_free(e: *mut KhEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Advances every particle to time `t`, which must not precede the current
/// ensemble time.
///
/// # Safety
/// `e` must be a live ensemble not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn kh_ensemble_advance(e: *mut KhEnsemble, t: f64) -> KhStatus {
    guard(|| {
        let e = out_arg(e, "ensemble")?;
        simulate(&mut e.ensemble, &e.process, t).map_err(from_core)?;
        Ok(())
    })
}

/// Current ensemble time.
///
/// # Safety
/// `e` must be a live ensemble; `t` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kh_ensemble_time(e: *const KhEnsemble, t: *mut f64) -> KhStatus {
    guard(|| {
        *out_arg(t, "t")? = ref_arg(e, "ensemble")?.ensemble.t;
        Ok(())
    })
}

/// Copies positions and velocities, particle-major, into `x` and `v`, each
/// holding `len` = particles·d doubles.
///
/// # Safety
/// `e` must be a live ensemble; `x` and `v` must each point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn kh_ensemble_state(e: *const KhEnsemble, x: *mut f64, v: *mut f64, len: usize) -> KhStatus {
    guard(|| {
        let e = ref_arg(e, "ensemble")?;
        if x.is_null() || v.is_null() {
            return Err(fail(KhStatus::NullPointer, "x or v is null"));
        }
        let pts = &e.ensemble.points;
        let d = pts.first().map_or(0, |p| p.dim());
        let need = pts.len() * d;
        if len < need {
            return Err(fail(
                KhStatus::BufferTooSmall,
                format!("need {need} doubles, got {len}"),
            ));
        }
        let xs = std::slice::from_raw_parts_mut(x, need);
        let vs = std::slice::from_raw_parts_mut(v, need);
        for (i, p) in pts.iter().enumerate() {
            xs[i * d..(i + 1) * d].copy_from_slice(p.x.as_slice());
            vs[i * d..(i + 1) * d].copy_from_slice(p.v.as_slice());
        }
        Ok(())
    })
}
