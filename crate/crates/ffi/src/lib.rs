//! C ABI over the `picatom` toolkit.
//!
//! Every fallible call returns a [`PicatomStatus`]; on failure the message is
//! kept per thread and can be copied out with
//! [`picatom_last_error_message`]. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `*_free` function.
//! Panics never unwind into C; they surface as `PICATOM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use picatom::cli::{self, CommandName, Overrides, RunConfig};
use picatom::spectroscopy::{
    doppler_fwhm, load_line_data, vapor_absorption_spectrum, Isotope, IsotopeSelection, Spectrum, VaporConfig,
};
use picatom::{Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicatomStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or a buffer that is too small.
    InvalidArgument = 1,
    Config = 2,
    Numerical = 3,
    Io = 4,
    Panic = 5,
}

/// A parsed, validated run configuration.
pub struct PicatomConfig(RunConfig);

/// The outcome of [`picatom_run`].
pub struct PicatomRun {
    exit_code: i32,
    manifest: String,
}

/// A transmission spectrum on a detuning grid.
pub struct PicatomSpectrum(Spectrum);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: PicatomStatus, msg: impl Into<String>) -> PicatomStatus {
    set_error(msg.into());
    status
}

fn from_error(e: Error) -> PicatomStatus {
    let status = match e.kind() {
        ErrorKind::Config => PicatomStatus::Config,
        ErrorKind::Numerical => PicatomStatus::Numerical,
        ErrorKind::Io => PicatomStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), PicatomStatus>) -> PicatomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PicatomStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(PicatomStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PicatomStatus> {
    if p.is_null() {
        return Err(fail(PicatomStatus::InvalidArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PicatomStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), PicatomStatus> {
    if p.is_null() {
        Err(fail(PicatomStatus::InvalidArgument, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Copies `s` plus a terminating NUL into `buf`. `needed` (optional) gets the
/// full size including the NUL; a short buffer is an error and is left
/// untouched.
unsafe fn copy_out(s: &str, buf: *mut c_char, len: usize, needed: *mut usize) -> Result<(), PicatomStatus> {
    let n = s.len() + 1;
    if !needed.is_null() {
        *needed = n;
    }
    if buf.is_null() && len == 0 {
        return Ok(());
    }
    if buf.is_null() || len < n {
        return Err(fail(PicatomStatus::InvalidArgument, format!("buffer needs {n} bytes, got {len}")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn picatom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the calling thread's last error message (empty after a success).
/// Pass a null `buf` with `len == 0` to query the size.
///
/// # Safety
/// `buf` must point to `len` writable bytes; `needed` may be null.
#[no_mangle]
pub unsafe extern "C" fn picatom_last_error_message(buf: *mut c_char, len: usize, needed: *mut usize) -> PicatomStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match copy_out(&msg, buf, len, needed) {
        Ok(()) => PicatomStatus::Ok,
        Err(s) => {
            set_error(msg);
            s
        }
    }
}

/// Parses a TOML run configuration. `command` may be null when the TOML sets
/// `command`; otherwise it is one of `mode`, `taper`, `bridge-sweep`,
/// `grating`, `design-search`, `spectrum`.
///
/// # Safety
/// `toml` and `command` must be null or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn picatom_config_parse(
    toml: *const c_char,
    command: *const c_char,
    out: *mut *mut PicatomConfig,
) -> PicatomStatus {
    guard(|| {
        out_arg(out, "out")?;
        let text = str_arg(toml, "toml")?;
        let command = if command.is_null() {
            None
        } else {
            let c = str_arg(command, "command")?;
            Some(c.parse::<CommandName>().map_err(from_error)?)
        };
        let o = Overrides {
            command,
            ..Default::default()
        };
        let cfg = cli::parse_config_str(text, &o).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PicatomConfig(cfg)));
        Ok(())
    })
}

/// Writes the fully resolved configuration as TOML.
///
/// # Safety
/// `cfg` must come from [`picatom_config_parse`]; see
/// [`picatom_last_error_message`] for the buffer contract.
#[no_mangle]
pub unsafe extern "C" fn picatom_config_to_toml(
    cfg: *const PicatomConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> PicatomStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| fail(PicatomStatus::InvalidArgument, "cfg is null"))?;
        copy_out(&cfg.0.to_toml(), buf, len, needed)
    })
}

/// # Safety
/// `cfg` must be null or come from [`picatom_config_parse`], and is not
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn picatom_config_free(cfg: *mut PicatomConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured job and writes its outputs. A job that fails after
/// starting still yields a run (check [`picatom_run_exit_code`]); only
/// failures to write the output directory return an error status.
///
/// # Safety
/// `cfg` must come from [`picatom_config_parse`]; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn picatom_run(cfg: *const PicatomConfig, out: *mut *mut PicatomRun) -> PicatomStatus {
    guard(|| {
        out_arg(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| fail(PicatomStatus::InvalidArgument, "cfg is null"))?;
        let ex = cli::execute(&cfg.0).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PicatomRun {
            exit_code: ex.exit_code,
            manifest: ex.manifest.to_toml(),
        }));
        Ok(())
    })
}

/// 0 on success, otherwise the command-line exit code (2, 3 or 4).
///
/// # Safety
/// `run` must come from [`picatom_run`].
#[no_mangle]
pub unsafe extern "C" fn picatom_run_exit_code(run: *const PicatomRun) -> i32 {
    run.as_ref().map_or(-1, |r| r.exit_code)
}

/// The run manifest as TOML.
///
/// # Safety
/// `run` must come from [`picatom_run`]; see
/// [`picatom_last_error_message`] for the buffer contract.
#[no_mangle]
pub unsafe extern "C" fn picatom_run_manifest(
    run: *const PicatomRun,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> PicatomStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| fail(PicatomStatus::InvalidArgument, "run is null"))?;
        copy_out(&run.manifest, buf, len, needed)
    })
}

/// # Safety
/// `run` must be null or come from [`picatom_run`], and is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn picatom_run_free(run: *mut PicatomRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Doppler FWHM in Hz of the D2 line of `isotope` (`Rb85` or `Rb87`).
///
/// # Safety
/// `isotope` must be NUL-terminated; `out_hz` must be valid.
#[no_mangle]
pub unsafe extern "C" fn picatom_doppler_fwhm_hz(
    isotope: *const c_char,
    temperature_k: f64,
    out_hz: *mut f64,
) -> PicatomStatus {
    guard(|| {
        out_arg(out_hz, "out_hz")?;
        let iso: Isotope = str_arg(isotope, "isotope")?.parse().map_err(from_error)?;
        let lines = load_line_data(IsotopeSelection::Single(iso)).map_err(from_error)?;
        *out_hz = doppler_fwhm(&lines[0], temperature_k).map_err(from_error)?;
        Ok(())
    })
}

/// Natural-abundance rubidium vapor transmission on `n` detunings (Hz from
/// the Rb85 D2 hyperfine-free center, strictly increasing).
///
/// # Safety
/// `detuning_hz` must point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn picatom_vapor_spectrum(
    temperature_k: f64,
    pressure_torr: f64,
    path_length_mm: f64,
    detuning_hz: *const f64,
    n: usize,
    out: *mut *mut PicatomSpectrum,
) -> PicatomStatus {
    guard(|| {
        out_arg(out, "out")?;
        if detuning_hz.is_null() {
            return Err(fail(PicatomStatus::InvalidArgument, "detuning_hz is null"));
        }
        let grid = std::slice::from_raw_parts(detuning_hz, n);
        let vapor = VaporConfig {
            temperature_k,
            pressure_torr,
            path_length_mm,
            isotopes: IsotopeSelection::Natural,
        };
        let lines = load_line_data(IsotopeSelection::Natural).map_err(from_error)?;
        let s = vapor_absorption_spectrum(&vapor, &lines, grid).map_err(from_error)?;
        *out = Box::into_raw(Box::new(PicatomSpectrum(s)));
        Ok(())
    })
}

/// Number of points in the spectrum.
///
/// # Safety
/// `s` must come from [`picatom_vapor_spectrum`].
#[no_mangle]
pub unsafe extern "C" fn picatom_spectrum_len(s: *const PicatomSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the transmission values into `out`, which holds `len` doubles.
///
/// # Safety
/// `s` must come from [`picatom_vapor_spectrum`]; `out` must point to `len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn picatom_spectrum_transmission(
    s: *const PicatomSpectrum,
    out: *mut f64,
    len: usize,
) -> PicatomStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| fail(PicatomStatus::InvalidArgument, "spectrum is null"))?;
        out_arg(out, "out")?;
        let t = &s.0.transmission;
        if len < t.len() {
            return Err(fail(
                PicatomStatus::InvalidArgument,
                format!("buffer holds {len} values, spectrum has {}", t.len()),
            ));
        }
        ptr::copy_nonoverlapping(t.as_ptr(), out, t.len());
        Ok(())
    })
}

/// # Safety
/// `s` must be null or come from [`picatom_vapor_spectrum`], and is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn picatom_spectrum_free(s: *mut PicatomSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
