#ifndef PICATOM_H
#define PICATOM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PicatomStatus {
  PICATOM_STATUS_OK = 0,
  // Null pointer, bad UTF-8 or a buffer that is too small.
  PICATOM_STATUS_INVALID_ARGUMENT = 1,
  PICATOM_STATUS_CONFIG = 2,
  PICATOM_STATUS_NUMERICAL = 3,
  PICATOM_STATUS_IO = 4,
  PICATOM_STATUS_PANIC = 5,
} PicatomStatus;

// A parsed, validated run configuration.
typedef struct PicatomConfig PicatomConfig;

// The outcome of [`picatom_run`].
typedef struct PicatomRun PicatomRun;

// A transmission spectrum on a detuning grid.
typedef struct PicatomSpectrum PicatomSpectrum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static, NUL-terminated library version.
const char *picatom_version(void);

// Copies the calling thread's last error message (empty after a success).
// Pass a null `buf` with `len == 0` to query the size.
//
// # Safety
// `buf` must point to `len` writable bytes; `needed` may be null.
enum PicatomStatus picatom_last_error_message(char *buf, uintptr_t len, uintptr_t *needed);

// Parses a TOML run configuration. `command` may be null when the TOML sets
// `command`; otherwise it is one of `mode`, `taper`, `bridge-sweep`,
// `grating`, `design-search`, `spectrum`.
//
// # Safety
// `toml` and `command` must be null or NUL-terminated; `out` must be valid.
enum PicatomStatus picatom_config_parse(const char *toml,
                                        const char *command,
                                        struct PicatomConfig **out);

// Writes the fully resolved configuration as TOML.
//
// # Safety
// `cfg` must come from [`picatom_config_parse`]; see
// [`picatom_last_error_message`] for the buffer contract.
enum PicatomStatus picatom_config_to_toml(const struct PicatomConfig *cfg,
                                          char *buf,
                                          uintptr_t len,
                                          uintptr_t *needed);

// # Safety
// `cfg` must be null or come from [`picatom_config_parse`], and is not
// used afterwards.
void picatom_config_free(struct PicatomConfig *cfg);

// Runs the configured job and writes its outputs. A job that fails after
// starting still yields a run (check [`picatom_run_exit_code`]); only
// failures to write the output directory return an error status.
//
// # Safety
// `cfg` must come from [`picatom_config_parse`]; `out` must be valid.
enum PicatomStatus picatom_run(const struct PicatomConfig *cfg, struct PicatomRun **out);

// 0 on success, otherwise the command-line exit code (2, 3 or 4).
//
// # Safety
// `run` must come from [`picatom_run`].
int32_t picatom_run_exit_code(const struct PicatomRun *run);

// The run manifest as TOML.
//
// # Safety
// `run` must come from [`picatom_run`]; see
// [`picatom_last_error_message`] for the buffer contract.
enum PicatomStatus picatom_run_manifest(const struct PicatomRun *run,
                                        char *buf,
                                        uintptr_t len,
                                        uintptr_t *needed);

// # Safety
// `run` must be null or come from [`picatom_run`], and is not used
// afterwards.
void picatom_run_free(struct PicatomRun *run);

// Doppler FWHM in Hz of the D2 line of `isotope` (`Rb85` or `Rb87`).
//
// # Safety
// `isotope` must be NUL-terminated; `out_hz` must be valid.
enum PicatomStatus picatom_doppler_fwhm_hz(const char *isotope,
                                           double temperature_k,
                                           double *out_hz);

// Natural-abundance rubidium vapor transmission on `n` detunings (Hz from
// the Rb85 D2 hyperfine-free center, strictly increasing).
//
// # Safety
// `detuning_hz` must point to `n` readable doubles; `out` must be valid.
enum PicatomStatus picatom_vapor_spectrum(double temperature_k,
                                          double pressure_torr,
                                          double path_length_mm,
                                          const double *detuning_hz,
                                          uintptr_t n,
                                          struct PicatomSpectrum **out);

// Number of points in the spectrum.
//
// # Safety
// `s` must come from [`picatom_vapor_spectrum`].
uintptr_t picatom_spectrum_len(const struct PicatomSpectrum *s);

// Copies the transmission values into `out`, which holds `len` doubles.
//
// # Safety
// `s` must come from [`picatom_vapor_spectrum`]; `out` must point to `len`
// writable doubles.
enum PicatomStatus picatom_spectrum_transmission(const struct PicatomSpectrum *s,
                                                 double *out,
                                                 uintptr_t len);

// # Safety
// `s` must be null or come from [`picatom_vapor_spectrum`], and is not used
// afterwards.
void picatom_spectrum_free(struct PicatomSpectrum *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PICATOM_H */
