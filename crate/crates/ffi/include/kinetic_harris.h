#ifndef KINETIC_HARRIS_H
#define KINETIC_HARRIS_H

/* Generated by cbindgen from crates/ffi/src; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum KhStatus {
  KH_STATUS_OK = 0,
  KH_STATUS_NULL_POINTER = 1,
  KH_STATUS_INVALID_UTF8 = 2,
  /**
   * Configuration parse, check or validation failure.
   */
  KH_STATUS_CONFIG = 3,
  /**
   * Numerical or simulation failure.
   */
  KH_STATUS_RUNTIME = 4,
  KH_STATUS_OUT_OF_RANGE = 5,
  KH_STATUS_BUFFER_TOO_SMALL = 6,
  KH_STATUS_PANIC = 7,
} KhStatus;

/**
 * What a certificate's rate value means.
 */
typedef enum KhRateKind {
  /**
   * Natural log of an exponential rate.
   */
  KH_RATE_KIND_LN_RATE = 0,
  /**
   * Exponent of an algebraic decay.
   */
  KH_RATE_KIND_ALGEBRAIC_EXPONENT = 1,
} KhRateKind;

typedef struct KhCertificate KhCertificate;

/**
 * Particles drawn from the scenario's initial law, advanced on demand.
 */
typedef struct KhEnsemble KhEnsemble;

typedef struct KhRun KhRun;

/**
 * A parsed and checked scenario.
 */
typedef struct KhScenario KhScenario;

/**
 * One snapshot of a run.
 */
typedef struct KhRow {
  double t;
  double tv;
  double tv_stderr;
  double tv_floor;
  double wtv;
  double wtv_stderr;
  double wtv_floor;
  /**
   * NaN when no certified bound is available.
   */
  double bound;
} KhRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 when the last call succeeded.
 */
size_t kh_last_error_length(void);

/**
 * Copies the last error message on this thread into `buf` with a
 * terminating NUL.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
enum KhStatus kh_last_error_message(char *buf, size_t len);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void kh_string_free(char *s);

/**
 * Parses and checks a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum KhStatus kh_scenario_from_toml(const char *toml, struct KhScenario **out);

/**
 * Loads and checks a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum KhStatus kh_scenario_load(const char *path, struct KhScenario **out);

/**
 * # Safety
 * `s` must come from a scenario constructor and not have been freed.
 */
void kh_scenario_free(struct KhScenario *s);

/**
 * Phase-space dimension d and particle count.
 *
 * # Safety
 * `s` must be a live scenario; outputs must be writable.
 */
enum KhStatus kh_scenario_shape(const struct KhScenario *s, size_t *dim, size_t *particles);

/**
 * Runs the pre-flight checks. `passed` is 1 when all pass. When `report`
 * is non-null it receives the rendered report, freed with
 * [`kh_string_free`].
 *
 * # Safety
 * `s` must be a live scenario; `passed` must be writable; `report` may be
 * null.
 */
enum KhStatus kh_scenario_validate(const struct KhScenario *s, int *passed, char **report);

/**
 * Assembles the scenario's certificate.
 *
 * # Safety
 * `s` must be a live scenario; `out` must be writable.
 */
enum KhStatus kh_certificate_new(const struct KhScenario *s, struct KhCertificate **out);

/**
 * # Safety
 * `c` must come from [`kh_certificate_new`] and not have been freed.
 */
void kh_certificate_free(struct KhCertificate *c);

/**
 * The certified rate and what it measures.
 *
 * # Safety
 * `c` must be a live certificate; outputs must be writable.
 */
enum KhStatus kh_certificate_rate(const struct KhCertificate *c,
                                  enum KhRateKind *kind,
                                  double *value);

/**
 * Audit text, one `name = value  # description` line per constant; free
 * with [`kh_string_free`].
 *
 * # Safety
 * `c` must be a live certificate; `out` must be writable.
 */
enum KhStatus kh_certificate_audit(const struct KhCertificate *c, char **out);

/**
 * Exponential rate −ln(1−α)/t* and prefactor 1/(1−α) of a Doeblin
 * minorisation with mass α at time t*.
 *
 * # Safety
 * Outputs must be writable.
 */
enum KhStatus kh_doeblin_rate(double t_star, double alpha, double *rate, double *prefactor);

/**
 * Certifies, simulates and estimates distances at every snapshot. Bound
 * violations do not fail the call; read them with [`kh_run_exit_code`].
 *
 * # Safety
 * `s` must be a live scenario; `out` must be writable.
 */
enum KhStatus kh_run(const struct KhScenario *s, struct KhRun **out);

/**
 * # Safety
 * `r` must come from [`kh_run`] and not have been freed.
 */
void kh_run_free(struct KhRun *r);

/**
 * Number of snapshots.
 *
 * # Safety
 * `r` must be a live run; `len` must be writable.
 */
enum KhStatus kh_run_len(const struct KhRun *r, size_t *len);

/**
 * Snapshot `index` in time order.
 *
 * # Safety
 * `r` must be a live run; `row` must be writable.
 */
enum KhStatus kh_run_row(const struct KhRun *r, size_t index, struct KhRow *row);

/**
 * The command-line exit code for this run: 0, or 3 on a bound violation.
 *
 * # Safety
 * `r` must be a live run; `code` must be writable.
 */
enum KhStatus kh_run_exit_code(const struct KhRun *r, int *code);

/**
 * Distances as CSV with columns t,tv,tv_stderr,wtv,wtv_stderr,bound; free
 * with [`kh_string_free`].
 *
 * # Safety
 * `r` must be a live run; `out` must be writable.
 */
enum KhStatus kh_run_csv(const struct KhRun *r, char **out);

/**
 * Draws the scenario's initial ensemble at t = 0.
 *
 * # Safety
 * `s` must be a live scenario; `out` must be writable.
 */
enum KhStatus kh_ensemble_new(const struct KhScenario *s, struct KhEnsemble **out);

/**
 * # Safety
 * `e` must come from [`kh_ensemble_new`] and not have been freed.
 */
void kh_ensemble_free(struct KhEnsemble *e);

/**
 * Advances every particle to time `t`, which must not precede the current
 * ensemble time.
 *
 * # Safety
 * `e` must be a live ensemble not used concurrently.
 */
enum KhStatus kh_ensemble_advance(struct KhEnsemble *e, double t);

/**
 * Current ensemble time.
 *
 * # Safety
 * `e` must be a live ensemble; `t` must be writable.
 */
enum KhStatus kh_ensemble_time(const struct KhEnsemble *e, double *t);

/**
 * Copies positions and velocities, particle-major, into `x` and `v`, each
 * holding `len` = particles·d doubles.
 *
 * # Safety
 * `e` must be a live ensemble; `x` and `v` must each point to `len`
 * writable doubles.
 */
enum KhStatus kh_ensemble_state(const struct KhEnsemble *e, double *x, double *v, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KINETIC_HARRIS_H */
