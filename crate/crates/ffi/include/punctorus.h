#ifndef PUNCTORUS_H
#define PUNCTORUS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Output formats of experiment reports.
typedef enum {
  PT_FORMAT_CSV = 0,
  PT_FORMAT_JSON = 1,
} PtFormat;

// Result codes of every fallible call.
typedef enum {
  PT_STATUS_OK = 0,
  // A handle or output pointer was null.
  PT_STATUS_NULL_POINTER = 1,
  // An argument is outside the function's domain.
  PT_STATUS_INVALID_ARGUMENT = 2,
  // A point or geodesic is too thin for the conformal bridge.
  PT_STATUS_THIN = 3,
  // An optimizer or sampler gave up.
  PT_STATUS_NOT_CONVERGED = 4,
  // Text input could not be parsed.
  PT_STATUS_PARSE = 5,
  // A file could not be read or written.
  PT_STATUS_IO = 6,
  // The library panicked; this is a bug.
  PT_STATUS_PANIC = 7,
} PtStatus;

// Run configuration.
typedef struct PtConfig PtConfig;

// A conformal structure, given by a point of the upper half-plane.
typedef struct PtFlat PtFlat;

// A hyperbolic structure on the punctured torus.
typedef struct PtPoint PtPoint;

// The result of a seeded experiment.
typedef struct PtReport PtReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// The message of the last failed call on this thread, or null when no call
// has failed. The pointer stays valid until the next failing call on the
// same thread.
const char *pt_last_error_message(void);

// Forgets the last error message of this thread.
void pt_clear_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void pt_string_free(char *s);

// The default configuration.
PtConfig *pt_config_default(void);

// Parses a `key=value` configuration over the defaults.
//
// # Safety
// `text_kv` must be a nul-terminated string and `out` writable.
PtStatus pt_config_parse(const char *text_kv, PtConfig **out);

// Sets the RNG seed.
//
// # Safety
// `cfg` must be a live handle.
PtStatus pt_config_set_seed(PtConfig *cfg, uint64_t seed);

// The canonical `key=value` text of the configuration.
//
// # Safety
// `cfg` must be a live handle and `out` writable.
PtStatus pt_config_to_text(const PtConfig *cfg, char **out);

// Releases a configuration. Null is ignored.
//
// # Safety
// `cfg` must come from this library and not have been freed.
void pt_config_free(PtConfig *cfg);

// The modular torus, with all three basis traces equal to 3.
PtPoint *pt_point_modular(void);

// The point with `0/1` of length `len` and twist coordinate `t`.
//
// # Safety
// `out` must be writable.
PtStatus pt_point_from_fn(double len, double t, PtPoint **out);

// Reads a point from its JSON form.
//
// # Safety
// `json` must be a nul-terminated string and `out` writable.
PtStatus pt_point_from_json(const char *json, PtPoint **out);

// The JSON form of a point.
//
// # Safety
// `pt` must be a live handle and `out` writable.
PtStatus pt_point_to_json(const PtPoint *pt, char **out);

// Hyperbolic length of the slope `p/q`.
//
// # Safety
// `pt` must be a live handle and `out` writable.
PtStatus pt_point_length(const PtPoint *pt, int64_t p, int64_t q, double *out);

// Natural log of the trace of the slope `p/q`.
//
// # Safety
// `pt` must be a live handle and `out` writable.
PtStatus pt_point_trace_ln(const PtPoint *pt, int64_t p, int64_t q, double *out);

// The shortest curve `p/q` and its length.
//
// # Safety
// `pt` must be a live handle and the outputs writable.
PtStatus pt_point_systole(const PtPoint *pt, int64_t *out_p, int64_t *out_q, double *out_length);

// Releases a point. Null is ignored.
//
// # Safety
// `pt` must come from this library and not have been freed.
void pt_point_free(PtPoint *pt);

// The Lipschitz distance from `x` to `y` by brute force over slopes with
// `|p|, q ≤ n`, with the maximizing slope.
//
// # Safety
// `x`, `y` must be live handles and the outputs writable.
PtStatus pt_lipschitz_brute(const PtPoint *x,
                            const PtPoint *y,
                            int64_t n,
                            double *out_value,
                            int64_t *out_p,
                            int64_t *out_q);

// The Lipschitz distance from `x` to `y` over the short curves of `x`.
//
// # Safety
// `x`, `y` must be live handles and `out` writable.
PtStatus pt_lipschitz_candidates(const PtPoint *x, const PtPoint *y, double *out);

// The conformal point `re + i·im`, `im > 0`.
//
// # Safety
// `out` must be writable.
PtStatus pt_flat_new(double re, double im, PtFlat **out);

// Real and imaginary parts.
//
// # Safety
// `f` must be a live handle and the outputs writable.
PtStatus pt_flat_tau(const PtFlat *f, double *out_re, double *out_im);

// The Teichmüller distance.
//
// # Safety
// `a`, `b` must be live handles and `out` writable.
PtStatus pt_teich_distance(const PtFlat *a, const PtFlat *b, double *out);

// The hyperbolic point matched to a conformal one. Fails with
// `PT_STATUS_THIN` below the configured thickness.
//
// # Safety
// `f`, `cfg` must be live handles and `out` writable.
PtStatus pt_uniformize(const PtFlat *f, const PtConfig *cfg, PtPoint **out);

// The conformal point matched to a hyperbolic one. Fails with
// `PT_STATUS_THIN` below the configured thickness.
//
// # Safety
// `pt`, `cfg` must be live handles and `out` writable.
PtStatus pt_flatten(const PtPoint *pt, const PtConfig *cfg, PtFlat **out);

// Releases a conformal point. Null is ignored.
//
// # Safety
// `f` must come from this library and not have been freed.
void pt_flat_free(PtFlat *f);

// Runs a named seeded experiment with `n` samples: `balanced`, `minsky`,
// `asymmetry`, `bc`, `lengths`, `candidate`, `contraction_lipschitz`,
// `contraction_teichmuller` or `fellow`.
//
// # Safety
// `name` must be a nul-terminated string, `cfg` a live handle and `out`
// writable.
PtStatus pt_experiment_run(const char *name, const PtConfig *cfg, uintptr_t n, PtReport **out);

// A calibrated constant of a report by name.
//
// # Safety
// `report` must be a live handle, `key` a nul-terminated string and `out`
// writable.
PtStatus pt_report_constant(const PtReport *report, const char *key, double *out);

// The report rendered as CSV or JSON.
//
// # Safety
// `report` must be a live handle and `out` writable.
PtStatus pt_report_render(const PtReport *report, PtFormat format, char **out);

// Releases a report. Null is ignored.
//
// # Safety
// `report` must come from this library and not have been freed.
void pt_report_free(PtReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PUNCTORUS_H */
