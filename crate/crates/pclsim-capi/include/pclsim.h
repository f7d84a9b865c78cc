#ifndef PCLSIM_H
#define PCLSIM_H

/* Generated by cbindgen from pclsim-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes returned by every fallible `pclsim_*` function.
typedef enum PclsimStatus {
  // Success.
  PCLSIM_OK = 0,
  // A required pointer argument was null.
  PCLSIM_ERR_NULL_ARG = 1,
  // A string argument was not valid UTF-8.
  PCLSIM_ERR_UTF8 = 2,
  // The configuration was rejected (parse or validation failure).
  PCLSIM_ERR_CONFIG = 3,
  // The operation failed at runtime (I/O, training, simulation, …).
  PCLSIM_ERR_RUNTIME = 4,
  // An internal invariant failed (a panic was caught).
  PCLSIM_ERR_PANIC = 5,
} PclsimStatus;

// Opaque scenario configuration handle.
typedef struct PclsimConfig PclsimConfig;

// Opaque trained-forecaster handle.
typedef struct PclsimModel PclsimModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never free it.
const char *pclsim_version(void);

// Message of the last error raised on this thread ("" when none). Valid
// until the next failing `pclsim_*` call on the same thread; never free it.
const char *pclsim_last_error_message(void);

// Frees a string returned through a `char**` output parameter. Null is a
// no-op.
//
// # Safety
// `s` must have been returned by this library and not freed before.
void pclsim_string_free(char *s);

// Parses and validates a scenario configuration JSON document.
//
// # Safety
// `json` must be a valid NUL-terminated string; `out` must be a valid
// pointer. On success `*out` owns the handle; free with
// [`pclsim_config_free`].
enum PclsimStatus pclsim_config_parse(const char *json, struct PclsimConfig **out);

// Frees a configuration handle. Null is a no-op.
//
// # Safety
// `config` must have come from [`pclsim_config_parse`] and not been freed.
void pclsim_config_free(struct PclsimConfig *config);

// Overrides the scenario seed (and everything derived from it).
//
// # Safety
// `config` must be a live handle from [`pclsim_config_parse`].
enum PclsimStatus pclsim_config_set_seed(struct PclsimConfig *config, uint64_t seed);

// Overrides the output directory.
//
// # Safety
// `config` must be a live handle; `out_dir` a valid NUL-terminated string.
enum PclsimStatus pclsim_config_set_out_dir(struct PclsimConfig *config, const char *out_dir);

// `generate`: writes the dataset CSV; returns a JSON summary
// `{"dataset_path":…,"hours":…,"cells":…,"samples":…}`.
//
// # Safety
// `config` must be a live handle; `summary_json_out` a valid pointer. Free
// `*summary_json_out` with [`pclsim_string_free`].
enum PclsimStatus pclsim_generate(const struct PclsimConfig *config, char **summary_json_out);

// `train`: trains and persists all models; returns the accuracy table as a
// JSON array of rows.
//
// # Safety
// As for [`pclsim_generate`].
enum PclsimStatus pclsim_train(const struct PclsimConfig *config, char **accuracy_json_out);

// `run`: replays the test period in one mode (`dynamic_mode` = 0 for
// static, nonzero for dynamic); returns the totals JSON.
//
// # Safety
// As for [`pclsim_generate`].
enum PclsimStatus pclsim_run(const struct PclsimConfig *config,
                             int32_t dynamic_mode,
                             char **totals_json_out);

// `compare`: full static vs dynamic comparison; returns the side-by-side
// totals JSON (the content of `compare.json`).
//
// # Safety
// As for [`pclsim_generate`].
enum PclsimStatus pclsim_compare(const struct PclsimConfig *config, char **compare_json_out);

// Loads a persisted forecast model from a JSON file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` a valid pointer. On
// success `*out` owns the handle; free with [`pclsim_model_free`].
enum PclsimStatus pclsim_model_load(const char *path, struct PclsimModel **out);

// Frees a model handle. Null is a no-op.
//
// # Safety
// `model` must have come from [`pclsim_model_load`] and not been freed.
void pclsim_model_free(struct PclsimModel *model);

// History length [`pclsim_model_predict`] expects; 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t pclsim_model_required_window(const struct PclsimModel *model);

// One-step forecast from the most recent `len` observations (at least the
// required window).
//
// # Safety
// `model` must be a live handle; `window` valid for `len` reads;
// `prediction_out` a valid pointer.
enum PclsimStatus pclsim_model_predict(const struct PclsimModel *model,
                                       const double *window,
                                       size_t len,
                                       double *prediction_out);

// Under/over/non-optimally served counts for one (hour, slice, cell).
//
// # Safety
// The three output pointers must be valid for writes.
enum PclsimStatus pclsim_service_metrics(int64_t actual_ues,
                                         int64_t limit_ues,
                                         uint32_t *under_out,
                                         uint32_t *over_out,
                                         uint32_t *non_optimal_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PCLSIM_H */
