/* sivsim — SiV- optical spin dynamics simulator, C API.
 *
 * The library runs configured scenarios (excitation spectra, CPT scans,
 * pulsed relaxation experiments) and writes CSV data, fit reports, SVG plots,
 * and a reproducibility manifest into an output directory.
 *
 * All functions returning siv_status use 0 for success. Error details for
 * the calling thread are available from siv_last_error().
 */
#ifndef SIVSIM_H
#define SIVSIM_H

#include <stddef.h>

#if defined(_WIN32)
#define SIV_API __declspec(dllexport)
#else
#define SIV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum siv_status {
  SIV_OK = 0,
  SIV_ERROR_CONFIG = 2,  /* bad configuration, unknown key/label/preset */
  SIV_ERROR_NUMERIC = 3, /* solver or fit failure */
  SIV_ERROR_INVALID = 4, /* invalid argument to an API call */
  SIV_ERROR_IO = 5       /* file system failure */
} siv_status;

/* Opaque handle describing one run: input source, overrides, output sink. */
typedef struct siv_run siv_run;

SIV_API const char *siv_version(void);

/* Thread-local message for the most recent failure; empty string if none. */
SIV_API const char *siv_last_error(void);

SIV_API siv_run *siv_run_new(void);
SIV_API void siv_run_free(siv_run *run);

/* Input source: exactly one of the three must be set before execution. */
SIV_API siv_status siv_run_set_config_file(siv_run *run, const char *path);
SIV_API siv_status siv_run_set_preset(siv_run *run, const char *name);
SIV_API siv_status siv_run_set_config_text(siv_run *run, const char *text);

/* `key=value` override of a config entry by dotted path. */
SIV_API siv_status siv_run_add_override(siv_run *run, const char *key, const char *value);

SIV_API siv_status siv_run_set_output_dir(siv_run *run, const char *dir);
SIV_API siv_status siv_run_set_jobs(siv_run *run, int jobs);
SIV_API siv_status siv_run_set_seed(siv_run *run, long long seed);
SIV_API siv_status siv_run_set_plot_enabled(siv_run *run, int enabled);

/* Runs the configured scenario. */
SIV_API siv_status siv_run_execute(siv_run *run);

/* Sweeps a numeric config key over `count` values, collating per-value
 * summaries into data.csv. Per-point failures land in the `errors` column
 * without aborting the sweep. */
SIV_API siv_status siv_run_sweep(siv_run *run, const char *axis_key, const double *values,
                                 size_t count);

/* Summary values of the last successful execute/sweep on this handle. */
SIV_API size_t siv_run_summary_count(const siv_run *run);
SIV_API const char *siv_run_summary_key(const siv_run *run, size_t index);
SIV_API double siv_run_summary_value(const siv_run *run, size_t index);

/* Preset registry. */
SIV_API size_t siv_preset_count(void);
SIV_API const char *siv_preset_name(size_t index);
SIV_API const char *siv_preset_text(const char *name); /* NULL for unknown names */

#ifdef __cplusplus
}
#endif

#endif /* SIVSIM_H */
