/* Copyright 2026 The stagex Authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * C interface to the stagex shared library.
 *
 * Every call returns a stagex_status. On failure the message is available
 * from stagex_last_error() on the same thread until the next failing call.
 * Strings and sample buffers handed out by the library are released with
 * stagex_free().
 */

#ifndef STAGEX_H_
#define STAGEX_H_

#include <stddef.h>

#if defined(STAGEX_BUILDING_LIBRARY)
#define STAGEX_API __attribute__((visibility("default")))
#else
#define STAGEX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum stagex_status {
  STAGEX_OK = 0,
  STAGEX_ERR_ARGUMENT = 1,
  STAGEX_ERR_CONFIG = 2,
  STAGEX_ERR_IO = 3,
  STAGEX_ERR_FORMAT = 4,
  STAGEX_ERR_NUMERIC = 5,
  STAGEX_ERR_CORRUPT = 6,
  STAGEX_ERR_INTERNAL = 7
} stagex_status;

typedef struct stagex_config stagex_config;
typedef struct stagex_model stagex_model;

/* Receives one line of progress output (no trailing newline). */
typedef void (*stagex_log_fn)(const char *line, void *user);

STAGEX_API const char *stagex_version(void);
STAGEX_API const char *stagex_last_error(void);
STAGEX_API const char *stagex_status_name(stagex_status status);
STAGEX_API void stagex_free(void *ptr);

/* Metrics in dB over n samples. */
STAGEX_API stagex_status stagex_si_sdr(const double *estimate, const double *reference, size_t n,
                                       double *out_db);
STAGEX_API stagex_status stagex_sdr(const double *estimate, const double *reference, size_t n,
                                    double *out_db);
STAGEX_API stagex_status stagex_improvement(const double *estimate, const double *mixture,
                                            const double *target, size_t n, double *out_sdri,
                                            double *out_si_sdri);

/* 8 kHz mono PCM16 WAV. */
STAGEX_API stagex_status stagex_wav_read(const char *path, double **out_samples,
                                         size_t *out_len);
STAGEX_API stagex_status stagex_wav_write(const char *path, const double *samples, size_t n);

/* Run configuration (see README for the key list). */
STAGEX_API stagex_status stagex_config_default(stagex_config **out);
STAGEX_API stagex_status stagex_config_load(const char *path, stagex_config **out);
STAGEX_API stagex_status stagex_config_set(stagex_config *config, const char *key,
                                           const char *value);
/* Current value of one key as JSON text (strings are quoted). */
STAGEX_API stagex_status stagex_config_get(const stagex_config *config, const char *key,
                                           char **out_value);
STAGEX_API stagex_status stagex_config_to_json(const stagex_config *config, char **out_json);
/* Newline-separated override keys. */
STAGEX_API stagex_status stagex_config_keys(char **out_keys);
STAGEX_API void stagex_config_free(stagex_config *config);

/* Writes the corpus under data_dir. *out_up_to_date is set to 1 when an
 * identical corpus was already present and nothing was written. */
STAGEX_API stagex_status stagex_gen_data(const stagex_config *config, int *out_up_to_date,
                                         char **out_summary);
/* Trains into run_dir (best.ckpt, last.state, history.jsonl, config.json).
 * With resume != 0 training continues from run_dir/last.state. */
STAGEX_API stagex_status stagex_train(const stagex_config *config, int resume,
                                      stagex_log_fn log, void *user);

STAGEX_API stagex_status stagex_model_load(const char *checkpoint_path, stagex_model **out);
STAGEX_API int stagex_model_num_stages(const stagex_model *model);
STAGEX_API stagex_status stagex_model_reference_mode(const stagex_model *model, int *out_use_utt,
                                                     int *out_use_frame);
/* Overrides which refined references stages k >= 2 use. */
STAGEX_API stagex_status stagex_model_set_reference_mode(stagex_model *model, int use_utt,
                                                         int use_frame);
/* Final-stage estimate, rescaled to the mixture peak; mixture_len samples
   written to out. */
STAGEX_API stagex_status stagex_model_extract(const stagex_model *model, const double *mixture,
                                              size_t mixture_len, const double *reference,
                                              size_t reference_len, double *out);
STAGEX_API void stagex_model_free(stagex_model *model);

/* Evaluates every record of the manifest (optionally one split), writes the
 * line-delimited report and returns the formatted table. */
STAGEX_API stagex_status stagex_evaluate(const stagex_model *model, const char *manifest_path,
                                         const char *split, const char *report_path,
                                         char **out_table, int *out_failures,
                                         stagex_log_fn log, void *user);

#ifdef __cplusplus
}
#endif

#endif /* STAGEX_H_ */
