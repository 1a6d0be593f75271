#ifndef RBSE_H
#define RBSE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Fallible calls return one of these codes. rbse_last_error() describes the
 * most recent failure on the calling thread. */
enum {
  RBSE_OK = 0,
  RBSE_ERR_VALIDATION = 1, /* bad config, argument, or input data */
  RBSE_ERR_CHECK = 2,      /* a numerical self-check failed */
  RBSE_ERR_IO = 3          /* file missing, unreadable, or malformed */
};

/* Opaque handles. Free with the matching *_free; NULL is accepted there. */
typedef struct rbse_config rbse_config; /* ordered key = value run config */
typedef struct rbse_model rbse_model;   /* trained model with provenance */

/* Receives one log line at a time, without the trailing newline. */
typedef void (*rbse_log_fn)(const char* line, void* user);

const char* rbse_version(void);

/* Message for the last failing call on this thread; "" after a success. */
const char* rbse_last_error(void);

/* Frees strings returned through char** out parameters. NULL is a no-op. */
void rbse_string_free(char* s);

/* ---- config ------------------------------------------------------------ */

rbse_config* rbse_config_new(void);
void rbse_config_free(rbse_config* cfg);

int rbse_config_load(const char* path, rbse_config** out);
int rbse_config_set(rbse_config* cfg, const char* key, const char* value);

/* Applies one "key=value" override. */
int rbse_config_apply(rbse_config* cfg, const char* definition);

/* *out_value gets a copy of the value, or NULL when the key is absent. */
int rbse_config_get(const rbse_config* cfg, const char* key, char** out_value);

/* Canonical sorted key = value rendering. */
int rbse_config_render(const rbse_config* cfg, char** out_text);

/* ---- models ------------------------------------------------------------ */

int rbse_model_load(const char* path, rbse_model** out);
int rbse_model_save(const rbse_model* model, const char* path);
void rbse_model_free(rbse_model* model);

/* "rbm", "rbse-bernoulli", or "rbse-gaussian"; NULL on a NULL model. */
const char* rbse_model_kind(const rbse_model* model);
size_t rbse_model_visible(const rbse_model* model);
size_t rbse_model_hidden(const rbse_model* model);
uint64_t rbse_model_seed(const rbse_model* model);

/* Mean-field hidden representation of a visible vector. Ensemble models are
 * reduced to their mean parameters. Buffer lengths must match the model. */
int rbse_model_represent(const rbse_model* model, const double* v, size_t visible,
                         double* out_h, size_t hidden);

/* Visible means from a mean-field hidden vector. */
int rbse_model_reconstruct(const rbse_model* model, const double* h, size_t hidden,
                           double* out_v, size_t visible);

/* ---- commands ----------------------------------------------------------
 * Each command validates its config up front (one error naming every bad
 * field), writes its artifacts plus config.cfg and run.json into the
 * config's out.dir, and streams progress through the optional log callback.
 * Out parameters are optional; pass NULL to skip them. */

int rbse_cmd_train_rbm(const rbse_config* cfg, rbse_log_fn log, void* user,
                       rbse_model** out_model);
int rbse_cmd_train_rbse(const rbse_config* cfg, rbse_log_fn log, void* user,
                        rbse_model** out_model);

/* *out_pass is 1 when every check passed, else 0; the run itself succeeding
 * still returns RBSE_OK, failed checks included. */
int rbse_cmd_gradcheck(const rbse_config* cfg, rbse_log_fn log, void* user, int* out_pass,
                       char** out_report_json);

int rbse_cmd_synthetic_demo(const rbse_config* cfg, rbse_log_fn log, void* user);
int rbse_cmd_oneshot(const rbse_config* cfg, rbse_log_fn log, void* user,
                     char** out_results_json);
int rbse_cmd_inspect(const rbse_config* cfg, rbse_log_fn log, void* user);
int rbse_cmd_represent(const rbse_config* cfg, rbse_log_fn log, void* user);

#ifdef __cplusplus
}
#endif

#endif /* RBSE_H */
