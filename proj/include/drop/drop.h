/*
 * C interface to the DROP actor-critic library.
 *
 * Every function returns a drop_status; on failure drop_last_error() holds a
 * message for the calling thread. Handles are opaque and released with the
 * matching *_free function.
 */
#ifndef DROP_DROP_H
#define DROP_DROP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DROP_BUILDING_LIBRARY)
#define DROP_API __declspec(dllexport)
#else
#define DROP_API __declspec(dllimport)
#endif
#else
#define DROP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum drop_status {
    DROP_OK = 0,
    DROP_ERROR_INVALID_ARGUMENT = 1,
    DROP_ERROR_IO = 2,
    DROP_ERROR_NUMERIC = 3,
    DROP_ERROR_RUN_ABORTED = 4,
    DROP_ERROR_BUFFER_TOO_SMALL = 5,
    DROP_ERROR_INTERNAL = 6
} drop_status;

typedef struct drop_checkpoint drop_checkpoint;
typedef struct drop_run drop_run;

typedef struct drop_episode_row {
    uint64_t episode;
    double episode_return;
    double td_scale;
    double td_bias;
    double wall_ms;
    uint64_t replayed;
} drop_episode_row;

DROP_API const char* drop_version(void);
/* Message of the last failed call on this thread; empty if none. */
DROP_API const char* drop_last_error(void);
DROP_API const char* drop_status_string(drop_status status);

/* ---- TD transforms ---------------------------------------------------- */

/* f_beta(delta); *saturated (optional) is set when the exponent was clamped. */
DROP_API drop_status drop_transform_td(double beta, double delta, double* out, int* saturated);
DROP_API drop_status drop_transform_td_heuristic(double eta, double delta, double* out);
DROP_API drop_status drop_eta_to_beta(double eta, double scale, double* out);
DROP_API drop_status drop_beta_to_eta(double beta, double scale, double* out);
/* Writes n regularly spaced optimism values into out[0..n). */
DROP_API drop_status drop_make_schedule(size_t n, double eta_max, double* out, size_t capacity);
DROP_API drop_status drop_median(const double* values, size_t n, double* out);
DROP_API drop_status drop_iqm(const double* values, size_t n, double* out);

/* ---- Training --------------------------------------------------------- */

/*
 * Trains one seed with a JSON run configuration (same fields as the config
 * file). A run that aborts on non-finite values still yields a handle with
 * its partial metrics and returns DROP_ERROR_RUN_ABORTED.
 */
DROP_API drop_status drop_train(const char* config_json, uint64_t seed, drop_run** out);
DROP_API void drop_run_free(drop_run* run);
DROP_API drop_status drop_run_episode_count(const drop_run* run, size_t* out);
DROP_API drop_status drop_run_episode(const drop_run* run, size_t index, drop_episode_row* out);
/* *count receives the number of evaluation returns even if capacity is short. */
DROP_API drop_status drop_run_eval_returns(const drop_run* run, double* out, size_t capacity, size_t* count);
DROP_API drop_status drop_run_aborted(const drop_run* run, int* aborted);
/* Writes <env>_<method>_seed<S>.csv, .ckpt.json and .eval.json into dir. */
DROP_API drop_status drop_run_write(const drop_run* run, const char* dir);
/* New checkpoint handle holding a copy of the run's final agent. */
DROP_API drop_status drop_run_checkpoint(const drop_run* run, drop_checkpoint** out);

/* Runs the ablation described by a JSON config file; out_dir (optional) overrides the file's out_dir. */
DROP_API drop_status drop_ablate(const char* config_path, const char* out_dir);

/* ---- Checkpoints ------------------------------------------------------ */

DROP_API drop_status drop_checkpoint_load(const char* path, drop_checkpoint** out);
DROP_API drop_status drop_checkpoint_save(const drop_checkpoint* checkpoint, const char* path);
DROP_API void drop_checkpoint_free(drop_checkpoint* checkpoint);
/* Environment name; the pointer lives as long as the handle. */
DROP_API drop_status drop_checkpoint_env(const drop_checkpoint* checkpoint, const char** out);
DROP_API drop_status drop_checkpoint_head_count(const drop_checkpoint* checkpoint, size_t* out);
/* Critic head values at one state. */
DROP_API drop_status drop_checkpoint_values(const drop_checkpoint* checkpoint, const double* state, size_t state_dim,
                                            double* out, size_t capacity);
/* Deterministic evaluation; env_name NULL uses the checkpoint's environment. */
DROP_API drop_status drop_evaluate(const drop_checkpoint* checkpoint, const char* env_name, size_t episodes,
                                   uint64_t seed, double* returns, size_t capacity);

#ifdef __cplusplus
}
#endif

#endif /* DROP_DROP_H */
