#ifndef AILRS_H
#define AILRS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define AILRS_DECISION_LEFT 0

#define AILRS_DECISION_KEEP 1

#define AILRS_DECISION_RIGHT 2

#define AILRS_TERMINAL_NONE 0

#define AILRS_TERMINAL_COLLISION 1

#define AILRS_TERMINAL_HORIZON 2

typedef enum AilrsStatus {
  AILRS_STATUS_OK = 0,
  AILRS_STATUS_NULL_ARGUMENT = 1,
  AILRS_STATUS_INVALID_ARGUMENT = 2,
  AILRS_STATUS_CONFIG = 3,
  AILRS_STATUS_IO = 4,
  AILRS_STATUS_MALFORMED = 5,
  AILRS_STATUS_DIMENSION = 6,
  AILRS_STATUS_USAGE = 7,
  AILRS_STATUS_DATA = 8,
  AILRS_STATUS_INTERNAL = 9,
} AilrsStatus;

/**
 * Simulator instance with its expert rule and current episode.
 */
typedef struct AilrsEnv AilrsEnv;

/**
 * Linear policy with its normalization statistics.
 */
typedef struct AilrsPolicy AilrsPolicy;

/**
 * Outcome flags of one simulator step.
 */
typedef struct AilrsStepInfo {
  /**
   * One of the `AILRS_TERMINAL_*` values.
   */
  uint32_t terminal;
  bool clamped;
  bool boundary_crossed;
  bool midpoint_passed;
  bool maneuver_completed;
} AilrsStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on this thread.
 */
const char *ailrs_last_error(void);

/**
 * Create a simulator from a run configuration in JSON (only `env` and
 * `expert` are used). A NULL `config_json` selects the defaults.
 *
 * # Safety
 * `config_json` is NULL or a NUL-terminated string; `out` is writable.
 */
enum AilrsStatus ailrs_env_new(const char *config_json, struct AilrsEnv **out);

/**
 * # Safety
 * `env` is NULL or a handle from [`ailrs_env_new`] not yet freed.
 */
void ailrs_env_free(struct AilrsEnv *env);

/**
 * Observation length, or 0 for a NULL handle.
 *
 * # Safety
 * `env` is NULL or a live handle.
 */
size_t ailrs_env_obs_dim(const struct AilrsEnv *env);

/**
 * Start an episode and write the initial observation.
 *
 * # Safety
 * `env` is a live handle; `obs_out` points to `obs_len` writable doubles.
 */
enum AilrsStatus ailrs_env_reset(struct AilrsEnv *env,
                                 uint64_t seed,
                                 double *obs_out,
                                 size_t obs_len);

/**
 * Advance one step under `decision` (an `AILRS_DECISION_*` value).
 *
 * # Safety
 * `env` is a live handle; `obs_out` points to `obs_len` writable doubles;
 * `info_out` is writable.
 */
enum AilrsStatus ailrs_env_step(struct AilrsEnv *env,
                                uint32_t decision,
                                double *obs_out,
                                size_t obs_len,
                                struct AilrsStepInfo *info_out);

/**
 * Decision of the rule-based expert in the current state.
 *
 * # Safety
 * `env` is a live handle; `decision_out` is writable.
 */
enum AilrsStatus ailrs_env_expert_decide(const struct AilrsEnv *env, uint32_t *decision_out);

/**
 * Load a policy from a checkpoint file.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum AilrsStatus ailrs_policy_load(const char *path, struct AilrsPolicy **out);

/**
 * State dimension the policy expects, or 0 for a NULL handle.
 *
 * # Safety
 * `policy` is NULL or a live handle.
 */
size_t ailrs_policy_obs_dim(const struct AilrsPolicy *policy);

/**
 * Greedy decision of the policy for one observation.
 *
 * # Safety
 * `policy` is a live handle; `obs` points to `obs_len` readable doubles;
 * `decision_out` is writable.
 */
enum AilrsStatus ailrs_policy_act(const struct AilrsPolicy *policy,
                                  const double *obs,
                                  size_t obs_len,
                                  uint32_t *decision_out);

/**
 * # Safety
 * `policy` is NULL or a handle from [`ailrs_policy_load`] not yet freed.
 */
void ailrs_policy_free(struct AilrsPolicy *policy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AILRS_H */
