#ifndef GRIDMIX_H
#define GRIDMIX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GmStatus {
  GM_STATUS_OK = 0,
  GM_STATUS_NULL_POINTER = 1,
  GM_STATUS_INVALID_ARGUMENT = 2,
  GM_STATUS_INVALID_CONFIG = 3,
  GM_STATUS_GENERATION_FAILED = 4,
  GM_STATUS_EPISODE_OVER = 5,
  GM_STATUS_INACTIVE_AGENT = 6,
  GM_STATUS_BUFFER_SIZE = 7,
  GM_STATUS_IO = 8,
  GM_STATUS_CHECKPOINT = 9,
  GM_STATUS_TOPOLOGY_MISMATCH = 10,
  GM_STATUS_PANIC = 11,
} GmStatus;

/**
 * Opaque episode handle.
 */
typedef struct GmEnv GmEnv;

/**
 * Opaque trained learner.
 */
typedef struct GmLearner GmLearner;

/**
 * Environment parameters. `goal_dist == 0` means "any reachable goal".
 */
typedef struct GmEnvConfig {
  uint32_t size;
  double density;
  uint32_t n_agents;
  uint32_t obs_radius;
  uint32_t horizon;
  uint32_t goal_dist;
  uint64_t seed;
} GmEnvConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 * The pointer stays valid until the next call on this thread.
 */
const char *gm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gm_version(void);

/**
 * Generates a random episode.
 *
 * # Safety
 * `config` must point to a valid `GmEnvConfig`; `out` must be writable.
 */
enum GmStatus gm_env_generate(const struct GmEnvConfig *config, struct GmEnv **out);

/**
 * Loads an episode from a map JSON record. `config` supplies the horizon
 * and observation radius; its size and agent count must match the map.
 *
 * # Safety
 * `map_json` must be a NUL-terminated string; `config` and `out` as in
 * [`gm_env_generate`].
 */
enum GmStatus gm_env_from_json(const char *map_json,
                               const struct GmEnvConfig *config,
                               struct GmEnv **out);

/**
 * Copies an episode, including its current position in time.
 *
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
enum GmStatus gm_env_clone(const struct GmEnv *env, struct GmEnv **out);

/**
 * Releases an episode. Null is ignored.
 *
 * # Safety
 * `env` must be null or a handle not yet freed.
 */
void gm_env_free(struct GmEnv *env);

/**
 * Number of agents, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t gm_env_n_agents(const struct GmEnv *env);

/**
 * Length of one agent observation, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t gm_env_obs_len(const struct GmEnv *env);

/**
 * Length of the global state tensor, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t gm_env_state_len(const struct GmEnv *env);

/**
 * Steps taken so far, or 0 for a null handle.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
size_t gm_env_time(const struct GmEnv *env);

/**
 * True once every agent is inactive or the horizon is reached.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
bool gm_env_is_over(const struct GmEnv *env);

/**
 * Writes 1 for active agents and 0 otherwise into `active[0..n]`.
 *
 * # Safety
 * `env` must be a live handle and `active` must hold `n` bytes.
 */
enum GmStatus gm_env_active(const struct GmEnv *env, uint8_t *active, size_t n);

/**
 * Applies one joint action (codes 0..=4: stay, up, down, left, right).
 * `rewards` and `done` receive one entry per agent; `episode_over` may be
 * null.
 *
 * # Safety
 * `actions`, `rewards` and `done` must each hold `n` entries.
 */
enum GmStatus gm_env_step(struct GmEnv *env,
                          const uint8_t *actions,
                          size_t n,
                          double *rewards,
                          uint8_t *done,
                          bool *episode_over);

/**
 * Writes agent `agent`'s observation into `out[0..len]`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum GmStatus gm_env_observe(const struct GmEnv *env, size_t agent, double *out, size_t len);

/**
 * Writes the global state tensor into `out[0..len]`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum GmStatus gm_env_global_state(const struct GmEnv *env, double *out, size_t len);

/**
 * ASCII picture of the board; release with [`gm_string_free`]. Returns
 * null on failure.
 *
 * # Safety
 * `env` must be null or a live handle.
 */
char *gm_env_render(const struct GmEnv *env);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void gm_string_free(char *s);

/**
 * Loads a learner checkpoint written by `gridmix train`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum GmStatus gm_learner_load(const char *path, struct GmLearner **out);

/**
 * Releases a learner. Null is ignored.
 *
 * # Safety
 * `learner` must be null or a handle not yet freed.
 */
void gm_learner_free(struct GmLearner *learner);

/**
 * Greedy joint action for the current state of `env`; inactive agents get
 * 0 (stay).
 *
 * # Safety
 * Both handles must be live; `actions` must hold `n` bytes.
 */
enum GmStatus gm_learner_act(const struct GmLearner *learner,
                             const struct GmEnv *env,
                             uint8_t *actions,
                             size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDMIX_H */
