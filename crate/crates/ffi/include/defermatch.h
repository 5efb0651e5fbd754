#ifndef DEFERMATCH_H
#define DEFERMATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_ARGUMENT = 2,
  DM_STATUS_INFEASIBLE = 3,
  DM_STATUS_PARSE = 4,
  DM_STATUS_DOMAIN = 5,
  DM_STATUS_UNKNOWN_ARM = 6,
  DM_STATUS_OUT_OF_RANGE = 7,
  DM_STATUS_PANIC = 8,
} DmStatus;

typedef enum DmScores {
  DM_SCORES_CONFIDENCE = 0,
  DM_SCORES_SUCCESS_PROB = 1,
} DmScores;

/**
 * UCB1 state over a set of deferral counts.
 */
typedef struct DmBandit DmBandit;

/**
 * A matching instance.
 */
typedef struct DmInstance DmInstance;

/**
 * A solved matching.
 */
typedef struct DmMatching DmMatching;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `dm_*` call on the same thread.
 */
const char *dm_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *dm_version(void);

/**
 * Builds an instance with `n` individuals and `k` resources.
 *
 * # Safety
 * `capacities` must point to `k` values, `confidence` to `n * k` values,
 * and `success_prob` to `n * k` values or be null. `out` must be writable.
 */
enum DmStatus dm_instance_new(size_t n,
                              size_t k,
                              const uint32_t *capacities,
                              const double *confidence,
                              const double *success_prob,
                              struct DmInstance **out);

/**
 * Parses an instance from JSON:
 * `{"n":2,"resources":["a"],"capacities":[1],"confidence":[[0.1],[0.2]]}`
 * with optional `"success_prob"`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum DmStatus dm_instance_from_json(const char *json, struct DmInstance **out);

/**
 * # Safety
 * `inst` must come from `dm_instance_new` / `dm_instance_from_json` and
 * not be used afterwards. Null is ignored.
 */
void dm_instance_free(struct DmInstance *inst);

/**
 * # Safety
 * `inst` must be a live instance; `n` and `k` must be writable.
 */
enum DmStatus dm_instance_dims(const struct DmInstance *inst, size_t *n, size_t *k);

/**
 * Maximum-weight matching of exactly `max(n - b, 0)` individuals.
 *
 * # Safety
 * `inst` must be a live instance; `out` must be writable.
 */
enum DmStatus dm_solve(const struct DmInstance *inst,
                       enum DmScores scores,
                       size_t b,
                       struct DmMatching **out);

/**
 * Exhaustive search, for `n <= 8` and `k <= 4`.
 *
 * # Safety
 * As for [`dm_solve`].
 */
enum DmStatus dm_brute_force(const struct DmInstance *inst,
                             enum DmScores scores,
                             size_t b,
                             struct DmMatching **out);

/**
 * Number of pairs; 0 for null.
 *
 * # Safety
 * `m` must be a live matching or null.
 */
size_t dm_matching_len(const struct DmMatching *m);

/**
 * Objective on the scores the matching was solved for; NaN for null.
 *
 * # Safety
 * `m` must be a live matching or null.
 */
double dm_matching_objective(const struct DmMatching *m);

/**
 * Pair `idx`, in ascending individual order.
 *
 * # Safety
 * `m` must be a live matching; `individual` and `resource` writable.
 */
enum DmStatus dm_matching_pair(const struct DmMatching *m,
                               size_t idx,
                               size_t *individual,
                               size_t *resource);

/**
 * Expected utility `sum p_ir` of `m` on `inst`.
 *
 * # Safety
 * `m` and `inst` must be live; `out` writable.
 */
enum DmStatus dm_matching_utility(const struct DmMatching *m,
                                  const struct DmInstance *inst,
                                  double *out);

/**
 * # Safety
 * `m` must come from `dm_solve` / `dm_brute_force` and not be used
 * afterwards. Null is ignored.
 */
void dm_matching_free(struct DmMatching *m);

/**
 * `d`-quantile of Beta(`a`, `b`).
 *
 * # Safety
 * `out` must be writable.
 */
enum DmStatus dm_beta_quantile(double a, double b, double d, double *out);

/**
 * UCB1 over `arms` for a horizon of `horizon` rounds.
 *
 * # Safety
 * `arms` must point to `n_arms` values; `out` must be writable.
 */
enum DmStatus dm_bandit_new(const size_t *arms,
                            size_t n_arms,
                            uint64_t horizon,
                            double bonus_scale,
                            struct DmBandit **out);

/**
 * The arm UCB1 plays next.
 *
 * # Safety
 * `bandit` must be live; `arm` writable.
 */
enum DmStatus dm_bandit_select(const struct DmBandit *bandit, size_t *arm);

/**
 * Records `reward` for `arm`.
 *
 * # Safety
 * `bandit` must be live and not shared across threads without locking.
 */
enum DmStatus dm_bandit_update(struct DmBandit *bandit, size_t arm, double reward);

/**
 * Empirical mean reward of `arm`; `*pulls` receives its pull count and
 * `*mean` is NaN before the first pull.
 *
 * # Safety
 * `bandit` must be live; `pulls` and `mean` writable.
 */
enum DmStatus dm_bandit_arm_stats(const struct DmBandit *bandit,
                                  size_t arm,
                                  uint64_t *pulls,
                                  double *mean);

/**
 * # Safety
 * `bandit` must come from `dm_bandit_new` and not be used afterwards.
 * Null is ignored.
 */
void dm_bandit_free(struct DmBandit *bandit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEFERMATCH_H */
