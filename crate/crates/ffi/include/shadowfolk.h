#ifndef SHADOWFOLK_H
#define SHADOWFOLK_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  SF_STATUS_NULL_ARGUMENT = 1,
  SF_STATUS_INVALID_UTF8 = 2,
  SF_STATUS_PARSE_ERROR = 3,
  SF_STATUS_INVALID_MODEL = 4,
  SF_STATUS_UNKNOWN_NAME = 5,
  SF_STATUS_IMPOSSIBLE_EVIDENCE = 6,
  SF_STATUS_NOT_INTERVENABLE = 7,
  SF_STATUS_INVALID_ARGUMENT = 8,
  SF_STATUS_BUFFER_TOO_SMALL = 9,
  SF_STATUS_PANIC = 10,
} SfStatus;

/**
 * A folk theory: a network plus its suspicion node.
 */
typedef struct SfFolk SfFolk;

/**
 * A validated network.
 */
typedef struct SfModel SfModel;

/**
 * A world model: a network plus its ground-truth node.
 */
typedef struct SfWorld SfWorld;

/**
 * Population summary. Rates are NaN when undefined (no episodes, or no
 * suspicious episodes for the shares).
 */
typedef struct SfStats {
  uint64_t n;
  uint64_t suspicious;
  uint64_t true_suspicions;
  uint64_t false_suspicions;
  uint64_t unattributed;
  double suspicion_incidence;
  double true_suspicion_rate;
  double false_suspicion_rate;
  double false_share_among_suspicious;
  double true_share_among_suspicious;
} SfStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. Valid until the next
 * call on the same thread; never null.
 */
const char *sf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sf_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void sf_string_free(char *s);

/**
 * Parses and validates model text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SfStatus sf_model_parse(const char *text, struct SfModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, freed once.
 */
void sf_model_free(struct SfModel *model);

/**
 * Canonical model text. Free the result with [`sf_string_free`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum SfStatus sf_model_serialize(const struct SfModel *model, char **out);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum SfStatus sf_model_node_count(const struct SfModel *model, size_t *out);

/**
 * Posterior of `query` given `evidence` (`"N6=true,N7=false"`, may be
 * empty). Writes the state count to `len`; if `cap` is smaller, returns
 * `BufferTooSmall` without touching `probs`.
 *
 * # Safety
 * `probs` must have room for `cap` doubles; other pointers as usual.
 */
enum SfStatus sf_posterior(const struct SfModel *model,
                           const char *evidence,
                           const char *query,
                           double *probs,
                           size_t cap,
                           size_t *len);

/**
 * Graph surgery: a new model with `node` fixed to `state`. No
 * intervenability check.
 *
 * # Safety
 * Pointers as usual; `out` receives a new handle.
 */
enum SfStatus sf_model_do(const struct SfModel *model,
                          const char *node,
                          const char *state,
                          struct SfModel **out);

/**
 * A new model with the prior of root `node` replaced.
 *
 * # Safety
 * `probs` must point to `len` doubles.
 */
enum SfStatus sf_model_set_prior(const struct SfModel *model,
                                 const char *node,
                                 const double *probs,
                                 size_t len,
                                 struct SfModel **out);

/**
 * The shipped calibrated folk theory.
 *
 * # Safety
 * `out` must be writable.
 */
enum SfStatus sf_folk_default(struct SfFolk **out);

/**
 * A folk theory over a copy of `model`, scoring the default suspicion node.
 *
 * # Safety
 * Pointers as usual.
 */
enum SfStatus sf_folk_from_model(const struct SfModel *model, struct SfFolk **out);

/**
 * # Safety
 * `folk` must be null or a handle from this library, freed once.
 */
void sf_folk_free(struct SfFolk *folk);

/**
 * Suspicion posterior given observable evidence.
 *
 * # Safety
 * Pointers as usual.
 */
enum SfStatus sf_folk_suspicion(const struct SfFolk *folk, const char *evidence, double *out);

/**
 * Applies an intervention given as JSON (same shape as catalog entries),
 * enforcing the intervenable flag.
 *
 * # Safety
 * Pointers as usual.
 */
enum SfStatus sf_folk_apply(const struct SfFolk *folk,
                            const char *intervention_json,
                            struct SfFolk **out);

/**
 * The shipped calibrated world model.
 *
 * # Safety
 * `out` must be writable.
 */
enum SfStatus sf_world_default(struct SfWorld **out);

/**
 * # Safety
 * Pointers as usual.
 */
enum SfStatus sf_world_from_model(const struct SfModel *model, struct SfWorld **out);

/**
 * # Safety
 * `world` must be null or a handle from this library, freed once.
 */
void sf_world_free(struct SfWorld *world);

/**
 * Simulates `n` users. Deterministic in (models, n, threshold, seed).
 *
 * # Safety
 * Pointers as usual.
 */
enum SfStatus sf_simulate(const struct SfWorld *world,
                          const struct SfFolk *folk,
                          uint64_t n,
                          double threshold,
                          uint64_t seed,
                          struct SfStats *out);

/**
 * Ranks a JSON array of interventions; writes the reports as JSON.
 *
 * # Safety
 * Pointers as usual; free `out` with [`sf_string_free`].
 */
enum SfStatus sf_sweep(const struct SfWorld *world,
                       const struct SfFolk *folk,
                       const char *catalog_json,
                       uint64_t n,
                       double threshold,
                       uint64_t seed,
                       char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOWFOLK_H */
