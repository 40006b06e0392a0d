#ifndef ATTACHCLASS_H
#define ATTACHCLASS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AcStatus {
  AC_STATUS_OK = 0,
  AC_STATUS_NULL_POINTER = 1,
  AC_STATUS_INVALID_ARGUMENT = 2,
  AC_STATUS_INVALID_DATA = 3,
  AC_STATUS_IO_ERROR = 4,
  AC_STATUS_PANIC = 5,
} AcStatus;

/**
 * Loaded or generated transcript corpus.
 */
typedef struct AcCorpus AcCorpus;

/**
 * Instances built from a corpus at one minimum length.
 */
typedef struct AcInstances AcInstances;

typedef struct AcMetrics {
  uint64_t n;
  double accuracy;
  double macro_precision;
  double macro_recall;
  /**
   * Indexed by label.
   */
  double precision[3];
  double recall[3];
} AcMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null.
 */
const char *ac_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ac_version(void);

/**
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AcStatus ac_word_count(const char *text, size_t *out);

/**
 * Loads transcript JSONL. Free the result with `ac_corpus_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AcStatus ac_corpus_load(const char *path, bool require_labels, struct AcCorpus **out);

/**
 * Generates a synthetic corpus from a JSON generator config (a `seed`
 * field is required). Free the result with `ac_corpus_free`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AcStatus ac_synth_generate(const char *config_json, struct AcCorpus **out);

/**
 * # Safety
 * `corpus` must come from this library and `path` be NUL-terminated.
 */
enum AcStatus ac_corpus_save(const struct AcCorpus *corpus, const char *path);

/**
 * # Safety
 * `corpus` must come from this library and `out` be a valid pointer.
 */
enum AcStatus ac_corpus_len(const struct AcCorpus *corpus, size_t *out);

/**
 * # Safety
 * `corpus` must come from this library (or be null) and not be used again.
 */
void ac_corpus_free(struct AcCorpus *corpus);

/**
 * Concatenates patient turns per document until each instance reaches
 * `min_length` words. Free the result with `ac_instances_free`.
 *
 * # Safety
 * `corpus` must come from this library and `out` be a valid pointer.
 */
enum AcStatus ac_build_instances(const struct AcCorpus *corpus,
                                 size_t min_length,
                                 bool keep_trailing_combined,
                                 struct AcInstances **out);

/**
 * # Safety
 * `instances` must come from this library and `out` be a valid pointer.
 */
enum AcStatus ac_instances_len(const struct AcInstances *instances, size_t *out);

/**
 * Word count and label of instance `index`.
 *
 * # Safety
 * `instances` must come from this library; out-pointers must be valid.
 */
enum AcStatus ac_instances_get(const struct AcInstances *instances,
                               size_t index,
                               size_t *out_word_count,
                               int32_t *out_label);

/**
 * # Safety
 * `instances` must come from this library (or be null) and not be used again.
 */
void ac_instances_free(struct AcInstances *instances);

/**
 * Mean and population standard deviation of `n` values.
 *
 * # Safety
 * `values` must point to `n` doubles; out-pointers must be valid.
 */
enum AcStatus ac_aggregate_folds(const double *values, size_t n, double *out_mean, double *out_std);

/**
 * Row-major 3x3 counts (rows gold, columns predicted) into `out_counts`.
 *
 * # Safety
 * `gold` and `pred` must point to `n` ints; `out_counts` to 9 u64 slots.
 */
enum AcStatus ac_confusion(const int32_t *gold,
                           const int32_t *pred,
                           size_t n,
                           uint64_t *out_counts);

/**
 * # Safety
 * `counts` must point to 9 u64 values; `out` must be valid.
 */
enum AcStatus ac_metrics(const uint64_t *counts, struct AcMetrics *out);

/**
 * Default clinical cost matrix, row-major, rows gold.
 *
 * # Safety
 * `out` must point to 9 writable doubles.
 */
enum AcStatus ac_default_costs(double *out);

/**
 * Mean per-instance cost. `costs` may be null for the default matrix.
 *
 * # Safety
 * `counts` must point to 9 u64 values, `costs` to 9 doubles or be null.
 */
enum AcStatus ac_cost_score(const uint64_t *counts, const double *costs, double *out);

/**
 * Majority vote for one instance over `n_models` predictions. `probs`
 * holds 3 probabilities per model in label order; it breaks vote ties by
 * summed probability, then by label order.
 *
 * # Safety
 * `votes` must point to `n_models` ints and `probs` to `3 * n_models`
 * doubles; out-pointers must be valid.
 */
enum AcStatus ac_majority_vote(const int32_t *votes,
                               const double *probs,
                               size_t n_models,
                               int32_t *out_winner,
                               bool *out_tie_broken);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATTACHCLASS_H */
