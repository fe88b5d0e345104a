#ifndef DRTUNE_H
#define DRTUNE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DrtuneStatus {
  DRTUNE_STATUS_OK = 0,
  DRTUNE_STATUS_NULL_POINTER = 1,
  /**
   * Bad UTF-8, mismatched lengths or an unknown name.
   */
  DRTUNE_STATUS_INVALID_ARGUMENT = 2,
  DRTUNE_STATUS_DOMAIN = 3,
  DRTUNE_STATUS_CONFIG = 4,
  DRTUNE_STATUS_ENGINE = 5,
  DRTUNE_STATUS_IO = 6,
  DRTUNE_STATUS_RUNTIME = 7,
  DRTUNE_STATUS_PANIC = 8,
} DrtuneStatus;

/**
 * Result of a tuning run.
 */
typedef struct DrtuneHistory DrtuneHistory;

/**
 * Owned data matrix with optional labels.
 */
typedef struct DrtuneMatrix DrtuneMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *drtune_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *drtune_version(void);

/**
 * Copies `rows * cols` values into a new matrix. `labels` may be null;
 * otherwise it holds `rows` class labels.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum DrtuneStatus drtune_matrix_new(const double *values,
                                    size_t rows,
                                    size_t cols,
                                    const size_t *labels,
                                    struct DrtuneMatrix **out);

/**
 * # Safety
 * `m` must come from this library and not be used afterwards. Null is ignored.
 */
void drtune_matrix_free(struct DrtuneMatrix *m);

/**
 * # Safety
 * `m` must be a valid matrix or null.
 */
size_t drtune_matrix_rows(const struct DrtuneMatrix *m);

/**
 * # Safety
 * `m` must be a valid matrix or null.
 */
size_t drtune_matrix_cols(const struct DrtuneMatrix *m);

/**
 * Copies the values into `out`, which must hold exactly `rows * cols`.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum DrtuneStatus drtune_matrix_values(const struct DrtuneMatrix *m, double *out, size_t len);

/**
 * Copies the labels into `out` (length `rows`). Fails with
 * `InvalidArgument` when the matrix has none.
 *
 * # Safety
 * `out` must be valid for `len` writes.
 */
enum DrtuneStatus drtune_matrix_labels(const struct DrtuneMatrix *m, size_t *out, size_t len);

/**
 * Two labelled Gaussian clusters; see the `generate` command.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum DrtuneStatus drtune_generate_two_cluster(size_t n_small,
                                              size_t n_large,
                                              size_t dim,
                                              double separation,
                                              uint64_t seed,
                                              struct DrtuneMatrix **out);

/**
 * The four-column sine dataset with `n` rows.
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum DrtuneStatus drtune_generate_sine(size_t n, struct DrtuneMatrix **out);

/**
 * Exact t-SNE with default optimizer settings. Labels are carried over.
 *
 * # Safety
 * `x` must be a valid matrix and `out` valid for one write.
 */
enum DrtuneStatus drtune_tsne(const struct DrtuneMatrix *x,
                              double perplexity,
                              size_t output_dim,
                              uint64_t seed,
                              struct DrtuneMatrix **out);

/**
 * Loss in `[0, 1]` of embedding `x_star` of `x` under the named metric
 * (`auc`, `q_local`, `q_global`, `avg_ratio`, `pearson_dist`, `nmi`,
 * `misclass`). Label metrics read the labels of `x`.
 *
 * # Safety
 * Matrices must be valid, `metric` NUL-terminated, `out` valid for one write.
 */
enum DrtuneStatus drtune_metric_loss(const struct DrtuneMatrix *x,
                                     const struct DrtuneMatrix *x_star,
                                     const char *metric,
                                     uint64_t seed,
                                     double *out);

/**
 * Parses a run configuration and tunes on its dataset. Relative paths in
 * the text resolve against `base_dir`, or the working directory when it
 * is null. Nothing is written to disk.
 *
 * # Safety
 * Strings must be NUL-terminated, `out` valid for one write.
 */
enum DrtuneStatus drtune_tune_toml(const char *config_toml,
                                   const char *base_dir,
                                   struct DrtuneHistory **out);

/**
 * # Safety
 * `h` must come from this library and not be used afterwards. Null is ignored.
 */
void drtune_history_free(struct DrtuneHistory *h);

/**
 * Number of trials.
 *
 * # Safety
 * `h` must be a valid history or null.
 */
size_t drtune_history_len(const struct DrtuneHistory *h);

/**
 * Number of hyperparameters.
 *
 * # Safety
 * `h` must be a valid history or null.
 */
size_t drtune_history_dim(const struct DrtuneHistory *h);

/**
 * Best trial: `normalized` and `raw` receive `dim` values each (either may
 * be null), `aggregate` its loss.
 *
 * # Safety
 * Buffers must be valid for `dim` writes; `aggregate` for one.
 */
enum DrtuneStatus drtune_history_best(const struct DrtuneHistory *h,
                                      double *normalized,
                                      double *raw,
                                      size_t dim,
                                      double *aggregate);

/**
 * The history as JSON. Release with [`drtune_string_free`].
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum DrtuneStatus drtune_history_json(const struct DrtuneHistory *h, char **out);

/**
 * # Safety
 * `s` must come from this library. Null is ignored.
 */
void drtune_string_free(char *s);

/**
 * Pareto front of `n` loss pairs. `on_front[i]` is set to 1 or 0; `knee`
 * receives the knee index, or -1 when the front has fewer than three
 * distinct points.
 *
 * # Safety
 * Inputs valid for `n` reads, `on_front` for `n` writes, `knee` for one.
 */
enum DrtuneStatus drtune_pareto(const double *loss1,
                                const double *loss2,
                                size_t n,
                                uint8_t *on_front,
                                ptrdiff_t *knee);

/**
 * Sobol indices of `f` over `[0, 1]^dim`. The four output arrays hold
 * `dim` values each; `degenerate` is set to 1 for a constant function.
 * `n_base` must be a power of two of at least 64. `f` receives a point of
 * length `dim` and the caller's `user_data`.
 *
 * # Safety
 * Output pointers must be valid for the stated lengths. `f` must not unwind.
 */
enum DrtuneStatus drtune_sobol(double (*f)(const double *point, size_t dim, void *user_data),
                               void *user_data,
                               size_t dim,
                               size_t n_base,
                               uint64_t seed,
                               size_t n_bootstrap,
                               double *s1,
                               double *s1_conf,
                               double *st,
                               double *st_conf,
                               uint8_t *degenerate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRTUNE_H */
