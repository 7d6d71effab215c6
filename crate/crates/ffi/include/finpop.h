#ifndef FINPOP_H
#define FINPOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FinpopStatus {
  FINPOP_STATUS_OK = 0,
  FINPOP_STATUS_NULL_POINTER = 1,
  FINPOP_STATUS_INVALID_INPUT = 2,
  FINPOP_STATUS_DEGENERATE = 3,
  FINPOP_STATUS_NUMERICAL = 4,
  FINPOP_STATUS_DOMAIN = 5,
  FINPOP_STATUS_CONFIG = 6,
  FINPOP_STATUS_UNSUPPORTED = 7,
  FINPOP_STATUS_PANIC = 8,
} FinpopStatus;

typedef enum FinpopMethod {
  FINPOP_METHOD_MONTE_CARLO = 0,
  FINPOP_METHOD_TW_DIRECT = 1,
} FinpopMethod;

typedef enum FinpopVariant {
  FINPOP_VARIANT_RAW = 0,
  FINPOP_VARIANT_CENTERED_B1 = 1,
  FINPOP_VARIANT_STANDARDIZED_B2 = 2,
} FinpopVariant;

/**
 * Opaque `p × n` data matrix (rows are variables).
 */
typedef struct FinpopMatrix FinpopMatrix;

/**
 * Opaque result of a parallel analysis run.
 */
typedef struct FinpopPaResult FinpopPaResult;

typedef struct FinpopPaConfig {
  enum FinpopMethod method;
  enum FinpopVariant variant;
  double percentile;
  size_t num_permutations;
  size_t max_factors;
  uint64_t seed;
} FinpopPaConfig;

typedef struct FinpopPaStep {
  /**
   * 1-based.
   */
  size_t factor_index;
  double observed_eigenvalue;
  double threshold;
  /**
   * NaN when the variant has no edge constants.
   */
  double normalized_stat;
  double p_value;
  bool selected;
} FinpopPaStep;

typedef struct FinpopEdgeParams {
  double xi_plus;
  double e_plus;
  double gamma0;
  /**
   * Set when the edge sits within 1e-8 of the population's singular point.
   */
  bool ill_conditioned;
} FinpopEdgeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length in bytes.
 */
size_t finpop_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *finpop_version(void);

/**
 * Builds a `rows × cols` matrix from row-major `values`.
 */
enum FinpopStatus finpop_matrix_new(size_t rows,
                                    size_t cols,
                                    const double *values,
                                    struct FinpopMatrix **out);

void finpop_matrix_free(struct FinpopMatrix *m);

/**
 * Number of rows, or 0 for NULL.
 */
size_t finpop_matrix_rows(const struct FinpopMatrix *m);

/**
 * Number of columns, or 0 for NULL.
 */
size_t finpop_matrix_cols(const struct FinpopMatrix *m);

/**
 * Defaults: Monte Carlo, standardized variant, 95th percentile, 1000 permutations.
 */
struct FinpopPaConfig finpop_pa_config_default(size_t max_factors, uint64_t seed);

/**
 * Runs parallel analysis on `data` and stores a new result handle in `out`.
 */
enum FinpopStatus finpop_pa_run(const struct FinpopMatrix *data,
                                const struct FinpopPaConfig *config,
                                struct FinpopPaResult **out);

void finpop_pa_result_free(struct FinpopPaResult *r);

/**
 * Number of selected factors, or 0 for NULL.
 */
size_t finpop_pa_result_k_selected(const struct FinpopPaResult *r);

/**
 * Number of evaluated steps, or 0 for NULL.
 */
size_t finpop_pa_result_num_steps(const struct FinpopPaResult *r);

/**
 * Copies step `index` (0-based) into `out`.
 */
enum FinpopStatus finpop_pa_result_step(const struct FinpopPaResult *r,
                                        size_t index,
                                        struct FinpopPaStep *out);

/**
 * JSON rendering of the result; release with [`finpop_string_free`].
 * Returns NULL for a NULL handle.
 */
char *finpop_pa_result_to_json(const struct FinpopPaResult *r);

void finpop_string_free(char *s);

/**
 * Edge constants for population spectrum `tvals[0..len]`, ratio `c = p/n`
 * and sampling fraction `y = n/N`.
 */
enum FinpopStatus finpop_edge_params(const double *tvals,
                                     size_t len,
                                     double c,
                                     double y,
                                     struct FinpopEdgeParams *out);

/**
 * Closed-form constants for `T = I`.
 */
enum FinpopStatus finpop_spearman_edge(double c, struct FinpopEdgeParams *out);

/**
 * Finite-sample centering and scale.
 */
enum FinpopStatus finpop_johnstone_edge(size_t n, size_t p, struct FinpopEdgeParams *out);

double finpop_tw1_cdf(double s);

double finpop_tw1_pvalue(double s);

/**
 * Quantile at level `q` in (0, 1).
 */
enum FinpopStatus finpop_tw1_quantile(double q, double *out);

/**
 * All eigenvalues, descending, of the symmetric `dim × dim` row-major matrix
 * `a`; only the upper triangle is read. `out` holds `dim` values.
 */
enum FinpopStatus finpop_eigs_sym(size_t dim, const double *a, double *out);

/**
 * The `k` largest eigenvalues, descending, of `(1/n)·B·Bᵀ` for the `p × n`
 * matrix `data`. `out` holds `k` values.
 */
enum FinpopStatus finpop_top_eigs(const struct FinpopMatrix *data, size_t k, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINPOP_H */
