#ifndef PSYNORM_H
#define PSYNORM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PsynormStatus {
  PSYNORM_STATUS_OK = 0,
  PSYNORM_STATUS_NULL_POINTER = 1,
  PSYNORM_STATUS_INVALID_UTF8 = 2,
  PSYNORM_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Undefined numeric result, e.g. correlation of a constant series.
   */
  PSYNORM_STATUS_UNDEFINED = 4,
  PSYNORM_STATUS_INDEX_OUT_OF_RANGE = 5,
  PSYNORM_STATUS_PANIC = 6,
} PsynormStatus;

typedef enum PsynormScalarStatus {
  PSYNORM_SCALAR_STATUS_OK = 0,
  PSYNORM_SCALAR_STATUS_CLAMPED = 1,
  PSYNORM_SCALAR_STATUS_NO_NUMBER = 2,
} PsynormScalarStatus;

typedef enum PsynormMapStatus {
  PSYNORM_MAP_STATUS_OK = 0,
  PSYNORM_MAP_STATUS_RECOVERED = 1,
  PSYNORM_MAP_STATUS_UNPARSEABLE = 2,
} PsynormMapStatus;

typedef enum PsynormEditOp {
  PSYNORM_EDIT_OP_MATCH = 0,
  PSYNORM_EDIT_OP_SUBSTITUTE = 1,
  PSYNORM_EDIT_OP_DELETE = 2,
  PSYNORM_EDIT_OP_INSERT = 3,
} PsynormEditOp;

typedef enum PsynormR2Mode {
  PSYNORM_R2_MODE_SQUARED_PEARSON = 0,
  PSYNORM_R2_MODE_AGREEMENT = 1,
} PsynormR2Mode;

typedef enum PsynormPromptKind {
  PSYNORM_PROMPT_KIND_WORD_MEM = 0,
  PSYNORM_PROMPT_KIND_SENT_MEM = 1,
  PSYNORM_PROMPT_KIND_RT = 2,
} PsynormPromptKind;

typedef struct PsynormAlignment PsynormAlignment;

typedef struct PsynormDurationMap PsynormDurationMap;

typedef struct PsynormFit PsynormFit;

/**
 * One alignment step; indices are -1 where the step has no such side.
 */
typedef struct PsynormAlignStep {
  enum PsynormEditOp op;
  int64_t ref_index;
  int64_t hyp_index;
} PsynormAlignStep;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *psynorm_last_error(void);

const char *psynorm_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void psynorm_string_free(char *s);

/**
 * Reads a rating in [0,1] from model text. `out_value` is NaN when the
 * text holds no number.
 *
 * # Safety
 * `text` must be a NUL-terminated string; out-pointers must be writable.
 */
enum PsynormStatus psynorm_parse_scalar(const char *text,
                                        double *out_value,
                                        enum PsynormScalarStatus *out_status);

/**
 * Parses a word/duration map from model text. An unparseable text still
 * yields a handle, with status `Unparseable` and no pairs.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum PsynormStatus psynorm_duration_map_parse(const char *text, struct PsynormDurationMap **out);

/**
 * # Safety
 * `map` must be a live handle from [`psynorm_duration_map_parse`].
 */
size_t psynorm_duration_map_len(const struct PsynormDurationMap *map);

/**
 * # Safety
 * `map` must be a live handle from [`psynorm_duration_map_parse`].
 */
enum PsynormMapStatus psynorm_duration_map_status(const struct PsynormDurationMap *map);

/**
 * Pair `index` of the map. `out_word` points into the handle and lives as
 * long as it does.
 *
 * # Safety
 * `map` must be a live handle; out-pointers must be writable.
 */
enum PsynormStatus psynorm_duration_map_get(const struct PsynormDurationMap *map,
                                            size_t index,
                                            const char **out_word,
                                            double *out_ms);

/**
 * # Safety
 * `map` must be NULL or a live handle, not used afterwards.
 */
void psynorm_duration_map_free(struct PsynormDurationMap *map);

/**
 * Minimum-edit alignment of two word sequences after normalization.
 *
 * # Safety
 * `reference` and `hypothesis` must hold `n_ref` / `n_hyp` NUL-terminated
 * strings (either may be NULL when its length is 0); `out` writable.
 */
enum PsynormStatus psynorm_align(const char *const *reference,
                                 size_t n_ref,
                                 const char *const *hypothesis,
                                 size_t n_hyp,
                                 struct PsynormAlignment **out);

/**
 * # Safety
 * `a` must be a live alignment handle.
 */
size_t psynorm_alignment_cost(const struct PsynormAlignment *a);

/**
 * # Safety
 * `a` must be a live alignment handle.
 */
size_t psynorm_alignment_len(const struct PsynormAlignment *a);

/**
 * # Safety
 * `a` must be a live alignment handle and `out` writable.
 */
enum PsynormStatus psynorm_alignment_step(const struct PsynormAlignment *a,
                                          size_t index,
                                          struct PsynormAlignStep *out);

/**
 * # Safety
 * `a` must be NULL or a live handle, not used afterwards.
 */
void psynorm_alignment_free(struct PsynormAlignment *a);

/**
 * Sample Pearson correlation; `Undefined` for constant input.
 *
 * # Safety
 * `x` and `y` must each hold `n` doubles; `out` writable.
 */
enum PsynormStatus psynorm_pearson(const double *x, const double *y, size_t n, double *out);

/**
 * # Safety
 * `predicted` and `truth` must each hold `n` doubles; `out` writable.
 */
enum PsynormStatus psynorm_r2(const double *predicted,
                              const double *truth,
                              size_t n,
                              enum PsynormR2Mode mode,
                              double *out);

/**
 * Least squares with intercept on a row-major `n` x `p` matrix. A
 * positive `ridge` adds that fixed penalty; zero or negative disables it.
 *
 * # Safety
 * `x` must hold `n * p` doubles, `y` `n` doubles; `out` writable.
 */
enum PsynormStatus psynorm_fit_ols(const double *x,
                                   size_t n,
                                   size_t p,
                                   const double *y,
                                   double ridge,
                                   struct PsynormFit **out);

/**
 * # Safety
 * `fit` must be a live fit handle.
 */
double psynorm_fit_intercept(const struct PsynormFit *fit);

/**
 * # Safety
 * `fit` must be a live fit handle.
 */
size_t psynorm_fit_rank(const struct PsynormFit *fit);

/**
 * Copies the coefficients into `out`, which must hold exactly as many
 * values as the fitted matrix had columns.
 *
 * # Safety
 * `fit` must be a live handle and `out` hold `len` writable doubles.
 */
enum PsynormStatus psynorm_fit_coefficients(const struct PsynormFit *fit, double *out, size_t len);

/**
 * Predictions for a row-major `n` x `p` matrix into `out` (`n` values).
 *
 * # Safety
 * `fit` must be a live handle, `x` hold `n * p` doubles, `out` `n`.
 */
enum PsynormStatus psynorm_fit_predict(const struct PsynormFit *fit,
                                       const double *x,
                                       size_t n,
                                       size_t p,
                                       double *out);

/**
 * # Safety
 * `fit` must be NULL or a live handle, not used afterwards.
 */
void psynorm_fit_free(struct PsynormFit *fit);

/**
 * The zero-shot prompt for `text`; free the result with
 * [`psynorm_string_free`].
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum PsynormStatus psynorm_render_zero_shot(enum PsynormPromptKind kind,
                                            const char *text,
                                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PSYNORM_H */
