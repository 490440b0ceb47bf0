#ifndef COHS_CQG_H
#define COHS_CQG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CohsMode {
  COHS_MODE_COHS = 0,
  COHS_MODE_DYN_CS = 1,
  COHS_MODE_DYN_HS = 2,
  COHS_MODE_STATIC = 3,
} CohsMode;

/**
 * Result code of every fallible call.
 */
typedef enum CohsStatus {
  COHS_STATUS_OK = 0,
  COHS_STATUS_NULL_POINTER = 1,
  COHS_STATUS_INVALID_ARGUMENT = 2,
  COHS_STATUS_OUT_OF_RANGE = 3,
  COHS_STATUS_EMPTY_HISTORY = 4,
  COHS_STATUS_INVALID_UTF8 = 5,
  COHS_STATUS_INTERNAL = 6,
  COHS_STATUS_PANIC = 7,
} CohsStatus;

/**
 * Opaque relevance matrix (sentences x history turns).
 */
typedef struct CohsMatrix CohsMatrix;

/**
 * Opaque list of sentence spans.
 */
typedef struct CohsSentences CohsSentences;

/**
 * Selected window `[window_start, window_start + u)` and the last `k` turns.
 */
typedef struct CohsSelection {
  size_t window_start;
  size_t u;
  size_t k;
  double achieved_sum;
  bool fallback;
} CohsSelection;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *cohs_last_error_message(void);

const char *cohs_version(void);

/**
 * Wraps a row-major `rows x cols` array of cosine values.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles (may be NULL when that is 0);
 * `out` must be writable.
 */
enum CohsStatus cohs_matrix_new(size_t rows,
                                size_t cols,
                                const double *data,
                                struct CohsMatrix **out);

/**
 * Builds the sentence x turn cosine matrix from row-major embeddings of
 * width `dim`: `m` sentence vectors and `h` turn vectors (oldest first).
 *
 * # Safety
 * `sentences` must hold `m * dim` doubles, `turns` `h * dim` doubles (NULL
 * allowed when empty); `out` must be writable.
 */
enum CohsStatus cohs_build_relevance_matrix(const double *sentences,
                                            size_t m,
                                            const double *turns,
                                            size_t h,
                                            size_t dim,
                                            struct CohsMatrix **out);

/**
 * # Safety
 * `matrix` must be NULL or a handle from this library not yet freed.
 */
void cohs_matrix_free(struct CohsMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle or NULL (returns 0).
 */
size_t cohs_matrix_rows(const struct CohsMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle or NULL (returns 0).
 */
size_t cohs_matrix_cols(const struct CohsMatrix *matrix);

/**
 * # Safety
 * `matrix` must be a live handle; `out` must be writable.
 */
enum CohsStatus cohs_matrix_get(const struct CohsMatrix *matrix,
                                size_t row,
                                size_t col,
                                double *out);

/**
 * Selects a window containing sentence `c_s` (0-based) and a history
 * suffix. `p` may be `INFINITY` for the full selection; `k_fixed` is only
 * read in `DynCs` mode.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be writable.
 */
enum CohsStatus cohs_select(const struct CohsMatrix *matrix,
                            size_t c_s,
                            double p,
                            enum CohsMode mode,
                            size_t k_fixed,
                            struct CohsSelection *out);

/**
 * Five-sentence window for a 1-based rationale index `s`, written as a
 * 0-based start and a length.
 *
 * # Safety
 * `start` and `len` must be writable.
 */
enum CohsStatus cohs_static_five_window(size_t m, size_t s, size_t *start, size_t *len);

/**
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum CohsStatus cohs_split_sentences(const char *text, struct CohsSentences **out);

/**
 * # Safety
 * `sentences` must be a live handle or NULL (returns 0).
 */
size_t cohs_sentences_len(const struct CohsSentences *sentences);

/**
 * Byte span `[start, end)` of sentence `index` in the original text.
 *
 * # Safety
 * `sentences` must be a live handle; `start` and `end` must be writable.
 */
enum CohsStatus cohs_sentences_span(const struct CohsSentences *sentences,
                                    size_t index,
                                    size_t *start,
                                    size_t *end);

/**
 * # Safety
 * `sentences` must be NULL or a handle from this library not yet freed.
 */
void cohs_sentences_free(struct CohsSentences *sentences);

/**
 * Builds the generator input. `window` holds `window_len` sentences;
 * `questions`/`answers` hold `history_len` turns, oldest first. The result
 * must be released with [`cohs_string_free`].
 *
 * # Safety
 * All string pointers must be NUL-terminated; arrays must hold the stated
 * number of elements; `out` must be writable.
 */
enum CohsStatus cohs_assemble_prompt(const char *answer,
                                     const char *rationale,
                                     const char *const *window,
                                     size_t window_len,
                                     const char *const *questions,
                                     const char *const *answers,
                                     size_t history_len,
                                     char **out);

/**
 * Lowercases, strips punctuation and articles, collapses whitespace. The
 * result must be released with [`cohs_string_free`].
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must be writable.
 */
enum CohsStatus cohs_normalize_answer(const char *text, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void cohs_string_free(char *s);

/**
 * ROUGE-L F-measure over lowercase whitespace tokens.
 *
 * # Safety
 * Both strings must be NUL-terminated; `out` must be writable.
 */
enum CohsStatus cohs_rouge_l(const char *reference, const char *hypothesis, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHS_CQG_H */
