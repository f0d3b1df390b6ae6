#ifndef STALIGN_H
#define STALIGN_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Temporal semantics selector.
 */
typedef enum SaMode {
  SA_MODE_SUFFIX = 0,
  SA_MODE_INTERVAL = 1,
} SaMode;

/**
 * Status codes returned by fallible calls.
 */
typedef enum SaStatus {
  SA_STATUS_OK = 0,
  SA_STATUS_NULL_POINTER = 1,
  SA_STATUS_INVALID_UTF8 = 2,
  SA_STATUS_PARSE = 3,
  SA_STATUS_EVAL = 4,
  SA_STATUS_ORACLE_CAP = 5,
  SA_STATUS_INVALID_ARGUMENT = 6,
  SA_STATUS_BUFFER_TOO_SMALL = 7,
  SA_STATUS_PANIC = 8,
} SaStatus;

typedef struct SaAlignment SaAlignment;

typedef struct SaDb SaDb;

typedef struct SaSpec SaSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sa_last_error_message(void);

/**
 * Parses a fact database from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum SaStatus sa_db_from_json(const char *json, struct SaDb **out);

/**
 * # Safety
 * `db` must come from [`sa_db_from_json`] or be null.
 */
void sa_db_free(struct SaDb *db);

/**
 * Number of facts, or 0 for a null handle.
 *
 * # Safety
 * `db` must be a live handle or null.
 */
size_t sa_db_num_facts(const struct SaDb *db);

/**
 * Parses a specification against the schema of `db`.
 *
 * # Safety
 * `text` must be NUL-terminated, `db` a live handle, `out` writable.
 */
enum SaStatus sa_spec_parse(const char *text, const struct SaDb *db, struct SaSpec **out);

/**
 * # Safety
 * `spec` must come from [`sa_spec_parse`] or be null.
 */
void sa_spec_free(struct SaSpec *spec);

/**
 * Alignment score and gradient. `k = 0` keeps every proof; `mode` is an
 * [`SaMode`] value.
 *
 * # Safety
 * `db` and `spec` must be live handles and `out` writable.
 */
enum SaStatus sa_align(const struct SaDb *db,
                       const struct SaSpec *spec,
                       size_t k,
                       int32_t mode,
                       struct SaAlignment **out);

/**
 * Score of an alignment, or NaN for a null handle.
 *
 * # Safety
 * `a` must be a live handle or null.
 */
double sa_alignment_score(const struct SaAlignment *a);

/**
 * Copies `d score / d p_f` for every fact id into `buf`, which must hold
 * at least [`sa_db_num_facts`] values.
 *
 * # Safety
 * `a` must be a live handle and `buf` valid for `len` writes.
 */
enum SaStatus sa_alignment_grad(const struct SaAlignment *a, double *buf, size_t len);

/**
 * # Safety
 * `a` must come from [`sa_align`] or be null.
 */
void sa_alignment_free(struct SaAlignment *a);

/**
 * Exact score by enumerating possible worlds (small databases only).
 *
 * # Safety
 * `db` and `spec` must be live handles and `out` writable.
 */
enum SaStatus sa_oracle_exact(const struct SaDb *db,
                              const struct SaSpec *spec,
                              int32_t mode,
                              double *out);

/**
 * Boolean satisfaction of a deterministic database (every probability
 * 0 or 1).
 *
 * # Safety
 * `db` and `spec` must be live handles and `out` writable.
 */
enum SaStatus sa_check_bool(const struct SaDb *db,
                            const struct SaSpec *spec,
                            int32_t mode,
                            bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STALIGN_H */
