/* C interface to the relhyp verification suites. */

#ifndef RELHYP_H
#define RELHYP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a call, mirroring the command-line driver's exit codes.
 */
typedef enum RelhypStatus {
  RELHYP_STATUS_OK = 0,
  /**
   * Unknown suite, malformed spec text, or bad argument.
   */
  RELHYP_STATUS_PARSE_ERROR = 1,
  /**
   * The requested build would exceed the vertex cap.
   */
  RELHYP_STATUS_CAP_EXCEEDED = 2,
  /**
   * The suite ran but an assertion failed; the report carries the witness.
   */
  RELHYP_STATUS_ASSERTION_FAILED = 3,
  /**
   * Any other failure (I/O, precondition, internal panic).
   */
  RELHYP_STATUS_RUNTIME_ERROR = 4,
  RELHYP_STATUS_NULL_ARGUMENT = 5,
} RelhypStatus;

/**
 * A finished suite run. Owned by the caller; free with
 * [`relhyp_report_free`].
 */
typedef struct RelhypReport RelhypReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Runs a verification suite.
 *
 * `suite` names one of: horoball, axioms, distform, quasitree, embed,
 * covers, hnn. `spec_text` optionally carries a spec file's contents
 * (group or base-graph dialect); pass NULL for the suite's builtin
 * examples. Negative numeric knobs select the suite defaults.
 *
 * On `Ok` and on `AssertionFailed`, `*out` receives a report handle.
 *
 * # Safety
 * `suite` and non-NULL `spec_text` must point to NUL-terminated strings;
 * `out` must be a valid pointer.
 */
enum RelhypStatus relhyp_verify(const char *suite,
                                const char *spec_text,
                                int32_t radius,
                                int32_t depth,
                                double cutoff_l,
                                double threshold_k,
                                int64_t seed,
                                struct RelhypReport **out);

/**
 * The report as pretty-printed JSON. Borrowed from the handle.
 *
 * # Safety
 * `report` must be a live handle from [`relhyp_verify`].
 */
const char *relhyp_report_json(const struct RelhypReport *report);

/**
 * The residual table as CSV, or NULL when the suite writes none.
 *
 * # Safety
 * `report` must be a live handle from [`relhyp_verify`].
 */
const char *relhyp_report_csv(const struct RelhypReport *report);

/**
 * Whether every suite assertion held.
 *
 * # Safety
 * `report` must be a live handle from [`relhyp_verify`].
 */
bool relhyp_report_pass(const struct RelhypReport *report);

/**
 * The first failing assertion with its witness, or NULL when all held.
 *
 * # Safety
 * `report` must be a live handle from [`relhyp_verify`].
 */
const char *relhyp_report_failure(const struct RelhypReport *report);

/**
 * Frees a report handle. NULL is a no-op.
 *
 * # Safety
 * `report` must be NULL or a handle not freed before.
 */
void relhyp_report_free(struct RelhypReport *report);

/**
 * Message for the most recent non-Ok status on this thread, or NULL.
 * Valid until the next library call on the same thread.
 */
const char *relhyp_last_error(void);

/**
 * Report format version, matching the `format_version` field.
 */
const char *relhyp_format_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* RELHYP_H */
