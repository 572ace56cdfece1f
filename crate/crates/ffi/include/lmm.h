#ifndef LMM_FFI_H
#define LMM_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum LmmStatus {
  LmmStatus_Ok = 0,
  LmmStatus_NullPointer = 1,
  LmmStatus_InvalidArgument = 2,
  LmmStatus_InvalidStructure = 3,
  LmmStatus_ImpossibleProfile = 4,
  LmmStatus_BudgetExceeded = 5,
  LmmStatus_BackendError = 6,
  LmmStatus_ConditionFailed = 7,
  LmmStatus_InternalError = 8,
} LmmStatus;

/**
 * Opaque information structure handle.
 */
typedef struct LmmStructure LmmStructure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent error on this thread. Valid until the next
 * failing call; never null.
 */
const char *lmm_last_error_message(void);

/**
 * Parse a structure from the scenario JSON schema.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum LmmStatus lmm_structure_from_json(const char *json, struct LmmStructure **out);

/**
 * Build the XOR scenario with accuracy `p` and `k` signals per variable.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum LmmStatus lmm_structure_xor(double p, uint32_t k, struct LmmStructure **out);

/**
 * Release a structure handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void lmm_structure_free(struct LmmStructure *handle);

uint32_t lmm_structure_world_count(const struct LmmStructure *handle);

uint32_t lmm_structure_agent_count(const struct LmmStructure *handle);

uint32_t lmm_structure_outcome_count(const struct LmmStructure *handle);

/**
 * Posterior over worlds for a report profile. `out_posterior` must hold
 * `lmm_structure_world_count` doubles.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum LmmStatus lmm_posterior_over_worlds(const struct LmmStructure *handle,
                                         const uint32_t *profile,
                                         uintptr_t profile_len,
                                         double *out_posterior);

/**
 * Consistency score of a report profile.
 *
 * # Safety
 * Pointers must be valid for the stated lengths.
 */
enum LmmStatus lmm_consistency(const struct LmmStructure *handle,
                               const uint32_t *profile,
                               uintptr_t profile_len,
                               double *out_consistency);

/**
 * Run the mechanism once. `options_json` is
 * `{"oracle": {...}, "rule": {...}, "profile": [...], "realized_world": w, "seed": n}`;
 * the result is a JSON string owned by the caller.
 *
 * # Safety
 * Pointers must be valid; release the result with `lmm_string_free`.
 */
enum LmmStatus lmm_run_json(const struct LmmStructure *handle,
                            const char *options_json,
                            char **out);

/**
 * Check one condition (`od_obs`, `od_zs`, `im`, `ic`, `delta`) and return
 * the certificate as JSON. Returns `ConditionFailed` when the check ran
 * but the condition does not hold; the certificate is still written.
 *
 * # Safety
 * Pointers must be valid; release the result with `lmm_string_free`.
 */
enum LmmStatus lmm_verify_json(const struct LmmStructure *handle,
                               const char *condition,
                               const char *options_json,
                               char **out);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `ptr` must come from this library and not be freed twice.
 */
void lmm_string_free(char *ptr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LMM_FFI_H */
