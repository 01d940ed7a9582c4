#ifndef XOR_SMC_H
#define XOR_SMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum XsmcStatus {
  /**
   * Success.
   */
  Ok = 0,
  /**
   * A pointer argument was NULL or text was not valid UTF-8.
   */
  BadArgument = 1,
  /**
   * Instance text failed to parse or validate.
   */
  ParseError = 2,
  /**
   * The solver failed (oracle error, bad parameters, ...).
   */
  SolveError = 3,
} XsmcStatus;

/**
 * Opaque solver outcome.
 */
typedef struct XsmcDecision XsmcDecision;

/**
 * Opaque parsed problem instance.
 */
typedef struct XsmcInstance XsmcInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failure on this thread. The pointer is
 * owned by the library and valid until the next failing call.
 */
const char *xsmc_last_error(void);

/**
 * Parse an instance from JSON text. `base_dir` anchors relative file
 * references inside the JSON and may be NULL for the current directory.
 * On success writes a handle to `out`; free it with `xsmc_instance_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string, `base_dir` NULL or likewise,
 * and `out` a valid pointer.
 */
enum XsmcStatus xsmc_instance_parse(const char *json,
                                    const char *base_dir,
                                    struct XsmcInstance **out);

/**
 * Number of decision variables (x) in the instance.
 *
 * # Safety
 * `inst` must be a live handle from `xsmc_instance_parse`.
 */
uint32_t xsmc_instance_num_x(const struct XsmcInstance *inst);

/**
 * Number of counting terms (b) in the instance.
 *
 * # Safety
 * `inst` must be a live handle from `xsmc_instance_parse`.
 */
uint32_t xsmc_instance_num_terms(const struct XsmcInstance *inst);

/**
 * Override the failure-probability bound and seed from the instance file.
 *
 * # Safety
 * `inst` must be a live handle from `xsmc_instance_parse`.
 */
enum XsmcStatus xsmc_instance_set_params(struct XsmcInstance *inst,
                                         double eta,
                                         uint32_t c,
                                         uint64_t seed);

/**
 * Free an instance handle. NULL is ignored.
 *
 * # Safety
 * `inst` must be NULL or a handle not freed before.
 */
void xsmc_instance_free(struct XsmcInstance *inst);

/**
 * Solve with the embedded SAT oracle. On success writes a decision
 * handle to `out`; free it with `xsmc_decision_free`.
 *
 * # Safety
 * `inst` must be a live instance handle and `out` a valid pointer.
 */
enum XsmcStatus xsmc_solve(const struct XsmcInstance *inst, struct XsmcDecision **out);

/**
 * 1 if the instance was decided TRUE, 0 otherwise.
 *
 * # Safety
 * `dec` must be a live handle from `xsmc_solve`.
 */
int32_t xsmc_decision_answer(const struct XsmcDecision *dec);

/**
 * Number of hashed repetitions the solve used.
 *
 * # Safety
 * `dec` must be a live handle from `xsmc_solve`.
 */
uint32_t xsmc_decision_repetitions(const struct XsmcDecision *dec);

/**
 * Copy the witness into caller buffers: `x` gets 0/1 bytes for the
 * decision variables, `b` for the term activations. Either pointer may
 * be NULL to skip it; lengths must match the instance. Fails if the
 * decision was FALSE (no witness).
 *
 * # Safety
 * `dec` must be a live handle; `x`/`b`, when non-NULL, must point to
 * buffers of at least `x_len` / `b_len` bytes.
 */
enum XsmcStatus xsmc_decision_witness(const struct XsmcDecision *dec,
                                      uint8_t *x,
                                      uintptr_t x_len,
                                      uint8_t *b,
                                      uintptr_t b_len);

/**
 * Free a decision handle. NULL is ignored.
 *
 * # Safety
 * `dec` must be NULL or a handle not freed before.
 */
void xsmc_decision_free(struct XsmcDecision *dec);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XOR_SMC_H */
