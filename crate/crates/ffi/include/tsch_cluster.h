#ifndef TSCH_CLUSTER_H
#define TSCH_CLUSTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_UTF8 = 2,
  TC_STATUS_INVALID_INPUT = 3,
  TC_STATUS_NOT_FOUND = 4,
  TC_STATUS_BUDGET_EXCEEDED = 5,
  TC_STATUS_NO_WITNESS = 6,
  TC_STATUS_OVERFLOW = 7,
  TC_STATUS_PANIC = 8,
} TcStatus;

typedef enum TcVariant {
  TC_VARIANT_WITH_ACKS = 0,
  TC_VARIANT_NO_ACKS = 1,
} TcVariant;

typedef enum TcVerdict {
  TC_VERDICT_HOLDS = 0,
  TC_VERDICT_FAILS = 1,
  TC_VERDICT_INCONCLUSIVE = 2,
} TcVerdict;

typedef enum TcFailureClass {
  TC_FAILURE_CLASS_NONE = 0,
  TC_FAILURE_CLASS_ACK_COLLISION = 1,
  TC_FAILURE_CLASS_ASSOCIATE_COLLISION = 2,
  TC_FAILURE_CLASS_NARROW_BRIDGE = 3,
  TC_FAILURE_CLASS_OTHER = 4,
} TcFailureClass;

/**
 * A finished simulation run.
 */
typedef struct TcRun TcRun;

/**
 * A parsed scenario with any overrides applied.
 */
typedef struct TcScenario TcScenario;

/**
 * Outcome of a formation check.
 */
typedef struct TcVerifyResult {
  enum TcVerdict verdict;
  enum TcFailureClass failure_class;
  uint64_t states;
  /**
   * Slots of the shortest forming execution, or -1 when none exists.
   */
  int64_t witness_slots;
} TcVerifyResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *tc_last_error(void);

/**
 * Loads a built-in scenario by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TcStatus tc_scenario_builtin(const char *name, struct TcScenario **out);

/**
 * Parses a scenario from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
enum TcStatus tc_scenario_parse(const char *toml, struct TcScenario **out);

/**
 * # Safety
 * `sc` must be NULL or a handle from this library that has not been freed.
 */
void tc_scenario_free(struct TcScenario *sc);

/**
 * # Safety
 * `sc` must be a live scenario handle.
 */
uint32_t tc_scenario_node_count(const struct TcScenario *sc);

/**
 * # Safety
 * `sc` must be a live scenario handle.
 */
enum TcStatus tc_scenario_set_variant(struct TcScenario *sc, enum TcVariant variant);

/**
 * Fixes the initial channels of nodes 2..=n (`len` must be n - 1).
 *
 * # Safety
 * `sc` must be a live scenario handle and `channels` must point to `len` readable values.
 */
enum TcStatus tc_scenario_set_channels(struct TcScenario *sc, const uint32_t *channels, size_t len);

/**
 * Explores every execution from the scenario's fixed initial channels.
 * A `depth` of 0 uses the scenario's own depth bound.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` a writable pointer.
 */
enum TcStatus tc_verify(const struct TcScenario *sc, size_t depth, struct TcVerifyResult *out);

/**
 * Shortest forming execution over every initial configuration where formation is inevitable.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out_slots` a writable pointer.
 */
enum TcStatus tc_sweep_min_witness(const struct TcScenario *sc, size_t depth, uint64_t *out_slots);

/**
 * Runs one seeded simulation. Scenarios without fixed channels draw them from the seed.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` a writable pointer.
 */
enum TcStatus tc_simulate(const struct TcScenario *sc,
                          uint64_t seed,
                          uint64_t slot_bound,
                          struct TcRun **out);

/**
 * # Safety
 * `run` must be NULL or a handle from [`tc_simulate`] that has not been freed.
 */
void tc_run_free(struct TcRun *run);

/**
 * # Safety
 * `run` must be a live run handle.
 */
bool tc_run_formed(const struct TcRun *run);

/**
 * # Safety
 * `run` must be a live run handle.
 */
uint64_t tc_run_slots(const struct TcRun *run);

/**
 * # Safety
 * `run` must be a live run handle.
 */
uint64_t tc_run_milliseconds(const struct TcRun *run);

/**
 * Renders the run as a replayable trace; free the string with [`tc_string_free`].
 *
 * # Safety
 * `run` must be a live run handle and `out` a writable pointer.
 */
enum TcStatus tc_run_trace(const struct TcRun *run, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library that has not been freed.
 */
void tc_string_free(char *s);

/**
 * Closed-form lower bound on reserved slots for a balanced binary tree of height `h`.
 *
 * # Safety
 * `out_slots` must be a writable pointer.
 */
enum TcStatus tc_lower_bound_slots(uint32_t h, uint64_t *out_slots);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSCH_CLUSTER_H */
