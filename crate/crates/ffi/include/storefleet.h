#ifndef STOREFLEET_H
#define STOREFLEET_H

/* Generated by cbindgen from storefleet-ffi. Do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SfStatus {
  /**
   * Success.
   */
  SF_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SF_STATUS_NULL_POINTER = 1,
  /**
   * An argument failed validation; see `sf_last_error`.
   */
  SF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The fleet definition is inconsistent; see `sf_last_error`.
   */
  SF_STATUS_INVALID_FLEET = 3,
  /**
   * The policy cannot run on this instance (for example, mixed
   * efficiencies under the combined policy).
   */
  SF_STATUS_POLICY_ERROR = 4,
  /**
   * The computation failed at runtime; see `sf_last_error`.
   */
  SF_STATUS_RUNTIME_ERROR = 5,
  /**
   * A bug: an internal panic was caught at the boundary.
   */
  SF_STATUS_INTERNAL_PANIC = 6,
} SfStatus;

/**
 * Dispatch policies selectable through the flat ABI. Priority orders
 * take their permutation through `sf_simulate_priority` instead.
 */
typedef enum SfPolicy {
  /**
   * Greedy greatest-discharge-duration-first.
   */
  SF_POLICY_GGDDF = 0,
  /**
   * Greedy greatest-charge-duration-first (absorbs surplus).
   */
  SF_POLICY_GGCDF = 1,
  /**
   * Ggddf on demand, Ggcdf on surplus.
   */
  SF_POLICY_COMBINED = 2,
  /**
   * Offline time-reversed plan; needs the whole signal upfront.
   */
  SF_POLICY_REVERSE_GGDDF = 3,
} SfPolicy;

/**
 * Opaque fleet handle.
 */
typedef struct SfFleet SfFleet;

/**
 * Opaque demand-signal handle.
 */
typedef struct SfSignal SfSignal;

/**
 * One store definition for `sf_fleet_new`.
 */
typedef struct SfStoreSpec {
  /**
   * UTF-8 store name; null picks "s1", "s2", ... by position.
   */
  const char *id;
  double capacity_mwh;
  double max_discharge_mw;
  double max_charge_mw;
  /**
   * Round-trip efficiency in (0, 1].
   */
  double efficiency;
} SfStoreSpec;

/**
 * Flat run summary written by the simulate calls.
 */
typedef struct SfRunSummary {
  double total_unserved_mwh;
  double total_spilled_mwh;
  /**
   * Meaningful only when `has_failure` is true.
   */
  double first_failure_time_h;
  bool has_failure;
} SfRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Never null;
 * empty before the first failure. Valid until the next failing call on
 * the same thread.
 */
const char *sf_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *sf_version(void);

/**
 * Builds a fleet from `count` specs. On success writes a handle to
 * `out`; release it with `sf_fleet_free`.
 *
 * # Safety
 * `specs` must point to `count` valid specs; `out` must be a valid
 * pointer; spec ids must be null or nul-terminated UTF-8.
 */
enum SfStatus sf_fleet_new(const struct SfStoreSpec *specs, uintptr_t count, struct SfFleet **out);

/**
 * Number of stores behind a fleet handle; 0 for null.
 *
 * # Safety
 * `fleet` must be null or a live handle from `sf_fleet_new`.
 */
uintptr_t sf_fleet_len(const struct SfFleet *fleet);

/**
 * Releases a fleet handle; null is a no-op.
 *
 * # Safety
 * `fleet` must be null or a live handle from `sf_fleet_new`, not yet
 * freed.
 */
void sf_fleet_free(struct SfFleet *fleet);

/**
 * Builds a piecewise-constant demand signal from `count` breakpoints
 * (strictly increasing, hours) and `count - 1` values (MW). On success
 * writes a handle to `out`; release it with `sf_signal_free`.
 *
 * # Safety
 * `breakpoints` must point to `count` doubles, `values` to `count - 1`
 * doubles; `out` must be a valid pointer.
 */
enum SfStatus sf_signal_new(const double *breakpoints,
                            uintptr_t count,
                            const double *values,
                            struct SfSignal **out);

/**
 * Releases a signal handle; null is a no-op.
 *
 * # Safety
 * `signal` must be null or a live handle from `sf_signal_new`, not yet
 * freed.
 */
void sf_signal_free(struct SfSignal *signal);

/**
 * Runs a dispatch policy over the whole signal.
 *
 * `initial_energies`: per-store starting energies (MWh), or null to
 * start full. `final_energies`: buffer of `sf_fleet_len` doubles for the
 * end state, or null to skip it.
 *
 * # Safety
 * `fleet`, `signal` must be live handles; `summary` must be valid;
 * non-null `initial_energies`/`final_energies` must hold
 * `sf_fleet_len(fleet)` doubles.
 */
enum SfStatus sf_simulate(const struct SfFleet *fleet,
                          const double *initial_energies,
                          const struct SfSignal *signal,
                          enum SfPolicy policy,
                          double *final_energies,
                          struct SfRunSummary *summary);

/**
 * Runs the priority-order policy: serve demand store-by-store in the
 * order given by `order`, a permutation of `0..sf_fleet_len(fleet)`.
 *
 * # Safety
 * As for `sf_simulate`; additionally `order` must hold `order_len`
 * indexes.
 */
enum SfStatus sf_simulate_priority(const struct SfFleet *fleet,
                                   const double *initial_energies,
                                   const struct SfSignal *signal,
                                   const uintptr_t *order,
                                   uintptr_t order_len,
                                   double *final_energies,
                                   struct SfRunSummary *summary);

/**
 * Least unserved energy (MWh) any dispatch can achieve, from the grid
 * oracle. `cross_charging` permits store-to-store transfers.
 *
 * # Safety
 * `fleet`, `signal` must be live handles; `out` must be valid; non-null
 * `initial_energies` must hold `sf_fleet_len(fleet)` doubles.
 */
enum SfStatus sf_min_unserved(const struct SfFleet *fleet,
                              const double *initial_energies,
                              const struct SfSignal *signal,
                              bool cross_charging,
                              double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOREFLEET_H */
