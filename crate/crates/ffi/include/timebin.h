#ifndef TIMEBIN_H
#define TIMEBIN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes; zero is success.
 */
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_INVALID_ARGUMENT = 2,
  TB_STATUS_CONFIG = 3,
  TB_STATUS_NO_SIGNAL = 4,
  TB_STATUS_NUMERICAL = 5,
  TB_STATUS_IO = 6,
  TB_STATUS_PANIC = 7,
} TbStatus;

/**
 * Reconstructed two-photon density matrix in the basis EE, EL, LE, LL.
 */
typedef struct TbPairState TbPairState;

/**
 * Scenario description: source, phase grid and integration grid.
 */
typedef struct TbScenario TbScenario;

/**
 * Reconstructed single-photon density matrix in the basis E, L.
 */
typedef struct TbSingleState TbSingleState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tb_version(void);

/**
 * Message of the last failure on this thread, or null.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *tb_last_error(void);

/**
 * Parses a TOML scenario.
 *
 * # Safety
 * `toml` is a NUL-terminated string; `out` is valid for one write.
 */
enum TbStatus tb_scenario_from_toml(const char *toml, struct TbScenario **out);

/**
 * Built-in pair scenario: a Bell state emitted in early and late bins.
 *
 * # Safety
 * `out` is valid for one write.
 */
enum TbStatus tb_scenario_default_pair(struct TbScenario **out);

/**
 * Built-in single-photon scenario: an equal early/late superposition.
 *
 * # Safety
 * `out` is valid for one write.
 */
enum TbStatus tb_scenario_default_single(struct TbScenario **out);

/**
 * Sets the integration nodes per time bin.
 *
 * # Safety
 * `scenario` is a live handle.
 */
enum TbStatus tb_scenario_set_steps_per_bin(struct TbScenario *scenario, size_t steps);

/**
 * # Safety
 * `scenario` is null or a handle not yet freed.
 */
void tb_scenario_free(struct TbScenario *scenario);

/**
 * Reconstructs the two-photon state from window-integrated correlations.
 *
 * # Safety
 * `scenario` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_reconstruct_pair(const struct TbScenario *scenario, struct TbPairState **out);

/**
 * # Safety
 * `state` is null or a handle not yet freed.
 */
void tb_pair_state_free(struct TbPairState *state);

/**
 * Writes the 4 × 4 matrix as 32 interleaved `re, im` values, row-major.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for `len` writes.
 */
enum TbStatus tb_pair_state_rho(const struct TbPairState *state, double *out, size_t len);

/**
 * Wootters concurrence.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_pair_concurrence(const struct TbPairState *state, double *out);

/**
 * `max(0, 2|ρ_EE,LL| − ρ_EL,EL − ρ_LE,LE)`.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_pair_concurrence_approx(const struct TbPairState *state, double *out);

/**
 * Center coincidence peak at the given interferometer phases, in units of the corner peaks.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_pair_center_peak(const struct TbPairState *state,
                                  double phi_b,
                                  double phi_x,
                                  double *out);

/**
 * Reconstructs the single-photon state.
 *
 * # Safety
 * `scenario` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_reconstruct_single(const struct TbScenario *scenario, struct TbSingleState **out);

/**
 * # Safety
 * `state` is null or a handle not yet freed.
 */
void tb_single_state_free(struct TbSingleState *state);

/**
 * Writes the 2 × 2 matrix as 8 interleaved `re, im` values, row-major.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for `len` writes.
 */
enum TbStatus tb_single_state_rho(const struct TbSingleState *state, double *out, size_t len);

/**
 * Fringe visibility of the middle peak over the scenario's phase list.
 *
 * # Safety
 * `scenario` is a live handle; `out` is valid for one write.
 */
enum TbStatus tb_single_visibility(const struct TbScenario *scenario, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIMEBIN_H */
