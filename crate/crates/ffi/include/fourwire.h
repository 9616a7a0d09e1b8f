#ifndef FOURWIRE_H
#define FOURWIRE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/*
 Result code of every fallible call.
 */
typedef enum FwStatus {
  FW_STATUS_OK = 0,
  FW_STATUS_NULL_POINTER = 1,
  FW_STATUS_INVALID_UTF8 = 2,
  /*
   Malformed network or options document.
   */
  FW_STATUS_PARSE = 3,
  /*
   The network is well formed but cannot be modelled or reduced.
   */
  FW_STATUS_INVALID_NETWORK = 4,
  /*
   The solver could not run (for example a singular Jacobian).
   */
  FW_STATUS_SOLVE_FAILED = 5,
  /*
   No such item (fixture, bus terminal).
   */
  FW_STATUS_NOT_FOUND = 6,
  /*
   A Rust panic was caught at the boundary.
   */
  FW_STATUS_INTERNAL = 7,
} FwStatus;

typedef enum FwModel {
  FW_MODEL_FOUR_WIRE = 0,
  FW_MODEL_KRON = 1,
  FW_MODEL_BALANCED = 2,
} FwModel;

typedef enum FwProblem {
  FW_PROBLEM_POWER_FLOW = 0,
  FW_PROBLEM_OPTIMAL_POWER_FLOW = 1,
} FwProblem;

typedef enum FwForm {
  FW_FORM_IVR = 0,
  FW_FORM_ACR = 1,
} FwForm;

/*
 Outcome reported by a finished solve.
 */
typedef enum FwSolveStatus {
  FW_SOLVE_STATUS_OPTIMAL = 0,
  FW_SOLVE_STATUS_INFEASIBLE = 1,
  FW_SOLVE_STATUS_ITERATION_LIMIT = 2,
  FW_SOLVE_STATUS_NUMERICAL_FAILURE = 3,
} FwSolveStatus;

/*
 Opaque network handle.
 */
typedef struct FwNetwork FwNetwork;

/*
 Opaque solution handle.
 */
typedef struct FwSolution FwSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty if none. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *fw_last_error(void);

/*
 Library version, a static string.
 */
const char *fw_version(void);

/*
 Parse a network from its JSON document.

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FwStatus fw_network_from_json(const char *json, struct FwNetwork **out);

/*
 Load one of the bundled test networks by name.

 # Safety
 `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FwStatus fw_network_fixture(const char *name, struct FwNetwork **out);

/*
 Serialize a network to JSON. Free the result with [`fw_string_free`].

 # Safety
 `net` must be a live handle and `out` a valid pointer.
 */
enum FwStatus fw_network_to_json(const struct FwNetwork *net, char **out);

/*
 Number of validation findings; zero means the network is valid. The
 findings themselves are joined, one per line, in [`fw_last_error`].

 # Safety
 `net` must be a live handle and `count` a valid pointer.
 */
enum FwStatus fw_network_validate(const struct FwNetwork *net, uintptr_t *count);

/*
 The network as seen by a reduced model, as a new handle.

 # Safety
 `net` must be a live handle and `out` a valid pointer.
 */
enum FwStatus fw_network_reduce(const struct FwNetwork *net,
                                enum FwModel model,
                                struct FwNetwork **out);

/*
 Release a network handle. Null is ignored.

 # Safety
 `net` must be null or a handle not yet freed.
 */
void fw_network_free(struct FwNetwork *net);

/*
 Solve a power flow or OPF. `options_json` may be null for defaults;
 otherwise it holds `solver`, `formulation` and `start` sections as in
 the CLI options file. A finished solve returns `Ok` whatever its
 [`FwSolveStatus`].

 # Safety
 `net` must be a live handle, `options_json` null or NUL-terminated, and
 `out` a valid pointer.
 */
enum FwStatus fw_solve(const struct FwNetwork *net,
                       enum FwProblem problem,
                       enum FwForm form,
                       enum FwModel model,
                       const char *options_json,
                       struct FwSolution **out);

/*
 Release a solution handle. Null is ignored.

 # Safety
 `sol` must be null or a handle not yet freed.
 */
void fw_solution_free(struct FwSolution *sol);

/*
 # Safety
 `sol` must be a live handle and `out` a valid pointer.
 */
enum FwStatus fw_solution_status(const struct FwSolution *sol, enum FwSolveStatus *out);

/*
 Per-unit objective and solver iterations.

 # Safety
 `sol` must be a live handle; `objective` and `iterations` valid pointers.
 */
enum FwStatus fw_solution_summary(const struct FwSolution *sol,
                                  double *objective,
                                  uintptr_t *iterations);

/*
 Voltage phasor of one bus terminal in volts.

 # Safety
 `sol` must be a live handle, `bus` and `terminal` NUL-terminated, and
 `re` and `im` valid pointers.
 */
enum FwStatus fw_solution_voltage(const struct FwSolution *sol,
                                  const char *bus,
                                  const char *terminal,
                                  double *re,
                                  double *im);

/*
 The full solution report as JSON. Free the result with
 [`fw_string_free`].

 # Safety
 `sol` must be a live handle and `out` a valid pointer.
 */
enum FwStatus fw_solution_to_json(const struct FwSolution *sol, char **out);

/*
 Release a string returned by the library. Null is ignored.

 # Safety
 `s` must be null or a string from this library not yet freed.
 */
void fw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FOURWIRE_H */
