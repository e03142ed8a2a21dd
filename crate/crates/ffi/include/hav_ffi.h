#ifndef HAV_FFI_H
#define HAV_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HavStatus {
  HAV_STATUS_OK = 0,
  HAV_STATUS_NULL_POINTER = 1,
  HAV_STATUS_INVALID_ARGUMENT = 2,
  HAV_STATUS_CONFIG = 3,
  HAV_STATUS_GENERATION = 4,
  HAV_STATUS_SAFETY_VIOLATION = 5,
  HAV_STATUS_IO = 6,
  HAV_STATUS_BUFFER_TOO_SMALL = 7,
  HAV_STATUS_PANIC = 8,
} HavStatus;

typedef enum HavOutcome {
  HAV_OUTCOME_RUNNING = -1,
  HAV_OUTCOME_SUCCESS = 0,
  HAV_OUTCOME_DEADLOCK = 1,
  HAV_OUTCOME_LIVELOCK = 2,
} HavOutcome;

/**
 * Opaque simulation handle.
 */
typedef struct HavSimulation HavSimulation;

typedef struct HavPose {
  double x;
  double y;
  double heading;
} HavPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hav_last_error_message(char *buf, size_t len);

/**
 * Static NUL-terminated library version.
 */
const char *hav_version(void);

/**
 * Generates a random scenario and creates a simulation for it. `params_toml`
 * may be null for default parameters.
 *
 * # Safety
 * `params_toml` must be null or a NUL-terminated string; `out` must be valid
 * for writing a pointer.
 */
enum HavStatus hav_simulation_generate(uint64_t seed,
                                       size_t hav_count,
                                       double density,
                                       const char *params_toml,
                                       struct HavSimulation **out);

/**
 * Creates a simulation from a scenario document.
 *
 * # Safety
 * `scenario_toml` must be a NUL-terminated string, `params_toml` null or a
 * NUL-terminated string, and `out` valid for writing a pointer.
 */
enum HavStatus hav_simulation_from_toml(const char *scenario_toml,
                                        const char *params_toml,
                                        struct HavSimulation **out);

/**
 * Releases a simulation. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle from this library that was not yet freed.
 */
void hav_simulation_free(struct HavSimulation *sim);

/**
 * Advances one synchronous step and reports the outcome so far.
 *
 * # Safety
 * `sim` must be a live handle; `outcome` null or writable.
 */
enum HavStatus hav_simulation_step(struct HavSimulation *sim, enum HavOutcome *outcome);

/**
 * Runs to termination.
 *
 * # Safety
 * `sim` must be a live handle; `outcome` null or writable.
 */
enum HavStatus hav_simulation_run(struct HavSimulation *sim, enum HavOutcome *outcome);

/**
 * Number of vehicles; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t hav_simulation_vehicle_count(const struct HavSimulation *sim);

/**
 * Steps taken so far; 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uint64_t hav_simulation_time_step(const struct HavSimulation *sim);

/**
 * Truck rear-axle pose of vehicle `index`.
 *
 * # Safety
 * `sim` must be a live handle and `pose` writable.
 */
enum HavStatus hav_simulation_pose(const struct HavSimulation *sim,
                                   size_t index,
                                   struct HavPose *pose);

/**
 * Writes the articulation angles of vehicle `index` into `buf`. `len` always
 * receives the trailer count; a short buffer gives `BufferTooSmall`.
 *
 * # Safety
 * `sim` must be a live handle, `buf` null or valid for `cap` doubles, and
 * `len` writable.
 */
enum HavStatus hav_simulation_articulation(const struct HavSimulation *sim,
                                           size_t index,
                                           double *buf,
                                           size_t cap,
                                           size_t *len);

/**
 * One explicit Euler step of a truck with `trailer_count` trailers. `pose`
 * and `trailer_headings` are updated in place.
 *
 * # Safety
 * `trailer_wheelbases` and `trailer_headings` must each hold `trailer_count`
 * doubles; `pose` must be valid for reads and writes.
 */
enum HavStatus hav_kinematic_step(double truck_wheelbase,
                                  const double *trailer_wheelbases,
                                  size_t trailer_count,
                                  struct HavPose *pose,
                                  double *trailer_headings,
                                  double speed,
                                  double steer,
                                  double dt);

/**
 * Length of the shortest path with turning radius `radius`.
 *
 * # Safety
 * `length` must be writable.
 */
enum HavStatus hav_dubins_length(struct HavPose start,
                                 struct HavPose goal,
                                 double radius,
                                 double *length);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HAV_FFI_H */
