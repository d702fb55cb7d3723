#ifndef FROST_H
#define FROST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes of every fallible function.
 */
typedef enum FrostStatus {
  FROST_STATUS_OK = 0,
  FROST_STATUS_NULL_POINTER = 1,
  FROST_STATUS_INVALID_UTF8 = 2,
  FROST_STATUS_INVALID_ARGUMENT = 3,
  FROST_STATUS_DIMENSION_MISMATCH = 4,
  FROST_STATUS_GEOMETRY = 5,
  FROST_STATUS_NON_FINITE = 6,
  FROST_STATUS_SOLVER = 7,
  FROST_STATUS_ILL_CONDITIONED = 8,
  FROST_STATUS_WELL_POSEDNESS = 9,
  FROST_STATUS_GRID_MISMATCH = 10,
  FROST_STATUS_POOL_EXHAUSTED = 11,
  FROST_STATUS_UNDEFINED = 12,
  FROST_STATUS_FORMAT = 13,
  FROST_STATUS_IO = 14,
  FROST_STATUS_BUFFER_TOO_SMALL = 15,
  FROST_STATUS_PANIC = 99,
} FrostStatus;

/*
 POD basis read from a FROM1 file.
 */
typedef struct FrostBasis FrostBasis;

/*
 Finite-volume grid of the reference freezer cabinet.
 */
typedef struct FrostGrid FrostGrid;

/*
 Least-squares field estimator for a fixed basis, sensor set and dimension.
 */
typedef struct FrostReconstructor FrostReconstructor;

/*
 Observation operator of a sensor layout.
 */
typedef struct FrostSensors FrostSensors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the calling thread's last error message into `buf` (NUL-terminated,
 truncated to `cap`). Returns the full message length excluding the NUL.

 # Safety
 `buf` must be null or point to `cap` writable bytes.
 */
size_t frost_last_error_message(char *buf, size_t cap);

/*
 Library version as a static NUL-terminated string.
 */
const char *frost_version(void);

/*
 Builds the `nx` x `ny` grid of the reference cabinet.

 # Safety
 `out` must be a valid pointer; the handle is released with [`frost_grid_free`].
 */
enum FrostStatus frost_grid_new(size_t nx, size_t ny, struct FrostGrid **out);

/*
 Number of cells (the field length).

 # Safety
 `grid` must be a live handle or null (returns 0).
 */
size_t frost_grid_cell_count(const struct FrostGrid *grid);

/*
 # Safety
 `grid` must come from [`frost_grid_new`] and not be used afterwards.
 */
void frost_grid_free(struct FrostGrid *grid);

/*
 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FrostStatus frost_basis_load(const char *path, struct FrostBasis **out);

/*
 Number of stored modes.

 # Safety
 `basis` must be a live handle or null (returns 0).
 */
size_t frost_basis_mode_count(const struct FrostBasis *basis);

/*
 Field length of the modes.

 # Safety
 `basis` must be a live handle or null (returns 0).
 */
size_t frost_basis_field_len(const struct FrostBasis *basis);

/*
 Copies the leading `len` singular values into `out`.

 # Safety
 `basis` must be a live handle and `out` must hold `len` doubles.
 */
enum FrostStatus frost_basis_singular_values(const struct FrostBasis *basis,
                                             double *out,
                                             size_t len);

/*
 # Safety
 `basis` must come from [`frost_basis_load`] and not be used afterwards.
 */
void frost_basis_free(struct FrostBasis *basis);

/*
 Reads a sensor layout JSON and binds it to `grid`.

 # Safety
 `grid` must be a live handle, `path` NUL-terminated and `out` valid.
 */
enum FrostStatus frost_sensors_load(const struct FrostGrid *grid,
                                    const char *path,
                                    struct FrostSensors **out);

/*
 Number of sensors `m`.

 # Safety
 `sensors` must be a live handle or null (returns 0).
 */
size_t frost_sensors_count(const struct FrostSensors *sensors);

/*
 Noise-free measurements `W^T T` of a field of length `field_len` into `out` (length `m`).

 # Safety
 Pointers must be valid for the given lengths.
 */
enum FrostStatus frost_sensors_measure(const struct FrostSensors *sensors,
                                       const double *field,
                                       size_t field_len,
                                       double *out,
                                       size_t out_len);

/*
 # Safety
 `sensors` must come from [`frost_sensors_load`] and not be used afterwards.
 */
void frost_sensors_free(struct FrostSensors *sensors);

/*
 Checks well-posedness and conditioning for dimension `n`; the basis and
 sensor handles may be freed afterwards.

 # Safety
 Handles must be live and `out` valid.
 */
enum FrostStatus frost_reconstructor_new(const struct FrostBasis *basis,
                                         const struct FrostSensors *sensors,
                                         size_t n,
                                         struct FrostReconstructor **out);

/*
 Smallest singular value of the cross-Gramian.

 # Safety
 `rec` must be a live handle or null (returns NaN).
 */
double frost_reconstructor_smallest_singular_value(const struct FrostReconstructor *rec);

/*
 Estimates the full field (length `field_len`) from `m` measurements.

 # Safety
 Pointers must be valid for the given lengths.
 */
enum FrostStatus frost_reconstruct(const struct FrostReconstructor *rec,
                                   const double *measurements,
                                   size_t m,
                                   double *field,
                                   size_t field_len);

/*
 # Safety
 `rec` must come from [`frost_reconstructor_new`] and not be used afterwards.
 */
void frost_reconstructor_free(struct FrostReconstructor *rec);

/*
 `||truth - estimate|| / ||truth|| * 100`.

 # Safety
 Both arrays must hold `len` doubles and `out` must be valid.
 */
enum FrostStatus frost_relative_l2_error(const double *truth,
                                         const double *estimate,
                                         size_t len,
                                         double *out);

/*
 Runs simulate, POD, sensor placement and evaluation into `out_dir`.
 `config_path` may be null for the default desk configuration. The
 time-averaged error of each held-out run is written to `errors` (capacity
 `cap`) and their number to `count`.

 # Safety
 Strings must be NUL-terminated; `errors` must hold `cap` doubles; `count` valid.
 */
enum FrostStatus frost_run_pipeline(const char *config_path,
                                    const char *out_dir,
                                    double *errors,
                                    size_t cap,
                                    size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FROST_H */
