#ifndef STOCHHEAT_H
#define STOCHHEAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  // A malformed string, spec or numeric argument.
  SH_STATUS_INVALID_ARGUMENT = 2,
  // A model assumption does not hold for the given inputs.
  SH_STATUS_ASSUMPTION = 3,
  // The resolved region cannot hold the requested computation.
  SH_STATUS_REGION_TOO_SMALL = 4,
  SH_STATUS_ESTIMATION = 5,
  // The output buffer is shorter than required.
  SH_STATUS_BUFFER_TOO_SMALL = 6,
  // An internal panic was caught.
  SH_STATUS_INTERNAL = 7,
} ShStatus;

// Selects how Upsilon is evaluated.
typedef enum ShUpsilonMethod {
  SH_UPSILON_METHOD_QUADRATURE = 0,
  SH_UPSILON_METHOD_SERIES = 1,
} ShUpsilonMethod;

// A random walk kernel.
typedef struct ShKernel ShKernel;

// A validated configuration and the problem it defines.
typedef struct ShProblem ShProblem;

// Spectral data of a kernel with its cached overlaps.
typedef struct ShSpectral ShSpectral;

// u_0, ..., u_{n_max} of one replica.
typedef struct ShTrajectory ShTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
//
// The pointer stays valid until the next call into this library on the same thread.
const char *sh_last_error(void);

// Library version as a static NUL-terminated string.
const char *sh_version(void);

// Creates a kernel from a shorthand (`simple1`, `lazy2:0.5`) or a JSON kernel spec.
//
// # Safety
// `spec` must be a NUL-terminated string and `out` a valid pointer.
enum ShStatus sh_kernel_new(const char *spec, struct ShKernel **out);

// # Safety
// `kernel` must come from [`sh_kernel_new`] and not be used afterwards; null is ignored.
void sh_kernel_free(struct ShKernel *kernel);

// Lattice dimension and support radius.
//
// # Safety
// `kernel` must be a live handle; `dim` and `radius` valid pointers.
enum ShStatus sh_kernel_shape(const struct ShKernel *kernel, size_t *dim, uint64_t *radius);

// q_n = sum_z (P^n_{0,z})^2 by exact convolution.
//
// # Safety
// `kernel` must be a live handle and `out` a valid pointer.
enum ShStatus sh_kernel_overlap(const struct ShKernel *kernel, size_t n, double *out);

// # Safety
// `kernel` must be a live handle and `out` a valid pointer.
enum ShStatus sh_spectral_new(const struct ShKernel *kernel, struct ShSpectral **out);

// # Safety
// `spectral` must come from [`sh_spectral_new`] and not be used afterwards; null is ignored.
void sh_spectral_free(struct ShSpectral *spectral);

// Upsilon(lambda) for lambda > 1.
//
// # Safety
// `spectral` must be a live handle and `out` a valid pointer.
enum ShStatus sh_spectral_upsilon(const struct ShSpectral *spectral,
                                  double lambda,
                                  enum ShUpsilonMethod method,
                                  double *out);

// sup{lambda > 1 : Upsilon(lambda) > x} with the empty set mapped to 1 and x = +inf to 0.
//
// # Safety
// `spectral` must be a live handle and `out` a valid pointer.
enum ShStatus sh_spectral_upsilon_inverse(const struct ShSpectral *spectral, double x, double *out);

// Burkholder constant c_p for p >= 2.
//
// # Safety
// `out` must be a valid pointer.
enum ShStatus sh_burkholder_constant(double p, double *out);

// Builds a problem from a JSON run configuration; missing keys take their defaults.
//
// # Safety
// `config_json` must be a NUL-terminated string (null means all defaults) and `out` a valid pointer.
enum ShStatus sh_problem_new(const char *config_json,
                             struct ShProblem **out);

// # Safety
// `problem` must come from [`sh_problem_new`] and not be used afterwards; null is ignored.
void sh_problem_free(struct ShProblem *problem);

// The fully resolved configuration as JSON, written NUL-terminated into `buf`.
//
// `needed` receives the buffer length required, including the terminator.
//
// # Safety
// `problem` must be a live handle, `buf` valid for `len` bytes (may be null when `len` is 0), `needed` a valid pointer.
enum ShStatus sh_problem_config(const struct ShProblem *problem,
                                char *buf,
                                size_t len,
                                size_t *needed);

// Evolves replica `replica` of the problem for `n_max` steps under the configured seed.
//
// # Safety
// `problem` must be a live handle and `out` a valid pointer.
enum ShStatus sh_evolve(const struct ShProblem *problem,
                        size_t n_max,
                        uint64_t replica,
                        struct ShTrajectory **out);

// # Safety
// `trajectory` must come from [`sh_evolve`] and not be used afterwards; null is ignored.
void sh_trajectory_free(struct ShTrajectory *trajectory);

// Number of stored steps, n_max + 1.
//
// # Safety
// `trajectory` must be a live handle and `out` a valid pointer.
enum ShStatus sh_trajectory_len(const struct ShTrajectory *trajectory, size_t *out);

// u_n(x) for a site given by `dim` coordinates.
//
// # Safety
// `trajectory` must be a live handle, `coords` valid for `dim` values, `out` a valid pointer.
enum ShStatus sh_trajectory_value(const struct ShTrajectory *trajectory,
                                  size_t n,
                                  const int64_t *coords,
                                  size_t dim,
                                  double *out);

// M_n = sup_x |u_n(x)|.
//
// # Safety
// `trajectory` must be a live handle and `out` a valid pointer.
enum ShStatus sh_trajectory_sup_norm(const struct ShTrajectory *trajectory, size_t n, double *out);

// sup_x E u_n(x)^2 for n = 0..len-1 by the exact renewal recursion.
//
// Needs linear sigma and white noise in the problem's configuration.
//
// # Safety
// `problem` must be a live handle and `out` valid for `len` values.
enum ShStatus sh_exact_second_moment_sup(const struct ShProblem *problem, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCHHEAT_H */
