#ifndef CHIRAL_META_H
#define CHIRAL_META_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Input and numerical failures use the CLI exit codes.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  /**
   * Bad argument, configuration, mesh, size limit or violated assumption.
   */
  CM_STATUS_INVALID_INPUT = 2,
  /**
   * Singular matrix, failed root search or failed linear solve.
   */
  CM_STATUS_NUMERICAL = 3,
  CM_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  CM_STATUS_INTERNAL = 5,
} CmStatus;

typedef struct CmBackground CmBackground;

typedef struct CmFoldy CmFoldy;

typedef struct CmMesh CmMesh;

typedef struct CmSpectrum CmSpectrum;

typedef struct CmComplex {
  double re;
  double im;
} CmComplex;

typedef struct CmEffective {
  struct CmComplex eps_eff;
  struct CmComplex mu_eff;
  struct CmComplex beta_eff;
} CmEffective;

/**
 * Dilute lattice parameters `(Λ, N, a, cₙ)`.
 */
typedef struct CmDilute {
  double lambda_vol;
  uint64_t n;
  double a;
  double c_n;
} CmDilute;

/**
 * Co-propagating left and right circularly polarized plane waves.
 */
typedef struct CmPlaneWave {
  double direction[3];
  struct CmComplex left;
  struct CmComplex right;
} CmPlaneWave;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the last error message on this thread, or NULL if none. Free it
 * with [`cm_string_free`].
 */
char *cm_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library (or be NULL) and not be freed twice.
 */
void cm_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cm_version(void);

/**
 * Build a background medium. `allow_kbeta_ge_1` nonzero accepts
 * `k_mβ_m ≥ 1`.
 *
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum CmStatus cm_background_new(double eps_m,
                                double mu_m,
                                double beta_m,
                                double omega,
                                int32_t allow_kbeta_ge_1,
                                struct CmBackground **out_bg);

/**
 * # Safety
 * `bg` must come from [`cm_background_new`] (or be NULL).
 */
void cm_background_free(struct CmBackground *bg);

/**
 * `k_mβ_m`, or NaN for a NULL handle.
 *
 * # Safety
 * `bg` must be a live handle or NULL.
 */
double cm_background_k_beta(const struct CmBackground *bg);

/**
 * # Safety
 * `out_mesh` must be a valid pointer to a handle slot.
 */
enum CmStatus cm_mesh_icosphere(uint32_t subdivisions, struct CmMesh **out_mesh);

/**
 * Load a triangulated OFF file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out_mesh` a valid handle slot.
 */
enum CmStatus cm_mesh_from_off(const char *path, struct CmMesh **out_mesh);

/**
 * # Safety
 * `mesh` must be a live handle or NULL.
 */
size_t cm_mesh_panel_count(const struct CmMesh *mesh);

/**
 * # Safety
 * `mesh` must come from this library (or be NULL).
 */
void cm_mesh_free(struct CmMesh *mesh);

/**
 * Neumann–Poincaré spectrum of `mesh`, keeping `mode_count` modes.
 *
 * # Safety
 * `mesh` must be a live handle; `out_spec` a valid handle slot.
 */
enum CmStatus cm_spectrum_compute(const struct CmMesh *mesh,
                                  size_t mode_count,
                                  struct CmSpectrum **out_spec);

/**
 * Number of retained eigenvalues.
 *
 * # Safety
 * `spec` must be a live handle or NULL.
 */
size_t cm_spectrum_len(const struct CmSpectrum *spec);

/**
 * Copy up to `len` retained eigenvalues into `buf`; `*written` receives the
 * number copied.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum CmStatus cm_spectrum_eigenvalues(const struct CmSpectrum *spec,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

/**
 * Eigenvalue and moment constant `cₙ` of the dominant (largest-moment)
 * cluster.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CmStatus cm_spectrum_dominant(const struct CmSpectrum *spec, double *lambda, double *c_n);

/**
 * # Safety
 * `spec` must come from this library (or be NULL).
 */
void cm_spectrum_free(struct CmSpectrum *spec);

/**
 * Resonant permittivity of mode `λₙ`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CmStatus cm_resonant_eps(const struct CmBackground *bg,
                              double lambda_n,
                              struct CmComplex *eps_star);

/**
 * Closed-form effective parameters at fill parameter `s ∈ [0, 1)`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CmStatus cm_effective_closed_form(const struct CmBackground *bg,
                                       double lambda_n,
                                       double s,
                                       struct CmEffective *result);

/**
 * Effective parameters of a dilute lattice of particles with permittivity
 * `eps_c`, from the exact tilde values.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CmStatus cm_effective_dilute(const struct CmBackground *bg,
                                  const struct CmDilute *dilute,
                                  double lambda_n,
                                  struct CmComplex eps_c,
                                  struct CmEffective *result);

/**
 * Scattered `(E, H)` of one particle at `point`, written as 12 doubles
 * (re, im of Ex, Ey, Ez, Hx, Hy, Hz). `guard_factor` is the far-field guard
 * in units of `delta`.
 *
 * # Safety
 * Pointers must be valid; `field` must hold 12 doubles.
 */
enum CmStatus cm_dipole_field(const struct CmBackground *bg,
                              double lambda_n,
                              double c_n,
                              struct CmComplex eps_c,
                              double delta,
                              const double (*center)[3],
                              const struct CmPlaneWave *wave,
                              double guard_factor,
                              const double (*point)[3],
                              double (*field)[12]);

/**
 * Solve the Foldy system on an `n³` lattice with finite-`n` tilde coupling.
 *
 * # Safety
 * Pointers must be valid.
 */
enum CmStatus cm_foldy_solve(const struct CmBackground *bg,
                             const struct CmDilute *dilute,
                             double lambda_n,
                             struct CmComplex eps_c,
                             double eta,
                             const struct CmPlaneWave *wave,
                             struct CmFoldy **out_foldy);

/**
 * Relative residual of the accepted Foldy solve, NaN for NULL.
 *
 * # Safety
 * `foldy` must be a live handle or NULL.
 */
double cm_foldy_residual(const struct CmFoldy *foldy);

/**
 * Scattered field of the solved lattice at `point` (12 doubles).
 *
 * # Safety
 * Pointers must be valid; `field` must hold 12 doubles.
 */
enum CmStatus cm_foldy_scattered(const struct CmFoldy *foldy,
                                 const double (*point)[3],
                                 double (*field)[12]);

/**
 * # Safety
 * `foldy` must come from [`cm_foldy_solve`] (or be NULL).
 */
void cm_foldy_free(struct CmFoldy *foldy);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIRAL_META_H */
