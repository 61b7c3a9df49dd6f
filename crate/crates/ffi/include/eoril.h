/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef EORIL_H
#define EORIL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of exchange slots in a sequence.
 */
#define EORIL_SLOT_COUNT 20

/**
 * Dimension of the process matrix.
 */
#define EORIL_CHI_DIM 14

typedef enum {
  EORIL_STATUS_OK = 0,
  EORIL_STATUS_INVALID_ARGUMENT = 1,
  EORIL_STATUS_NOT_A_SOLUTION = 2,
  EORIL_STATUS_NON_FINITE = 3,
  EORIL_STATUS_INCONSISTENT = 4,
  EORIL_STATUS_MISSING_RESET_STATE = 5,
  EORIL_STATUS_PARSE = 6,
  EORIL_STATUS_IO = 7,
  EORIL_STATUS_NULL_POINTER = 8,
  EORIL_STATUS_PANIC = 9,
} EorilStatus;

typedef enum {
  EORIL_GATE_NONE = 0,
  EORIL_GATE_IDENTITY = 1,
  EORIL_GATE_PAULI = 2,
  EORIL_GATE_CLIFFORD = 3,
} EorilGate;

typedef enum {
  EORIL_NOISE_MODEL_STATIC = 0,
  EORIL_NOISE_MODEL_MARKOVIAN = 1,
} EorilNoiseModel;

/**
 * Opaque noise-averaged process matrix.
 */
typedef struct EorilChi EorilChi;

/**
 * Opaque exchange sequence.
 */
typedef struct EorilSequence EorilSequence;

typedef struct {
  double f0;
  double f_total;
  /**
   * negative when no gate could be extracted
   */
  double gate_distance;
  double qa_phi;
  double qa_gamma;
  bool has_reset;
  double reset_alpha;
  double reset_beta_re;
  double reset_beta_im;
  double reset_theta;
  double reset_phi;
  double isometry_defect;
  bool passed;
} EorilVerification;

typedef struct {
  double mean;
  double sem;
} EorilEstimate;

typedef struct {
  EorilEstimate p_l_ind;
  EorilEstimate f_e;
  EorilEstimate f_q;
  EorilEstimate one_minus_f2;
  EorilEstimate eps_f;
  EorilEstimate eps_5;
  EorilEstimate eps_8;
  EorilEstimate eps_l_rem;
  bool has_eps_r;
  EorilEstimate eps_r;
} EorilMetrics;

typedef struct {
  double eps_l;
  double eps_1s;
  double eps_0t;
  double p_l_ind;
  double eps_f;
  double eps_5;
  double eps_8;
} EorilFlagInputs;

typedef struct {
  double leading_given_0;
  double leading_given_1;
  bool leading_given_1_defined;
  double leading_p_one;
  double exact_given_0;
  double exact_given_1;
  bool exact_given_1_defined;
  double exact_p_one;
  /**
   * sum of all joint table entries
   */
  double exact_total;
} EorilFlagResult;

typedef struct {
  double p_down;
  double p_up;
  double decay_eigenvalue;
  double coherence_weight;
} EorilGaugeStationary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *eoril_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *eoril_last_error(void);

/**
 * Bundled sequence by name (`no_flag`, `best_flag`, `worst_flag`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` and `flaggable` valid pointers
 * (`flaggable` may be NULL).
 */
EorilStatus eoril_sequence_bundled(const char *name, EorilSequence **out_seq, bool *flaggable);

/**
 * Sequence from `len` (= 20) angles in units of π; zero angles mark inactive slots.
 *
 * # Safety
 * `angles_pi` must point to `len` doubles; `out_seq` must be valid.
 */
EorilStatus eoril_sequence_from_angles_pi(const double *angles_pi,
                                          size_t len,
                                          EorilSequence **out_seq);

/**
 * Copy the angles (units of π) into `out_angles[0..len]`, `len` = 20.
 *
 * # Safety
 * `seq` must be a live handle; `out_angles` must hold `len` doubles.
 */
EorilStatus eoril_sequence_angles_pi(const EorilSequence *seq, double *out_angles, size_t len);

/**
 * # Safety
 * `seq` must be NULL or a handle not yet freed.
 */
void eoril_sequence_free(EorilSequence *seq);

/**
 * Score `seq` against the reset-if-leaked target.
 *
 * # Safety
 * `seq` must be a live handle; `result` a valid pointer.
 */
EorilStatus eoril_verify(const EorilSequence *seq,
                         bool flaggable,
                         EorilGate gate,
                         double threshold,
                         EorilVerification *result);

/**
 * Noise-averaged process matrix of `seq` in its QA frame.
 *
 * # Safety
 * `seq` must be a live handle; `out_chi` a valid pointer.
 */
EorilStatus eoril_chi_average(const EorilSequence *seq,
                              bool flaggable,
                              double sigma,
                              EorilNoiseModel model,
                              size_t samples,
                              uint64_t seed,
                              EorilChi **out_chi);

/**
 * Entry `(i, j)` of the averaged process matrix.
 *
 * # Safety
 * `chi` must be a live handle; `re` and `im` valid pointers.
 */
EorilStatus eoril_chi_entry(const EorilChi *chi, size_t i, size_t j, double *re, double *im);

/**
 * Error metrics of `chi`; `eps_R` uses the reset state of `ideal` when given.
 *
 * # Safety
 * `chi` must be a live handle, `ideal` NULL or a live handle, `result` valid.
 */
EorilStatus eoril_chi_metrics(const EorilChi *chi,
                              const EorilSequence *ideal,
                              EorilMetrics *result);

/**
 * # Safety
 * `chi` must be NULL or a handle not yet freed.
 */
void eoril_chi_free(EorilChi *chi);

/**
 * Leading-order and exact flag reliability.
 *
 * # Safety
 * `inputs` and `result` must be valid pointers.
 */
EorilStatus eoril_flag(const EorilFlagInputs *inputs, EorilFlagResult *result);

/**
 * Stationary gauge populations for relaxation probability `eta`.
 *
 * # Safety
 * `result` must be a valid pointer.
 */
EorilStatus eoril_gauge_stationary(double eta, EorilGaugeStationary *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EORIL_H */
