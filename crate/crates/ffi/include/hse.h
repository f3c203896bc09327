#ifndef HSE_H
#define HSE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HseStatus {
  HSE_STATUS_OK = 0,
  HSE_STATUS_NULL_POINTER = 1,
  HSE_STATUS_INVALID_UTF8 = 2,
  HSE_STATUS_INVALID_ARGUMENT = 3,
  HSE_STATUS_IO = 4,
  HSE_STATUS_SIMULATION = 5,
  HSE_STATUS_FIT = 6,
  HSE_STATUS_ANALYSIS = 7,
  HSE_STATUS_INTEGRITY = 8,
  HSE_STATUS_BUFFER_TOO_SMALL = 9,
  HSE_STATUS_PANIC = 10,
} HseStatus;

/**
 * Opaque surrogate model.
 */
typedef struct HseModel HseModel;

/**
 * Opaque experiment plan.
 */
typedef struct HsePlan HsePlan;

/**
 * Opaque hyper space.
 */
typedef struct HseSpace HseSpace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *hse_last_error(void);

/**
 * Library version as a static string.
 */
const char *hse_version(void);

/**
 * # Safety
 * `s` is null or a string returned by this library and not yet freed.
 */
void hse_string_free(char *s);

/**
 * Parses and validates a hyper space document.
 *
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum HseStatus hse_space_from_json(const char *json, struct HseSpace **out);

/**
 * Space of a built-in exemplar, `"fev"` or `"yaw"`.
 *
 * # Safety
 * `name` is a NUL-terminated string; `out` is writable.
 */
enum HseStatus hse_space_builtin(const char *name, struct HseSpace **out);

/**
 * # Safety
 * `space` and `out` are valid.
 */
enum HseStatus hse_space_to_json(const struct HseSpace *space, char **out);

/**
 * Content hash used to tie plans, stores and models to a space.
 *
 * # Safety
 * `space` and `out` are valid.
 */
enum HseStatus hse_space_hash(const struct HseSpace *space, char **out);

/**
 * # Safety
 * `space` is null or a handle from this library, freed at most once.
 */
void hse_space_free(struct HseSpace *space);

/**
 * Latin hypercube plan; with `candidates > 1` the best of that many by
 * minimum pairwise distance.
 *
 * # Safety
 * `space` and `out` are valid.
 */
enum HseStatus hse_plan_lhs(const struct HseSpace *space,
                            size_t n,
                            uint64_t seed,
                            size_t candidates,
                            struct HsePlan **out);

/**
 * Number of runs, or 0 for a null handle.
 *
 * # Safety
 * `plan` is null or valid.
 */
size_t hse_plan_len(const struct HsePlan *plan);

/**
 * Plan as CSV text, `run_id` followed by design and use-case columns.
 *
 * # Safety
 * All pointers are valid.
 */
enum HseStatus hse_plan_to_csv(const struct HseSpace *space,
                               const struct HsePlan *plan,
                               char **out);

/**
 * # Safety
 * `plan` is null or a handle from this library, freed at most once.
 */
void hse_plan_free(struct HsePlan *plan);

/**
 * Fits a surrogate to a results CSV. `spec_json` is a model spec such as
 * `{"family":"polynomial","degree":2}`; null means that default.
 *
 * # Safety
 * `space`, `results_path` and `out` are valid; `spec_json` is null or a
 * NUL-terminated string.
 */
enum HseStatus hse_model_fit(const struct HseSpace *space,
                             const char *results_path,
                             const char *spec_json,
                             struct HseModel **out);

/**
 * # Safety
 * `json` is a NUL-terminated string; `out` is writable.
 */
enum HseStatus hse_model_from_json(const char *json, struct HseModel **out);

/**
 * # Safety
 * `model` and `out` are valid.
 */
enum HseStatus hse_model_to_json(const struct HseModel *model, char **out);

/**
 * Number of predicted targets, or 0 for a null handle.
 *
 * # Safety
 * `model` is null or valid.
 */
size_t hse_model_target_count(const struct HseModel *model);

/**
 * Predicts every target at `{"design": {...}, "use_case": {...}}`.
 * Writes `hse_model_target_count` values to `out_values` and, when
 * `out_extrapolated` is non-null, whether the point lies outside the
 * validation area.
 *
 * # Safety
 * `model`, `space` and `point_json` are valid; `out_values` has room for
 * `capacity` doubles; `out_extrapolated` is null or writable.
 */
enum HseStatus hse_model_predict(const struct HseModel *model,
                                 const struct HseSpace *space,
                                 const char *point_json,
                                 double *out_values,
                                 size_t capacity,
                                 int *out_extrapolated);

/**
 * # Safety
 * `model` is null or a handle from this library, freed at most once.
 */
void hse_model_free(struct HseModel *model);

/**
 * Whether cost vector `a` dominates `b`, both of length `k`.
 *
 * # Safety
 * `a` and `b` point to `k` doubles; `out` is writable.
 */
enum HseStatus hse_dominates(const double *a, const double *b, size_t k, int *out);

/**
 * Non-dominated rows of the row-major `n x k` matrix `costs`, ascending.
 * Rows with equal costs and equal `keys` repeat each other and only the
 * first is kept; a null `keys` makes every row distinct. `out_indices` needs
 * room for `n` entries; the front size goes to `out_len`.
 *
 * # Safety
 * `costs` points to `n * k` doubles, `keys` is null or points to `n`
 * integers, `out_indices` has room for `n` entries and `out_len` is writable.
 */
enum HseStatus hse_pareto_front(const double *costs,
                                size_t n,
                                size_t k,
                                const uint64_t *keys,
                                size_t *out_indices,
                                size_t *out_len);

/**
 * Electric-vehicle drivetrain: acceleration time to 50 km/h in seconds and
 * urban-cycle energy in kWh/100 km. `topology` 0 is single ratio (A1, `g2`
 * and `shift_speed` ignored), 1 is two-speed (A2).
 *
 * # Safety
 * `out_t_a50` and `out_e_c` are writable.
 */
enum HseStatus hse_fev_evaluate(double t_max,
                                double base_speed,
                                double g1,
                                int topology,
                                double g2,
                                double shift_speed,
                                double *out_t_a50,
                                double *out_e_c);

/**
 * Relative lateral-stability gain of yaw-moment control with gain `k` on a
 * circle of radius `r` metres while accelerating at `a_x` m/s^2.
 * `four_wheel_drive` non-zero selects 4WD.
 *
 * # Safety
 * `out_gain` is writable.
 */
enum HseStatus hse_yaw_gain(double k, int four_wheel_drive, double r, double a_x, double *out_gain);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSE_H */
