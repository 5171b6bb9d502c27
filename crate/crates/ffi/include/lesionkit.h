#ifndef LESIONKIT_H
#define LESIONKIT_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LkStatus {
  LK_STATUS_OK = 0,
  LK_STATUS_NULL_POINTER = 1,
  LK_STATUS_INVALID_ARGUMENT = 2,
  LK_STATUS_INVALID_METRIC = 3,
  LK_STATUS_DIMENSION_MISMATCH = 4,
  LK_STATUS_NON_FINITE = 5,
  LK_STATUS_EMPTY = 6,
  LK_STATUS_PANIC = 7,
} LkStatus;

typedef struct LkAdaMax LkAdaMax;

typedef struct LkConfusion LkConfusion;

typedef struct LkHead LkHead;

typedef struct LkScheduler LkScheduler;

typedef struct LkStopper LkStopper;

/**
 * Summary scores of a confusion matrix.
 */
typedef struct LkMetrics {
  uint64_t total;
  double accuracy;
  /**
   * Mean one-vs-rest accuracy over classes.
   */
  double accuracy_one_vs_rest;
  double macro_precision;
  double macro_recall;
  double macro_f1;
  double weighted_precision;
  double weighted_recall;
  double weighted_f1;
} LkMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last non-OK status on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *lk_last_error(void);

/**
 * Static name of a status code.
 */
const char *lk_status_name(enum LkStatus status);

/**
 * 64-bit difference hash of a packed RGB8 buffer of `width * height * 3` bytes.
 *
 * # Safety
 * `pixels` must point to that many readable bytes and `out` to a writable u64.
 */
enum LkStatus lk_dhash_rgb8(const uint8_t *pixels, uint32_t width, uint32_t height, uint64_t *out);

/**
 * Same as [`lk_dhash_rgb8`] for a packed 8-bit gray buffer.
 *
 * # Safety
 * `pixels` must point to `width * height` readable bytes and `out` to a writable u64.
 */
enum LkStatus lk_dhash_gray8(const uint8_t *pixels, uint32_t width, uint32_t height, uint64_t *out);

uint32_t lk_hamming(uint64_t a, uint64_t b);

/**
 * # Safety
 * `out` must be a writable handle slot.
 */
enum LkStatus lk_scheduler_new(double initial_lr,
                               double factor,
                               uint32_t patience,
                               double min_lr,
                               struct LkScheduler **out);

/**
 * Feed one validation loss. `reduced` (may be NULL) receives whether the
 * learning rate dropped on this step.
 *
 * # Safety
 * `s` must come from [`lk_scheduler_new`].
 */
enum LkStatus lk_scheduler_step(struct LkScheduler *s, double val_loss, bool *reduced);

/**
 * Current learning rate, NaN for a NULL handle.
 *
 * # Safety
 * `s` must be NULL or come from [`lk_scheduler_new`].
 */
double lk_scheduler_lr(const struct LkScheduler *s);

/**
 * # Safety
 * `s` must be NULL or come from [`lk_scheduler_new`] and not be used afterwards.
 */
void lk_scheduler_free(struct LkScheduler *s);

struct LkStopper *lk_stopper_new(uint32_t patience);

/**
 * Feed one validation accuracy in [0, 1]. `improved` (may be NULL) receives
 * whether it beat the best so far.
 *
 * # Safety
 * `s` must come from [`lk_stopper_new`].
 */
enum LkStatus lk_stopper_step(struct LkStopper *s, double val_acc, bool *improved);

/**
 * # Safety
 * `s` must be NULL or come from [`lk_stopper_new`].
 */
bool lk_stopper_stopped(const struct LkStopper *s);

/**
 * # Safety
 * `s` must be NULL or come from [`lk_stopper_new`] and not be used afterwards.
 */
void lk_stopper_free(struct LkStopper *s);

struct LkAdaMax *lk_adamax_new(size_t len, double alpha, double beta1, double beta2);

/**
 * One in-place update of `params` from `grads`, both of length `len`.
 *
 * # Safety
 * `s` must come from [`lk_adamax_new`]; `params` and `grads` must each hold `len` doubles.
 */
enum LkStatus lk_adamax_step(struct LkAdaMax *s, double *params, const double *grads, size_t len);

/**
 * # Safety
 * `s` must be NULL or come from [`lk_adamax_new`] and not be used afterwards.
 */
void lk_adamax_free(struct LkAdaMax *s);

/**
 * Empty matrix over `classes` labels, NULL when `classes` is 0.
 */
struct LkConfusion *lk_confusion_new(uint32_t classes);

/**
 * # Safety
 * `cm` must come from [`lk_confusion_new`].
 */
enum LkStatus lk_confusion_add(struct LkConfusion *cm, uint32_t truth, uint32_t predicted);

/**
 * Count in row `truth`, column `predicted`; 0 when out of range.
 *
 * # Safety
 * `cm` must be NULL or come from [`lk_confusion_new`].
 */
uint64_t lk_confusion_count(const struct LkConfusion *cm, uint32_t truth, uint32_t predicted);

/**
 * # Safety
 * `cm` must come from [`lk_confusion_new`] and `out` must be writable.
 */
enum LkStatus lk_confusion_metrics(const struct LkConfusion *cm, struct LkMetrics *out);

/**
 * # Safety
 * `cm` must be NULL or come from [`lk_confusion_new`] and not be used afterwards.
 */
void lk_confusion_free(struct LkConfusion *cm);

/**
 * Linear softmax head. `params` holds the row-major `classes x dim` weights
 * followed by `classes` biases; NULL `params` gives an all-zero head.
 *
 * # Safety
 * `params` must be NULL or hold `len` doubles; `out` must be a writable handle slot.
 */
enum LkStatus lk_head_new(uint32_t classes,
                          uint32_t dim,
                          const double *params,
                          size_t len,
                          struct LkHead **out);

/**
 * Class probabilities for one feature vector. `probs` must hold `classes`
 * doubles; `predicted` (may be NULL) receives the arg-max.
 *
 * # Safety
 * `head` must come from [`lk_head_new`]; `x` must hold `dim` doubles and
 * `probs` `probs_len` doubles.
 */
enum LkStatus lk_head_forward(const struct LkHead *head,
                              const double *x,
                              size_t dim,
                              double *probs,
                              size_t probs_len,
                              uint32_t *predicted);

/**
 * # Safety
 * `head` must be NULL or come from [`lk_head_new`] and not be used afterwards.
 */
void lk_head_free(struct LkHead *head);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LESIONKIT_H */
