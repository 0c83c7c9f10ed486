#ifndef NPSEG_H
#define NPSEG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. Values are stable.
 */
typedef enum NpsegStatus {
  NPSEG_STATUS_OK = 0,
  NPSEG_STATUS_NULL_POINTER = 1,
  NPSEG_STATUS_INVALID_UTF8 = 2,
  NPSEG_STATUS_BUFFER_TOO_SMALL = 3,
  NPSEG_STATUS_WRONG_COLORSPACE = 10,
  NPSEG_STATUS_DIMENSION_MISMATCH = 11,
  NPSEG_STATUS_CHANNEL_COUNT_MISMATCH = 12,
  NPSEG_STATUS_INVALID_PARAMETER = 13,
  NPSEG_STATUS_INVALID_DATA = 14,
  NPSEG_STATUS_DEGENERATE_TARGET = 20,
  NPSEG_STATUS_DEGENERATE_SOURCE = 21,
  NPSEG_STATUS_INSUFFICIENT_TISSUE = 22,
  NPSEG_STATUS_SINGULAR_BASIS = 23,
  NPSEG_STATUS_NON_REAL_RESULT = 30,
  NPSEG_STATUS_MALFORMED_XML = 40,
  NPSEG_STATUS_EMPTY_ANNOTATION_SET = 41,
  NPSEG_STATUS_SLIDE_TOO_SMALL = 42,
  NPSEG_STATUS_ANNOTATION_TOO_LARGE = 43,
  NPSEG_STATUS_OVERLAPPING_SPLIT = 44,
  NPSEG_STATUS_UNASSIGNED_SUBJECT = 45,
  NPSEG_STATUS_INVALID_THRESHOLD = 50,
  NPSEG_STATUS_EMPTY_SAMPLES = 51,
  NPSEG_STATUS_EMPTY_INPUT = 52,
  NPSEG_STATUS_IO = 60,
  NPSEG_STATUS_IMAGE = 61,
  NPSEG_STATUS_JSON = 62,
  NPSEG_STATUS_PANIC = 99,
} NpsegStatus;

/**
 * Stain normalization method.
 */
typedef enum NpsegMethod {
  NPSEG_METHOD_REINHARD = 0,
  NPSEG_METHOD_MACENKO = 1,
  NPSEG_METHOD_VAHADANE = 2,
  NPSEG_METHOD_COLOR_DECONV = 3,
} NpsegMethod;

/**
 * Opaque 8-bit image.
 */
typedef struct NpsegImage NpsegImage;

/**
 * Opaque fitted normalization target.
 */
typedef struct NpsegTarget NpsegTarget;

typedef struct NpsegMatchCounts {
  size_t tp;
  size_t fp;
  size_t fn_;
  double f1;
} NpsegMatchCounts;

typedef struct NpsegInterval {
  double lower;
  double mean;
  double upper;
} NpsegInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *npseg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *npseg_version(void);

/**
 * Copies `width*height*3` interleaved RGB bytes into a new image.
 *
 * # Safety
 * `data` must point to `width*height*3` readable bytes and `out` must be
 * writable.
 */
enum NpsegStatus npseg_image_from_rgb8(const uint8_t *data,
                                       size_t width,
                                       size_t height,
                                       struct NpsegImage **out);

/**
 * Copies `width*height` gray bytes into a new image.
 *
 * # Safety
 * `data` must point to `width*height` readable bytes and `out` must be
 * writable.
 */
enum NpsegStatus npseg_image_from_gray8(const uint8_t *data,
                                        size_t width,
                                        size_t height,
                                        struct NpsegImage **out);

/**
 * Width, height and channel count of an image.
 *
 * # Safety
 * `img` must be a live image handle; the output pointers may be NULL.
 */
enum NpsegStatus npseg_image_shape(const struct NpsegImage *img,
                                   size_t *width,
                                   size_t *height,
                                   size_t *channels);

/**
 * Copies the interleaved pixels into `buf`, which must hold
 * `width*height*channels` bytes.
 *
 * # Safety
 * `img` must be a live image handle and `buf` must point to `len`
 * writable bytes.
 */
enum NpsegStatus npseg_image_copy_pixels(const struct NpsegImage *img, uint8_t *buf, size_t len);

/**
 * # Safety
 * `img` must be NULL or a handle not freed before.
 */
void npseg_image_free(struct NpsegImage *img);

/**
 * RGB image plus the binary enhancement channel. A `cutoff` of zero or
 * less selects the default for the image size.
 *
 * # Safety
 * `img` must be a live RGB image handle and `out` writable.
 */
enum NpsegStatus npseg_enhance(const struct NpsegImage *img,
                               double cutoff,
                               double t_low,
                               double t_high,
                               struct NpsegImage **out);

/**
 * Fits a normalization target to a reference RGB image with default
 * estimator settings.
 *
 * # Safety
 * `img` must be a live RGB image handle and `out` writable.
 */
enum NpsegStatus npseg_target_fit(const struct NpsegImage *img,
                                  enum NpsegMethod method,
                                  struct NpsegTarget **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum NpsegStatus npseg_target_from_json(const char *json, struct NpsegTarget **out);

/**
 * Serializes a target; release the string with `npseg_string_free`.
 *
 * # Safety
 * `target` must be a live target handle and `out` writable.
 */
enum NpsegStatus npseg_target_to_json(const struct NpsegTarget *target, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not freed before.
 */
void npseg_string_free(char *s);

/**
 * # Safety
 * `target` must be NULL or a handle not freed before.
 */
void npseg_target_free(struct NpsegTarget *target);

/**
 * Normalizes an RGB image to `target`. `degenerate` (optional) is set to 1
 * when the source had no usable stain signal and was passed through or
 * only mean-shifted, 0 otherwise.
 *
 * # Safety
 * Handles must be live; `out` must be writable; `degenerate` may be NULL.
 */
enum NpsegStatus npseg_normalize(const struct NpsegImage *img,
                                 const struct NpsegTarget *target,
                                 struct NpsegImage **out,
                                 int32_t *degenerate);

/**
 * Dice score of two `width*height` gray masks (foreground above 127).
 *
 * # Safety
 * Both masks must point to `width*height` bytes; `out` must be writable.
 */
enum NpsegStatus npseg_dice(const uint8_t *pred,
                            const uint8_t *gt,
                            size_t width,
                            size_t height,
                            double *out);

/**
 * Mean absolute surface distance in pixels. `defined` is set to 0 (and
 * `out` to NaN) when either mask is empty.
 *
 * # Safety
 * Both masks must point to `width*height` bytes; outputs must be writable.
 */
enum NpsegStatus npseg_masd(const uint8_t *pred,
                            const uint8_t *gt,
                            size_t width,
                            size_t height,
                            double *out,
                            int32_t *defined);

/**
 * Instance-level matching counts and F1. `connectivity` is 4 or 8.
 *
 * # Safety
 * Both masks must point to `width*height` bytes; `out` must be writable.
 */
enum NpsegStatus npseg_instance_f1(const uint8_t *pred,
                                   const uint8_t *gt,
                                   size_t width,
                                   size_t height,
                                   double iou_threshold,
                                   uint32_t connectivity,
                                   struct NpsegMatchCounts *out);

/**
 * Percentile bootstrap interval of the mean of `n` samples.
 *
 * # Safety
 * `samples` must point to `n` doubles; `out` must be writable.
 */
enum NpsegStatus npseg_bootstrap_ci(const double *samples,
                                    size_t n,
                                    double level,
                                    size_t resamples,
                                    uint64_t seed,
                                    struct NpsegInterval *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NPSEG_H */
