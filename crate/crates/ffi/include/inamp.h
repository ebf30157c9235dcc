#ifndef INAMP_H
#define INAMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum InampStatus {
  INAMP_STATUS_OK = 0,
  INAMP_STATUS_NULL_POINTER = 1,
  INAMP_STATUS_INVALID_ARGUMENT = 2,
  INAMP_STATUS_IO = 3,
  INAMP_STATUS_FORMAT = 4,
  INAMP_STATUS_SHAPE = 5,
  INAMP_STATUS_INTERNAL = 6,
  INAMP_STATUS_PANIC = 7,
} InampStatus;

typedef enum InampIndexKind {
  INAMP_INDEX_KIND_NDVI = 0,
  INAMP_INDEX_KIND_NBR = 1,
  INAMP_INDEX_KIND_NDBI = 2,
} InampIndexKind;

/**
 * Opaque multi-spectral raster.
 */
typedef struct InampImage InampImage;

/**
 * Opaque trained classifier.
 */
typedef struct InampModel InampModel;

/**
 * Scores from [`inamp_metrics`]. `kappa` is NaN when every label and
 * prediction fall in one class.
 */
typedef struct InampMetrics {
  double accuracy;
  double kappa;
  double fn_rate;
} InampMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *inamp_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *inamp_last_error_message(void);

/**
 * Reads an MSIB raster into `*out`.
 */
enum InampStatus inamp_image_read(const char *path, struct InampImage **out);

/**
 * Builds an image from `height × width × channels` values in (row, col,
 * band) order. Bands are named by `names` (`channels` C strings) or, if
 * `names` is null, `b0, b1, …`.
 */
enum InampStatus inamp_image_new(size_t width,
                                 size_t height,
                                 size_t channels,
                                 const float *values,
                                 const char *const *names,
                                 struct InampImage **out);

/**
 * Writes width, height and band count; any output pointer may be null.
 */
enum InampStatus inamp_image_dims(const struct InampImage *img,
                                  size_t *width,
                                  size_t *height,
                                  size_t *channels);

void inamp_image_free(struct InampImage *img);

/**
 * Writes the `height × width` index map into `out` (length `len`), using
 * bands named red, nir and swir2.
 */
enum InampStatus inamp_spectral_index(const struct InampImage *img,
                                      enum InampIndexKind kind,
                                      float *out,
                                      size_t len);

/**
 * Loads a model checkpoint into `*out`.
 */
enum InampStatus inamp_model_load(const char *path, struct InampModel **out);

/**
 * Number of classes the model predicts, 0 for a null handle.
 */
size_t inamp_model_n_classes(const struct InampModel *model);

void inamp_model_free(struct InampModel *model);

/**
 * Classifies one image. The model's bands are looked up by name in the
 * image. `probs` receives `n_classes` probabilities (length `len`);
 * `predicted` may be null.
 */
enum InampStatus inamp_model_classify(const struct InampModel *model,
                                      const struct InampImage *img,
                                      float *probs,
                                      size_t len,
                                      size_t *predicted);

/**
 * Accuracy, kappa and miss rate of `target` from `n` label pairs over `k`
 * classes.
 */
enum InampStatus inamp_metrics(const uint32_t *truth,
                               const uint32_t *predicted,
                               size_t n,
                               size_t k,
                               size_t target,
                               struct InampMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INAMP_H */
