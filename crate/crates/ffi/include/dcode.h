#ifndef DCODE_H
#define DCODE_H

#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every call.
 */
typedef enum DcStatus {
  DC_STATUS_OK = 0,
  DC_STATUS_NULL_ARGUMENT = 1,
  DC_STATUS_INVALID_ARGUMENT = 2,
  DC_STATUS_IO = 3,
  DC_STATUS_FORMAT = 4,
  DC_STATUS_DEGENERATE_IMAGE = 5,
  DC_STATUS_CODE_TOO_SHORT = 6,
  DC_STATUS_NUMERICAL = 7,
  DC_STATUS_BUFFER_TOO_SMALL = 8,
  DC_STATUS_INTERNAL = 9,
} DcStatus;

typedef enum DcPolarity {
  DC_POLARITY_LIGHT_ON_DARK = 0,
  DC_POLARITY_DARK_ON_LIGHT = 1,
} DcPolarity;

/**
 * Opaque density code.
 */
typedef struct DcCode DcCode;

/**
 * Opaque grayscale image.
 */
typedef struct DcImage DcImage;

/**
 * Encoding options; start from [`dc_encode_options_default`].
 */
typedef struct DcEncodeOptions {
  /**
   * Halton sequence length.
   */
  size_t points;
  /**
   * Nonzero selects `m = round(alpha * mass)` capped by `points`.
   */
  int32_t use_alpha;
  double alpha;
  double lambda;
} DcEncodeOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *dc_last_error_message(void);

/**
 * Static description of a `DcStatus` value.
 */
const char *dc_status_name(int32_t status);

/**
 * Load a PGM or PNG file; the format follows the extension.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcStatus dc_image_load(const char *path, struct DcImage **out);

/**
 * Build an image from `width * height` row-major intensities.
 *
 * # Safety
 * `pixels` must point to `width * height` doubles and `out` be valid.
 */
enum DcStatus dc_image_from_pixels(size_t width,
                                   size_t height,
                                   const double *pixels,
                                   struct DcImage **out);

/**
 * # Safety
 * `img` must be null or a live image handle.
 */
size_t dc_image_width(const struct DcImage *img);

/**
 * # Safety
 * `img` must be null or a live image handle.
 */
size_t dc_image_height(const struct DcImage *img);

/**
 * # Safety
 * `img` must be null or a handle not yet freed.
 */
void dc_image_free(struct DcImage *img);

struct DcEncodeOptions dc_encode_options_default(void);

/**
 * Encode an image against the 2-D Halton sequence. `polarity` is a
 * `DcPolarity` value.
 *
 * # Safety
 * `img` and `options` must be valid; `out` must be a valid pointer.
 */
enum DcStatus dc_encode(const struct DcImage *img,
                        int32_t polarity,
                        const struct DcEncodeOptions *options,
                        struct DcCode **out);

/**
 * Wrap `m` interleaved `(x, y)` pairs as a code.
 *
 * # Safety
 * `xy` must point to `2 * m` doubles and `out` be valid.
 */
enum DcStatus dc_code_from_points(const double *xy, size_t m, struct DcCode **out);

/**
 * # Safety
 * `code` must be null or a live code handle.
 */
size_t dc_code_len(const struct DcCode *code);

/**
 * Copy the points as interleaved `(x, y)` into `xy`, which holds
 * `capacity` points.
 *
 * # Safety
 * `xy` must be writable for `2 * capacity` doubles.
 */
enum DcStatus dc_code_points(const struct DcCode *code, double *xy, size_t capacity);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DcStatus dc_code_read(const char *path, struct DcCode **out);

/**
 * # Safety
 * `code` must be live and `path` a NUL-terminated string.
 */
enum DcStatus dc_code_write(const struct DcCode *code, const char *path);

/**
 * # Safety
 * `code` must be null or a handle not yet freed.
 */
void dc_code_free(struct DcCode *code);

/**
 * Median residual (percent of the target spread) after fitting a degree
 * `degree` polynomial map from `reference` onto `target`.
 *
 * # Safety
 * Both handles must be live and `delta` writable.
 */
enum DcStatus dc_delta_median(const struct DcCode *reference,
                              const struct DcCode *target,
                              uint32_t degree,
                              double *delta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCODE_H */
