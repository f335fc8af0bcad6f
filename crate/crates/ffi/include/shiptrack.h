#ifndef SHIPTRACK_H
#define SHIPTRACK_H

#include <stddef.h>
#include <stdint.h>

typedef enum StStatus {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_POINTER = 1,
  ST_STATUS_INVALID_ARGUMENT = 2,
  ST_STATUS_PARSE = 3,
  ST_STATUS_IO = 4,
  // A geometric operation has no finite answer (horizon, divergence).
  ST_STATUS_GEOMETRY = 5,
  // Calibration or tracking input cannot determine a result.
  ST_STATUS_DEGENERATE = 6,
  ST_STATUS_OUT_OF_RANGE = 7,
  ST_STATUS_PANIC = 8,
} StStatus;

// Opaque camera model.
typedef struct StCamera StCamera;

// Opaque tracking result: the target's GPS fixes.
typedef struct StTrack StTrack;

typedef struct StCorrespondence {
  double timestamp_s;
  double x_s;
  double y_s;
  double lat_deg;
  double lon_deg;
} StCorrespondence;

// Detection in detector pixels.
typedef struct StDetection {
  uint64_t frame;
  double timestamp_s;
  double confidence;
  double cx;
  double cy;
  double sx;
  double sy;
} StDetection;

typedef struct StGpsFix {
  double timestamp_s;
  double lat_deg;
  double lon_deg;
} StGpsFix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *st_last_error(void);

// Library version as a static NUL-terminated string.
const char *st_version(void);

// Builds a camera from a row-major homography, distortion and origin.
//
// # Safety
// `h` must point to 9 readable doubles and `out` to a writable handle slot.
enum StStatus st_camera_new(const double *h,
                            double k1,
                            double center_x,
                            double center_y,
                            double origin_lat_deg,
                            double origin_lon_deg,
                            uint32_t width,
                            uint32_t height,
                            struct StCamera **out);

// Parses a camera document.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable handle slot.
enum StStatus st_camera_from_document(const char *text, struct StCamera **out);

// Reads a camera file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable handle slot.
enum StStatus st_camera_load(const char *path, struct StCamera **out);

// Serializes a camera. The returned string must be released with
// [`st_string_free`].
//
// # Safety
// `cam` must be a live handle and `out` a writable pointer slot.
enum StStatus st_camera_to_document(const struct StCamera *cam, char **out);

// # Safety
// `cam` must be null or a handle not yet freed.
void st_camera_free(struct StCamera *cam);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void st_string_free(char *s);

// Screen pixel to sea-plane meters; `z` receives the signed projective scale.
//
// # Safety
// `cam` must be a live handle; `x_w`, `y_w`, `z` writable doubles.
enum StStatus st_camera_screen_to_world(const struct StCamera *cam,
                                        double x,
                                        double y,
                                        double *x_w,
                                        double *y_w,
                                        double *z);

// Sea-plane meters to screen pixel.
//
// # Safety
// `cam` must be a live handle; `x`, `y`, `z` writable doubles.
enum StStatus st_camera_world_to_screen(const struct StCamera *cam,
                                        double x_w,
                                        double y_w,
                                        double *x,
                                        double *y,
                                        double *z);

// Bearing of the optical axis in degrees clockwise from north.
//
// # Safety
// `cam` must be a live handle and `out` a writable double.
enum StStatus st_camera_heading_deg(const struct StCamera *cam, double *out);

// Local east/north meters of a GPS point relative to an origin.
//
// # Safety
// `x`, `y` must be writable doubles.
enum StStatus st_gps_to_local(double origin_lat_deg,
                              double origin_lon_deg,
                              double lat_deg,
                              double lon_deg,
                              double *x,
                              double *y);

// Inverse of [`st_gps_to_local`].
//
// # Safety
// `lat_deg`, `lon_deg` must be writable doubles.
enum StStatus st_local_to_gps(double origin_lat_deg,
                              double origin_lon_deg,
                              double x,
                              double y,
                              double *lat_deg,
                              double *lon_deg);

// Great-circle distance in meters on the default earth.
double st_haversine_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

// Calibrates with the default configuration and the given camera position.
// `k1` and `rmse_px` may be null.
//
// # Safety
// `pairs` must point to `n` readable correspondences and `out` to a writable
// handle slot.
enum StStatus st_calibrate(const struct StCorrespondence *pairs,
                           size_t n,
                           double origin_lat_deg,
                           double origin_lon_deg,
                           struct StCamera **out,
                           double *k1,
                           double *rmse_px);

// Tracks the target vessel with the default configuration. `fps <= 0`
// derives the frame rate from the timestamps.
//
// # Safety
// `cam` must be a live handle, `dets` must point to `n` readable detections
// sorted by frame, and `out` to a writable handle slot.
enum StStatus st_track(const struct StCamera *cam,
                       const struct StDetection *dets,
                       size_t n,
                       double fps,
                       struct StTrack **out);

// Number of fixes in a track; 0 for null.
//
// # Safety
// `track` must be null or a live handle.
size_t st_track_len(const struct StTrack *track);

// # Safety
// `track` must be a live handle and `out` a writable fix.
enum StStatus st_track_get(const struct StTrack *track, size_t i, struct StGpsFix *out);

// # Safety
// `track` must be null or a handle not yet freed.
void st_track_free(struct StTrack *track);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHIPTRACK_H */
