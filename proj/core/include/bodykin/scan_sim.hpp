#pragma once

#include <cstdint>

#include "bodykin/types.hpp"

namespace bodykin {

/// Raster scan description: rays sweep azimuth (about +Z) within each
/// elevation row. All randomness (range noise, dropout) derives from `seed`
/// through per-ray counter-based streams, so results are reproducible and
/// independent of evaluation order.
struct ScanConfig {
  Vec3 sensor_origin = Vec3::Zero();
  double azimuth_min = -0.5;
  double azimuth_max = 0.5;
  double azimuth_step = 0.01;
  double elevation_min = -0.3;
  double elevation_max = 0.3;
  double elevation_step = 0.01;
  double range_noise_sigma = 0.0;     // meters, additive along the ray
  double dropout_probability = 0.0;   // in [0, 1)
  std::uint64_t seed = 0;

  void validate() const;  // throws ParamError on bad ranges/steps
};

/// Casts the raster rays against the mesh and keeps the nearest intersection
/// per ray (self-occlusion). Rays that miss produce nothing; an all-miss
/// scan returns an empty cloud (callers may warn, it is not an error).
PointCloud scan(const Mesh& mesh, const ScanConfig& config);

struct CropAugmentConfig {
  double cube_side = 2.0;             // meters, axis-aligned, pelvis-centered
  double translation_jitter = 0.2;    // meters, train mode only
  double rotation_jitter = 0.25 * 3.14159265358979323846;  // radians, yaw
  int target_points = 1024;
  std::uint64_t seed = 0;
};

enum class AugmentMode { train, eval };

/// Rigid transform applied during augmentation, as p' = rotation * p +
/// translation. Identity in eval mode; apply it to labels to keep them
/// aligned with the augmented cloud.
struct AppliedTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct CropResult {
  PointCloud cloud;
  AppliedTransform transform;
};

/// Crops to the cube |p - pelvis| <= side/2 per axis (inclusive), optionally
/// jitters with a seeded yaw rotation about the pelvis plus a translation
/// (train mode), and resamples to exactly target_points: uniform subsampling
/// without replacement when over, keep-all plus uniform with-replacement
/// draws when under. Throws DegenerateError when no point survives the crop.
CropResult crop_and_augment(const PointCloud& cloud, const Vec3& pelvis,
                            const CropAugmentConfig& config, AugmentMode mode);

}  // namespace bodykin
