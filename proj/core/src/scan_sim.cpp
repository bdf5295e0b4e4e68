#include "bodykin/scan_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bodykin/errors.hpp"
#include "bodykin/rng.hpp"

namespace bodykin {

namespace {

// Watertight ray-triangle intersection (Woop, Benthin, Wald 2013): project
// triangles into a ray-aligned frame and compute edge functions with
// consistent orientation, so an edge shared by two triangles can never be
// missed or hit twice with different signs.
struct RayFrame {
  int kx, ky, kz;
  double sx, sy, sz;
  Vec3 origin;
};

RayFrame make_frame(const Vec3& origin, const Vec3& dir) {
  RayFrame f;
  f.origin = origin;
  f.kz = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(dir[k]) > std::abs(dir[f.kz])) f.kz = k;
  }
  f.kx = (f.kz + 1) % 3;
  f.ky = (f.kx + 1) % 3;
  if (dir[f.kz] < 0.0) std::swap(f.kx, f.ky);
  f.sx = dir[f.kx] / dir[f.kz];
  f.sy = dir[f.ky] / dir[f.kz];
  f.sz = 1.0 / dir[f.kz];
  return f;
}

// Returns the ray parameter t > tmin of the intersection, or +inf.
double intersect(const RayFrame& f, const Vec3& a, const Vec3& b,
                 const Vec3& c, double tmin) {
  const Vec3 pa = a - f.origin;
  const Vec3 pb = b - f.origin;
  const Vec3 pc = c - f.origin;

  const double ax = pa[f.kx] - f.sx * pa[f.kz];
  const double ay = pa[f.ky] - f.sy * pa[f.kz];
  const double bx = pb[f.kx] - f.sx * pb[f.kz];
  const double by = pb[f.ky] - f.sy * pb[f.kz];
  const double cx = pc[f.kx] - f.sx * pc[f.kz];
  const double cy = pc[f.ky] - f.sy * pc[f.kz];

  const double u = cx * by - cy * bx;
  const double v = ax * cy - ay * cx;
  const double w = bx * ay - by * ax;

  const bool all_nonneg = u >= 0.0 && v >= 0.0 && w >= 0.0;
  const bool all_nonpos = u <= 0.0 && v <= 0.0 && w <= 0.0;
  if (!all_nonneg && !all_nonpos) {
    return std::numeric_limits<double>::infinity();
  }
  const double det = u + v + w;
  if (det == 0.0) return std::numeric_limits<double>::infinity();

  const double az = f.sz * pa[f.kz];
  const double bz = f.sz * pb[f.kz];
  const double cz = f.sz * pc[f.kz];
  const double t = (u * az + v * bz + w * cz) / det;
  return t > tmin ? t : std::numeric_limits<double>::infinity();
}

}  // namespace

void ScanConfig::validate() const {
  if (!(azimuth_step > 0.0) || !(elevation_step > 0.0)) {
    throw ParamError("scan config: steps must be > 0");
  }
  if (azimuth_max < azimuth_min || elevation_max < elevation_min) {
    throw ParamError("scan config: max must be >= min");
  }
  if (!(range_noise_sigma >= 0.0)) {
    throw ParamError("scan config: range_noise_sigma must be >= 0");
  }
  if (!(dropout_probability >= 0.0) || dropout_probability >= 1.0) {
    throw ParamError("scan config: dropout_probability must lie in [0, 1)");
  }
  if (!sensor_origin.allFinite()) {
    throw NumericError("scan config: non-finite sensor origin");
  }
}

PointCloud scan(const Mesh& mesh, const ScanConfig& config) {
  config.validate();
  if (!mesh.vertices.allFinite()) {
    throw NumericError("scan: mesh contains non-finite values");
  }

  // Round to the nearest step count so a max that is an exact multiple of
  // step survives floating-point division; the loops trim any overshoot.
  const auto count_steps = [](double lo, double hi, double step) {
    return static_cast<Eigen::Index>(std::floor((hi - lo) / step + 0.5)) + 1;
  };
  const Eigen::Index n_az =
      count_steps(config.azimuth_min, config.azimuth_max, config.azimuth_step);
  const Eigen::Index n_el = count_steps(config.elevation_min,
                                        config.elevation_max,
                                        config.elevation_step);

  std::vector<Vec3> hits;
  hits.reserve(static_cast<std::size_t>(n_az * n_el));
  for (Eigen::Index ei = 0; ei < n_el; ++ei) {
    const double el = config.elevation_min + ei * config.elevation_step;
    if (el > config.elevation_max + 1e-12) break;
    for (Eigen::Index ai = 0; ai < n_az; ++ai) {
      const double az = config.azimuth_min + ai * config.azimuth_step;
      if (az > config.azimuth_max + 1e-12) break;

      const Vec3 dir(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                     std::sin(el));
      const RayFrame frame = make_frame(config.sensor_origin, dir);

      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index face = 0; face < mesh.face_count(); ++face) {
        const double t = intersect(
            frame, mesh.vertices.row(mesh.faces(face, 0)).transpose(),
            mesh.vertices.row(mesh.faces(face, 1)).transpose(),
            mesh.vertices.row(mesh.faces(face, 2)).transpose(), 1e-9);
        if (t < best) best = t;  // strict <: ties keep the lowest face index
      }
      if (!std::isfinite(best)) continue;

      // Per-ray random stream: dropout draw first, then the range noise.
      Rng ray_rng = Rng::stream(config.seed, static_cast<std::uint64_t>(
                                                 ei * n_az + ai));
      if (config.dropout_probability > 0.0 &&
          ray_rng.next_double() < config.dropout_probability) {
        continue;
      }
      double range = best;
      if (config.range_noise_sigma > 0.0) {
        range += ray_rng.gaussian(0.0, config.range_noise_sigma);
      }
      hits.push_back(config.sensor_origin + range * dir);
    }
  }

  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(hits.size()), 3);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    cloud.points.row(static_cast<Eigen::Index>(i)) = hits[i].transpose();
  }
  return cloud;
}

CropResult crop_and_augment(const PointCloud& cloud, const Vec3& pelvis,
                            const CropAugmentConfig& config, AugmentMode mode) {
  if (!(config.cube_side > 0.0)) {
    throw ParamError("crop config: cube_side must be > 0");
  }
  if (config.translation_jitter < 0.0 || config.rotation_jitter < 0.0) {
    throw ParamError("crop config: jitters must be >= 0");
  }
  if (config.target_points < 1) {
    throw ParamError("crop config: target_points must be >= 1");
  }
  if (!pelvis.allFinite()) throw NumericError("crop: non-finite pelvis");
  if (!cloud.points.allFinite()) {
    throw NumericError("crop: cloud contains non-finite values");
  }

  const double half = 0.5 * config.cube_side;
  std::vector<Eigen::Index> inside;
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud.points.row(i).transpose() - pelvis;
    if (std::abs(d.x()) <= half && std::abs(d.y()) <= half &&
        std::abs(d.z()) <= half) {
      inside.push_back(i);
    }
  }
  if (inside.empty()) {
    throw DegenerateError(
        "crop: no points inside the cube centered (" +
        std::to_string(pelvis.x()) + ", " + std::to_string(pelvis.y()) + ", " +
        std::to_string(pelvis.z()) + ") with side " +
        std::to_string(config.cube_side));
  }

  Points kept(static_cast<Eigen::Index>(inside.size()), 3);
  for (std::size_t r = 0; r < inside.size(); ++r) {
    kept.row(static_cast<Eigen::Index>(r)) = cloud.points.row(inside[r]);
  }

  Rng rng(config.seed);
  CropResult result;
  if (mode == AugmentMode::train) {
    // Fixed draw order (tx, ty, tz, yaw) so seeds replay identically.
    const double tj = config.translation_jitter;
    const Vec3 jitter(rng.uniform(-tj, tj), rng.uniform(-tj, tj),
                      rng.uniform(-tj, tj));
    const double yaw =
        rng.uniform(-config.rotation_jitter, config.rotation_jitter);
    Mat3 rot;
    rot << std::cos(yaw), -std::sin(yaw), 0.0, std::sin(yaw), std::cos(yaw),
        0.0, 0.0, 0.0, 1.0;
    // Rotate about the pelvis, then translate: p' = R (p - pelvis) + pelvis + t.
    kept = (kept.rowwise() - pelvis.transpose()) * rot.transpose();
    kept.rowwise() += (pelvis + jitter).transpose();
    result.transform.rotation = rot;
    result.transform.translation = pelvis + jitter - rot * pelvis;
  }

  const Eigen::Index n = kept.rows();
  const Eigen::Index target = config.target_points;
  if (n == target) {
    result.cloud.points = std::move(kept);
    return result;
  }

  std::vector<Eigen::Index> pick;
  pick.reserve(static_cast<std::size_t>(target));
  if (n > target) {
    // Partial Fisher-Yates, then ascending order to stay scan-ordered.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (Eigen::Index i = 0; i < target; ++i) {
      const auto j = static_cast<Eigen::Index>(
          i + static_cast<Eigen::Index>(rng.next_below(
                  static_cast<std::uint64_t>(n - i))));
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(j)]);
    }
    pick.assign(idx.begin(), idx.begin() + target);
    std::sort(pick.begin(), pick.end());
  } else {
    for (Eigen::Index i = 0; i < n; ++i) pick.push_back(i);
    for (Eigen::Index i = n; i < target; ++i) {
      pick.push_back(static_cast<Eigen::Index>(
          rng.next_below(static_cast<std::uint64_t>(n))));
    }
  }

  result.cloud.points.resize(target, 3);
  for (Eigen::Index i = 0; i < target; ++i) {
    result.cloud.points.row(i) = kept.row(pick[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace bodykin
