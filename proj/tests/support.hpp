// Shared test fixtures and independent oracle implementations. The oracles
// deliberately avoid the library's own code paths (plain loops, explicit
// homogeneous matrices, Eigen built-ins) so they can catch shared mistakes.
#pragma once

#include <Eigen/Geometry>
#include <filesystem>
#include <string>
#include <vector>

#include "bodykin/body_model.hpp"
#include "bodykin/rng.hpp"
#include "bodykin/types.hpp"

namespace testsupport {

// Unit icosphere centered at origin; `subdivisions` 0..4 gives 12..2562
// vertices. Watertight and connected.
bodykin::Mesh icosphere(int subdivisions, double radius = 1.0);

// Random connected triangulated (w x h) grid with jittered vertex positions.
bodykin::Mesh grid_mesh(bodykin::Rng& rng, int w, int h, double jitter = 0.1);

Eigen::Matrix3d random_rotation(bodykin::Rng& rng);

// Uniformly random unit vector.
Eigen::Vector3d random_unit(bodykin::Rng& rng);

// Random pose with per-joint rotation angle <= max_angle and root
// translation drawn from [-0.5, 0.5]^3 (zero when with_translation=false).
bodykin::PoseState random_pose(const bodykin::BodyModel& model,
                               bodykin::Rng& rng, double max_angle,
                               bool with_translation = true);

// Independent forward kinematics: explicit 4x4 homogeneous matrices, no
// Isometry3d, no shared helpers. Returns posed joints.
bodykin::Points fk_oracle_joints(const bodykin::BodyModel& model,
                                 const bodykin::PoseState& pose,
                                 const bodykin::ShapeState& shape);

// Independent linear blend skinning over the same 4x4 matrices: a plain
// triple loop over vertices and joints.
bodykin::Points lbs_oracle_vertices(const bodykin::BodyModel& model,
                                    const bodykin::PoseState& pose,
                                    const bodykin::ShapeState& shape);

// Temporary per-test directory, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

// Runs a command line, returns its exit code, and captures combined
// stdout+stderr into *output when non-null.
int run_command(const std::string& command_line, std::string* output = nullptr);

}  // namespace testsupport
