#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace bodykin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Row-per-point storage, one 3D point per row.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;
/// Row-per-face storage, three 0-based vertex indices per row.
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;

struct Mesh {
  Points vertices;  // V x 3
  Faces faces;      // F x 3

  Eigen::Index vertex_count() const { return vertices.rows(); }
  Eigen::Index face_count() const { return faces.rows(); }
};

struct PointCloud {
  Points points;  // N x 3

  Eigen::Index size() const { return points.rows(); }
  bool empty() const { return points.rows() == 0; }
};

struct Skeleton {
  Points joints;                         // J x 3
  std::vector<std::string> joint_names;  // optional, empty or size J

  Eigen::Index joint_count() const { return joints.rows(); }
};

/// Articulated pose: one axis-angle vector per joint plus a root translation.
/// Row i holds theta_i * axis_i for joint i; the rotation of joint 0 is the
/// global root orientation.
struct PoseState {
  Points joint_rotations;  // J x 3 axis-angle
  Vec3 root_translation = Vec3::Zero();

  Eigen::Index joint_count() const { return joint_rotations.rows(); }

  static PoseState rest(Eigen::Index joint_count) {
    PoseState p;
    p.joint_rotations = Points::Zero(joint_count, 3);
    return p;
  }
};

/// Shape coefficients in units of the model's shape basis. Empty means the
/// plain template.
struct ShapeState {
  Eigen::VectorXd coefficients;

  Eigen::Index size() const { return coefficients.size(); }
  bool empty() const { return coefficients.size() == 0; }
};

}  // namespace bodykin
