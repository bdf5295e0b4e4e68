#pragma once

#include <Eigen/Geometry>
#include <string>
#include <vector>

#include "bodykin/types.hpp"

namespace bodykin {

/// Skinned body model: template surface, kinematic tree, per-joint blend
/// weights, a joint regressor, and an optional linear shape basis.
struct BodyModel {
  Points template_vertices;                // V x 3, rest pose
  Faces faces;                             // F x 3
  Eigen::MatrixXd lbs_weights;             // J x V, columns sum to 1
  std::vector<int> parents;                // parents[0] == -1, parents[i] < i
  Eigen::MatrixXd joint_regressor;         // J x V, rows sum to 1
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 3>> shape_basis;  // B of V x 3
  std::string name;

  Eigen::Index joint_count() const { return lbs_weights.rows(); }
  Eigen::Index vertex_count() const { return template_vertices.rows(); }
  Eigen::Index shape_count() const {
    return static_cast<Eigen::Index>(shape_basis.size());
  }

  /// Checks structural invariants: tree shape, dimensions, non-negative
  /// weights with unit column sums (1e-6), regressor rows summing to 1,
  /// face indices in range, every edge shared by at most two faces.
  /// Throws ParamError on violation.
  void validate() const;
};

/// Output of the forward skinning pass.
struct LbsResult {
  Mesh mesh;                                       // posed surface
  Points joints;                                   // J x 3 posed joints
  std::vector<Eigen::Isometry3d> joint_transforms; // relative-to-rest, one per joint
};

/// Global joint transforms without skinning the surface; cheap path for
/// fitters that only need joint positions.
struct FkResult {
  std::vector<Eigen::Isometry3d> global;           // world-from-bone
  std::vector<Eigen::Isometry3d> relative_to_rest; // maps rest-pose points
  Points joints;                                   // J x 3 posed joints
  Points rest_joints;                              // J x 3 regressed rest joints
};

/// Template plus the linear shape offsets for `shape`. With an empty shape
/// this is the template itself. Throws ParamError when coefficient count
/// does not match the basis (empty is always accepted).
Points shaped_template(const BodyModel& model, const ShapeState& shape);

FkResult forward_kinematics(const BodyModel& model, const PoseState& pose,
                            const ShapeState& shape);

/// Linear blend skinning: v' = sum_j w_jv * T_j(v). Identity pose with zero
/// translation reproduces the shaped template.
LbsResult lbs_forward(const BodyModel& model, const PoseState& pose,
                      const ShapeState& shape = {});

/// joints = joint_regressor * mesh.vertices.
Points regress_joints(const BodyModel& model, const Mesh& mesh);

/// Directional derivative of the skinned vertices with respect to one
/// axis-angle coordinate (joint, coord). Matches central finite differences
/// to about 1e-3 relative; used to validate the fitter's gradients.
Points lbs_pose_derivative(const BodyModel& model, const PoseState& pose,
                           const ShapeState& shape, int joint, int coord);

/// Configuration for the procedurally generated tube-limb body used in tests
/// and pipeline demos. Joints form a star of chains radiating from the root;
/// each joint owns a capped, tapered tube of `rings_per_bone` rings with
/// `ring_resolution` vertices each.
struct SyntheticModelConfig {
  int joint_count = 24;
  int ring_resolution = 8;
  int rings_per_bone = 4;
  /// Number of limb chains; 0 picks clamp((joint_count - 1) / 4, 1, 6).
  int chain_count = 0;
  /// 0 gives rigid one-hot weights; 1 gives the widest blend zones
  /// (at most 0.5 of a vertex's weight moves to the neighbouring joint).
  double softness = 0.0;
  /// Number of shape directions (0, 1, or 2): global scale, then Z stretch.
  int shape_count = 0;
};

/// Builds a watertight multi-tube body with the requested skinning mode.
/// The joint regressor row of joint i averages the first ring of tube i,
/// whose centroid sits exactly at the rest joint.
BodyModel make_synthetic_model(const SyntheticModelConfig& config);

/// Rigid convenience overload used throughout the tests.
BodyModel make_synthetic_model(int joint_count, int ring_resolution);

}  // namespace bodykin
