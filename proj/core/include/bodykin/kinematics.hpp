#pragma once

#include <vector>

#include "bodykin/body_model.hpp"
#include "bodykin/types.hpp"

namespace bodykin {

/// Per-joint vertex index lists used to drive the cascaded IK solve.
struct JointVertexSelection {
  std::vector<std::vector<int>> indices_per_joint;  // ascending within a joint
  double weight_threshold = 0.85;
};

/// Result of the cascaded Procrustes solve.
struct IkResult {
  std::vector<Mat3> local_rotations;   // parent-relative
  std::vector<Mat3> global_rotations;  // global_rotations[i] = global[parent] * local[i]
  PoseState pose;                      // canonical axis-angle + root translation
  /// Weighted RMS alignment residual per joint, meters. A joint whose
  /// selection was empty or degenerate falls back to the identity local
  /// rotation and reports the sentinel -1 here.
  Eigen::VectorXd per_joint_residual;
};

/// Rotation-only weighted orthogonal Procrustes. Both point sets must
/// already be centered by the caller; rows with zero weight are ignored.
/// Returns the proper rotation R maximizing sum_i w_i^2 * target_i . R source_i
/// (equivalently minimizing sum_i |w_i (target_i - R source_i)|^2). When the
/// best orthogonal alignment is a reflection, the sign of the singular vector
/// paired with the smallest singular value is flipped so det(R) = +1 always.
/// Throws DegenerateError (with the observed rank) when fewer than three
/// nonzero-weight points remain or the cross-covariance has rank < 2;
/// ParamError on size mismatch or negative weights.
Mat3 weighted_procrustes(const Points& source, const Points& target,
                         const Eigen::VectorXd& weights);

/// Vertices with lbs_weights[j][v] strictly greater than threshold, per
/// joint, ascending. Threshold must lie in (0, 1).
JointVertexSelection select_vertices(const BodyModel& model,
                                     double threshold = 0.85);

/// Global root orientation: Procrustes over the root joint's selected
/// vertices, both sets centered on their respective root joint positions.
Mat3 estimate_root_rotation(const BodyModel& model, const Mesh& mesh,
                            const Mesh& shaped_template,
                            const JointVertexSelection& selection);

struct ShapeEstimate {
  ShapeState shape;
  bool converged = false;
  int iterations = 0;
  double final_cost = 0.0;
};

/// Shape coefficients that best reproduce the mesh's bone lengths
/// (regressed joints), solved by damped Gauss-Newton (damping 1e-3, at most
/// 50 iterations, coefficients clamped to |b| <= 5). Bone lengths are
/// invariant under pose, so the mesh may be articulated.
/// Throws UnsupportedError when the model has no shape basis.
ShapeEstimate estimate_shape(const BodyModel& model, const Mesh& mesh);

/// Recover the full pose from an unconstrained mesh with the model's
/// topology: walk the kinematic tree from the root, and for each joint align
/// the template's selected vertices to what remains of the observed vertices
/// once all previously solved joints' skinned contributions are removed.
IkResult meshik(const BodyModel& model, const Mesh& mesh,
                const ShapeState& shape, const JointVertexSelection& selection);

}  // namespace bodykin
