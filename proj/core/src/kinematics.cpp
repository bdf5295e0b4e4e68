#include "bodykin/kinematics.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "bodykin/errors.hpp"
#include "bodykin/rotation.hpp"

namespace bodykin {

namespace {

struct ProcrustesSolve {
  Mat3 rotation;
  double weighted_rms;  // sqrt(sum w |t - R s|^2 / sum w)
};

ProcrustesSolve solve_procrustes(const Points& source, const Points& target,
                                 const Eigen::VectorXd& weights) {
  if (source.rows() != target.rows() || source.rows() != weights.size()) {
    throw ParamError("weighted_procrustes: source, target, and weights must "
                     "have matching row counts");
  }
  if ((weights.array() < 0.0).any()) {
    throw ParamError("weighted_procrustes: weights must be non-negative");
  }
  Eigen::Index active = 0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) ++active;
  }
  if (active < 3) {
    throw DegenerateError("weighted_procrustes: need at least 3 points with "
                          "positive weight, have " + std::to_string(active),
                          static_cast<int>(active));
  }

  // Cross-covariance of the weight-scaled sets: both sides carry w, so each
  // pair contributes w^2 * source * target^T.
  Mat3 m = Mat3::Zero();
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double w2 = weights[i] * weights[i];
    m.noalias() += w2 * source.row(i).transpose() * target.row(i);
  }
  if (!m.allFinite()) {
    throw NumericError("weighted_procrustes: non-finite cross-covariance");
  }

  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sing = svd.singularValues();
  int rank = 0;
  for (int k = 0; k < 3; ++k) {
    if (sing[k] > 1e-12 * std::max(sing[0], 1e-300)) ++rank;
  }
  if (rank < 2) {
    throw DegenerateError(
        "weighted_procrustes: cross-covariance rank " + std::to_string(rank) +
            " < 2 (collinear or empty configuration)",
        rank);
  }

  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 rotation = v * u.transpose();
  if (rotation.determinant() < 0.0) {
    v.col(2) = -v.col(2);  // smallest singular value sits in the last column
    rotation = v * u.transpose();
  }

  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Vec3 diff = target.row(i).transpose() -
                      rotation * source.row(i).transpose();
    num += weights[i] * diff.squaredNorm();
    den += weights[i];
  }
  return {rotation, std::sqrt(num / den)};
}

// Alignment for one joint: template-local source points vs. the observed
// residual after removing every already-solved joint's contribution.
struct JointAlignment {
  bool ok = false;
  Mat3 rotation = Mat3::Identity();
  double residual = -1.0;
};

JointAlignment align_joint(
    const BodyModel& model, const Mesh& mesh, const Points& shaped_verts,
    const Points& rest_joints, const std::vector<int>& selected, int joint,
    const Vec3& posed_joint,
    const std::vector<Eigen::Isometry3d>& solved_transforms,
    const std::vector<bool>& solved) {
  if (selected.size() < 3) return {};

  const Eigen::Index n = static_cast<Eigen::Index>(selected.size());
  Points source(n, 3), target(n, 3);
  Eigen::VectorXd weights(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    const int v = selected[row];
    // Remove every solved joint's share; whatever weight is still unsolved
    // (this joint plus any not-yet-visited descendants) is attributed to
    // this bone. Descendant transforms agree with this bone's at the shared
    // pivot, so the approximation error scales with the small lever arm of
    // the blend zone rather than with absolute vertex positions.
    double w_eff = model.lbs_weights(joint, v);
    Vec3 residual = mesh.vertices.row(v).transpose();
    for (Eigen::Index j = 0; j < model.joint_count(); ++j) {
      if (j == joint) continue;
      const double w = model.lbs_weights(j, v);
      if (w == 0.0) continue;
      if (solved[j]) {
        residual -= w * (solved_transforms[j] * shaped_verts.row(v).transpose());
      } else {
        w_eff += w;
      }
    }
    // Both sets in the joint's local frame: the template about the rest
    // joint, the observation about the posed joint (scaled by the effective
    // weight, since only that share of the vertex moves with this bone).
    source.row(row) = shaped_verts.row(v) - rest_joints.row(joint);
    target.row(row) = (residual - w_eff * posed_joint).transpose() / w_eff;
    weights(row) = w_eff;
  }

  try {
    const ProcrustesSolve solve = solve_procrustes(source, target, weights);
    return {true, solve.rotation, solve.weighted_rms};
  } catch (const DegenerateError&) {
    return {};
  }
}

Eigen::Isometry3d relative_to_rest(const Mat3& global_rotation,
                                   const Vec3& posed_joint,
                                   const Vec3& rest_joint) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = global_rotation;
  t.translation() = posed_joint - global_rotation * rest_joint;
  return t;
}

}  // namespace

Mat3 weighted_procrustes(const Points& source, const Points& target,
                         const Eigen::VectorXd& weights) {
  return solve_procrustes(source, target, weights).rotation;
}

JointVertexSelection select_vertices(const BodyModel& model, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ParamError("select_vertices: threshold must lie in (0, 1)");
  }
  JointVertexSelection sel;
  sel.weight_threshold = threshold;
  sel.indices_per_joint.resize(model.joint_count());
  for (Eigen::Index j = 0; j < model.joint_count(); ++j) {
    for (Eigen::Index v = 0; v < model.vertex_count(); ++v) {
      if (model.lbs_weights(j, v) > threshold) {
        sel.indices_per_joint[j].push_back(static_cast<int>(v));
      }
    }
  }
  return sel;
}

Mat3 estimate_root_rotation(const BodyModel& model, const Mesh& mesh,
                            const Mesh& shaped_template,
                            const JointVertexSelection& selection) {
  if (mesh.vertex_count() != model.vertex_count() ||
      shaped_template.vertex_count() != model.vertex_count()) {
    throw ParamError("estimate_root_rotation: vertex count mismatch");
  }
  const std::vector<int>& selected = selection.indices_per_joint.at(0);
  if (selected.size() < 3) {
    throw DegenerateError("estimate_root_rotation: root selection has " +
                              std::to_string(selected.size()) +
                              " vertices, need at least 3",
                          static_cast<int>(selected.size()));
  }
  const Points rest_joints = model.joint_regressor * shaped_template.vertices;
  const Points mesh_joints = model.joint_regressor * mesh.vertices;

  const Eigen::Index n = static_cast<Eigen::Index>(selected.size());
  Points source(n, 3), target(n, 3);
  Eigen::VectorXd weights(n);
  for (Eigen::Index row = 0; row < n; ++row) {
    const int v = selected[row];
    source.row(row) = shaped_template.vertices.row(v) - rest_joints.row(0);
    target.row(row) = mesh.vertices.row(v) - mesh_joints.row(0);
    weights(row) = model.lbs_weights(0, v);
  }
  return solve_procrustes(source, target, weights).rotation;
}

ShapeEstimate estimate_shape(const BodyModel& model, const Mesh& mesh) {
  if (model.shape_count() == 0) {
    throw UnsupportedError("estimate_shape: model '" + model.name +
                           "' has no shape basis");
  }
  if (mesh.vertex_count() != model.vertex_count()) {
    throw ParamError("estimate_shape: mesh vertex count mismatch");
  }
  const Eigen::Index j = model.joint_count();
  const Eigen::Index bones = j - 1;
  const Eigen::Index b = model.shape_count();
  if (bones < 1) {
    throw UnsupportedError("estimate_shape: model has no bones");
  }

  // Bone lengths are rigid under pose, so the articulated mesh's regressed
  // joints still carry the shape signal.
  const Points mesh_joints = model.joint_regressor * mesh.vertices;
  Eigen::VectorXd observed(bones);
  for (Eigen::Index i = 1; i < j; ++i) {
    observed[i - 1] =
        (mesh_joints.row(i) - mesh_joints.row(model.parents[i])).norm();
  }

  // Rest joints are linear in beta: rest(beta) = base + sum_b beta_b * rb[b].
  const Points base = model.joint_regressor * model.template_vertices;
  std::vector<Points> rb;
  rb.reserve(b);
  for (Eigen::Index k = 0; k < b; ++k) {
    rb.push_back(model.joint_regressor * model.shape_basis[k]);
  }

  constexpr double kClamp = 5.0;
  constexpr int kMaxIterations = 50;

  const auto evaluate = [&](const Eigen::VectorXd& coeffs,
                            Eigen::VectorXd* residual,
                            Eigen::MatrixXd* jac) -> double {
    double total = 0.0;
    for (Eigen::Index i = 1; i < j; ++i) {
      const int p = model.parents[i];
      Vec3 d = (base.row(i) - base.row(p)).transpose();
      for (Eigen::Index k = 0; k < b; ++k) {
        d += coeffs[k] * (rb[k].row(i) - rb[k].row(p)).transpose();
      }
      const double len = d.norm();
      const double r = observed[i - 1] - len;
      total += r * r;
      if (residual) (*residual)[i - 1] = r;
      if (jac) {
        const Vec3 unit = len > 1e-12 ? Vec3(d / len) : Vec3::Zero();
        for (Eigen::Index k = 0; k < b; ++k) {
          (*jac)(i - 1, k) =
              unit.dot((rb[k].row(i) - rb[k].row(p)).transpose());
        }
      }
    }
    return total;
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd residual(bones);
  Eigen::MatrixXd jac(bones, b);
  double cost = evaluate(beta, &residual, &jac);
  double damping = 1e-6;
  int iterations = 0;
  bool converged = false;
  while (iterations < kMaxIterations && !converged) {
    ++iterations;
    const Eigen::MatrixXd normal =
        jac.transpose() * jac + damping * Eigen::MatrixXd::Identity(b, b);
    const Eigen::VectorXd step =
        normal.ldlt().solve(jac.transpose() * residual);
    Eigen::VectorXd candidate =
        (beta + step).cwiseMax(-kClamp).cwiseMin(kClamp);
    const double candidate_cost = evaluate(candidate, nullptr, nullptr);
    if (candidate_cost <= cost) {
      const double moved = (candidate - beta).norm();
      beta = std::move(candidate);
      cost = evaluate(beta, &residual, &jac);
      damping = std::max(damping * 0.3, 1e-12);
      if (moved < 1e-12 || cost < 1e-24) converged = true;
    } else {
      damping *= 10.0;
      if (damping > 1e8) break;
    }
  }

  ShapeEstimate out;
  out.shape.coefficients = beta;
  out.converged = converged;
  out.iterations = iterations;
  out.final_cost = cost;
  return out;
}

IkResult meshik(const BodyModel& model, const Mesh& mesh,
                const ShapeState& shape, const JointVertexSelection& selection) {
  if (mesh.vertex_count() != model.vertex_count()) {
    throw ParamError("meshik: mesh has " + std::to_string(mesh.vertex_count()) +
                     " vertices, model has " +
                     std::to_string(model.vertex_count()));
  }
  if (static_cast<Eigen::Index>(selection.indices_per_joint.size()) !=
      model.joint_count()) {
    throw ParamError("meshik: selection joint count mismatch");
  }
  if (!mesh.vertices.allFinite()) {
    throw NumericError("meshik: mesh contains non-finite values");
  }

  const Eigen::Index j = model.joint_count();
  const Points shaped_verts = shaped_template(model, shape);
  const Points rest_joints = model.joint_regressor * shaped_verts;
  const Points mesh_joints = model.joint_regressor * mesh.vertices;

  IkResult out;
  out.local_rotations.assign(j, Mat3::Identity());
  out.global_rotations.assign(j, Mat3::Identity());
  out.per_joint_residual = Eigen::VectorXd::Constant(j, -1.0);
  out.pose.joint_rotations = Points::Zero(j, 3);

  std::vector<Eigen::Isometry3d> transforms(j, Eigen::Isometry3d::Identity());
  std::vector<bool> solved(j, false);
  Points posed_joints(j, 3);

  const auto solve_joint = [&](Eigen::Index i) {
    const Vec3 posed_joint =
        i == 0 ? Vec3(mesh_joints.row(0).transpose())
               : Vec3(transforms[model.parents[i]] *
                      rest_joints.row(i).transpose());
    posed_joints.row(i) = posed_joint;

    const JointAlignment alignment = align_joint(
        model, mesh, shaped_verts, rest_joints, selection.indices_per_joint[i],
        static_cast<int>(i), posed_joint, transforms, solved);

    const Mat3 parent_global =
        i == 0 ? Mat3::Identity() : out.global_rotations[model.parents[i]];
    if (alignment.ok) {
      out.global_rotations[i] = alignment.rotation;
      out.per_joint_residual[i] = alignment.residual;
      out.local_rotations[i] =
          parent_global.transpose() * out.global_rotations[i];
    } else {
      out.global_rotations[i] = parent_global;
      out.local_rotations[i] = Mat3::Identity();  // exact, not P^T P
    }
    transforms[i] =
        relative_to_rest(out.global_rotations[i], posed_joint,
                         rest_joints.row(i).transpose());
    solved[i] = true;
  };

  const auto worst_vertex_error = [&]() {
    double worst = 0.0;
    for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v) {
      Vec3 predicted = Vec3::Zero();
      for (Eigen::Index k = 0; k < j; ++k) {
        const double w = model.lbs_weights(k, v);
        if (w != 0.0) {
          predicted += w * (transforms[k] * shaped_verts.row(v).transpose());
        }
      }
      worst = std::max(
          worst, (predicted - mesh.vertices.row(v).transpose()).norm());
    }
    return worst;
  };

  // Cascade: parents precede children in index order, so ascending order is
  // the topological traversal. Each joint subtracts the solved ancestors'
  // contributions and attributes still-unsolved blend weight to itself.
  for (Eigen::Index i = 0; i < j; ++i) solve_joint(i);

  // Refinement: with every joint now carrying an estimate, re-solving a
  // joint subtracts all foreign contributions exactly, so the sweeps are
  // block-coordinate descent on the true skinning residual. Rigid models are
  // already exact after the cascade and exit after one sweep.
  constexpr int kMaxSweeps = 40;
  double previous = std::numeric_limits<double>::infinity();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    for (Eigen::Index i = 0; i < j; ++i) solve_joint(i);
    const double err = worst_vertex_error();
    if (err < 1e-11 || err > 0.999 * previous) break;
    previous = err;
  }

  for (Eigen::Index i = 0; i < j; ++i) {
    out.pose.joint_rotations.row(i) =
        canonical_axis_angle(matrix_to_axis_angle(out.local_rotations[i]));
  }
  out.pose.root_translation =
      mesh_joints.row(0).transpose() - rest_joints.row(0).transpose();
  return out;
}

}  // namespace bodykin
