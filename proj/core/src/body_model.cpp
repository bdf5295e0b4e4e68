#include "bodykin/body_model.hpp"

#include <cmath>
#include <string>

#include "bodykin/errors.hpp"
#include "bodykin/mesh_utils.hpp"
#include "bodykin/rotation.hpp"

namespace bodykin {

namespace {

void check_pose(const BodyModel& model, const PoseState& pose) {
  if (pose.joint_rotations.rows() != model.joint_count()) {
    throw ParamError("pose has " + std::to_string(pose.joint_rotations.rows()) +
                     " joints, model has " +
                     std::to_string(model.joint_count()));
  }
  if (!pose.joint_rotations.allFinite() ||
      !pose.root_translation.allFinite()) {
    throw NumericError("pose contains non-finite values");
  }
}

void check_shape(const BodyModel& model, const ShapeState& shape) {
  if (shape.empty()) return;
  if (model.shape_count() == 0) {
    throw ParamError("model '" + model.name +
                     "' has no shape basis; shape must be empty");
  }
  if (shape.size() != model.shape_count()) {
    throw ParamError("shape has " + std::to_string(shape.size()) +
                     " coefficients, model basis has " +
                     std::to_string(model.shape_count()));
  }
  if (!shape.coefficients.allFinite()) {
    throw NumericError("shape contains non-finite values");
  }
}

// Bone-local transform: rotate about the rest joint offset from the parent.
Eigen::Isometry3d local_transform(const Mat3& rotation, const Vec3& offset) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = rotation;
  t.translation() = offset;
  return t;
}

}  // namespace

void BodyModel::validate() const {
  const Eigen::Index j = joint_count();
  const Eigen::Index v = vertex_count();
  if (j == 0 || v == 0) throw ParamError("model has no joints or no vertices");
  if (static_cast<Eigen::Index>(parents.size()) != j) {
    throw ParamError("parents size != joint count");
  }
  if (parents[0] != -1) throw ParamError("parents[0] must be -1 (root)");
  for (Eigen::Index i = 1; i < j; ++i) {
    if (parents[i] < 0 || parents[i] >= i) {
      throw ParamError("parents[" + std::to_string(i) +
                       "] must reference an earlier joint");
    }
  }
  if (lbs_weights.cols() != v) throw ParamError("lbs_weights must be J x V");
  if ((lbs_weights.array() < 0.0).any()) {
    throw ParamError("lbs_weights must be non-negative");
  }
  const Eigen::VectorXd col_sums = lbs_weights.colwise().sum();
  if ((col_sums.array() - 1.0).abs().maxCoeff() > 1e-6) {
    throw ParamError("lbs_weights columns must sum to 1 within 1e-6");
  }
  if (joint_regressor.rows() != j || joint_regressor.cols() != v) {
    throw ParamError("joint_regressor must be J x V");
  }
  const Eigen::VectorXd row_sums = joint_regressor.rowwise().sum();
  if ((row_sums.array() - 1.0).abs().maxCoeff() > 1e-6) {
    throw ParamError("joint_regressor rows must sum to 1 within 1e-6");
  }
  for (const auto& basis : shape_basis) {
    if (basis.rows() != v) throw ParamError("shape basis entry must be V x 3");
  }
  if (!template_vertices.allFinite()) {
    throw NumericError("template contains non-finite values");
  }
  const auto counts = edge_face_counts(faces, v);
  for (std::size_t e = 0; e < counts.size(); ++e) {
    if (counts[e] > 2) {
      throw ParamError("mesh edge shared by more than two faces");
    }
  }
}

Points shaped_template(const BodyModel& model, const ShapeState& shape) {
  check_shape(model, shape);
  Points out = model.template_vertices;
  for (Eigen::Index b = 0; b < shape.size(); ++b) {
    out += shape.coefficients[b] * model.shape_basis[b];
  }
  return out;
}

FkResult forward_kinematics(const BodyModel& model, const PoseState& pose,
                            const ShapeState& shape) {
  check_pose(model, pose);
  const Points verts = shaped_template(model, shape);
  const Eigen::Index j = model.joint_count();

  FkResult fk;
  fk.rest_joints = model.joint_regressor * verts;
  fk.global.resize(j);
  fk.relative_to_rest.resize(j);
  fk.joints.resize(j, 3);

  for (Eigen::Index i = 0; i < j; ++i) {
    const Mat3 r = axis_angle_to_matrix(pose.joint_rotations.row(i));
    if (i == 0) {
      fk.global[0] = local_transform(
          r, fk.rest_joints.row(0).transpose() + pose.root_translation);
    } else {
      const int p = model.parents[i];
      const Vec3 offset =
          (fk.rest_joints.row(i) - fk.rest_joints.row(p)).transpose();
      fk.global[i] = fk.global[p] * local_transform(r, offset);
    }
    fk.joints.row(i) = fk.global[i].translation();
    // Relative-to-rest: carries rest-pose points, so subtract the rest joint.
    fk.relative_to_rest[i] = fk.global[i];
    fk.relative_to_rest[i].translation() -=
        fk.global[i].linear() * fk.rest_joints.row(i).transpose();
  }
  return fk;
}

LbsResult lbs_forward(const BodyModel& model, const PoseState& pose,
                      const ShapeState& shape) {
  const Points verts = shaped_template(model, shape);
  const FkResult fk = forward_kinematics(model, pose, shape);

  Points posed = Points::Zero(model.vertex_count(), 3);
  for (Eigen::Index i = 0; i < model.joint_count(); ++i) {
    const Mat3& a = fk.relative_to_rest[i].linear();
    const Vec3& t = fk.relative_to_rest[i].translation();
    Points moved = verts * a.transpose();
    moved.rowwise() += t.transpose();
    posed.array() +=
        moved.array().colwise() * model.lbs_weights.row(i).transpose().array();
  }

  LbsResult out;
  out.mesh.vertices = std::move(posed);
  out.mesh.faces = model.faces;
  out.joints = fk.joints;
  out.joint_transforms = fk.relative_to_rest;
  return out;
}

Points regress_joints(const BodyModel& model, const Mesh& mesh) {
  if (mesh.vertex_count() != model.vertex_count()) {
    throw ParamError("mesh has " + std::to_string(mesh.vertex_count()) +
                     " vertices, model has " +
                     std::to_string(model.vertex_count()));
  }
  if (!mesh.vertices.allFinite()) {
    throw NumericError("mesh contains non-finite values");
  }
  return model.joint_regressor * mesh.vertices;
}

Points lbs_pose_derivative(const BodyModel& model, const PoseState& pose,
                           const ShapeState& shape, int joint, int coord) {
  check_pose(model, pose);
  if (joint < 0 || joint >= model.joint_count() || coord < 0 || coord > 2) {
    throw ParamError("lbs_pose_derivative: joint or coord out of range");
  }
  const Points verts = shaped_template(model, shape);
  const FkResult fk = forward_kinematics(model, pose, shape);
  const Eigen::Index j = model.joint_count();

  // Propagate d(global)/d(theta_{joint,coord}) down the tree. Only the
  // perturbed joint's local rotation has a nonzero derivative.
  std::vector<Mat3> d_lin(j, Mat3::Zero());
  std::vector<Vec3> d_tr(j, Vec3::Zero());
  const Mat3 dr =
      axis_angle_matrix_derivative(pose.joint_rotations.row(joint), coord);
  for (Eigen::Index i = 0; i < j; ++i) {
    const int p = model.parents[i];
    const Vec3 offset =
        i == 0 ? Vec3(fk.rest_joints.row(0).transpose() + pose.root_translation)
               : Vec3((fk.rest_joints.row(i) - fk.rest_joints.row(p)).transpose());
    const Mat3 local_r = axis_angle_to_matrix(pose.joint_rotations.row(i));
    if (i == 0) {
      if (i == joint) d_lin[0] = dr;
    } else {
      d_lin[i] = d_lin[p] * local_r;
      d_tr[i] = d_lin[p] * offset + d_tr[p];
      if (i == joint) d_lin[i] += fk.global[p].linear() * dr;
    }
  }

  Points out = Points::Zero(model.vertex_count(), 3);
  for (Eigen::Index i = 0; i < j; ++i) {
    // d(relative_to_rest translation) = d_tr - d_lin * rest_joint
    const Vec3 dt = d_tr[i] - d_lin[i] * fk.rest_joints.row(i).transpose();
    Points moved = verts * d_lin[i].transpose();
    moved.rowwise() += dt.transpose();
    out.array() +=
        moved.array().colwise() * model.lbs_weights.row(i).transpose().array();
  }
  return out;
}

BodyModel make_synthetic_model(int joint_count, int ring_resolution) {
  SyntheticModelConfig config;
  config.joint_count = joint_count;
  config.ring_resolution = ring_resolution;
  return make_synthetic_model(config);
}

}  // namespace bodykin
