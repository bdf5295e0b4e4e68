#include "bodykin/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "bodykin/errors.hpp"
#include "bodykin/mesh_utils.hpp"

namespace bodykin {

namespace {

constexpr double kMetersToCm = 100.0;

void check_same_joints(const Skeleton& pred, const Skeleton& gt) {
  if (pred.joint_count() != gt.joint_count()) {
    throw ParamError("skeletons have " + std::to_string(pred.joint_count()) +
                     " vs " + std::to_string(gt.joint_count()) + " joints");
  }
  if (pred.joint_count() == 0) throw ParamError("skeletons are empty");
  if (!pred.joints.allFinite() || !gt.joints.allFinite()) {
    throw NumericError("skeleton contains non-finite values");
  }
}

void check_same_topology(const Mesh& pred, const Mesh& gt) {
  if (pred.vertex_count() != gt.vertex_count()) {
    throw ParamError("meshes have " + std::to_string(pred.vertex_count()) +
                     " vs " + std::to_string(gt.vertex_count()) + " vertices");
  }
  if (pred.face_count() != gt.face_count() || pred.faces != gt.faces) {
    throw ParamError("meshes do not share face topology");
  }
  if (!pred.vertices.allFinite() || !gt.vertices.allFinite()) {
    throw NumericError("mesh contains non-finite values");
  }
}

double mean_row_distance(const Points& a, const Points& b) {
  return (a - b).rowwise().norm().mean();
}

}  // namespace

EdgeSet EdgeSet::from_mesh(const Mesh& mesh) {
  EdgeSet set;
  set.edges = unique_edges(mesh.faces, mesh.vertex_count());
  set.rest_lengths.resize(static_cast<Eigen::Index>(set.edges.size()));
  for (std::size_t e = 0; e < set.edges.size(); ++e) {
    set.rest_lengths[static_cast<Eigen::Index>(e)] =
        (mesh.vertices.row(set.edges[e][0]) -
         mesh.vertices.row(set.edges[e][1]))
            .norm();
  }
  return set;
}

double mpjpe(const Skeleton& pred, const Skeleton& gt) {
  check_same_joints(pred, gt);
  return kMetersToCm * mean_row_distance(pred.joints, gt.joints);
}

double pa_mpjpe(const Skeleton& pred, const Skeleton& gt) {
  check_same_joints(pred, gt);
  const Eigen::Index n = pred.joint_count();
  if (n < 3) {
    throw DegenerateError("pa_mpjpe: need at least 3 joints",
                          static_cast<int>(n));
  }

  // Umeyama similarity alignment of pred onto gt.
  const Eigen::RowVector3d mean_p = pred.joints.colwise().mean();
  const Eigen::RowVector3d mean_g = gt.joints.colwise().mean();
  const Points cp = pred.joints.rowwise() - mean_p;
  const Points cg = gt.joints.rowwise() - mean_g;

  const double var_p = cp.rowwise().squaredNorm().mean();
  if (var_p <= 0.0) {
    throw DegenerateError("pa_mpjpe: prediction joints are coincident", 0);
  }
  const Mat3 cov = (cg.transpose() * cp) / static_cast<double>(n);
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 d = svd.singularValues();
  if (d[1] <= 1e-12 * std::max(d[0], 1e-300)) {
    throw DegenerateError("pa_mpjpe: joints are collinear", 1);
  }
  Vec3 signs = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    signs[2] = -1.0;
  }
  const Mat3 rotation =
      svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  const double scale = (d.array() * signs.array()).sum() / var_p;

  Points aligned = scale * (cp * rotation.transpose());
  aligned.rowwise() += mean_g;
  return kMetersToCm * mean_row_distance(aligned, gt.joints);
}

double mpvpe(const Mesh& pred, const Mesh& gt) {
  if (pred.vertex_count() != gt.vertex_count()) {
    throw ParamError("mpvpe: vertex counts differ");
  }
  if (pred.vertex_count() == 0) throw ParamError("mpvpe: empty meshes");
  if (!pred.vertices.allFinite() || !gt.vertices.allFinite()) {
    throw NumericError("mpvpe: mesh contains non-finite values");
  }
  return kMetersToCm * mean_row_distance(pred.vertices, gt.vertices);
}

double mpere(const Mesh& pred, const Mesh& gt) {
  check_same_topology(pred, gt);
  const auto edges = unique_edges(gt.faces, gt.vertex_count());
  if (edges.empty()) throw ParamError("mpere: mesh has no edges");

  double sum = 0.0;
  for (const auto& e : edges) {
    const double gt_len =
        (gt.vertices.row(e[0]) - gt.vertices.row(e[1])).norm();
    if (gt_len <= 0.0) {
      throw DegenerateError("mpere: ground-truth edge (" +
                            std::to_string(e[0]) + ", " +
                            std::to_string(e[1]) + ") has zero length");
    }
    const double pred_len =
        (pred.vertices.row(e[0]) - pred.vertices.row(e[1])).norm();
    sum += std::abs(pred_len - gt_len) / gt_len;
  }
  return sum / static_cast<double>(edges.size());
}

MeshLossTerms mesh_loss(const Mesh& pred, const Mesh& gt,
                        const BodyModel& model, const MeshLossWeights& weights) {
  check_same_topology(pred, gt);
  if (gt.vertex_count() != model.vertex_count()) {
    throw ParamError("mesh_loss: meshes do not match the model's vertex count");
  }

  MeshLossTerms terms;
  terms.vertex = (pred.vertices - gt.vertices).cwiseAbs().sum() /
                 static_cast<double>(pred.vertices.size());

  const Points pred_joints = model.joint_regressor * pred.vertices;
  const Points gt_joints = model.joint_regressor * gt.vertices;
  terms.joint = (pred_joints - gt_joints).cwiseAbs().sum() /
                static_cast<double>(pred_joints.size());

  double normal_sum = 0.0;
  int normal_count = 0;
  for (Eigen::Index f = 0; f < gt.face_count(); ++f) {
    const auto face = gt.faces.row(f);
    const Vec3 gn =
        Vec3(gt.vertices.row(face[1]) - gt.vertices.row(face[0]))
            .cross(Vec3(gt.vertices.row(face[2]) - gt.vertices.row(face[0])));
    const double gn_len2 = gn.squaredNorm();
    if (gn_len2 <= 1e-24) {
      ++terms.degenerate_faces_skipped;
      continue;
    }
    const Vec3 pn =
        Vec3(pred.vertices.row(face[1]) - pred.vertices.row(face[0]))
            .cross(
                Vec3(pred.vertices.row(face[2]) - pred.vertices.row(face[0])));
    const double pn_len2 = pn.squaredNorm();
    // A degenerate predicted face has no direction; score it as orthogonal.
    // The cosine is squared and re-rooted so identical faces cost exactly
    // zero; the clamp absorbs rounding past 1.
    double cosine = 0.0;
    if (pn_len2 > 1e-24) {
      const double dot = gn.dot(pn);
      const double ratio =
          std::clamp(dot * dot / (gn_len2 * pn_len2), 0.0, 1.0);
      cosine = std::copysign(std::sqrt(ratio), dot);
    }
    normal_sum += 1.0 - cosine;
    ++normal_count;
  }
  terms.normal = normal_count > 0 ? normal_sum / normal_count : 0.0;

  const auto edges = unique_edges(gt.faces, gt.vertex_count());
  double edge_sum = 0.0;
  for (const auto& e : edges) {
    const double gt_len =
        (gt.vertices.row(e[0]) - gt.vertices.row(e[1])).norm();
    const double pred_len =
        (pred.vertices.row(e[0]) - pred.vertices.row(e[1])).norm();
    edge_sum += std::abs(pred_len - gt_len);
  }
  terms.edge = edges.empty() ? 0.0 : edge_sum / static_cast<double>(edges.size());

  terms.total = weights.vertex * terms.vertex + weights.joint * terms.joint +
                weights.normal * terms.normal + weights.edge * terms.edge;
  return terms;
}

}  // namespace bodykin
