#include <cmath>
#include <string>
#include <vector>

#include "bodykin/body_model.hpp"
#include "bodykin/errors.hpp"

namespace bodykin {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Fraction of a tube (from either end) whose vertices share weight with the
// neighbouring joint in soft mode. Kept below 0.5 so the two zones never
// overlap and the owning joint always keeps the majority share.
constexpr double kBlendZone = 0.35;

struct ChainLayout {
  std::vector<int> chain_of;     // per joint, -1 for root
  std::vector<int> slot_of;      // position within its chain
  std::vector<Vec3> direction;   // per chain
  std::vector<double> bone_len;  // per chain
  std::vector<int> first_child;  // per joint, -1 if leaf
};

ChainLayout lay_out_chains(const SyntheticModelConfig& config,
                           std::vector<int>* parents, Points* joints) {
  const int j = config.joint_count;
  int chains = config.chain_count;
  if (chains <= 0) chains = std::clamp((j - 1) / 4, 1, 6);

  ChainLayout layout;
  layout.chain_of.assign(j, -1);
  layout.slot_of.assign(j, -1);
  layout.first_child.assign(j, -1);
  parents->assign(j, -1);
  joints->resize(j, 3);
  joints->row(0).setZero();

  for (int c = 0; c < chains; ++c) {
    const double azimuth = 2.0 * kPi * c / chains + 0.4;
    const double elevation =
        chains == 1 ? 0.35 : -0.55 + 1.1 * c / (chains - 1.0);
    layout.direction.push_back(Vec3(std::cos(azimuth) * std::cos(elevation),
                                    std::sin(azimuth) * std::cos(elevation),
                                    std::sin(elevation)));
    layout.bone_len.push_back(0.22 + 0.015 * c);
  }

  const int body_joints = j - 1;
  const int base = chains > 0 ? body_joints / chains : 0;
  const int extra = chains > 0 ? body_joints % chains : 0;
  int next = 1;
  for (int c = 0; c < chains; ++c) {
    const int count = base + (c < extra ? 1 : 0);
    for (int k = 0; k < count; ++k, ++next) {
      (*parents)[next] = k == 0 ? 0 : next - 1;
      layout.chain_of[next] = c;
      layout.slot_of[next] = k;
      joints->row(next) =
          (k + 1) * layout.bone_len[c] * layout.direction[c].transpose();
    }
  }
  for (int i = j - 1; i >= 1; --i) layout.first_child[(*parents)[i]] = i;
  return layout;
}

void ring_frame(const Vec3& axis, Vec3* e1, Vec3* e2) {
  int least = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(axis[k]) < std::abs(axis[least])) least = k;
  }
  Vec3 h = Vec3::Zero();
  h[least] = 1.0;
  *e1 = axis.cross(h).normalized();
  *e2 = axis.cross(*e1);
}

}  // namespace

BodyModel make_synthetic_model(const SyntheticModelConfig& config) {
  if (config.joint_count < 1) throw ParamError("joint_count must be >= 1");
  if (config.ring_resolution < 3) {
    throw ParamError("ring_resolution must be >= 3");
  }
  if (config.rings_per_bone < 2) throw ParamError("rings_per_bone must be >= 2");
  if (config.softness < 0.0 || config.softness > 1.0) {
    throw ParamError("softness must lie in [0, 1]");
  }
  if (config.shape_count < 0 || config.shape_count > 2) {
    throw ParamError("shape_count must be 0, 1, or 2");
  }

  const int j = config.joint_count;
  const int res = config.ring_resolution;
  const int nr = config.rings_per_bone;
  const int verts_per_tube = nr * res + 2;

  BodyModel model;
  Points rest_joints;
  auto layout = lay_out_chains(config, &model.parents, &rest_joints);

  model.template_vertices.resize(j * verts_per_tube, 3);
  model.faces.resize(j * ((nr - 1) * res * 2 + 2 * res), 3);
  model.lbs_weights = Eigen::MatrixXd::Zero(j, j * verts_per_tube);
  model.joint_regressor = Eigen::MatrixXd::Zero(j, j * verts_per_tube);

  int face_cursor = 0;
  for (int i = 0; i < j; ++i) {
    const int chain = layout.chain_of[i];
    const Vec3 axis = chain >= 0          ? layout.direction[chain]
                      : !layout.direction.empty() ? layout.direction[0]
                                                  : Vec3::UnitZ();
    double bone = chain >= 0 ? layout.bone_len[chain]
                  : !layout.bone_len.empty() ? layout.bone_len[0]
                                             : 0.22;
    const bool leaf = layout.first_child[i] < 0;
    const double tube_len = leaf ? 0.7 * bone : 0.8 * bone;
    const Vec3 origin = rest_joints.row(i).transpose();

    Vec3 e1, e2;
    ring_frame(axis, &e1, &e2);

    const int tube_base = i * verts_per_tube;
    for (int k = 0; k < nr; ++k) {
      const double s = static_cast<double>(k) / (nr - 1);
      const double radius = 0.05 * (1.0 - 0.3 * s);
      const Vec3 center = origin + s * tube_len * axis;
      for (int m = 0; m < res; ++m) {
        const double phi = 2.0 * kPi * m / res;
        model.template_vertices.row(tube_base + k * res + m) =
            (center + radius * (std::cos(phi) * e1 + std::sin(phi) * e2))
                .transpose();
      }
    }
    const int prox_apex = tube_base + nr * res;
    const int dist_apex = prox_apex + 1;
    model.template_vertices.row(prox_apex) = origin.transpose();
    model.template_vertices.row(dist_apex) =
        (origin + tube_len * axis).transpose();

    for (int k = 0; k + 1 < nr; ++k) {
      for (int m = 0; m < res; ++m) {
        const int m1 = (m + 1) % res;
        const int a = tube_base + k * res + m;
        const int b = tube_base + k * res + m1;
        const int c = tube_base + (k + 1) * res + m;
        const int d = tube_base + (k + 1) * res + m1;
        model.faces.row(face_cursor++) << a, d, c;
        model.faces.row(face_cursor++) << a, b, d;
      }
    }
    for (int m = 0; m < res; ++m) {
      const int m1 = (m + 1) % res;
      model.faces.row(face_cursor++) << prox_apex, tube_base + m1, tube_base + m;
      model.faces.row(face_cursor++) << dist_apex, tube_base + (nr - 1) * res + m,
          tube_base + (nr - 1) * res + m1;
    }

    // Skinning: the tube belongs to joint i; in soft mode the proximal end
    // leaks weight to the parent and the distal end to the first child.
    const int parent = model.parents[i];
    const int child = layout.first_child[i];
    auto assign_weights = [&](int vertex, double s) {
      double to_parent = 0.0, to_child = 0.0;
      if (parent >= 0 && s < kBlendZone) {
        to_parent = 0.5 * config.softness * (1.0 - s / kBlendZone);
      }
      if (child >= 0 && s > 1.0 - kBlendZone) {
        to_child = 0.5 * config.softness * (1.0 - (1.0 - s) / kBlendZone);
      }
      if (to_parent > 0.0) model.lbs_weights(parent, vertex) = to_parent;
      if (to_child > 0.0) model.lbs_weights(child, vertex) = to_child;
      model.lbs_weights(i, vertex) = 1.0 - to_parent - to_child;
    };
    for (int k = 0; k < nr; ++k) {
      const double s = static_cast<double>(k) / (nr - 1);
      for (int m = 0; m < res; ++m) assign_weights(tube_base + k * res + m, s);
    }
    assign_weights(prox_apex, 0.0);
    assign_weights(dist_apex, 1.0);

    // The first ring's centroid sits exactly at the rest joint.
    for (int m = 0; m < res; ++m) {
      model.joint_regressor(i, tube_base + m) = 1.0 / res;
    }
  }

  if (config.shape_count >= 1) {
    model.shape_basis.push_back(0.12 * model.template_vertices);
  }
  if (config.shape_count >= 2) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> stretch =
        Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(
            model.template_vertices.rows(), 3);
    stretch.col(2) = 0.1 * model.template_vertices.col(2);
    model.shape_basis.push_back(stretch);
  }

  model.name = "synthetic-j" + std::to_string(j) +
               (config.softness > 0.0 ? "-soft" : "-rigid");
  model.validate();
  return model;
}

}  // namespace bodykin
