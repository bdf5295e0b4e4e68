#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <utility>

namespace testsupport {

using bodykin::Faces;
using bodykin::Mesh;
using bodykin::Points;
using bodykin::Rng;
using bodykin::Vec3;

Mesh icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts = {
      {-1, t, 0}, {1, t, 0},  {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back(0.5 * (verts[a] + verts[b]));
      midpoint[key] = static_cast<int>(verts.size()) - 1;
      return midpoint[key];
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    mesh.vertices.row(static_cast<Eigen::Index>(i)) =
        (radius * verts[i].normalized()).transpose();
  }
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) {
    mesh.faces.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1],
        faces[i][2];
  }
  return mesh;
}

Mesh grid_mesh(Rng& rng, int w, int h, double jitter) {
  Mesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(w) * h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mesh.vertices.row(y * w + x) << x + rng.uniform(-jitter, jitter),
          y + rng.uniform(-jitter, jitter), rng.uniform(-jitter, jitter);
    }
  }
  mesh.faces.resize(2 * static_cast<Eigen::Index>(w - 1) * (h - 1), 3);
  Eigen::Index f = 0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const int a = y * w + x;
      const int b = y * w + x + 1;
      const int c = (y + 1) * w + x;
      const int d = (y + 1) * w + x + 1;
      mesh.faces.row(f++) << a, b, d;
      mesh.faces.row(f++) << a, d, c;
    }
  }
  return mesh;
}

Eigen::Vector3d random_unit(Rng& rng) {
  while (true) {
    const Vec3 v(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    const double n = v.norm();
    if (n > 1e-6) return v / n;
  }
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  const double angle = rng.uniform(0.0, 3.14159265358979323846);
  return Eigen::AngleAxisd(angle, random_unit(rng)).toRotationMatrix();
}

bodykin::PoseState random_pose(const bodykin::BodyModel& model, Rng& rng,
                               double max_angle, bool with_translation) {
  bodykin::PoseState pose = bodykin::PoseState::rest(model.joint_count());
  for (Eigen::Index i = 0; i < model.joint_count(); ++i) {
    const double angle = rng.uniform(0.0, max_angle);
    pose.joint_rotations.row(i) = (angle * random_unit(rng)).transpose();
  }
  if (with_translation) {
    pose.root_translation = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                                 rng.uniform(-0.5, 0.5));
  }
  return pose;
}

namespace {

Eigen::Matrix3d oracle_rotation(const Eigen::Vector3d& axis_angle) {
  const double angle = axis_angle.norm();
  if (angle < 1e-300) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, axis_angle / angle).toRotationMatrix();
}

Points oracle_shaped(const bodykin::BodyModel& model,
                     const bodykin::ShapeState& shape) {
  Points verts = model.template_vertices;
  for (Eigen::Index b = 0; b < shape.size(); ++b) {
    verts += shape.coefficients[b] * model.shape_basis[static_cast<std::size_t>(b)];
  }
  return verts;
}

std::vector<Eigen::Matrix4d> oracle_globals(const bodykin::BodyModel& model,
                                            const bodykin::PoseState& pose,
                                            const bodykin::ShapeState& shape,
                                            Points* rest_out) {
  const Points shaped = oracle_shaped(model, shape);
  const Eigen::Index j = model.joint_count();
  Points rest = Points::Zero(j, 3);
  for (Eigen::Index i = 0; i < j; ++i) {
    for (Eigen::Index v = 0; v < shaped.rows(); ++v) {
      rest.row(i) += model.joint_regressor(i, v) * shaped.row(v);
    }
  }
  if (rest_out != nullptr) *rest_out = rest;

  std::vector<Eigen::Matrix4d> globals(static_cast<std::size_t>(j));
  for (Eigen::Index i = 0; i < j; ++i) {
    Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
    local.topLeftCorner<3, 3>() =
        oracle_rotation(pose.joint_rotations.row(i).transpose());
    const int p = model.parents[static_cast<std::size_t>(i)];
    if (p < 0) {
      local.topRightCorner<3, 1>() =
          rest.row(i).transpose() + pose.root_translation;
      globals[static_cast<std::size_t>(i)] = local;
    } else {
      local.topRightCorner<3, 1>() =
          (rest.row(i) - rest.row(p)).transpose();
      globals[static_cast<std::size_t>(i)] =
          globals[static_cast<std::size_t>(p)] * local;
    }
  }
  return globals;
}

}  // namespace

Points fk_oracle_joints(const bodykin::BodyModel& model,
                        const bodykin::PoseState& pose,
                        const bodykin::ShapeState& shape) {
  const auto globals = oracle_globals(model, pose, shape, nullptr);
  Points joints(model.joint_count(), 3);
  for (Eigen::Index i = 0; i < model.joint_count(); ++i) {
    joints.row(i) =
        globals[static_cast<std::size_t>(i)].topRightCorner<3, 1>().transpose();
  }
  return joints;
}

Points lbs_oracle_vertices(const bodykin::BodyModel& model,
                           const bodykin::PoseState& pose,
                           const bodykin::ShapeState& shape) {
  Points rest;
  const auto globals = oracle_globals(model, pose, shape, &rest);
  const Points shaped = oracle_shaped(model, shape);
  const Eigen::Index j = model.joint_count();

  std::vector<Eigen::Matrix4d> skin(static_cast<std::size_t>(j));
  for (Eigen::Index i = 0; i < j; ++i) {
    Eigen::Matrix4d undo = Eigen::Matrix4d::Identity();
    undo.topRightCorner<3, 1>() = -rest.row(i).transpose();
    skin[static_cast<std::size_t>(i)] = globals[static_cast<std::size_t>(i)] * undo;
  }

  Points out = Points::Zero(shaped.rows(), 3);
  for (Eigen::Index v = 0; v < shaped.rows(); ++v) {
    Eigen::Vector4d hv(shaped(v, 0), shaped(v, 1), shaped(v, 2), 1.0);
    for (Eigen::Index i = 0; i < j; ++i) {
      const double w = model.lbs_weights(i, v);
      if (w == 0.0) continue;
      out.row(v) +=
          w * (skin[static_cast<std::size_t>(i)] * hv).head<3>().transpose();
    }
  }
  return out;
}

TempDir::TempDir() {
  static int counter = 0;
  const auto base = std::filesystem::temp_directory_path() /
                    ("bodykin-test-" + std::to_string(::getpid()) + "-" +
                     std::to_string(counter++));
  std::filesystem::create_directories(base);
  path_ = base.string();
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

int run_command(const std::string& command_line, std::string* output) {
  static int counter = 0;
  const auto capture = std::filesystem::temp_directory_path() /
                       ("bodykin-cmd-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++) + ".log");
  const std::string full = command_line + " > " + capture.string() + " 2>&1";
  const int status = std::system(full.c_str());
  if (output != nullptr) {
    std::ifstream in(capture);
    output->assign(std::istreambuf_iterator<char>(in),
                   std::istreambuf_iterator<char>());
  }
  std::error_code ec;
  std::filesystem::remove(capture, ec);
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

}  // namespace testsupport
