#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "bodykin/body_model.hpp"
#include "bodykin/errors.hpp"
#include "bodykin/io.hpp"
#include "bodykin/mesh_hierarchy.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bodykin;
namespace ts = testsupport;
using nlohmann::json;

namespace {

PointCloud random_cloud(Rng& rng, Eigen::Index n) {
  PointCloud cloud;
  cloud.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    cloud.points.row(i) << rng.uniform(-5, 5), rng.uniform(-5, 5),
        rng.uniform(-5, 5);
  }
  return cloud;
}

}  // namespace

TEST_CASE("obj round trip is value-exact") {
  ts::TempDir dir;
  Rng rng(801);
  Mesh mesh = ts::icosphere(1);
  for (Eigen::Index v = 0; v < mesh.vertices.rows(); ++v) {
    mesh.vertices.row(v) *= rng.uniform(0.5, 2.0);  // non-round coordinates
  }
  const std::string path = dir.file("sphere.obj");
  save_obj(mesh, path);
  const Mesh back = load_obj(path);
  REQUIRE(back.vertex_count() == mesh.vertex_count());
  REQUIRE(back.face_count() == mesh.face_count());
  CHECK((back.vertices - mesh.vertices).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.faces.array() == mesh.faces.array()).all());
}

TEST_CASE("obj loader tolerates comments, normals, and texture records") {
  ts::TempDir dir;
  const std::string path = dir.file("hand.obj");
  std::ofstream out(path);
  out << "# triangle with extras\n"
      << "v 0 0 0\nv 1 0 0\nv 0 1 0\n"
      << "vn 0 0 1\nvt 0.5 0.5\ns off\ng group\n"
      << "f 1 2 3\n";
  out.close();
  const Mesh mesh = load_obj(path);
  CHECK(mesh.vertex_count() == 3);
  CHECK(mesh.face_count() == 1);
}

TEST_CASE("obj loader rejects malformed content") {
  ts::TempDir dir;
  const std::string quad = dir.file("quad.obj");
  {
    std::ofstream out(quad);
    out << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  }
  CHECK_THROWS_AS(load_obj(quad), IoError);

  const std::string out_of_range = dir.file("range.obj");
  {
    std::ofstream out(out_of_range);
    out << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
  }
  CHECK_THROWS_AS(load_obj(out_of_range), IoError);
  CHECK_THROWS_AS(load_obj(dir.file("missing.obj")), IoError);
}

TEST_CASE("ply round trip preserves float32 coordinates") {
  ts::TempDir dir;
  Rng rng(809);
  const PointCloud cloud = random_cloud(rng, 257);
  const std::string path = dir.file("cloud.ply");
  save_ply(cloud, path);
  const PointCloud back = load_ply(path);
  REQUIRE(back.size() == cloud.size());
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      CHECK(back.points(i, c) ==
            static_cast<double>(static_cast<float>(cloud.points(i, c))));
    }
  }
  // A second save of the loaded cloud is byte-identical (stable floats).
  const std::string again = dir.file("cloud2.ply");
  save_ply(back, again);
  CHECK(read_file(path) == read_file(again));
}

TEST_CASE("ply loader rejects foreign headers") {
  ts::TempDir dir;
  const std::string path = dir.file("ascii.ply");
  std::ofstream out(path);
  out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n"
      << "property float y\nproperty float z\nend_header\n0 0 0\n";
  out.close();
  CHECK_THROWS_AS(load_ply(path), IoError);
}

TEST_CASE("xyz round trip is value-exact and load_cloud dispatches") {
  ts::TempDir dir;
  Rng rng(811);
  const PointCloud cloud = random_cloud(rng, 64);
  const std::string path = dir.file("cloud.xyz");
  save_xyz(cloud, path);
  const PointCloud back = load_cloud(path);
  CHECK((back.points - cloud.points).cwiseAbs().maxCoeff() == 0.0);

  save_ply(cloud, dir.file("cloud.ply"));
  CHECK(load_cloud(dir.file("cloud.ply")).size() == 64);
  CHECK_THROWS_AS(load_cloud(dir.file("cloud.csv")), IoError);
}

TEST_CASE("model JSON round trip preserves every field") {
  ts::TempDir dir;
  SyntheticModelConfig config;
  config.joint_count = 9;
  config.softness = 0.6;
  config.shape_count = 2;
  const BodyModel model = make_synthetic_model(config);
  const std::string path = dir.file("model.json");
  save_model(model, path);
  const BodyModel back = load_model(path);

  CHECK(back.name == model.name);
  CHECK(back.parents == model.parents);
  CHECK((back.template_vertices - model.template_vertices)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((back.faces.array() == model.faces.array()).all());
  CHECK((back.lbs_weights - model.lbs_weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.joint_regressor - model.joint_regressor).cwiseAbs().maxCoeff() ==
        0.0);
  REQUIRE(back.shape_basis.size() == model.shape_basis.size());
  for (std::size_t b = 0; b < model.shape_basis.size(); ++b) {
    CHECK((back.shape_basis[b] - model.shape_basis[b]).cwiseAbs().maxCoeff() ==
          0.0);
  }

  // Resaving the loaded model reproduces the file byte for byte.
  const std::string again = dir.file("model2.json");
  save_model(back, again);
  CHECK(read_file(path) == read_file(again));
}

TEST_CASE("model loader validates structure") {
  ts::TempDir dir;
  const BodyModel model = make_synthetic_model(4, 8);
  const std::string path = dir.file("model.json");
  save_model(model, path);

  json j = json::parse(read_file(path));
  j["lbs_weights"][0][0] = 0.75;  // break a column sum
  const std::string broken = dir.file("broken.json");
  write_file_atomic(broken, j.dump());
  CHECK_THROWS_AS(load_model(broken), IoError);

  json wrong_version = json::parse(read_file(path));
  wrong_version["format_version"] = 99;
  const std::string versioned = dir.file("versioned.json");
  write_file_atomic(versioned, wrong_version.dump());
  CHECK_THROWS_AS(load_model(versioned), IoError);

  write_file_atomic(dir.file("garbage.json"), "{not json");
  CHECK_THROWS_AS(load_model(dir.file("garbage.json")), IoError);
}

TEST_CASE("skeleton, pose, shape, and votes round trip") {
  ts::TempDir dir;
  Rng rng(821);

  Skeleton skeleton;
  skeleton.joints.resize(5, 3);
  for (int i = 0; i < 5; ++i) {
    skeleton.joints.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1),
        rng.uniform(-1, 1);
  }
  skeleton.joint_names = {"a", "b", "c", "d", "e"};
  save_skeleton(skeleton, dir.file("skel.json"));
  const Skeleton skel_back = load_skeleton(dir.file("skel.json"));
  CHECK((skel_back.joints - skeleton.joints).cwiseAbs().maxCoeff() == 0.0);
  CHECK(skel_back.joint_names == skeleton.joint_names);

  PoseState pose;
  pose.joint_rotations.resize(4, 3);
  for (int i = 0; i < 4; ++i) {
    pose.joint_rotations.row(i) << rng.uniform(-3, 3), rng.uniform(-3, 3),
        rng.uniform(-3, 3);
  }
  pose.root_translation = Vec3(0.1, -0.2, 0.3);
  save_pose(pose, dir.file("pose.json"));
  const PoseState pose_back = load_pose(dir.file("pose.json"));
  CHECK((pose_back.joint_rotations - pose.joint_rotations)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((pose_back.root_translation - pose.root_translation).norm() == 0.0);

  ShapeState shape;
  shape.coefficients = Eigen::Vector3d(0.25, -1.5, 3.75);
  save_shape(shape, dir.file("shape.json"));
  CHECK((load_shape(dir.file("shape.json")).coefficients - shape.coefficients)
            .norm() == 0.0);

  VoteSet votes;
  votes.offsets.resize(3, 3);
  votes.offsets << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  votes.confidences = Eigen::MatrixXd::Constant(3, 2, 0.5);
  save_votes(votes, dir.file("votes.json"));
  const VoteSet votes_back = load_votes(dir.file("votes.json"));
  CHECK((votes_back.offsets - votes.offsets).cwiseAbs().maxCoeff() == 0.0);
  CHECK((votes_back.confidences - votes.confidences).cwiseAbs().maxCoeff() ==
        0.0);

  // Serialized confidences outside (0, 1] are rejected at load time.
  json bad = json::parse(read_file(dir.file("votes.json")));
  bad["confidences"][0][0] = 0.0;
  write_file_atomic(dir.file("bad_votes.json"), bad.dump());
  CHECK_THROWS_AS(load_votes(dir.file("bad_votes.json")), ParamError);
}

TEST_CASE("ik and fit results round trip") {
  ts::TempDir dir;
  Rng rng(823);

  IkResult ik;
  for (int i = 0; i < 3; ++i) {
    ik.local_rotations.push_back(ts::random_rotation(rng));
    ik.global_rotations.push_back(ts::random_rotation(rng));
  }
  ik.pose.joint_rotations.resize(3, 3);
  ik.pose.joint_rotations.setRandom();
  ik.pose.root_translation = Vec3(1, 2, 3);
  ik.per_joint_residual.resize(3);
  ik.per_joint_residual << 0.0, 1.5e-4, -1.0;
  save_ik_result(ik, dir.file("ik.json"));
  const IkResult ik_back = load_ik_result(dir.file("ik.json"));
  for (int i = 0; i < 3; ++i) {
    CHECK((ik_back.local_rotations[i] - ik.local_rotations[i]).norm() == 0.0);
    CHECK((ik_back.global_rotations[i] - ik.global_rotations[i]).norm() == 0.0);
  }
  CHECK((ik_back.per_joint_residual - ik.per_joint_residual).norm() == 0.0);

  FitResult fit;
  fit.pose.joint_rotations = Points::Zero(3, 3);
  fit.pose.joint_rotations(1, 2) = 0.7;
  fit.pose.root_translation = Vec3(-0.5, 0.25, 0.125);
  fit.shape.coefficients = Eigen::Vector2d(0.5, -0.5);
  fit.objective_trace = {10.0, 2.5, 0.125};
  fit.final_objective = 0.125;
  fit.final_mpjpe_cm = 0.25;
  fit.converged = true;
  fit.iterations = 2;
  save_fit_result(fit, dir.file("fit.json"));
  const FitResult fit_back = load_fit_result(dir.file("fit.json"));
  CHECK((fit_back.pose.joint_rotations - fit.pose.joint_rotations)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((fit_back.pose.root_translation - fit.pose.root_translation).norm() ==
        0.0);
  CHECK((fit_back.shape.coefficients - fit.shape.coefficients).norm() == 0.0);
  CHECK(fit_back.objective_trace == fit.objective_trace);
  CHECK(fit_back.final_objective == fit.final_objective);
  CHECK(fit_back.final_mpjpe_cm == fit.final_mpjpe_cm);
  CHECK(fit_back.converged == fit.converged);
  CHECK(fit_back.iterations == fit.iterations);

  // The root translation is mirrored into a dedicated field.
  const json j = json::parse(read_file(dir.file("fit.json")));
  REQUIRE(j.contains("translation"));
  CHECK(j["translation"][0].get<double>() == -0.5);
}

TEST_CASE("hierarchy serialization carries the full ladder") {
  ts::TempDir dir;
  const Mesh mesh = ts::icosphere(1);
  const MeshHierarchy h = coarsen(mesh, 2);
  save_hierarchy(h, dir.file("ladder.json"));
  const json j = json::parse(read_file(dir.file("ladder.json")));
  CHECK(j["format_version"] == 1);
  CHECK(j["requested_levels"] == 2);
  CHECK(j["achieved_levels"] == h.achieved_levels);
  REQUIRE(j["levels"].size() == h.levels.size());
  CHECK(j["levels"][0]["vertex_count"] == 42);
  CHECK(j["levels"][0]["edges"].size() == h.levels[0].edges.size());
  CHECK(j["parent_of"].size() == h.parent_of.size());
  CHECK(j["children_of"][0].size() == h.children_of[0].size());
}

TEST_CASE("atomic writes leave no temporaries behind") {
  ts::TempDir dir;
  const std::string path = dir.file("nested/dir/file.txt");
  write_file_atomic(path, "payload");
  CHECK(read_file(path) == "payload");
  write_file_atomic(path, "replaced");
  CHECK(read_file(path) == "replaced");
  int entries = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(
           dir.path())) {
    if (entry.is_regular_file()) {
      ++entries;
      CHECK(entry.path().extension() != ".tmp");
    }
  }
  CHECK(entries == 1);
  CHECK_THROWS_AS(read_file(dir.file("absent.txt")), IoError);
}
