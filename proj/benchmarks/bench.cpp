#include <benchmark/benchmark.h>

#include <cmath>

#include "bodykin/body_model.hpp"
#include "bodykin/cloud_fitter.hpp"
#include "bodykin/kinematics.hpp"
#include "bodykin/mesh_hierarchy.hpp"
#include "bodykin/metrics.hpp"
#include "bodykin/rng.hpp"
#include "bodykin/scan_sim.hpp"
#include "bodykin/vote_fusion.hpp"

using namespace bodykin;

namespace {

BodyModel soft_body() {
  SyntheticModelConfig config;
  config.joint_count = 24;
  config.softness = 1.0;
  config.shape_count = 2;
  return make_synthetic_model(config);
}

PoseState bent_pose(const BodyModel& model, std::uint64_t seed) {
  Rng rng(seed);
  PoseState pose;
  pose.joint_rotations.resize(model.joint_count(), 3);
  for (int j = 0; j < model.joint_count(); ++j) {
    Vec3 axis(rng.next_gaussian(), rng.next_gaussian(), rng.next_gaussian());
    axis.normalize();
    pose.joint_rotations.row(j) = (0.4 * axis).transpose();
  }
  pose.root_translation = Vec3(0.05, -0.02, 0.1);
  return pose;
}

void bm_lbs_forward(benchmark::State& state) {
  const BodyModel model = soft_body();
  const PoseState pose = bent_pose(model, 17);
  for (auto _ : state) {
    LbsResult result = lbs_forward(model, pose);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_lbs_forward);

void bm_meshik(benchmark::State& state) {
  const BodyModel model = soft_body();
  const JointVertexSelection selection = select_vertices(model, 0.85);
  const Mesh posed = lbs_forward(model, bent_pose(model, 17)).mesh;
  for (auto _ : state) {
    IkResult result = meshik(model, posed, ShapeState{}, selection);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_meshik);

void bm_weighted_procrustes(benchmark::State& state) {
  Rng rng(23);
  const Eigen::Index n = state.range(0);
  Points source(n, 3);
  Eigen::VectorXd weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    source.row(i) << rng.next_gaussian(), rng.next_gaussian(),
        rng.next_gaussian();
    weights[i] = rng.uniform(0.5, 1.5);
  }
  Eigen::AngleAxisd rot(0.8, Vec3(1, 2, 3).normalized());
  const Points target = source * rot.toRotationMatrix().transpose();
  for (auto _ : state) {
    Mat3 r = weighted_procrustes(source, target, weights);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(bm_weighted_procrustes)->Arg(32)->Arg(256);

void bm_fuse_votes(benchmark::State& state) {
  Rng rng(29);
  const Eigen::Index n = 1024;
  const Eigen::Index j = 24;
  PointCloud cloud;
  cloud.points.resize(n, 3);
  VoteSet votes;
  votes.offsets.resize(n, 3);
  votes.confidences.resize(n, j);
  for (Eigen::Index i = 0; i < n; ++i) {
    cloud.points.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1),
        rng.uniform(-1, 1);
    votes.offsets.row(i) << rng.gaussian(0, 0.1), rng.gaussian(0, 0.1),
        rng.gaussian(0, 0.1);
    for (Eigen::Index k = 0; k < j; ++k) {
      votes.confidences(i, k) = rng.uniform(0.0, 1.0);
    }
  }
  for (auto _ : state) {
    FusedSkeleton fused = fuse_votes(cloud, votes);
    benchmark::DoNotOptimize(fused);
  }
}
BENCHMARK(bm_fuse_votes);

// Coarsening needs one connected component; the multi-tube body is a union
// of disjoint tubes, so benchmark on a corrugated grid sheet instead.
Mesh grid_sheet(int w, int h) {
  Mesh mesh;
  mesh.vertices.resize(w * h, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mesh.vertices.row(y * w + x) << 0.01 * x, 0.01 * y,
          0.002 * std::sin(0.7 * x) * std::cos(0.5 * y);
    }
  }
  mesh.faces.resize(2 * (w - 1) * (h - 1), 3);
  int f = 0;
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const int a = y * w + x, b = a + 1, c = a + w, d = c + 1;
      mesh.faces.row(f++) << a, b, d;
      mesh.faces.row(f++) << a, d, c;
    }
  }
  return mesh;
}

void bm_coarsen(benchmark::State& state) {
  const Mesh mesh = grid_sheet(30, 30);
  for (auto _ : state) {
    MeshHierarchy h = coarsen(mesh, 5);
    benchmark::DoNotOptimize(h);
  }
}
BENCHMARK(bm_coarsen);

void bm_scan(benchmark::State& state) {
  const BodyModel model = soft_body();
  const Mesh posed = lbs_forward(model, bent_pose(model, 17)).mesh;
  ScanConfig config;
  config.sensor_origin = Vec3(-4, 0, 0);
  config.azimuth_step = 0.02;
  config.elevation_step = 0.02;
  config.range_noise_sigma = 0.01;
  config.seed = 7;
  for (auto _ : state) {
    PointCloud cloud = scan(posed, config);
    benchmark::DoNotOptimize(cloud);
  }
}
BENCHMARK(bm_scan);

void bm_fit(benchmark::State& state) {
  SyntheticModelConfig mc;
  mc.joint_count = 12;
  const BodyModel model = make_synthetic_model(mc);
  Skeleton targets;
  targets.joints = lbs_forward(model, bent_pose(model, 31)).joints;
  FitConfig config;
  config.max_iterations = 50;
  for (auto _ : state) {
    FitResult result = fit(model, targets, config);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(bm_fit);

void bm_mesh_loss(benchmark::State& state) {
  const BodyModel model = soft_body();
  const Mesh rest = lbs_forward(model, PoseState::rest(24)).mesh;
  Rng rng(37);
  Mesh pred = rest;
  for (Eigen::Index v = 0; v < pred.vertex_count(); ++v) {
    pred.vertices.row(v) += 0.01 * Vec3(rng.next_gaussian(),
                                        rng.next_gaussian(),
                                        rng.next_gaussian()).transpose();
  }
  const MeshLossWeights weights;
  for (auto _ : state) {
    MeshLossTerms terms = mesh_loss(pred, rest, model, weights);
    benchmark::DoNotOptimize(terms);
  }
}
BENCHMARK(bm_mesh_loss);

}  // namespace

BENCHMARK_MAIN();
