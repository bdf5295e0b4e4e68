#pragma once

#include <array>
#include <vector>

#include "bodykin/body_model.hpp"
#include "bodykin/types.hpp"

namespace bodykin {

/// Unique undirected mesh edges with their reference lengths.
struct EdgeSet {
  std::vector<std::array<int, 2>> edges;  // (min, max), sorted
  Eigen::VectorXd rest_lengths;           // meters, aligned with edges

  static EdgeSet from_mesh(const Mesh& mesh);
};

/// Mean per-joint position error in centimeters.
double mpjpe(const Skeleton& pred, const Skeleton& gt);

/// MPJPE after the optimal similarity alignment (rotation, translation,
/// scale) of pred onto gt, in centimeters. Needs >= 3 non-collinear joints.
double pa_mpjpe(const Skeleton& pred, const Skeleton& gt);

/// Mean per-vertex position error in centimeters.
double mpvpe(const Mesh& pred, const Mesh& gt);

/// Mean per-edge relative error: mean over unique edges of
/// |pred_length - gt_length| / gt_length. Dimensionless. Requires identical
/// topology and strictly positive ground-truth edge lengths.
double mpere(const Mesh& pred, const Mesh& gt);

struct MeshLossWeights {
  double vertex = 1.0;
  double joint = 1.0;
  double normal = 1.0;
  double edge = 1.0;
};

struct MeshLossTerms {
  double vertex = 0.0;  // mean |dv| per coordinate, meters
  double joint = 0.0;   // mean |dj| per coordinate of regressed joints, meters
  double normal = 0.0;  // mean (1 - cos) between unit face normals
  double edge = 0.0;    // mean |pred - gt| edge length, meters
  double total = 0.0;   // weighted sum
  int degenerate_faces_skipped = 0;  // gt faces with zero area
};

/// Composite surface loss: vertex, regressed-joint, face-normal, and edge
/// terms. Faces whose ground-truth normal has zero length are skipped for
/// the normal term and counted.
MeshLossTerms mesh_loss(const Mesh& pred, const Mesh& gt,
                        const BodyModel& model,
                        const MeshLossWeights& weights = {});

}  // namespace bodykin
