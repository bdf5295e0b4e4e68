#include "bodykin/mesh_hierarchy.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "bodykin/errors.hpp"
#include "bodykin/mesh_utils.hpp"

namespace bodykin {

namespace {

void check_connected(const std::vector<std::array<int, 2>>& edges,
                     Eigen::Index vertex_count) {
  int components = 0;
  const std::vector<int> label =
      connected_components(edges, vertex_count, &components);
  if (components <= 1) return;

  std::vector<int> sizes(components, 0);
  std::vector<int> representative(components, -1);
  for (Eigen::Index v = 0; v < vertex_count; ++v) {
    if (representative[label[v]] < 0) {
      representative[label[v]] = static_cast<int>(v);
    }
    ++sizes[label[v]];
  }
  std::string detail;
  for (int c = 0; c < components && c < 8; ++c) {
    if (!detail.empty()) detail += ", ";
    detail += "component " + std::to_string(c) + " (" +
              std::to_string(sizes[c]) + " vertices, e.g. vertex " +
              std::to_string(representative[c]) + ")";
  }
  if (components > 8) detail += ", ...";
  throw DegenerateError("coarsen: mesh is disconnected into " +
                        std::to_string(components) + " components: " + detail);
}

struct MatchResult {
  std::vector<int> parent_of;                // fine -> coarse
  std::vector<std::vector<int>> children_of; // coarse -> fine, ascending
};

// One greedy heavy-edge-matching pass. Edges are visited by descending
// weight with (min, max) lexicographic tie-breaking; coarse ids are assigned
// by ascending smallest-member index so the output is independent of match
// discovery order.
MatchResult match_level(const std::vector<std::array<int, 2>>& edges,
                        const Points& positions, EdgeWeighting weighting) {
  const Eigen::Index n = positions.rows();

  std::vector<double> weight(edges.size(), 1.0);
  if (weighting == EdgeWeighting::inverse_length) {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double len =
          (positions.row(edges[e][0]) - positions.row(edges[e][1])).norm();
      weight[e] = len > 0.0 ? 1.0 / len : std::numeric_limits<double>::max();
    }
  }
  std::vector<std::size_t> order(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) order[e] = e;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (weight[a] != weight[b]) return weight[a] > weight[b];
    return edges[a] < edges[b];
  });

  std::vector<int> mate(n, -1);
  for (const std::size_t e : order) {
    const int u = edges[e][0], v = edges[e][1];
    if (mate[u] < 0 && mate[v] < 0) {
      mate[u] = v;
      mate[v] = u;
    }
  }

  MatchResult result;
  result.parent_of.assign(n, -1);
  for (Eigen::Index v = 0; v < n; ++v) {
    if (result.parent_of[v] >= 0) continue;  // already grouped via its mate
    const int id = static_cast<int>(result.children_of.size());
    result.parent_of[v] = id;
    std::vector<int> group{static_cast<int>(v)};
    if (mate[v] >= 0) {
      result.parent_of[mate[v]] = id;
      group.push_back(mate[v]);
    }
    result.children_of.push_back(std::move(group));
  }
  return result;
}

std::vector<std::array<int, 2>> inherit_edges(
    const std::vector<std::array<int, 2>>& fine_edges,
    const std::vector<int>& parent_of) {
  std::vector<std::array<int, 2>> coarse;
  coarse.reserve(fine_edges.size());
  for (const auto& e : fine_edges) {
    const int a = parent_of[e[0]], b = parent_of[e[1]];
    if (a == b) continue;
    coarse.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(coarse.begin(), coarse.end());
  coarse.erase(std::unique(coarse.begin(), coarse.end()), coarse.end());
  return coarse;
}

Points average_children(const std::vector<std::vector<int>>& children_of,
                        const Points& fine_positions) {
  Points coarse(static_cast<Eigen::Index>(children_of.size()), 3);
  for (std::size_t p = 0; p < children_of.size(); ++p) {
    Vec3 sum = Vec3::Zero();
    for (const int c : children_of[p]) {
      sum += fine_positions.row(c).transpose();
    }
    coarse.row(static_cast<Eigen::Index>(p)) =
        (sum / static_cast<double>(children_of[p].size())).transpose();
  }
  return coarse;
}

}  // namespace

MeshHierarchy coarsen(const Mesh& mesh, int levels, EdgeWeighting weighting) {
  if (levels < 1) throw ParamError("coarsen: levels must be >= 1");
  if (mesh.vertex_count() < 2) {
    throw ParamError("coarsen: mesh needs at least 2 vertices");
  }
  if (!mesh.vertices.allFinite()) {
    throw NumericError("coarsen: mesh contains non-finite values");
  }

  MeshHierarchy hierarchy;
  hierarchy.requested_levels = levels;

  HierarchyLevel finest;
  finest.vertex_count = static_cast<int>(mesh.vertex_count());
  finest.edges = unique_edges(mesh.faces, mesh.vertex_count());
  finest.positions = mesh.vertices;
  check_connected(finest.edges, mesh.vertex_count());
  hierarchy.levels.push_back(std::move(finest));

  for (int t = 0; t < levels; ++t) {
    const HierarchyLevel& fine = hierarchy.levels.back();
    MatchResult match = match_level(fine.edges, fine.positions, weighting);
    const int coarse_count = static_cast<int>(match.children_of.size());
    if (coarse_count < 2) break;  // the next step would reach a single vertex

    HierarchyLevel coarse;
    coarse.vertex_count = coarse_count;
    coarse.edges = inherit_edges(fine.edges, match.parent_of);
    coarse.positions = average_children(match.children_of, fine.positions);
    hierarchy.levels.push_back(std::move(coarse));
    hierarchy.parent_of.push_back(std::move(match.parent_of));
    hierarchy.children_of.push_back(std::move(match.children_of));
    hierarchy.achieved_levels = t + 1;
  }
  return hierarchy;
}

Eigen::MatrixXd propagate_features(const MeshHierarchy& hierarchy,
                                   int transition,
                                   const Eigen::MatrixXd& coarse_features,
                                   const ChildOffsetFn& offset_fn) {
  if (transition < 0 || transition >= hierarchy.achieved_levels) {
    throw ParamError("propagate_features: transition out of range");
  }
  const auto& parent_of = hierarchy.parent_of[transition];
  const auto& children_of = hierarchy.children_of[transition];
  if (coarse_features.rows() !=
      static_cast<Eigen::Index>(children_of.size())) {
    throw ParamError("propagate_features: feature rows (" +
                     std::to_string(coarse_features.rows()) +
                     ") != coarse vertex count (" +
                     std::to_string(children_of.size()) + ")");
  }

  Eigen::MatrixXd fine(static_cast<Eigen::Index>(parent_of.size()),
                       coarse_features.cols());
  for (std::size_t v = 0; v < parent_of.size(); ++v) {
    const int p = parent_of[v];
    const int slot =
        children_of[p][0] == static_cast<int>(v) ? 0 : 1;
    const Eigen::VectorXd parent_feature = coarse_features.row(p).transpose();
    const Eigen::VectorXd offset = offset_fn(parent_feature, slot);
    if (offset.size() != parent_feature.size()) {
      throw ParamError("propagate_features: offset size mismatch at vertex " +
                       std::to_string(v));
    }
    fine.row(static_cast<Eigen::Index>(v)) =
        (parent_feature + offset).transpose();
  }
  return fine;
}

std::vector<Points> downsample_positions(const MeshHierarchy& hierarchy,
                                         const Points& fine_positions) {
  if (fine_positions.rows() != hierarchy.levels.at(0).vertex_count) {
    throw ParamError("downsample_positions: row count does not match the "
                     "finest level");
  }
  std::vector<Points> stack;
  stack.push_back(fine_positions);
  for (int t = 0; t < hierarchy.achieved_levels; ++t) {
    stack.push_back(average_children(hierarchy.children_of[t], stack.back()));
  }
  return stack;
}

IntermediateLoss intermediate_loss(const std::vector<Points>& pred_levels,
                                   const std::vector<Points>& gt_levels) {
  if (pred_levels.size() != gt_levels.size()) {
    throw ParamError("intermediate_loss: level counts differ");
  }
  IntermediateLoss loss;
  for (std::size_t l = 0; l < pred_levels.size(); ++l) {
    if (pred_levels[l].rows() != gt_levels[l].rows()) {
      throw ParamError("intermediate_loss: vertex counts differ at level " +
                       std::to_string(l));
    }
    const double denom = static_cast<double>(pred_levels[l].size());
    if (denom == 0.0) {
      throw ParamError("intermediate_loss: empty level " + std::to_string(l));
    }
    loss.per_level.push_back(
        (pred_levels[l] - gt_levels[l]).cwiseAbs().sum() / denom);
    loss.total += loss.per_level.back();
  }
  return loss;
}

}  // namespace bodykin
