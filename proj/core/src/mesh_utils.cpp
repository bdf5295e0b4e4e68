#include "bodykin/mesh_utils.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "bodykin/errors.hpp"

namespace bodykin {

namespace {

std::vector<std::array<int, 2>> collect_edges(const Faces& faces,
                                              Eigen::Index vertex_count) {
  std::vector<std::array<int, 2>> edges;
  edges.reserve(static_cast<std::size_t>(faces.rows()) * 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const int a = faces(f, 0), b = faces(f, 1), c = faces(f, 2);
    for (int v : {a, b, c}) {
      if (v < 0 || v >= vertex_count) {
        throw ParamError("face " + std::to_string(f) +
                         " references vertex " + std::to_string(v) +
                         " outside [0, " + std::to_string(vertex_count) + ")");
      }
    }
    if (a == b || b == c || a == c) {
      throw ParamError("face " + std::to_string(f) + " repeats a vertex");
    }
    edges.push_back({std::min(a, b), std::max(a, b)});
    edges.push_back({std::min(b, c), std::max(b, c)});
    edges.push_back({std::min(a, c), std::max(a, c)});
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

}  // namespace

std::vector<std::array<int, 2>> unique_edges(const Faces& faces,
                                             Eigen::Index vertex_count) {
  auto edges = collect_edges(faces, vertex_count);
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<int> edge_face_counts(const Faces& faces,
                                  Eigen::Index vertex_count) {
  const auto all = collect_edges(faces, vertex_count);
  std::vector<int> counts;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j] == all[i]) ++j;
    counts.push_back(static_cast<int>(j - i));
    i = j;
  }
  return counts;
}

std::vector<int> connected_components(
    const std::vector<std::array<int, 2>>& edges, Eigen::Index vertex_count,
    int* component_count) {
  // Union-find with path halving.
  std::vector<int> parent(static_cast<std::size_t>(vertex_count));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& e : edges) {
    const int ra = find(e[0]), rb = find(e[1]);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> label(static_cast<std::size_t>(vertex_count), -1);
  int count = 0;
  for (Eigen::Index v = 0; v < vertex_count; ++v) {
    const int root = find(static_cast<int>(v));
    if (label[root] < 0) label[root] = count++;
    label[v] = label[root];
  }
  if (component_count != nullptr) *component_count = count;
  return label;
}

}  // namespace bodykin
