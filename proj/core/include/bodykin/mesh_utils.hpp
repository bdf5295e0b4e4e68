#pragma once

#include <array>
#include <vector>

#include "bodykin/types.hpp"

namespace bodykin {

/// Unique undirected edges of a triangle mesh as (min, max) index pairs,
/// sorted lexicographically. Throws ParamError on out-of-range or repeated
/// indices within a face.
std::vector<std::array<int, 2>> unique_edges(const Faces& faces,
                                             Eigen::Index vertex_count);

/// Number of faces incident to each unique edge, aligned with unique_edges.
std::vector<int> edge_face_counts(const Faces& faces,
                                  Eigen::Index vertex_count);

/// Connected components over the edge graph; result[v] is a component id in
/// [0, count). Vertices with no edges form their own components.
std::vector<int> connected_components(
    const std::vector<std::array<int, 2>>& edges, Eigen::Index vertex_count,
    int* component_count);

}  // namespace bodykin
