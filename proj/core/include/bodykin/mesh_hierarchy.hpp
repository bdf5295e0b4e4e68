#pragma once

#include <array>
#include <functional>
#include <vector>

#include "bodykin/types.hpp"

namespace bodykin {

struct HierarchyLevel {
  int vertex_count = 0;
  std::vector<std::array<int, 2>> edges;  // (min, max) pairs, sorted
  Points positions;                       // representative vertex positions
};

/// Multi-resolution ladder built by repeated heavy-edge matching. levels[0]
/// is the input mesh; each transition t maps level t (fine) onto level t+1
/// (coarse).
struct MeshHierarchy {
  std::vector<HierarchyLevel> levels;            // finest first
  std::vector<std::vector<int>> parent_of;       // one array per transition
  std::vector<std::vector<std::vector<int>>> children_of;  // 1-2 fine ids each
  int requested_levels = 0;
  int achieved_levels = 0;  // transitions actually performed

  Eigen::Index level_count() const {
    return static_cast<Eigen::Index>(levels.size());
  }
};

enum class EdgeWeighting {
  inverse_length,  // shorter edges collapse first (default)
  unit,            // pure graph matching, tie rule decides everything
};

/// Coarsens `levels` times (or until another step would leave a single
/// vertex, reporting the achieved depth). Each step visits edges by
/// descending weight, ties broken by ascending (min, max) endpoint pair,
/// matching both endpoints when free; matched pairs merge, the rest become
/// singleton parents. Coarse positions average the children; coarse edges
/// are inherited by parent identity. Throws DegenerateError when the mesh is
/// disconnected (naming the components) and ParamError for levels < 1.
MeshHierarchy coarsen(const Mesh& mesh, int levels,
                      EdgeWeighting weighting = EdgeWeighting::inverse_length);

/// Offset applied to a child feature: receives the parent feature and the
/// child's slot (0 for the first child, 1 for the second).
using ChildOffsetFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, int)>;

/// Expands per-vertex features one level finer across `transition`
/// (0 maps level 1 features onto level 0, and so on):
/// fine[v] = coarse[parent(v)] + offset_fn(coarse[parent(v)], slot(v)).
Eigen::MatrixXd propagate_features(const MeshHierarchy& hierarchy,
                                   int transition,
                                   const Eigen::MatrixXd& coarse_features,
                                   const ChildOffsetFn& offset_fn);

/// Positions of `fine_positions` averaged down every level of the
/// hierarchy; result[0] is the input, result[t+1] the child means at
/// transition t. Used to build ground-truth stacks for intermediate_loss.
std::vector<Points> downsample_positions(const MeshHierarchy& hierarchy,
                                         const Points& fine_positions);

struct IntermediateLoss {
  std::vector<double> per_level;  // mean |pred - gt| per coordinate
  double total = 0.0;             // sum over levels
};

/// Mean absolute coordinate error per level plus the summed total. Stacks
/// must have the same number of levels and per-level vertex counts.
IntermediateLoss intermediate_loss(const std::vector<Points>& pred_levels,
                                   const std::vector<Points>& gt_levels);

}  // namespace bodykin
