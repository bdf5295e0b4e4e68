#pragma once

#include <vector>

#include "bodykin/types.hpp"

namespace bodykin {

/// Per-point joint votes: one unified spatial offset per point plus one
/// confidence per (point, joint) pair.
struct VoteSet {
  Points offsets;              // N x 3, meters
  Eigen::MatrixXd confidences; // N x J

  Eigen::Index point_count() const { return offsets.rows(); }
  Eigen::Index joint_count() const { return confidences.cols(); }

  /// Enforces the serialized-domain contract: finite offsets, confidences in
  /// (0, 1], matching row counts. fuse_votes itself accepts any non-negative
  /// confidences; this stricter check guards data loaded from files.
  void validate() const;
};

struct FusedSkeleton {
  Skeleton skeleton;
  /// Joints whose total confidence was zero; their position is the (0,0,0)
  /// sentinel rather than NaN.
  std::vector<int> undefined_joints;
};

/// Confidence-weighted average of the votes cast for each joint:
/// joint[k] = sum_i q_ik * (p_i + d_i) / sum_i q_ik.
/// Confidences must be non-negative and finite; dimensions must match.
FusedSkeleton fuse_votes(const PointCloud& cloud, const VoteSet& votes);

/// Supervision targets from a ground-truth skeleton: each point votes for
/// its nearest joint (ties to the lower index) with offset gt - p; its
/// confidence row is 1 at that joint when within assignment_radius and the
/// floor value 1e-3 everywhere else (keeping rows inside (0, 1]).
VoteSet make_vote_targets(const PointCloud& cloud, const Skeleton& gt,
                          double assignment_radius);

struct VoteLosses {
  double joint = 0.0;       // mean joint distance, meters
  double offset = 0.0;      // summed offset error over points, meters
  double confidence = 0.0;  // summed row-wise cross-entropy
  double total = 0.0;       // unweighted sum of the three
};

/// Training-loss decomposition between predicted and target votes. Joint
/// term: mean Euclidean distance between the skeletons. Offset term: sum of
/// per-point offset errors. Confidence term: cross-entropy between each
/// point's confidence row and its target row, both normalized to
/// distributions first, summed over points.
VoteLosses vote_losses(const Skeleton& pred_skeleton, const VoteSet& pred_votes,
                       const Skeleton& gt_skeleton, const VoteSet& gt_votes);

}  // namespace bodykin
