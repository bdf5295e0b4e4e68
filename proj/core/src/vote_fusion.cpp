#include "bodykin/vote_fusion.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bodykin/errors.hpp"

namespace bodykin {

namespace {

constexpr double kConfidenceFloor = 1e-3;

void check_dimensions(const PointCloud& cloud, const VoteSet& votes) {
  if (votes.offsets.rows() != cloud.size() ||
      votes.confidences.rows() != cloud.size()) {
    throw ParamError("votes cover " + std::to_string(votes.offsets.rows()) +
                     " points, cloud has " + std::to_string(cloud.size()));
  }
  if (!cloud.points.allFinite() || !votes.offsets.allFinite() ||
      !votes.confidences.allFinite()) {
    throw NumericError("vote fusion received non-finite values");
  }
}

}  // namespace

void VoteSet::validate() const {
  if (offsets.rows() != confidences.rows()) {
    throw ParamError("vote set: offsets and confidences row counts differ");
  }
  if (!offsets.allFinite() || !confidences.allFinite()) {
    throw NumericError("vote set contains non-finite values");
  }
  if ((confidences.array() <= 0.0).any() ||
      (confidences.array() > 1.0).any()) {
    throw ParamError("vote set: confidences must lie in (0, 1]");
  }
}

FusedSkeleton fuse_votes(const PointCloud& cloud, const VoteSet& votes) {
  check_dimensions(cloud, votes);
  if ((votes.confidences.array() < 0.0).any()) {
    throw ParamError("fuse_votes: confidences must be non-negative");
  }

  const Eigen::Index joints = votes.joint_count();
  const Points endpoints = cloud.points + votes.offsets;  // p_i + d_i

  FusedSkeleton out;
  out.skeleton.joints = Points::Zero(joints, 3);
  for (Eigen::Index k = 0; k < joints; ++k) {
    double total = 0.0;
    Vec3 sum = Vec3::Zero();
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
      const double q = votes.confidences(i, k);
      total += q;
      sum += q * endpoints.row(i).transpose();
    }
    if (total > 0.0) {
      out.skeleton.joints.row(k) = (sum / total).transpose();
    } else {
      out.undefined_joints.push_back(static_cast<int>(k));
    }
  }
  return out;
}

VoteSet make_vote_targets(const PointCloud& cloud, const Skeleton& gt,
                          double assignment_radius) {
  if (!(assignment_radius > 0.0)) {
    throw ParamError("make_vote_targets: assignment_radius must be > 0");
  }
  if (gt.joint_count() == 0) {
    throw ParamError("make_vote_targets: skeleton has no joints");
  }
  if (!cloud.points.allFinite() || !gt.joints.allFinite()) {
    throw NumericError("make_vote_targets received non-finite values");
  }

  VoteSet votes;
  votes.offsets.resize(cloud.size(), 3);
  votes.confidences = Eigen::MatrixXd::Constant(
      cloud.size(), gt.joint_count(), kConfidenceFloor);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    Eigen::Index nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < gt.joint_count(); ++k) {
      const double d = (gt.joints.row(k) - cloud.points.row(i)).norm();
      if (d < best) {  // strict <: ties keep the lower joint index
        best = d;
        nearest = k;
      }
    }
    votes.offsets.row(i) = gt.joints.row(nearest) - cloud.points.row(i);
    if (best <= assignment_radius) votes.confidences(i, nearest) = 1.0;
  }
  return votes;
}

VoteLosses vote_losses(const Skeleton& pred_skeleton, const VoteSet& pred_votes,
                       const Skeleton& gt_skeleton, const VoteSet& gt_votes) {
  if (pred_skeleton.joint_count() != gt_skeleton.joint_count()) {
    throw ParamError("vote_losses: skeleton joint counts differ");
  }
  if (pred_votes.point_count() != gt_votes.point_count() ||
      pred_votes.joint_count() != gt_votes.joint_count()) {
    throw ParamError("vote_losses: vote set dimensions differ");
  }
  if (pred_skeleton.joint_count() == 0 || pred_votes.point_count() == 0) {
    throw ParamError("vote_losses: empty inputs");
  }

  VoteLosses losses;
  for (Eigen::Index k = 0; k < pred_skeleton.joint_count(); ++k) {
    losses.joint +=
        (pred_skeleton.joints.row(k) - gt_skeleton.joints.row(k)).norm();
  }
  losses.joint /= static_cast<double>(pred_skeleton.joint_count());

  for (Eigen::Index i = 0; i < pred_votes.point_count(); ++i) {
    losses.offset +=
        (pred_votes.offsets.row(i) - gt_votes.offsets.row(i)).norm();
  }

  // Cross-entropy over per-point confidence rows, each normalized to a
  // distribution. A zero predicted mass against positive target mass is an
  // infinite penalty by definition; zero target mass contributes nothing.
  for (Eigen::Index i = 0; i < pred_votes.point_count(); ++i) {
    const double pred_total = pred_votes.confidences.row(i).sum();
    const double gt_total = gt_votes.confidences.row(i).sum();
    if (pred_total <= 0.0 || gt_total <= 0.0) {
      throw ParamError("vote_losses: confidence row " + std::to_string(i) +
                       " has non-positive total");
    }
    for (Eigen::Index k = 0; k < pred_votes.joint_count(); ++k) {
      const double target = gt_votes.confidences(i, k) / gt_total;
      if (target == 0.0) continue;
      const double prob = pred_votes.confidences(i, k) / pred_total;
      losses.confidence += prob > 0.0
                               ? -target * std::log(prob)
                               : std::numeric_limits<double>::infinity();
    }
  }

  losses.total = losses.joint + losses.offset + losses.confidence;
  return losses;
}

}  // namespace bodykin
