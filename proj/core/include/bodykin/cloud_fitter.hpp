#pragma once

#include <string>
#include <vector>

#include "bodykin/body_model.hpp"
#include "bodykin/types.hpp"

namespace bodykin {

struct FitConfig {
  double lambda_joint = 1.0;   // data term weight
  double lambda_prior = 1e-3;  // quadratic prior on shape and non-root pose
  int max_iterations = 200;    // total accepted steps across both stages
  double convergence_tol = 1e-10;  // on per-step objective decrease
  enum class Init { zero_pose_centroid, provided } init = Init::zero_pose_centroid;
  /// First solve root translation + root rotation with limbs frozen, then
  /// everything jointly; avoids root/limb ambiguity on poor initializations.
  bool staged = true;
  int lbfgs_memory = 8;

  void validate() const;
};

struct FitResult {
  PoseState pose;    // root_translation carries the recovered r
  ShapeState shape;  // empty when the model has no shape basis
  std::vector<double> objective_trace;  // initial value + one per accepted step
  double final_objective = 0.0;
  double final_mpjpe_cm = 0.0;  // against the fit targets
  bool converged = false;
  int iterations = 0;
};

/// The fitting objective over packed parameters x = [r(3), theta(3J),
/// beta(B)]: lambda_joint * sum_j |joints_j(x) - target_j|^2 +
/// lambda_prior * (|beta|^2 + |theta_nonroot|^2). Exposed so gradient
/// correctness can be checked against finite differences.
class FitProblem {
 public:
  FitProblem(const BodyModel& model, const Skeleton& targets,
             double lambda_joint, double lambda_prior);

  Eigen::Index dimension() const { return 3 + 3 * joints_ + shapes_; }
  double value(const Eigen::VectorXd& x) const;
  /// Objective value with the analytic gradient written to *gradient.
  double value_and_gradient(const Eigen::VectorXd& x,
                            Eigen::VectorXd* gradient) const;

  Eigen::VectorXd pack(const PoseState& pose, const ShapeState& shape) const;
  void unpack(const Eigen::VectorXd& x, PoseState* pose,
              ShapeState* shape) const;
  /// Posed joint positions at x.
  Points joints_at(const Eigen::VectorXd& x) const;

 private:
  const BodyModel& model_;
  Points targets_;
  double lambda_joint_;
  double lambda_prior_;
  Eigen::Index joints_;
  Eigen::Index shapes_;
  Points base_rest_joints_;          // regressor * template
  std::vector<Points> shape_rest_;   // regressor * shape_basis[b]
  std::vector<std::vector<int>> children_;
};

/// Fits root translation, pose, and shape so the model's forward-kinematics
/// joints match `targets`, by limited-memory quasi-Newton descent with
/// backtracking line search. Non-convergence returns the best iterate with
/// converged=false; a NaN objective aborts with NumericError naming the
/// iteration.
FitResult fit(const BodyModel& model, const Skeleton& targets,
              const FitConfig& config, const PoseState* init_pose = nullptr,
              const ShapeState* init_shape = nullptr);

struct FitBatchItem {
  FitResult result;
  bool ok = false;
  std::string error;  // empty on success
};

/// Element-wise fit over many target skeletons; per-item failures are
/// captured in the item rather than aborting the batch.
std::vector<FitBatchItem> fit_batch(const BodyModel& model,
                                    const std::vector<Skeleton>& targets,
                                    const FitConfig& config);

}  // namespace bodykin
