#include "bodykin/cloud_fitter.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

#include "bodykin/errors.hpp"
#include "bodykin/metrics.hpp"
#include "bodykin/rotation.hpp"

namespace bodykin {

namespace {

struct LbfgsOptions {
  int max_iterations = 200;
  double tol = 1e-10;
  int memory = 8;
};

struct LbfgsOutcome {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

using ValueGradFn =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

// Two-loop-recursion L-BFGS with Armijo backtracking. Records the objective
// after every accepted step in *trace.
LbfgsOutcome lbfgs_minimize(const ValueGradFn& fn, Eigen::VectorXd x,
                            const LbfgsOptions& options,
                            std::vector<double>* trace) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 50;

  const Eigen::Index n = x.size();
  Eigen::VectorXd grad(n);
  double value = fn(x, &grad);
  if (!std::isfinite(value)) {
    throw NumericError("optimizer: objective is not finite at iteration 0");
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsOutcome out;
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12) {
      out.converged = true;
      break;
    }

    // Two-loop recursion for the search direction.
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(s_hist.size());
    for (int k = static_cast<int>(s_hist.size()) - 1; k >= 0; --k) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) /
                           y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd direction = -q;
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {  // curvature memory unusable, fall back to descent
      direction = -grad;
      slope = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    double new_value = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd new_x, new_grad(n);
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      new_x = x + step * direction;
      new_value = fn(new_x, &new_grad);
      if (std::isfinite(new_value) &&
          new_value <= value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stationary to line-search resolution

    const Eigen::VectorXd s = new_x - x;
    const Eigen::VectorXd y = new_grad - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double decrease = value - new_value;
    x = new_x;
    value = new_value;
    grad = new_grad;
    if (trace != nullptr) trace->push_back(value);
    if (decrease < options.tol) {
      ++iter;
      out.converged = true;
      break;
    }
  }

  out.x = std::move(x);
  out.value = value;
  out.iterations = iter;
  return out;
}

// Reduce the full problem to a parameter subset (used by the root-only
// stage): fixed coordinates keep their values from the base point.
ValueGradFn masked(const ValueGradFn& fn, const Eigen::VectorXd& base,
                   const std::vector<Eigen::Index>& active) {
  return [&fn, base, active](const Eigen::VectorXd& xs,
                             Eigen::VectorXd* grad_out) {
    Eigen::VectorXd full = base;
    for (std::size_t k = 0; k < active.size(); ++k) full[active[k]] = xs[k];
    if (grad_out == nullptr) return fn(full, nullptr);
    Eigen::VectorXd full_grad(full.size());
    const double value = fn(full, &full_grad);
    grad_out->resize(static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
      (*grad_out)[static_cast<Eigen::Index>(k)] = full_grad[active[k]];
    }
    return value;
  };
}

}  // namespace

void FitConfig::validate() const {
  if (!(lambda_joint >= 0.0) || !(lambda_prior >= 0.0) ||
      !std::isfinite(lambda_joint) || !std::isfinite(lambda_prior)) {
    throw ParamError("fit config: lambdas must be finite and >= 0");
  }
  if (max_iterations < 0) {
    throw ParamError("fit config: max_iterations must be >= 0");
  }
  if (!(convergence_tol > 0.0)) {
    throw ParamError("fit config: convergence_tol must be > 0");
  }
  if (lbfgs_memory < 1) throw ParamError("fit config: lbfgs_memory must be >= 1");
}

FitProblem::FitProblem(const BodyModel& model, const Skeleton& targets,
                       double lambda_joint, double lambda_prior)
    : model_(model),
      targets_(targets.joints),
      lambda_joint_(lambda_joint),
      lambda_prior_(lambda_prior),
      joints_(model.joint_count()),
      shapes_(model.shape_count()) {
  if (targets.joint_count() != joints_) {
    throw ParamError("fit: targets have " + std::to_string(targets.joint_count()) +
                     " joints, model has " + std::to_string(joints_));
  }
  if (!targets_.allFinite()) {
    throw NumericError("fit: targets contain non-finite values");
  }
  base_rest_joints_ = model.joint_regressor * model.template_vertices;
  for (Eigen::Index b = 0; b < shapes_; ++b) {
    shape_rest_.push_back(model.joint_regressor * model.shape_basis[b]);
  }
  children_.resize(joints_);
  for (Eigen::Index i = 1; i < joints_; ++i) {
    children_[model.parents[i]].push_back(static_cast<int>(i));
  }
}

Eigen::VectorXd FitProblem::pack(const PoseState& pose,
                                 const ShapeState& shape) const {
  if (pose.joint_count() != joints_) {
    throw ParamError("fit: pose joint count mismatch");
  }
  if (!shape.empty() && shape.size() != shapes_) {
    throw ParamError("fit: shape coefficient count mismatch");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dimension());
  x.head<3>() = pose.root_translation;
  for (Eigen::Index i = 0; i < joints_; ++i) {
    x.segment<3>(3 + 3 * i) = pose.joint_rotations.row(i).transpose();
  }
  if (!shape.empty()) x.tail(shapes_) = shape.coefficients;
  return x;
}

void FitProblem::unpack(const Eigen::VectorXd& x, PoseState* pose,
                        ShapeState* shape) const {
  pose->root_translation = x.head<3>();
  pose->joint_rotations.resize(joints_, 3);
  for (Eigen::Index i = 0; i < joints_; ++i) {
    pose->joint_rotations.row(i) = x.segment<3>(3 + 3 * i).transpose();
  }
  shape->coefficients = x.tail(shapes_);
}

Points FitProblem::joints_at(const Eigen::VectorXd& x) const {
  PoseState pose;
  ShapeState shape;
  unpack(x, &pose, &shape);
  return forward_kinematics(model_, pose, shape).joints;
}

double FitProblem::value(const Eigen::VectorXd& x) const {
  return value_and_gradient(x, nullptr);
}

double FitProblem::value_and_gradient(const Eigen::VectorXd& x,
                                      Eigen::VectorXd* gradient) const {
  if (x.size() != dimension()) {
    throw ParamError("fit: parameter vector has wrong size");
  }
  const Vec3 root_translation = x.head<3>();
  const Eigen::VectorXd beta = x.tail(shapes_);

  // Rest joints are linear in beta.
  Points rest = base_rest_joints_;
  for (Eigen::Index b = 0; b < shapes_; ++b) {
    rest += beta[b] * shape_rest_[b];
  }

  // Forward pass: local and global transforms.
  std::vector<Mat3> local_r(joints_);
  std::vector<Eigen::Isometry3d> global(joints_);
  for (Eigen::Index i = 0; i < joints_; ++i) {
    local_r[i] = axis_angle_to_matrix(x.segment<3>(3 + 3 * i));
    Eigen::Isometry3d local = Eigen::Isometry3d::Identity();
    local.linear() = local_r[i];
    if (i == 0) {
      local.translation() = rest.row(0).transpose() + root_translation;
      global[0] = local;
    } else {
      local.translation() =
          (rest.row(i) - rest.row(model_.parents[i])).transpose();
      global[i] = global[model_.parents[i]] * local;
    }
  }

  double objective = 0.0;
  Points residuals(joints_, 3);  // d objective / d joint, premultiplied
  for (Eigen::Index j = 0; j < joints_; ++j) {
    const Vec3 e = global[j].translation() - targets_.row(j).transpose();
    objective += lambda_joint_ * e.squaredNorm();
    residuals.row(j) = (2.0 * lambda_joint_ * e).transpose();
  }
  objective += lambda_prior_ * beta.squaredNorm();
  for (Eigen::Index i = 1; i < joints_; ++i) {
    objective += lambda_prior_ * x.segment<3>(3 + 3 * i).squaredNorm();
  }
  if (gradient == nullptr) return objective;

  gradient->setZero(dimension());

  // Root translation moves every joint identically.
  gradient->head<3>() = residuals.colwise().sum().transpose();

  // Pose coordinates: perturbing joint k only moves k's subtree. Walk the
  // subtree propagating the derivative of the global transform.
  std::vector<Mat3> d_lin(joints_);
  std::vector<Vec3> d_tr(joints_);
  std::vector<int> stack;
  for (Eigen::Index k = 0; k < joints_; ++k) {
    const Mat3 parent_lin =
        k == 0 ? Mat3(Mat3::Identity())
               : Mat3(global[model_.parents[k]].linear());
    for (int c = 0; c < 3; ++c) {
      const Mat3 dr = axis_angle_matrix_derivative(x.segment<3>(3 + 3 * k), c);
      d_lin[k] = parent_lin * dr;
      d_tr[k].setZero();  // local translation does not depend on pose
      double g = residuals.row(k).dot(d_tr[k]);  // zero, kept for clarity

      stack.assign(children_[k].begin(), children_[k].end());
      while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int p = model_.parents[i];
        const Vec3 offset = (rest.row(i) - rest.row(p)).transpose();
        d_lin[i] = d_lin[p] * local_r[i];
        d_tr[i] = d_lin[p] * offset + d_tr[p];
        g += residuals.row(i).dot(d_tr[i]);
        for (const int child : children_[i]) stack.push_back(child);
      }
      (*gradient)[3 + 3 * k + c] = g;
    }
    // Quadratic prior on every non-root rotation.
    if (k > 0) {
      gradient->segment<3>(3 + 3 * k) +=
          2.0 * lambda_prior_ * x.segment<3>(3 + 3 * k);
    }
  }

  // Shape coordinates shift the rest offsets of every bone.
  for (Eigen::Index b = 0; b < shapes_; ++b) {
    double g = 2.0 * lambda_prior_ * beta[b];
    std::vector<Vec3> d_pos(joints_);
    for (Eigen::Index i = 0; i < joints_; ++i) {
      if (i == 0) {
        d_pos[0] = shape_rest_[b].row(0).transpose();
      } else {
        const int p = model_.parents[i];
        const Vec3 d_offset =
            (shape_rest_[b].row(i) - shape_rest_[b].row(p)).transpose();
        d_pos[i] = d_pos[p] + global[p].linear() * d_offset;
      }
      g += residuals.row(i).dot(d_pos[i]);
    }
    (*gradient)[3 + 3 * joints_ + b] = g;
  }
  return objective;
}

FitResult fit(const BodyModel& model, const Skeleton& targets,
              const FitConfig& config, const PoseState* init_pose,
              const ShapeState* init_shape) {
  config.validate();
  const FitProblem problem(model, targets, config.lambda_joint,
                           config.lambda_prior);

  PoseState pose = PoseState::rest(model.joint_count());
  ShapeState shape;
  shape.coefficients = Eigen::VectorXd::Zero(model.shape_count());
  if (config.init == FitConfig::Init::provided) {
    if (init_pose == nullptr) {
      throw ParamError("fit: init strategy 'provided' needs an initial pose");
    }
    pose = *init_pose;
    if (init_shape != nullptr && !init_shape->empty()) {
      shape = *init_shape;
    }
  } else {
    // Anchor the pelvis: place the root joint on the first target.
    const Vec3 rest_root =
        (model.joint_regressor * model.template_vertices).row(0).transpose();
    pose.root_translation = targets.joints.row(0).transpose() - rest_root;
  }

  Eigen::VectorXd x = problem.pack(pose, shape);
  const ValueGradFn fn = [&problem](const Eigen::VectorXd& v,
                                    Eigen::VectorXd* g) {
    return problem.value_and_gradient(v, g);
  };

  FitResult result;
  result.objective_trace.push_back(problem.value(x));
  int used = 0;

  if (config.staged && config.max_iterations > 0) {
    std::vector<Eigen::Index> active{0, 1, 2, 3, 4, 5};  // r + root rotation
    LbfgsOptions options;
    options.max_iterations = std::min(40, config.max_iterations / 4);
    options.tol = config.convergence_tol;
    options.memory = config.lbfgs_memory;
    if (options.max_iterations > 0) {
      Eigen::VectorXd x0(active.size());
      for (std::size_t k = 0; k < active.size(); ++k) x0[k] = x[active[k]];
      const LbfgsOutcome stage = lbfgs_minimize(
          masked(fn, x, active), x0, options, &result.objective_trace);
      for (std::size_t k = 0; k < active.size(); ++k) {
        x[active[k]] = stage.x[k];
      }
      used += stage.iterations;
    }
  }

  LbfgsOptions options;
  options.max_iterations = config.max_iterations - used;
  options.tol = config.convergence_tol;
  options.memory = config.lbfgs_memory;
  const LbfgsOutcome outcome =
      lbfgs_minimize(fn, x, options, &result.objective_trace);
  used += outcome.iterations;

  problem.unpack(outcome.x, &result.pose, &result.shape);
  if (model.shape_count() == 0) result.shape.coefficients.resize(0);
  result.final_objective = outcome.value;
  result.converged = outcome.converged;
  result.iterations = used;

  Skeleton fitted;
  fitted.joints = problem.joints_at(outcome.x);
  result.final_mpjpe_cm = mpjpe(fitted, targets);
  return result;
}

std::vector<FitBatchItem> fit_batch(const BodyModel& model,
                                    const std::vector<Skeleton>& targets,
                                    const FitConfig& config) {
  std::vector<FitBatchItem> items(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    try {
      items[i].result = fit(model, targets[i], config);
      items[i].ok = true;
    } catch (const Error& e) {
      items[i].ok = false;
      items[i].error = e.what();
    }
  }
  return items;
}

}  // namespace bodykin
