#pragma once

#include <Eigen/Dense>

#include "svnplan/constraints.hpp"

namespace svnplan {

/// Unnormalized target density with optional constraints, as consumed by the
/// particle planners.
class Target {
 public:
  virtual ~Target() = default;

  virtual Eigen::Index dim() const = 0;

  /// log p(x) up to a constant; writes the score when `score` is non-null.
  virtual double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* score) const = 0;

  virtual ConstraintEval constraints(const Eigen::VectorXd& x) const { return ConstraintEval::none(x.size()); }
  virtual bool has_inequalities() const { return false; }

  /// Constant part of -Hessian(log p) that need not be learned by quasi-Newton
  /// updates; an empty matrix when nothing is known in closed form.
  virtual const Eigen::MatrixXd& known_curvature() const { return empty_; }

  /// Task cost without regularization, used for reporting; defaults to -log p.
  virtual double task_cost(const Eigen::VectorXd& x) const { return -log_density(x, nullptr); }

 private:
  Eigen::MatrixXd empty_;
};

}  // namespace svnplan
