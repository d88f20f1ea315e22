#pragma once

// Linearized equality/inequality handling for one particle: null-space
// projection, the projected SVGD step and the damped KKT solves (with squared
// slack variables for inequalities) by Schur complement.

#include <Eigen/Dense>

namespace svnplan {

/// Constraint values and Jacobians at one point. Jacobians are d x m
/// (one column per constraint).
struct ConstraintEval {
  Eigen::VectorXd h;
  Eigen::MatrixXd dh;
  Eigen::VectorXd g;
  Eigen::MatrixXd dg;

  Eigen::Index equality_count() const { return h.size(); }
  Eigen::Index inequality_count() const { return g.size(); }
  /// Throws DimensionError / DomainError on inconsistent shapes or non-finite entries.
  void validate(Eigen::Index dim) const;

  static ConstraintEval none(Eigen::Index dim);
};

struct KktSolution {
  Eigen::VectorXd dx;
  Eigen::VectorXd ds;
  Eigen::VectorXd lambda_h;
  Eigen::VectorXd lambda_g;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct SlackState {
  Eigen::VectorXd s;
  double beta = 0.0;
};

inline constexpr double kPinvTolerance = 1e-10;

/// I - J (J^T J)^+ J^T, with singular values below tol * sigma_max dropped.
Eigen::MatrixXd nullspace_projection(const Eigen::MatrixXd& jacobian, double tol = kPinvTolerance);

/// P phi - (J^T)^+ h for an equality-only evaluation.
Eigen::VectorXd csvgd_step(const Eigen::VectorXd& phi, const ConstraintEval& eval,
                           double tol = kPinvTolerance);

/// Solves [[H + mu I, J], [J^T, 0]] [dx; lambda] = [phi; -h].
KktSolution csvn_kkt_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& phi,
                           const ConstraintEval& eval, double damping);

/// Squared-slack system for g(x) + s^2 / 2 = 0 alongside h(x) = 0. Damping is
/// applied to both the H block and the slack block.
KktSolution slack_kkt_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& phi,
                            const ConstraintEval& eval, const SlackState& slack, double damping);

/// s_i = sqrt(max(-2 g_i, eps)).
Eigen::VectorXd init_slack(const Eigen::VectorXd& g, double eps = 1e-6);

}  // namespace svnplan
