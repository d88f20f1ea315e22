#include "svnplan/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svnplan/errors.hpp"

namespace svnplan {

namespace {

// Condition floor for the Schur complement; below it the caller must damp.
constexpr double kSchurConditionFloor = 1e-14;

struct ThinBasis {
  Eigen::MatrixXd u;         // d x r, orthonormal basis of range(J)
  Eigen::MatrixXd v;         // m x r
  Eigen::VectorXd sigma;     // r
};

ThinBasis range_basis(const Eigen::MatrixXd& jacobian, double tol) {
  ThinBasis out;
  if (jacobian.cols() == 0 || jacobian.rows() == 0) {
    out.u.resize(jacobian.rows(), 0);
    out.v.resize(jacobian.cols(), 0);
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > cutoff && s(rank) > 0.0) ++rank;
  out.u = svd.matrixU().leftCols(rank);
  out.v = svd.matrixV().leftCols(rank);
  out.sigma = s.head(rank);
  return out;
}

// Solves [[A, J], [J^T, -D]] [x; lambda] = [r1; r2] given the factor of A.
struct SchurResult {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

SchurResult schur_solve(const Eigen::LLT<Eigen::MatrixXd>& a_llt, const Eigen::MatrixXd& jacobian,
                        const Eigen::VectorXd& d_diag, const Eigen::VectorXd& r1,
                        const Eigen::VectorXd& r2) {
  SchurResult out;
  const Eigen::VectorXd a_inv_r1 = a_llt.solve(r1);
  if (jacobian.cols() == 0) {
    out.x = a_inv_r1;
    out.lambda.resize(0);
    return out;
  }
  const Eigen::MatrixXd a_inv_j = a_llt.solve(jacobian);
  Eigen::MatrixXd schur = jacobian.transpose() * a_inv_j;
  schur.diagonal() += d_diag;
  schur = 0.5 * (schur + schur.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> s_llt(schur);
  if (s_llt.info() != Eigen::Success) throw DampingRequired("Schur complement is not positive definite");
  const Eigen::VectorXd diag = s_llt.matrixLLT().diagonal();
  const double lo = diag.cwiseAbs().minCoeff();
  const double hi = diag.cwiseAbs().maxCoeff();
  if (!(lo * lo > kSchurConditionFloor * hi * hi)) throw DampingRequired("Schur complement is singular");
  out.lambda = s_llt.solve(jacobian.transpose() * a_inv_r1 - r2);
  out.x = a_inv_r1 - a_inv_j * out.lambda;
  return out;
}

Eigen::LLT<Eigen::MatrixXd> factor_damped(const Eigen::MatrixXd& hessian, double damping) {
  Eigen::MatrixXd a = hessian;
  a.diagonal().array() += damping;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw DampingRequired("damped Hessian is not positive definite");
  return llt;
}

void check_kkt_inputs(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& phi,
                      const ConstraintEval& eval) {
  const Eigen::Index d = phi.size();
  if (hessian.rows() != d || hessian.cols() != d) throw DimensionError("Hessian does not match phi");
  eval.validate(d);
}

}  // namespace

void ConstraintEval::validate(Eigen::Index dim) const {
  if (dh.cols() != h.size() || (h.size() > 0 && dh.rows() != dim))
    throw DimensionError("equality Jacobian must be d x m_h");
  if (dg.cols() != g.size() || (g.size() > 0 && dg.rows() != dim))
    throw DimensionError("inequality Jacobian must be d x m_g");
  if (!h.allFinite() || !g.allFinite() || !dh.allFinite() || !dg.allFinite())
    throw DomainError("constraint evaluation contains non-finite entries");
}

ConstraintEval ConstraintEval::none(Eigen::Index dim) {
  ConstraintEval e;
  e.h.resize(0);
  e.dh.resize(dim, 0);
  e.g.resize(0);
  e.dg.resize(dim, 0);
  return e;
}

Eigen::MatrixXd nullspace_projection(const Eigen::MatrixXd& jacobian, double tol) {
  const ThinBasis basis = range_basis(jacobian, tol);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(jacobian.rows(), jacobian.rows());
  p.noalias() -= basis.u * basis.u.transpose();
  return 0.5 * (p + p.transpose());
}

Eigen::VectorXd csvgd_step(const Eigen::VectorXd& phi, const ConstraintEval& eval, double tol) {
  eval.validate(phi.size());
  if (eval.inequality_count() > 0) throw ConfigError("csvgd_step handles equality constraints only");
  if (eval.equality_count() == 0) return phi;
  const ThinBasis basis = range_basis(eval.dh, tol);
  // J = U S V^T, so (J^T)^+ = U S^-1 V^T.
  Eigen::VectorXd out = phi - basis.u * (basis.u.transpose() * phi);
  out.noalias() -= basis.u * (basis.sigma.cwiseInverse().asDiagonal() * (basis.v.transpose() * eval.h));
  return out;
}

KktSolution csvn_kkt_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& phi,
                           const ConstraintEval& eval, double damping) {
  check_kkt_inputs(hessian, phi, eval);
  if (eval.inequality_count() > 0) throw ConfigError("use slack_kkt_solve for inequality constraints");
  const auto llt = factor_damped(hessian, damping);
  const SchurResult sol =
      schur_solve(llt, eval.dh, Eigen::VectorXd::Zero(eval.equality_count()), phi, -eval.h);

  KktSolution out;
  out.dx = sol.x;
  out.ds.resize(0);
  out.lambda_h = sol.lambda;
  out.lambda_g.resize(0);
  Eigen::VectorXd dual = hessian * out.dx + damping * out.dx - phi;
  if (eval.equality_count() > 0) dual.noalias() += eval.dh * out.lambda_h;
  out.dual_residual = dual.norm();
  out.primal_residual =
      eval.equality_count() > 0 ? (eval.dh.transpose() * out.dx + eval.h).norm() : 0.0;
  return out;
}

KktSolution slack_kkt_solve(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& phi,
                            const ConstraintEval& eval, const SlackState& slack, double damping) {
  check_kkt_inputs(hessian, phi, eval);
  const Eigen::Index mh = eval.equality_count();
  const Eigen::Index mg = eval.inequality_count();
  if (slack.s.size() != mg) throw DimensionError("slack vector must match the inequality count");
  if (mg == 0) return csvn_kkt_solve(hessian, phi, eval, damping);
  if (!(damping > 0.0)) throw ConfigError("slack KKT solve needs positive damping");

  const Eigen::Index d = phi.size();
  Eigen::MatrixXd jac(d, mh + mg);
  if (mh > 0) jac.leftCols(mh) = eval.dh;
  jac.rightCols(mg) = eval.dg;
  const Eigen::VectorXd s2 = slack.s.cwiseAbs2();
  // Eliminating ds = -(beta s + s .* lambda_g) / mu leaves a regularized block on lambda_g.
  Eigen::VectorXd d_diag = Eigen::VectorXd::Zero(mh + mg);
  d_diag.tail(mg) = s2 / damping;
  Eigen::VectorXd r2(mh + mg);
  r2.head(mh) = -eval.h;
  r2.tail(mg) = -eval.g - 0.5 * s2 + (slack.beta / damping) * s2;

  const auto llt = factor_damped(hessian, damping);
  const SchurResult sol = schur_solve(llt, jac, d_diag, phi, r2);

  KktSolution out;
  out.dx = sol.x;
  out.lambda_h = sol.lambda.head(mh);
  out.lambda_g = sol.lambda.tail(mg);
  out.ds = -(slack.beta * slack.s + slack.s.cwiseProduct(out.lambda_g)) / damping;

  Eigen::VectorXd dual_x = hessian * out.dx + damping * out.dx + jac * sol.lambda - phi;
  Eigen::VectorXd dual_s = damping * out.ds + slack.s.cwiseProduct(out.lambda_g) + slack.beta * slack.s;
  out.dual_residual = std::sqrt(dual_x.squaredNorm() + dual_s.squaredNorm());
  Eigen::VectorXd primal(mh + mg);
  if (mh > 0) primal.head(mh) = eval.dh.transpose() * out.dx + eval.h;
  primal.tail(mg) = eval.dg.transpose() * out.dx + slack.s.cwiseProduct(out.ds) + eval.g + 0.5 * s2;
  out.primal_residual = primal.norm();
  return out;
}

Eigen::VectorXd init_slack(const Eigen::VectorXd& g, double eps) {
  return (-2.0 * g.array()).max(eps).sqrt().matrix();
}

}  // namespace svnplan
