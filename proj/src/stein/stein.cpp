#include "svnplan/stein.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svnplan/errors.hpp"
#include "svnplan/gp_prior.hpp"

namespace svnplan {

Eigen::Index TrajectoryKernelSpec::dim() const {
  Eigen::Index d = 0;
  for (const auto& b : blocks) d = std::max(d, b.offset + b.size);
  return d;
}

void TrajectoryKernelSpec::validate() const {
  if (blocks.empty()) throw ConfigError("trajectory kernel needs at least one block");
  for (const auto& b : blocks) {
    if (b.metric.rows() != b.size || b.metric.cols() != b.size)
      throw DimensionError("kernel metric does not match block size");
    if (!(b.lengthscale > 0.0)) throw ConfigError("kernel lengthscale must be > 0");
    if (!b.metric.isApprox(b.metric.transpose(), 1e-10))
      throw ConfigError("kernel metric must be symmetric");
  }
}

TrajectoryKernelSpec TrajectoryKernelSpec::isotropic(Eigen::Index dim, double lengthscale) {
  TrajectoryKernelSpec spec;
  spec.blocks.push_back({0, dim, Eigen::MatrixXd::Identity(dim, dim), lengthscale});
  return spec;
}

TrajectoryKernelSpec TrajectoryKernelSpec::from_prior(const JointGpPrior& prior, KernelMetric metric,
                                                      double lengthscale) {
  TrajectoryKernelSpec spec;
  Eigen::Index off = 0;
  for (int k = 0; k < prior.dof_count(); ++k) {
    const GaussianBlock& b = prior.block(k);
    Eigen::MatrixXd m = metric == KernelMetric::Covariance ? b.covariance() : b.precision();
    spec.blocks.push_back({off, b.dim(), 0.5 * (m + m.transpose()), lengthscale});
    off += b.dim();
  }
  return spec;
}

KernelValue trajectory_kernel(const Eigen::VectorXd& xi_i, const Eigen::VectorXd& xi_j,
                              const TrajectoryKernelSpec& spec) {
  if (xi_i.size() != xi_j.size() || xi_i.size() < spec.dim())
    throw DimensionError("kernel inputs do not match the kernel layout");
  const double scale = spec.normalize ? 1.0 / static_cast<double>(spec.blocks.size()) : 1.0;
  KernelValue out;
  out.gradient = Eigen::VectorXd::Zero(xi_i.size());
  for (const auto& b : spec.blocks) {
    const Eigen::VectorXd r = xi_i.segment(b.offset, b.size) - xi_j.segment(b.offset, b.size);
    const Eigen::VectorXd mr = b.metric * r;
    const double inv_l2 = 1.0 / (b.lengthscale * b.lengthscale);
    const double e = scale * std::exp(-inv_l2 * r.dot(mr));
    out.value += e;
    // d/dxi_j of exp(-r^T M r / l^2) with r = xi_i - xi_j
    out.gradient.segment(b.offset, b.size) += (2.0 * inv_l2 * e) * mr;
  }
  return out;
}

void calibrate_lengthscales(TrajectoryKernelSpec& spec, const ParticleSet& particles, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("kernel calibration target must be in (0, 1)");
  const Eigen::Index n = particles.size();
  for (auto& b : spec.blocks) {
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const Eigen::VectorXd r = particles[i].segment(b.offset, b.size) - particles[j].segment(b.offset, b.size);
        dists.push_back(r.dot(b.metric * r));
      }
    }
    if (dists.empty()) continue;
    const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    const double median = *mid;
    if (median > 0.0) b.lengthscale = std::sqrt(median / -std::log(target));
  }
}

KernelColumn kernel_column(const ParticleSet& particles, const Eigen::VectorXd& y,
                           const TrajectoryKernelSpec& spec) {
  const Eigen::Index n = particles.size();
  KernelColumn col;
  col.values.resize(n);
  col.gradients.resize(particles.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    // grad wrt x_i of k(x_i, y) equals grad wrt the second argument of k(y, x_i).
    KernelValue kv = trajectory_kernel(y, particles[i], spec);
    col.values(i) = kv.value;
    col.gradients.col(i) = kv.gradient;
  }
  return col;
}

Eigen::VectorXd svgd_direction(const Eigen::MatrixXd& scores, const KernelColumn& column,
                               double anneal) {
  const double inv_n = 1.0 / static_cast<double>(column.values.size());
  return inv_n * (anneal * (scores * column.values) + column.gradients.rowwise().sum());
}

Eigen::VectorXd svgd_direction(const ParticleSet& particles, const Eigen::MatrixXd& scores,
                               const TrajectoryKernelSpec& spec, const Eigen::VectorXd& y,
                               double anneal) {
  if (scores.rows() != particles.dim() || scores.cols() != particles.size())
    throw DimensionError("scores must be d x N");
  return svgd_direction(scores, kernel_column(particles, y, spec), anneal);
}

Eigen::MatrixXd svn_block_hessian(const std::vector<Eigen::MatrixXd>& neg_hessians,
                                  const KernelColumn& column, double anneal) {
  const Eigen::Index n = column.values.size();
  if (static_cast<Eigen::Index>(neg_hessians.size()) != n)
    throw DimensionError("one Hessian per particle is required");
  Eigen::MatrixXd h = column.gradients * column.gradients.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = anneal * column.values(i) * column.values(i);
    if (w == 0.0) continue;
    h.noalias() += w * neg_hessians[static_cast<std::size_t>(i)];
  }
  h /= static_cast<double>(n);
  return h;
}

Eigen::MatrixXd svn_block_hessian(const ParticleSet& particles,
                                  const std::vector<Eigen::MatrixXd>& neg_hessians,
                                  const TrajectoryKernelSpec& spec, const Eigen::VectorXd& y,
                                  double anneal) {
  for (const auto& hess : neg_hessians) {
    if (hess.rows() != particles.dim() || hess.cols() != particles.dim())
      throw DimensionError("Hessian size does not match particle dimension");
    const double tol = 1e-10 * std::max(1.0, hess.norm());
    if ((hess - hess.transpose()).norm() > tol) throw ConfigError("particle Hessian is not symmetric");
  }
  return svn_block_hessian(neg_hessians, kernel_column(particles, y, spec), anneal);
}

Eigen::MatrixXd bfgs_update(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& step,
                            const Eigen::VectorXd& grad_diff) {
  const double sy = step.dot(grad_diff);
  if (!(sy > 1e-10 * step.norm() * grad_diff.norm())) return hessian;
  const Eigen::VectorXd hs = hessian * step;
  const double shs = step.dot(hs);
  if (!(shs > 0.0)) return hessian;
  Eigen::MatrixXd out = hessian - (hs * hs.transpose()) / shs + (grad_diff * grad_diff.transpose()) / sy;
  return 0.5 * (out + out.transpose());
}

double ksd(const ParticleSet& particles, const Eigen::MatrixXd& scores, const TrajectoryKernelSpec& spec) {
  const Eigen::Index n = particles.size();
  if (n < 2) throw ConfigError("KSD needs at least two particles");
  if (scores.rows() != particles.dim() || scores.cols() != n)
    throw DimensionError("scores must be d x N");
  const double scale = spec.normalize ? 1.0 / static_cast<double>(spec.blocks.size()) : 1.0;
  std::vector<double> traces;
  for (const auto& b : spec.blocks) traces.push_back(b.metric.trace());

  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // Stein kernel u(x_i, x_j) = s_i.s_j k + s_i.grad_j k + s_j.grad_i k + tr(grad_i grad_j k)
      double k = 0.0;
      double cross = 0.0;
      double trace_term = 0.0;
      for (std::size_t bi = 0; bi < spec.blocks.size(); ++bi) {
        const auto& b = spec.blocks[bi];
        const Eigen::VectorXd r = particles[i].segment(b.offset, b.size) - particles[j].segment(b.offset, b.size);
        const Eigen::VectorXd mr = b.metric * r;
        const double inv_l2 = 1.0 / (b.lengthscale * b.lengthscale);
        const double e = scale * std::exp(-inv_l2 * r.dot(mr));
        k += e;
        // grad_{x_j} e = 2 M r / l^2 e ; grad_{x_i} e = -2 M r / l^2 e
        const auto si = scores.col(i).segment(b.offset, b.size);
        const auto sj = scores.col(j).segment(b.offset, b.size);
        cross += 2.0 * inv_l2 * e * (si.dot(mr) - sj.dot(mr));
        trace_term += e * (2.0 * inv_l2 * traces[bi] - 4.0 * inv_l2 * inv_l2 * mr.squaredNorm());
      }
      total += scores.col(i).dot(scores.col(j)) * k + cross + trace_term;
    }
  }
  return std::max(0.0, total / static_cast<double>(n * n));
}

double anneal_scale(int iteration, int warmup) {
  if (warmup <= 0) return 1.0;
  const double it = static_cast<double>(std::max(iteration, 1));
  return std::min(1.0, it / static_cast<double>(warmup));
}

}  // namespace svnplan
