#pragma once

// Kernel, SVGD direction, block-diagonal SVN operator, BFGS curvature and the
// kernelized Stein discrepancy over a set of particles.

#include <Eigen/Dense>

#include <vector>

#include "svnplan/particles.hpp"

namespace svnplan {

class JointGpPrior;

enum class KernelMetric { Covariance, Precision };

/// One factor of the trajectory kernel: a contiguous slice of the decision
/// vector compared under a symmetric PSD metric and a lengthscale.
struct KernelBlock {
  Eigen::Index offset = 0;
  Eigen::Index size = 0;
  Eigen::MatrixXd metric;
  double lengthscale = 1.0;
};

struct TrajectoryKernelSpec {
  std::vector<KernelBlock> blocks;
  /// Divide by the number of blocks so that k(x, x) = 1.
  bool normalize = true;

  Eigen::Index dim() const;
  void validate() const;

  /// Single isotropic RBF block over a d-dimensional vector.
  static TrajectoryKernelSpec isotropic(Eigen::Index dim, double lengthscale);
  /// One block per prior DOF using its covariance (or precision) as metric.
  static TrajectoryKernelSpec from_prior(const JointGpPrior& prior, KernelMetric metric,
                                         double lengthscale = 1.0);
};

struct KernelValue {
  double value = 0.0;
  /// Gradient with respect to the second argument.
  Eigen::VectorXd gradient;
};

KernelValue trajectory_kernel(const Eigen::VectorXd& xi_i, const Eigen::VectorXd& xi_j,
                              const TrajectoryKernelSpec& spec);

/// Sets every block lengthscale so the median pairwise block factor over the
/// particle set equals `target` (0 < target < 1).
void calibrate_lengthscales(TrajectoryKernelSpec& spec, const ParticleSet& particles,
                            double target = 0.5);

/// Kernel values k(x_i, y) and gradients with respect to x_i for every particle.
struct KernelColumn {
  Eigen::VectorXd values;     // N
  Eigen::MatrixXd gradients;  // d x N, column i = grad_{x_i} k(x_i, y)
};

KernelColumn kernel_column(const ParticleSet& particles, const Eigen::VectorXd& y,
                           const TrajectoryKernelSpec& spec);

/// Empirical SVGD direction at y. `anneal` multiplies the score term only.
Eigen::VectorXd svgd_direction(const ParticleSet& particles, const Eigen::MatrixXd& scores,
                               const TrajectoryKernelSpec& spec, const Eigen::VectorXd& y,
                               double anneal = 1.0);
Eigen::VectorXd svgd_direction(const Eigen::MatrixXd& scores, const KernelColumn& column,
                               double anneal = 1.0);

/// Block-diagonal SVN operator H(y, y). `neg_hessians[i]` approximates
/// -Hessian(log p) at particle i and must be symmetric.
Eigen::MatrixXd svn_block_hessian(const ParticleSet& particles,
                                  const std::vector<Eigen::MatrixXd>& neg_hessians,
                                  const TrajectoryKernelSpec& spec, const Eigen::VectorXd& y,
                                  double anneal = 1.0);
Eigen::MatrixXd svn_block_hessian(const std::vector<Eigen::MatrixXd>& neg_hessians,
                                  const KernelColumn& column, double anneal = 1.0);

/// BFGS update of a curvature approximation. Returns `hessian` unchanged when
/// the curvature condition s^T y > 1e-10 |s||y| fails.
Eigen::MatrixXd bfgs_update(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& step,
                            const Eigen::VectorXd& grad_diff);

/// Squared kernelized Stein discrepancy (V-statistic).
double ksd(const ParticleSet& particles, const Eigen::MatrixXd& scores,
           const TrajectoryKernelSpec& spec);

/// Linear warm-up: min(1, max(iteration, 1) / warmup); 1 when warmup == 0.
double anneal_scale(int iteration, int warmup);

}  // namespace svnplan
