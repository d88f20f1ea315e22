#pragma once

// Hilbert-space (reduced-rank) GP prior over a velocity process and its
// analytic integral, giving a joint Gaussian over position and velocity
// nodes of a trajectory. Each degree of freedom is modelled independently.

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "svnplan/particles.hpp"

namespace svnplan {

enum class KernelFamily { Matern32, SquaredExponential };

struct HsgpSpec {
  KernelFamily family = KernelFamily::Matern32;
  double lengthscale = 1.0;
  double variance = 1.0;
  /// White velocity noise; enters the position covariance as a Brownian term.
  double noise = 0.0;
  int feature_count = 64;
  /// Radius L of the active region. Non-positive means "use 1.25 * horizon".
  double domain_radius = 0.0;

  /// Copy with the domain radius filled in for a given horizon.
  HsgpSpec resolved(double horizon) const;
  /// Throws ConfigError when the spec is unusable on [0, horizon].
  void validate(double horizon) const;
};

/// Uniform time grid on [0, T].
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, int node_count);

  double horizon() const { return horizon_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  double operator[](int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  double step() const;
  const std::vector<double>& nodes() const { return nodes_; }

  /// Grid time mapped to the kernel domain: a translation centering [0, T] on 0.
  double to_domain(double t) const { return t - 0.5 * horizon_; }

 private:
  double horizon_ = 0.0;
  std::vector<double> nodes_;
};

struct BoundaryCondition {
  double x0_mean = 0.0;
  double x0_var = 0.0;
  /// Goal position; only used through the constant velocity mean.
  double xT = 0.0;
};

double spectral_density(const HsgpSpec& spec, double omega);

/// Dirichlet eigenfunction of the Laplacian on [-L, L].
double basis_function(int j, double t, double radius);

/// Integral of basis_function(j, ., L) from 0 to t.
double integrated_basis(int j, double t, double radius);

/// Reduced-rank stationary kernel between two domain times.
double velocity_kernel(const HsgpSpec& spec, double t, double s);

struct CovarianceBlocks {
  Eigen::MatrixXd xx;
  Eigen::MatrixXd xv;
  Eigen::MatrixXd vv;
};

CovarianceBlocks joint_covariance(const HsgpSpec& spec, const TimeGrid& grid,
                                  const BoundaryCondition& bc);

/// A dense Gaussian with a cached Cholesky factor of its (jittered) covariance.
class GaussianBlock {
 public:
  GaussianBlock() = default;
  GaussianBlock(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  Eigen::Index dim() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }
  /// Lower-triangular factor of covariance + jitter * I.
  const Eigen::MatrixXd& factor() const { return factor_; }
  double jitter() const { return jitter_; }

  /// Solves (covariance + jitter I) x = rhs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  /// Dense precision matrix (inverse of the jittered covariance).
  Eigen::MatrixXd precision() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
};

enum class ObservationKind { Position, Velocity };

struct Observation {
  int dof = 0;
  ObservationKind kind = ObservationKind::Position;
  int node = 0;
  double value = 0.0;
  double noise_var = 0.0;
};

/// Block-diagonal (across DOFs) Gaussian over stacked trajectories. Each DOF
/// block is laid out as [positions..., velocities...] for the selected nodes.
class JointGpPrior {
 public:
  JointGpPrior() = default;
  explicit JointGpPrior(std::vector<GaussianBlock> blocks);

  int dof_count() const { return static_cast<int>(blocks_.size()); }
  Eigen::Index dim() const;
  const GaussianBlock& block(int dof) const { return blocks_[static_cast<std::size_t>(dof)]; }
  Eigen::Index offset(int dof) const;
  Eigen::VectorXd mean() const;
  /// Dense block-diagonal covariance.
  Eigen::MatrixXd covariance() const;
  /// Dense block-diagonal precision.
  Eigen::MatrixXd precision() const;

 private:
  std::vector<GaussianBlock> blocks_;
};

/// Builds one DOF's joint position/velocity prior over every grid node.
GaussianBlock build_dof_prior(const HsgpSpec& spec, const TimeGrid& grid,
                              const BoundaryCondition& bc);

/// Independent prior for several DOFs sharing spec and grid.
JointGpPrior build_joint_prior(const HsgpSpec& spec, const TimeGrid& grid,
                               const std::vector<BoundaryCondition>& bcs);

ParticleSet sample_prior(const JointGpPrior& prior, int count, std::uint64_t seed);

/// Gaussian conditioning on noisy point observations. Node indices refer to the
/// full-grid layout of build_dof_prior (position node i at i, velocity at n_t + i).
JointGpPrior condition_prior(const JointGpPrior& prior, const std::vector<Observation>& observations);

/// Marginal over a subset of each block's coordinates (indices are per block).
JointGpPrior marginal_prior(const JointGpPrior& prior, const std::vector<std::vector<int>>& keep);

/// 0.5 (x - mu)^T K^-1 (x - mu) and its gradient K^-1 (x - mu).
std::pair<double, Eigen::VectorXd> prior_quadratic_form(const JointGpPrior& prior,
                                                        const Eigen::VectorXd& xi);

}  // namespace svnplan
