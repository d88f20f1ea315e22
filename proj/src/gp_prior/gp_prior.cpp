#include "svnplan/gp_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "svnplan/errors.hpp"

namespace svnplan {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kJitterRetries = 6;

double eigenvalue_lower_bound(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().size() > 0 ? es.eigenvalues()(0) : 0.0;
}

void check_radius(double t, double radius) {
  if (!(radius > 0.0)) throw DomainError("HSGP domain radius must be positive");
  if (std::abs(t) > radius * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time " << t << " outside HSGP domain [-" << radius << ", " << radius << "]";
    throw DomainError(os.str());
  }
}

}  // namespace

HsgpSpec HsgpSpec::resolved(double horizon) const {
  HsgpSpec out = *this;
  if (out.domain_radius <= 0.0) out.domain_radius = 1.25 * horizon;
  return out;
}

void HsgpSpec::validate(double horizon) const {
  std::ostringstream os;
  if (!(lengthscale > 0.0)) os << "lengthscale must be > 0; ";
  if (!(variance >= 0.0)) os << "variance must be >= 0; ";
  if (!(noise >= 0.0)) os << "noise must be >= 0; ";
  if (feature_count < 1) os << "feature_count must be >= 1; ";
  const double radius = resolved(horizon).domain_radius;
  // The centered grid spans [-T/2, T/2] and has to sit strictly inside the domain.
  if (!(radius > 0.5 * horizon)) os << "domain_radius must exceed half the horizon; ";
  if (!os.str().empty()) throw ConfigError("invalid HSGP spec: " + os.str());
}

TimeGrid::TimeGrid(double horizon, int node_count) : horizon_(horizon) {
  if (!(horizon > 0.0)) throw ConfigError("time grid horizon must be > 0");
  if (node_count < 2) throw ConfigError("time grid needs at least 2 nodes");
  nodes_.resize(static_cast<std::size_t>(node_count));
  for (int i = 0; i < node_count; ++i)
    nodes_[static_cast<std::size_t>(i)] = horizon * static_cast<double>(i) / (node_count - 1);
  nodes_.back() = horizon;
}

double TimeGrid::step() const { return horizon_ / static_cast<double>(nodes_.size() - 1); }

double spectral_density(const HsgpSpec& spec, double omega) {
  const double ell = spec.lengthscale;
  switch (spec.family) {
    case KernelFamily::Matern32: {
      // 4 * 3^{3/2} / l^3 * (3 / l^2 + w^2)^{-2}
      const double a = 3.0 / (ell * ell) + omega * omega;
      return spec.variance * 4.0 * std::pow(3.0, 1.5) / (ell * ell * ell) / (a * a);
    }
    case KernelFamily::SquaredExponential:
      return spec.variance * std::sqrt(2.0 * kPi) * ell * std::exp(-0.5 * ell * ell * omega * omega);
  }
  throw ConfigError("unknown kernel family");
}

double basis_function(int j, double t, double radius) {
  check_radius(t, radius);
  return std::sin(kPi * j * (t + radius) / (2.0 * radius)) / std::sqrt(radius);
}

double integrated_basis(int j, double t, double radius) {
  check_radius(t, radius);
  const double c = 2.0 * radius / (kPi * j);
  return c * (std::cos(kPi * j / 2.0) - std::cos(kPi * j * (t + radius) / (2.0 * radius))) /
         std::sqrt(radius);
}

double velocity_kernel(const HsgpSpec& spec, double t, double s) {
  const double radius = spec.domain_radius;
  check_radius(t, radius);
  check_radius(s, radius);
  double sum = 0.0;
  for (int j = 1; j <= spec.feature_count; ++j) {
    const double sqrt_lambda = kPi * j / (2.0 * radius);
    sum += spectral_density(spec, sqrt_lambda) * basis_function(j, t, radius) *
           basis_function(j, s, radius);
  }
  return sum;
}

CovarianceBlocks joint_covariance(const HsgpSpec& raw_spec, const TimeGrid& grid,
                                  const BoundaryCondition& bc) {
  raw_spec.validate(grid.horizon());
  if (!(bc.x0_var >= 0.0)) throw ConfigError("x0_var must be >= 0");
  const HsgpSpec spec = raw_spec.resolved(grid.horizon());
  const double radius = spec.domain_radius;
  const int n = grid.size();
  const int m = spec.feature_count;

  // Feature matrices: weighted integrated features and plain features per node.
  Eigen::MatrixXd integ(n, m);
  Eigen::MatrixXd feat(n, m);
  Eigen::VectorXd weight(m);
  const double tau0 = grid.to_domain(0.0);
  for (int j = 1; j <= m; ++j) {
    weight(j - 1) = spectral_density(spec, kPi * j / (2.0 * radius));
    const double base = integrated_basis(j, tau0, radius);
    for (int i = 0; i < n; ++i) {
      const double tau = grid.to_domain(grid[i]);
      integ(i, j - 1) = integrated_basis(j, tau, radius) - base;
      feat(i, j - 1) = basis_function(j, tau, radius);
    }
  }

  CovarianceBlocks out;
  const Eigen::MatrixXd integ_w = integ * weight.asDiagonal();
  out.xx = integ_w * integ.transpose();
  out.xv = integ_w * feat.transpose();
  out.vv = feat * weight.asDiagonal() * feat.transpose();
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) out.xx(i, k) += bc.x0_var + std::min(grid[i], grid[k]) * spec.noise;
    out.vv(i, i) += spec.noise;
  }
  return out;
}

GaussianBlock::GaussianBlock(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
    throw DimensionError("Gaussian mean/covariance size mismatch");
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  const Eigen::Index n = mean_.size();
  if (n == 0) return;
  const double scale = covariance_.trace() / static_cast<double>(n);
  double jitter = 1e-12 * (scale > 0.0 ? scale : 1.0);
  for (int attempt = 0; attempt <= kJitterRetries; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd shifted = covariance_;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }
  const double lowest = eigenvalue_lower_bound(covariance_);
  std::ostringstream os;
  os << "covariance not positive definite after jitter " << jitter / 10.0
     << " (smallest eigenvalue " << lowest << ")";
  throw NumericalError(os.str(), lowest);
}

Eigen::VectorXd GaussianBlock::solve(const Eigen::VectorXd& rhs) const {
  const auto lower = factor_.triangularView<Eigen::Lower>();
  Eigen::VectorXd y = lower.solve(rhs);
  return lower.transpose().solve(y);
}

Eigen::MatrixXd GaussianBlock::precision() const {
  const auto lower = factor_.triangularView<Eigen::Lower>();
  Eigen::MatrixXd inv_l = lower.solve(Eigen::MatrixXd::Identity(dim(), dim()));
  return inv_l.transpose() * inv_l;
}

JointGpPrior::JointGpPrior(std::vector<GaussianBlock> blocks) : blocks_(std::move(blocks)) {}

Eigen::Index JointGpPrior::dim() const {
  Eigen::Index d = 0;
  for (const auto& b : blocks_) d += b.dim();
  return d;
}

Eigen::Index JointGpPrior::offset(int dof) const {
  Eigen::Index off = 0;
  for (int k = 0; k < dof; ++k) off += blocks_[static_cast<std::size_t>(k)].dim();
  return off;
}

Eigen::VectorXd JointGpPrior::mean() const {
  Eigen::VectorXd out(dim());
  Eigen::Index off = 0;
  for (const auto& b : blocks_) {
    out.segment(off, b.dim()) = b.mean();
    off += b.dim();
  }
  return out;
}

Eigen::MatrixXd JointGpPrior::covariance() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), dim());
  Eigen::Index off = 0;
  for (const auto& b : blocks_) {
    out.block(off, off, b.dim(), b.dim()) = b.covariance();
    off += b.dim();
  }
  return out;
}

Eigen::MatrixXd JointGpPrior::precision() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim(), dim());
  Eigen::Index off = 0;
  for (const auto& b : blocks_) {
    out.block(off, off, b.dim(), b.dim()) = b.precision();
    off += b.dim();
  }
  return out;
}

GaussianBlock build_dof_prior(const HsgpSpec& spec, const TimeGrid& grid,
                              const BoundaryCondition& bc) {
  const CovarianceBlocks cov = joint_covariance(spec, grid, bc);
  const int n = grid.size();
  const double velocity_mean = (bc.xT - bc.x0_mean) / grid.horizon();

  Eigen::VectorXd mean(2 * n);
  for (int i = 0; i < n; ++i) {
    mean(i) = bc.x0_mean + velocity_mean * grid[i];
    mean(n + i) = velocity_mean;
  }
  Eigen::MatrixXd joint(2 * n, 2 * n);
  joint.topLeftCorner(n, n) = cov.xx;
  joint.topRightCorner(n, n) = cov.xv;
  joint.bottomLeftCorner(n, n) = cov.xv.transpose();
  joint.bottomRightCorner(n, n) = cov.vv;
  return GaussianBlock(std::move(mean), std::move(joint));
}

JointGpPrior build_joint_prior(const HsgpSpec& spec, const TimeGrid& grid,
                               const std::vector<BoundaryCondition>& bcs) {
  std::vector<GaussianBlock> blocks;
  blocks.reserve(bcs.size());
  for (const auto& bc : bcs) blocks.push_back(build_dof_prior(spec, grid, bc));
  return JointGpPrior(std::move(blocks));
}

ParticleSet sample_prior(const JointGpPrior& prior, int count, std::uint64_t seed) {
  if (count < 0) throw ConfigError("sample count must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParticleSet out(prior.dim(), count);
  Eigen::VectorXd z;
  for (int p = 0; p < count; ++p) {
    Eigen::Index off = 0;
    for (int k = 0; k < prior.dof_count(); ++k) {
      const GaussianBlock& b = prior.block(k);
      z.resize(b.dim());
      for (Eigen::Index i = 0; i < b.dim(); ++i) z(i) = normal(rng);
      out[p].segment(off, b.dim()) =
          b.mean() + b.factor().triangularView<Eigen::Lower>() * z;
      off += b.dim();
    }
  }
  return out;
}

JointGpPrior condition_prior(const JointGpPrior& prior, const std::vector<Observation>& observations) {
  std::vector<GaussianBlock> blocks;
  for (int k = 0; k < prior.dof_count(); ++k) {
    const GaussianBlock& b = prior.block(k);
    const Eigen::Index n_nodes = b.dim() / 2;
    std::vector<Eigen::Index> idx;
    std::vector<double> values;
    std::vector<double> noise;
    for (const auto& obs : observations) {
      if (obs.dof < 0 || obs.dof >= prior.dof_count())
        throw ConfigError("observation refers to an unknown DOF");
      if (obs.dof != k) continue;
      if (obs.node < 0 || obs.node >= n_nodes) throw ConfigError("observation node off the grid");
      if (!(obs.noise_var >= 0.0)) throw ConfigError("observation noise must be >= 0");
      idx.push_back(obs.kind == ObservationKind::Position ? obs.node : n_nodes + obs.node);
      values.push_back(obs.value);
      noise.push_back(obs.noise_var);
    }
    if (idx.empty()) {
      blocks.push_back(b);
      continue;
    }
    const Eigen::Index m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd cross(b.dim(), m);  // K[:, obs]
    Eigen::MatrixXd gram(m, m);
    Eigen::VectorXd innovation(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      cross.col(a) = b.covariance().col(idx[a]);
      innovation(a) = values[a] - b.mean()(idx[a]);
      for (Eigen::Index c = 0; c < m; ++c) gram(a, c) = b.covariance()(idx[a], idx[c]);
      gram(a, a) += noise[a];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-15 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      throw NumericalError("observation Gram matrix is singular", eigenvalue_lower_bound(gram));
    }
    const Eigen::MatrixXd gain = ldlt.solve(cross.transpose()).transpose();
    Eigen::VectorXd mean = b.mean() + gain * innovation;
    Eigen::MatrixXd cov = b.covariance() - gain * cross.transpose();
    blocks.emplace_back(std::move(mean), std::move(cov));
  }
  return JointGpPrior(std::move(blocks));
}

JointGpPrior marginal_prior(const JointGpPrior& prior, const std::vector<std::vector<int>>& keep) {
  if (static_cast<int>(keep.size()) != prior.dof_count())
    throw DimensionError("marginal_prior needs one index list per DOF");
  std::vector<GaussianBlock> blocks;
  for (int k = 0; k < prior.dof_count(); ++k) {
    const GaussianBlock& b = prior.block(k);
    const auto& ids = keep[static_cast<std::size_t>(k)];
    const Eigen::Index m = static_cast<Eigen::Index>(ids.size());
    Eigen::VectorXd mean(m);
    Eigen::MatrixXd cov(m, m);
    for (Eigen::Index a = 0; a < m; ++a) {
      if (ids[a] < 0 || ids[a] >= b.dim()) throw DimensionError("marginal index out of range");
      mean(a) = b.mean()(ids[a]);
      for (Eigen::Index c = 0; c < m; ++c) cov(a, c) = b.covariance()(ids[a], ids[c]);
    }
    blocks.emplace_back(std::move(mean), std::move(cov));
  }
  return JointGpPrior(std::move(blocks));
}

std::pair<double, Eigen::VectorXd> prior_quadratic_form(const JointGpPrior& prior,
                                                        const Eigen::VectorXd& xi) {
  if (xi.size() != prior.dim()) throw DimensionError("trajectory length does not match prior");
  double value = 0.0;
  Eigen::VectorXd grad(xi.size());
  Eigen::Index off = 0;
  for (int k = 0; k < prior.dof_count(); ++k) {
    const GaussianBlock& b = prior.block(k);
    const Eigen::VectorXd r = xi.segment(off, b.dim()) - b.mean();
    const Eigen::VectorXd w = b.solve(r);
    value += 0.5 * r.dot(w);
    grad.segment(off, b.dim()) = w;
    off += b.dim();
  }
  return {value, grad};
}

}  // namespace svnplan
