#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>

#include "svnplan/errors.hpp"
#include "svnplan/gp_prior.hpp"
#include "test_support.hpp"

namespace svnplan {
namespace {

using testing::fd_gradient;
using testing::integrate;
using testing::matern32;

constexpr double kPi = 3.14159265358979323846;

// Numerical Fourier transform of a stationary kernel: S(w) = 2 * int_0^inf k(r) cos(w r) dr.
double fourier_oracle(const std::function<double(double)>& k, double omega) {
  auto f = [&](double r) { return k(r) * std::cos(omega * r); };
  return 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                   f, 0.0, std::numeric_limits<double>::infinity(), 20, 1e-13);
}

HsgpSpec matern(double ell, double var) {
  HsgpSpec s;
  s.family = KernelFamily::Matern32;
  s.lengthscale = ell;
  s.variance = var;
  return s;
}

TEST(SpectralDensity, MaternAtZeroMatchesFourierTransform) {
  const HsgpSpec s = matern(1.0, 1.0);
  EXPECT_NEAR(spectral_density(s, 0.0), fourier_oracle([](double r) { return matern32(r, 1.0, 1.0); }, 0.0),
              1e-8);
  EXPECT_NEAR(spectral_density(s, 0.0), 4.0 / std::sqrt(3.0), 1e-12);
}

TEST(SpectralDensity, SquaredExponentialAtZeroMatchesFourierTransform) {
  HsgpSpec s;
  s.family = KernelFamily::SquaredExponential;
  const double oracle = fourier_oracle([](double r) { return std::exp(-0.5 * r * r); }, 0.0);
  EXPECT_NEAR(spectral_density(s, 0.0), oracle, 1e-8);
}

TEST(SpectralDensity, MatchesFourierTransformAcrossFrequencies) {
  for (double ell : {0.5, 1.0, 2.0}) {
    for (double w : {0.3, 1.0, 2.5, 5.0}) {
      const HsgpSpec m = matern(ell, 1.7);
      const double om = fourier_oracle([&](double r) { return matern32(r, ell, 1.7); }, w);
      EXPECT_NEAR(spectral_density(m, w), om, 1e-7 * std::max(1.0, om)) << "matern ell=" << ell << " w=" << w;

      HsgpSpec se = m;
      se.family = KernelFamily::SquaredExponential;
      const double os = fourier_oracle([&](double r) { return 1.7 * std::exp(-0.5 * r * r / (ell * ell)); }, w);
      EXPECT_NEAR(spectral_density(se, w), os, 1e-7 * std::max(1.0, os)) << "se ell=" << ell << " w=" << w;
    }
  }
}

TEST(SpectralDensity, EvenAndZeroForZeroVariance) {
  for (KernelFamily f : {KernelFamily::Matern32, KernelFamily::SquaredExponential}) {
    HsgpSpec s;
    s.family = f;
    EXPECT_DOUBLE_EQ(spectral_density(s, 1.3), spectral_density(s, -1.3));
    s.variance = 0.0;
    EXPECT_EQ(spectral_density(s, 0.7), 0.0);
  }
}

TEST(BasisFunction, MidpointBoundaryAndFormula) {
  EXPECT_NEAR(basis_function(1, 0.0, 1.0), 1.0, 1e-15);
  for (int j = 1; j <= 64; ++j) {
    EXPECT_NEAR(basis_function(j, -2.0, 2.0), 0.0, 1e-14);
    EXPECT_NEAR(basis_function(j, 2.0, 2.0), 0.0, 1e-13);
  }
  EXPECT_NEAR(basis_function(2, 0.3, 1.0), std::sin(kPi * 2.0 * 1.3 / 2.0), 1e-15);
  EXPECT_THROW(basis_function(1, 1.5, 1.0), DomainError);
}

TEST(IntegratedBasis, MatchesQuadrature) {
  EXPECT_EQ(integrated_basis(3, 0.0, 1.0), 0.0);
  auto quad = [](int j, double t, double L) {
    return integrate([&](double u) { return basis_function(j, u, L); }, 0.0, t);
  };
  EXPECT_NEAR(integrated_basis(1, 0.5, 1.0), quad(1, 0.5, 1.0), 1e-10);
  EXPECT_NEAR(integrated_basis(4, -0.7, 1.0), quad(4, -0.7, 1.0), 1e-10);
  EXPECT_THROW(integrated_basis(1, -1.1, 1.0), DomainError);
}

TEST(VelocityKernel, SymmetricAndEmptySum) {
  HsgpSpec s = matern(1.0, 1.0).resolved(4.0);
  EXPECT_EQ(velocity_kernel(s, 0.3, -1.1), velocity_kernel(s, -1.1, 0.3));
  s.feature_count = 0;
  EXPECT_EQ(velocity_kernel(s, 0.3, -1.1), 0.0);
}

TEST(VelocityKernel, DiagonalNearClosedFormWithWideDomain) {
  HsgpSpec s = matern(1.0, 1.0);
  s.domain_radius = 5.0 * 1.0;  // horizon 1
  for (double t : {-0.5, 0.0, 0.4}) EXPECT_NEAR(velocity_kernel(s, t, t), 1.0, 1e-3);
}

TEST(VelocityKernel, ReconstructionInsideTheActiveRegion) {
  const double horizon = 5.0;
  const HsgpSpec s = matern(1.0, 2.0).resolved(horizon);
  const TimeGrid grid(horizon, 41);
  double err = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    for (int k = 0; k < grid.size(); ++k) {
      const double a = grid.to_domain(grid[i]);
      const double b = grid.to_domain(grid[k]);
      err = std::max(err, std::abs(velocity_kernel(s, a, b) - matern32(a - b, 1.0, 2.0)));
    }
  }
  EXPECT_LE(err, 1e-3 * s.variance);
}

TEST(JointCovariance, EntriesMatchQuadratureOracles) {
  HsgpSpec s = matern(1.0, 1.0);
  s.noise = 0.05;
  s.feature_count = 24;
  const TimeGrid grid(2.0, 5);
  BoundaryCondition bc;
  bc.x0_var = 0.3;
  const CovarianceBlocks c = joint_covariance(s, grid, bc);
  const HsgpSpec r = s.resolved(grid.horizon());
  for (int i = 0; i < grid.size(); ++i) {
    for (int k = 0; k < grid.size(); ++k) {
      const double xx = testing::oracle_cov_xx(r, grid, bc.x0_var, grid[i], grid[k]);
      const double xv = testing::oracle_cov_xv(r, grid, grid[i], grid[k]);
      EXPECT_NEAR(c.xx(i, k), xx, 1e-6 * std::max(std::abs(xx), 1e-8)) << i << "," << k;
      EXPECT_NEAR(c.xv(i, k), xv, 1e-6 * std::max(std::abs(xv), 1e-8)) << i << "," << k;
    }
    EXPECT_NEAR(c.vv(i, i), velocity_kernel(r, grid.to_domain(grid[i]), grid.to_domain(grid[i])) + s.noise,
                1e-12);
  }
  EXPECT_DOUBLE_EQ(c.xx(0, 0), bc.x0_var);
}

TEST(JointPrior, LinearMeanAndZeroMeanOption) {
  const TimeGrid grid(1.0, 11);
  BoundaryCondition bc;
  bc.x0_mean = 0.0;
  bc.xT = 2.0;
  bc.x0_var = 1e-4;
  const GaussianBlock b = build_dof_prior(matern(0.5, 1.0), grid, bc);
  for (int i = 0; i < 11; ++i) EXPECT_NEAR(b.mean()(11 + i), 2.0, 1e-15);
  EXPECT_NEAR(b.mean()(10), 2.0, 1e-15);
  EXPECT_NEAR(b.mean()(5), 1.0, 1e-15);

  bc.xT = bc.x0_mean;
  const GaussianBlock z = build_dof_prior(matern(0.5, 1.0), grid, bc);
  EXPECT_NEAR(z.mean().tail(11).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(JointPrior, CovarianceIsSymmetricWithTransposedCrossBlock) {
  const TimeGrid grid(3.0, 9);
  BoundaryCondition bc;
  bc.x0_var = 1e-3;
  const GaussianBlock b = build_dof_prior(matern(1.0, 1.0), grid, bc);
  const Eigen::MatrixXd& k = b.covariance();
  EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const CovarianceBlocks c = joint_covariance(matern(1.0, 1.0), grid, bc);
  EXPECT_LE((k.bottomLeftCorner(9, 9) - c.xv.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GE(b.jitter(), 0.0);
}

TEST(SamplePrior, EmptyAndDeterministic) {
  const TimeGrid grid(2.0, 6);
  const JointGpPrior p = build_joint_prior(matern(1.0, 1.0), grid, {BoundaryCondition{0.0, 1e-4, 1.0}});
  EXPECT_TRUE(sample_prior(p, 0, 1).empty());
  EXPECT_EQ(sample_prior(p, 5, 3), sample_prior(p, 5, 3));
  EXPECT_FALSE(sample_prior(p, 5, 3) == sample_prior(p, 5, 4));
}

TEST(SamplePrior, FiniteDifferencesTrackSampledVelocities) {
  HsgpSpec s = matern(1.0, 1.0);
  const TimeGrid grid(4.0, 64);
  const JointGpPrior p = build_joint_prior(s, grid, {BoundaryCondition{0.0, 1e-4, 0.0}});
  const ParticleSet samples = sample_prior(p, 100, 11);
  const int n = grid.size();
  double mean_r = 0.0;
  for (Eigen::Index k = 0; k < samples.size(); ++k) {
    const Eigen::VectorXd x = samples[k];
    Eigen::VectorXd fd(n - 1), v(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
      fd(i) = (x(i + 1) - x(i)) / grid.step();
      v(i) = 0.5 * (x(n + i) + x(n + i + 1));
    }
    const Eigen::VectorXd a = fd.array() - fd.mean();
    const Eigen::VectorXd b = v.array() - v.mean();
    mean_r += a.dot(b) / (a.norm() * b.norm());
  }
  EXPECT_GE(mean_r / 100.0, 0.99);
}

TEST(ConditionPrior, MatchesDenseConditioningOracle) {
  const TimeGrid grid(2.0, 7);
  HsgpSpec s = matern(0.8, 1.0);
  s.noise = 0.01;
  const JointGpPrior p =
      build_joint_prior(s, grid, {BoundaryCondition{0.0, 1e-2, 1.0}, BoundaryCondition{1.0, 1e-2, -1.0}});
  const std::vector<Observation> obs = {{0, ObservationKind::Position, 3, 0.7, 1e-3},
                                        {1, ObservationKind::Velocity, 5, 0.2, 1e-2},
                                        {0, ObservationKind::Velocity, 1, -0.4, 1e-3}};
  const JointGpPrior post = condition_prior(p, obs);

  const Eigen::MatrixXd k = p.covariance();
  const Eigen::VectorXd mu = p.mean();
  const int n = grid.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, k.rows());
  Eigen::VectorXd y(3), r(3);
  for (int i = 0; i < 3; ++i) {
    const int col = obs[i].dof * 2 * n + (obs[i].kind == ObservationKind::Velocity ? n : 0) + obs[i].node;
    h(i, col) = 1.0;
    y(i) = obs[i].value;
    r(i) = obs[i].noise_var;
  }
  const Eigen::MatrixXd s_mat = h * k * h.transpose() + Eigen::MatrixXd(r.asDiagonal());
  const Eigen::MatrixXd gain = k * h.transpose() * s_mat.inverse();
  const Eigen::VectorXd mu_post = mu + gain * (y - h * mu);
  const Eigen::MatrixXd k_post = k - gain * h * k;

  EXPECT_LE((post.mean() - mu_post).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((post.covariance() - k_post).cwiseAbs().maxCoeff(), 1e-8);
  const Eigen::VectorXd dv = post.covariance().diagonal() - k.diagonal();
  EXPECT_LE(dv.maxCoeff(), 1e-12);
}

TEST(ConditionPrior, RedundantStartAndVelocityInterpolation) {
  const TimeGrid grid(2.0, 11);
  const JointGpPrior p = build_joint_prior(matern(1.0, 1.0), grid, {BoundaryCondition{0.5, 1e-4, 1.5}});
  const JointGpPrior same = condition_prior(p, {{0, ObservationKind::Position, 0, 0.5, 1e-4}});
  EXPECT_LE((same.mean() - p.mean()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(same.covariance()(0, 0), 0.5e-4, 1e-9);

  const JointGpPrior v = condition_prior(p, {{0, ObservationKind::Velocity, 6, 0.0, 1e-10}});
  EXPECT_NEAR(v.block(0).mean()(11 + 6), 0.0, 1e-3);
  EXPECT_LE(v.block(0).covariance()(11 + 6, 11 + 6), 1e-10 + 1e-9);
}

TEST(PriorQuadraticForm, ValueGradientAndHomogeneity) {
  const TimeGrid grid(2.0, 6);
  HsgpSpec s = matern(1.0, 1.0);
  s.noise = 0.1;
  const JointGpPrior p = build_joint_prior(s, grid, {BoundaryCondition{0.0, 1e-2, 1.0}});
  const auto [v0, g0] = prior_quadratic_form(p, p.mean());
  EXPECT_EQ(v0, 0.0);
  EXPECT_EQ(g0.norm(), 0.0);

  std::mt19937_64 rng(5);
  const Eigen::VectorXd d = testing::random_vector(p.dim(), rng, 0.1);
  const Eigen::VectorXd x = p.mean() + d;
  const auto [v, g] = prior_quadratic_form(p, x);
  const Eigen::VectorXd fd =
      fd_gradient([&](const Eigen::VectorXd& z) { return prior_quadratic_form(p, z).first; }, x, 1e-7);
  EXPECT_LE((g - fd).norm() / g.norm(), 1e-6);
  EXPECT_NEAR(prior_quadratic_form(p, p.mean() + std::sqrt(2.0) * d).first, 2.0 * v, 1e-9 * v);
  EXPECT_THROW(prior_quadratic_form(p, Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST(HsgpSpec, RejectsInvalidSettings) {
  HsgpSpec s;
  s.lengthscale = -1.0;
  EXPECT_THROW(s.validate(1.0), ConfigError);
  s = HsgpSpec{};
  s.domain_radius = 0.4;
  EXPECT_THROW(s.validate(1.0), ConfigError);
  s = HsgpSpec{};
  s.feature_count = 0;
  EXPECT_THROW(s.validate(1.0), ConfigError);
}

}  // namespace
}  // namespace svnplan
