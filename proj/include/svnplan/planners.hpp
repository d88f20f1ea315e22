#pragma once

// Particle planners: constrained SVN / SVGD over a Target, and the
// penalty-method CHOMP / GPMP baselines over a TrajectoryProblem.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "svnplan/particles.hpp"
#include "svnplan/planning.hpp"
#include "svnplan/stein.hpp"
#include "svnplan/target.hpp"

namespace svnplan {

enum class PlannerKind { Csvn, Csvgd, Chomp, Gpmp };

std::string to_string(PlannerKind kind);
/// Throws ConfigError on an unknown name.
PlannerKind planner_kind_from_string(const std::string& name);

struct BaselinePriorSpec {
  /// Finite-difference order of the velocity smoothness term (1 or 2).
  int order = 1;
  double weight = 1.0;
  /// Weight of the squared constraint penalty.
  double penalty = 100.0;
  /// Std-dev of the Gaussian perturbation around the straight-line init.
  double perturbation = 0.1;
};

struct PlannerConfig {
  PlannerKind kind = PlannerKind::Csvn;
  int particles = 50;
  int iterations = 4000;
  double rate = 1.0;
  int warmup = 50;
  /// Levenberg damping; non-positive selects 1e-3 * trace(H) / d per solve.
  double damping = 0.0;
  int damping_retries = 5;
  /// Slack drift weight; negative means "same as the damping".
  double slack_beta = -1.0;
  KernelMetric metric = KernelMetric::Covariance;
  /// Fixed kernel lengthscale; non-positive calibrates to a median kernel of 0.5.
  double kernel_lengthscale = 0.0;
  std::uint64_t seed = 0;
  /// Early stop when both mean |h| and mean |delta| fall below these; 0 disables.
  double constraint_tol = 0.0;
  double step_tol = 0.0;
  bool record_ksd = false;
  BaselinePriorSpec baseline;

  void validate() const;
};

struct TraceRow {
  int iteration = 0;
  double mean_objective = 0.0;
  double mean_abs_h = 0.0;
  double best_objective = 0.0;
  double max_abs_h = 0.0;
  double mean_task_cost = 0.0;
  double ksd = 0.0;
};

struct ParticleMetrics {
  double length = 0.0;
  double smoothness = 0.0;
  double violation_mse = 0.0;
  double max_violation = 0.0;
  double objective = 0.0;
  bool success = false;
};

struct PlanResult {
  PlannerKind kind = PlannerKind::Csvn;
  ParticleSet particles;
  std::vector<TraceRow> trace;
  int best = 0;
  std::vector<ParticleMetrics> metrics;
  /// Score / gradient evaluations spent by the planner: N for the initial
  /// particles plus N per iteration.
  long long queries = 0;
  double wall_time = 0.0;
  TrajectoryKernelSpec kernel;
  /// Set when the run stopped early on a numerical failure; `message` says why.
  bool aborted = false;
  std::string message;
};

/// Constrained Stein variational Newton over any target. `kernel` lengthscales
/// are used as given.
PlanResult plan_csvn(const Target& target, ParticleSet init, const TrajectoryKernelSpec& kernel,
                     const PlannerConfig& config);
/// Constrained SVGD (null-space projection plus feasibility restoration).
PlanResult plan_csvgd(const Target& target, ParticleSet init, const TrajectoryKernelSpec& kernel,
                      const PlannerConfig& config);

/// Trajectory versions: particles are drawn from the problem prior with the
/// config seed and the kernel is built from the prior covariance.
PlanResult plan_csvn(const TrajectoryProblem& problem, const PlannerConfig& config);
PlanResult plan_csvgd(const TrajectoryProblem& problem, const PlannerConfig& config);

/// Initial particles and calibrated kernel shared by both Stein planners.
ParticleSet stein_initial_particles(const TrajectoryProblem& problem, const PlannerConfig& config);
TrajectoryKernelSpec stein_kernel(const TrajectoryProblem& problem, const ParticleSet& init,
                                  const PlannerConfig& config);

/// Quadratic smoothness prior 0.5 x^T A x - b^T x + c over the decision vector.
struct QuadraticPrior {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  double c = 0.0;

  double value(const Eigen::VectorXd& x) const { return 0.5 * x.dot(a * x) - b.dot(x) + c; }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return a * x - b; }
};

/// Finite-difference smoothness metric used by CHOMP.
QuadraticPrior chomp_prior(const TrajectoryProblem& problem, const BaselinePriorSpec& spec);
/// Constant-velocity (white-noise-on-acceleration) GP prior used by GPMP.
QuadraticPrior gpmp_prior(const TrajectoryProblem& problem, const BaselinePriorSpec& spec);

/// Penalty objective prior + L + penalty * |h|^2 and its gradient.
double penalty_objective(const TrajectoryProblem& problem, const QuadraticPrior& prior,
                         double penalty, const Eigen::VectorXd& xi, Eigen::VectorXd* gradient);

/// -rate * metric^-1 * gradient.
Eigen::VectorXd covariant_step(const Eigen::MatrixXd& metric, const Eigen::VectorXd& gradient, double rate);

ParticleSet baseline_initial_particles(const TrajectoryProblem& problem, const PlannerConfig& config);

PlanResult plan_chomp(const TrajectoryProblem& problem, const PlannerConfig& config);
PlanResult plan_gpmp(const TrajectoryProblem& problem, const PlannerConfig& config);

/// Dispatches on config.kind.
PlanResult plan(const TrajectoryProblem& problem, const PlannerConfig& config);

/// Lowest objective among particles with violation <= tol; otherwise lowest
/// violation with the objective as tie-break.
int select_best(const std::vector<double>& objectives, const std::vector<double>& max_violations,
                double feasibility_tol);

struct TrajectoryMetrics {
  double length = 0.0;
  double smoothness = 0.0;
  double violation_mse = 0.0;
};

TrajectoryMetrics trajectory_metrics(const TrajectoryProblem& problem, const Eigen::VectorXd& xi);

/// Greedy clustering: a particle joins the first representative with kernel
/// value >= threshold, else becomes a new representative. Returns representatives.
std::vector<int> kernel_clusters(const ParticleSet& particles, const TrajectoryKernelSpec& kernel,
                                 double threshold = 0.5);

/// Degree of parallelism from SVNPLAN_THREADS (0 or unset keeps the default).
void configure_threads_from_env();

}  // namespace svnplan
