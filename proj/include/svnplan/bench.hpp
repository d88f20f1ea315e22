#pragma once

// Scenario files, benchmark orchestration, report aggregation and the data
// files consumed by external plotting.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "svnplan/planners.hpp"
#include "svnplan/planning.hpp"

namespace svnplan {

enum class ProblemKind { ToyGaussian, Unicycle, PointMass };

std::string to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(const std::string& name);

/// Correlated Gaussian with an optional ellipse equality; particles start
/// from an isotropic Gaussian blob.
struct ToyGaussianSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  std::optional<ConstrainedGaussian::Ellipse> ellipse;
  Eigen::VectorXd init_mean;
  double init_std = 0.5;
};

struct ScenarioFile {
  std::string name;
  ProblemKind kind = ProblemKind::Unicycle;
  /// Trajectory problems only.
  ProblemSpec problem;
  TrajectoryPriorSpec prior;
  /// Toy problem only.
  ToyGaussianSpec toy;
  /// Shared by the Stein planners; a non-positive lengthscale calibrates.
  KernelMetric kernel_metric = KernelMetric::Covariance;
  double kernel_lengthscale = 0.0;
  std::vector<PlannerConfig> planners;
  std::vector<std::uint64_t> seeds;

  /// Throws ConfigError listing every violation by field name.
  void validate() const;
  /// Planner `index` with the scenario kernel settings and `seed` applied.
  PlannerConfig planner_config(std::size_t index, std::uint64_t seed) const;
};

/// Throws ConfigError with the line number on parse errors, unknown keys or
/// invalid values.
ScenarioFile parse_scenario(const std::string& text);
ScenarioFile load_scenario(const std::filesystem::path& path);
/// YAML text that parse_scenario maps back to an identical scenario.
std::string serialize_scenario(const ScenarioFile& scenario);

/// Trajectory problem described by a (non-toy) scenario.
TrajectoryProblem build_problem(const ScenarioFile& scenario);
ConstrainedGaussian build_toy_target(const ScenarioFile& scenario);

/// One planner run on the scenario's problem.
PlanResult run_planner(const ScenarioFile& scenario, const PlannerConfig& config);

struct RunRecord {
  std::string planner;
  std::uint64_t seed = 0;
  /// Metrics of the selected best particle.
  double length = 0.0;
  double smoothness = 0.0;
  double violation_mse = 0.0;
  double max_violation = 0.0;
  double objective = 0.0;
  bool success = false;
  double wall_time = 0.0;
  long long queries = 0;
  /// "ok", "aborted: ..." or "error: ...".
  std::string status = "ok";
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct Aggregate {
  std::string planner;
  int runs = 0;
  MeanStd length;
  MeanStd smoothness;
  MeanStd violation_mse;
  MeanStd max_violation;
  MeanStd success;
  MeanStd wall_time;
};

struct BenchReport {
  std::string scenario;
  std::vector<RunRecord> rows;
  std::vector<Aggregate> aggregates;
  /// Results in row order; failed runs hold an empty result.
  std::vector<PlanResult> results;
};

/// Mean and population standard deviation per planner, in first-seen order.
std::vector<Aggregate> aggregate_rows(const std::vector<RunRecord>& rows);

/// Runs every (planner, seed) pair, writing traces/<planner>_seed<seed>.csv and
/// summary.{csv,json} under out_dir. A failing run is recorded and skipped.
BenchReport run_benchmark(const ScenarioFile& scenario, const std::filesystem::path& out_dir);

/// iteration, mean_objective, mean_abs_h, best_objective.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
void write_summary(const BenchReport& report, const std::filesystem::path& out_dir);

/// convergence_<planner>.csv (seed-averaged traces) and final particles of the
/// first seed: trajectories_<planner>.csv, or particles_<planner>.csv for the toy.
void emit_plot_data(const BenchReport& report, const ScenarioFile& scenario,
                    const std::filesystem::path& out_dir);

/// 1-D joint position/velocity prior and its posterior under asynchronous
/// position and velocity observations; writes prior_demo.csv and observations.csv.
void emit_prior_demo(const std::filesystem::path& out_dir);

}  // namespace svnplan
