#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "svnplan/bench.hpp"
#include "svnplan/errors.hpp"

namespace svnplan {
namespace {

namespace fs = std::filesystem;

const char* kSmallUnicycle = R"(name: small
problem: unicycle
seeds: [0, 1, 2]
time: {horizon: 5.0, nodes: 8}
prior: {family: matern32, lengthscale: 1.5, variance: 1.0, noise: 0.1, features: 32}
scene:
  circles:
    - {center: [2.0, 2.0], radius: 0.5}
start: [0.0, 0.0, 0.0]
goal: [4.0, 4.0, 1.5707963267948966]
clamp_goal: true
costs: {mode: exp_sum, obstacle: 1.0, prior: 0.01}
planners:
  - {kind: csvn, particles: 4, iterations: 12, rate: 1.0}
  - {kind: chomp, particles: 4, iterations: 12, rate: 1.0e-3}
)";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("svnplan_test_bench_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string config_error(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Scenario, ParseErrorsNameTheProblem) {
  EXPECT_NE(config_error("").find("line 1"), std::string::npos);
  const std::string unknown = config_error(std::string(kSmallUnicycle) + "colour: blue\n");
  EXPECT_NE(unknown.find("colour"), std::string::npos);
  EXPECT_NE(unknown.find("line 16"), std::string::npos) << unknown;

  std::string negative = kSmallUnicycle;
  negative.replace(negative.find("particles: 4"), 12, "particles: -3");
  const std::string msg = config_error(negative);
  EXPECT_NE(msg.find("particles"), std::string::npos) << msg;

  std::string typed = kSmallUnicycle;
  typed.replace(typed.find("nodes: 8"), 8, "nodes: many");
  EXPECT_NE(config_error(typed).find("nodes"), std::string::npos);

  std::string kind = kSmallUnicycle;
  kind.replace(kind.find("kind: chomp"), 11, "kind: rrt");
  EXPECT_FALSE(config_error(kind).empty());
}

TEST(Scenario, BundledScenariosLoad) {
  const ScenarioFile uni = load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / "unicycle.yaml");
  ASSERT_FALSE(uni.planners.empty());
  EXPECT_EQ(uni.kind, ProblemKind::Unicycle);
  for (const PlannerConfig& p : uni.planners) EXPECT_EQ(p.particles, 50);
  EXPECT_EQ(load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / "pointmass.yaml").kind, ProblemKind::PointMass);
  EXPECT_EQ(load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / "toy_gaussian.yaml").kind, ProblemKind::ToyGaussian);
  EXPECT_THROW(load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / "missing.yaml"), ConfigError);
}

// Field-by-field comparison, written independently of the serializer.
void expect_same(const ScenarioFile& a, const ScenarioFile& b) {
  EXPECT_EQ(a.name, b.name);
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.seeds, b.seeds);
  EXPECT_EQ(a.kernel_metric, b.kernel_metric);
  EXPECT_EQ(a.kernel_lengthscale, b.kernel_lengthscale);

  const ProblemSpec &p = a.problem, &q = b.problem;
  EXPECT_EQ(p.layout, q.layout);
  EXPECT_EQ(p.start, q.start);
  EXPECT_EQ(p.goal, q.goal);
  EXPECT_EQ(p.weights.obstacle, q.weights.obstacle);
  EXPECT_EQ(p.weights.prior, q.weights.prior);
  EXPECT_EQ(p.weights.length, q.weights.length);
  EXPECT_EQ(p.weights.limits, q.weights.limits);
  EXPECT_EQ(p.mode, q.mode);
  EXPECT_EQ(p.safety_margin, q.safety_margin);
  EXPECT_EQ(p.lower, q.lower);
  EXPECT_EQ(p.upper, q.upper);
  EXPECT_EQ(p.clamp_goal, q.clamp_goal);
  EXPECT_EQ(p.goal_variance, q.goal_variance);
  EXPECT_EQ(p.workspace_inequalities, q.workspace_inequalities);
  EXPECT_EQ(p.scene.lower, q.scene.lower);
  EXPECT_EQ(p.scene.upper, q.scene.upper);
  ASSERT_EQ(p.scene.circles.size(), q.scene.circles.size());
  for (std::size_t i = 0; i < p.scene.circles.size(); ++i) {
    EXPECT_EQ(p.scene.circles[i].center, q.scene.circles[i].center);
    EXPECT_EQ(p.scene.circles[i].radius, q.scene.circles[i].radius);
  }
  ASSERT_EQ(p.scene.boxes.size(), q.scene.boxes.size());
  for (std::size_t i = 0; i < p.scene.boxes.size(); ++i) {
    EXPECT_EQ(p.scene.boxes[i].center, q.scene.boxes[i].center);
    EXPECT_EQ(p.scene.boxes[i].half_extents, q.scene.boxes[i].half_extents);
  }

  EXPECT_EQ(a.prior.horizon, b.prior.horizon);
  EXPECT_EQ(a.prior.nodes, b.prior.nodes);
  EXPECT_EQ(a.prior.start_variance, b.prior.start_variance);
  EXPECT_EQ(a.prior.hsgp.family, b.prior.hsgp.family);
  EXPECT_EQ(a.prior.hsgp.lengthscale, b.prior.hsgp.lengthscale);
  EXPECT_EQ(a.prior.hsgp.variance, b.prior.hsgp.variance);
  EXPECT_EQ(a.prior.hsgp.noise, b.prior.hsgp.noise);
  EXPECT_EQ(a.prior.hsgp.feature_count, b.prior.hsgp.feature_count);
  EXPECT_EQ(a.prior.hsgp.domain_radius, b.prior.hsgp.domain_radius);

  ASSERT_EQ(a.planners.size(), b.planners.size());
  for (std::size_t i = 0; i < a.planners.size(); ++i) {
    const PlannerConfig &x = a.planners[i], &y = b.planners[i];
    EXPECT_EQ(x.kind, y.kind);
    EXPECT_EQ(x.particles, y.particles);
    EXPECT_EQ(x.iterations, y.iterations);
    EXPECT_EQ(x.rate, y.rate);
    EXPECT_EQ(x.warmup, y.warmup);
    EXPECT_EQ(x.damping, y.damping);
    EXPECT_EQ(x.damping_retries, y.damping_retries);
    EXPECT_EQ(x.slack_beta, y.slack_beta);
    EXPECT_EQ(x.constraint_tol, y.constraint_tol);
    EXPECT_EQ(x.step_tol, y.step_tol);
    EXPECT_EQ(x.record_ksd, y.record_ksd);
    EXPECT_EQ(x.baseline.order, y.baseline.order);
    EXPECT_EQ(x.baseline.weight, y.baseline.weight);
    EXPECT_EQ(x.baseline.penalty, y.baseline.penalty);
    EXPECT_EQ(x.baseline.perturbation, y.baseline.perturbation);
  }

  EXPECT_EQ(a.toy.mean, b.toy.mean);
  EXPECT_EQ(a.toy.covariance, b.toy.covariance);
  EXPECT_EQ(a.toy.init_mean, b.toy.init_mean);
  EXPECT_EQ(a.toy.init_std, b.toy.init_std);
  ASSERT_EQ(a.toy.ellipse.has_value(), b.toy.ellipse.has_value());
  if (a.toy.ellipse) {
    EXPECT_EQ(a.toy.ellipse->center, b.toy.ellipse->center);
    EXPECT_EQ(a.toy.ellipse->axes, b.toy.ellipse->axes);
  }
}

TEST(Scenario, SerializeRoundTripsExactly) {
  for (const char* name : {"unicycle.yaml", "pointmass.yaml", "toy_gaussian.yaml"}) {
    const ScenarioFile s = load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / name);
    const std::string text = serialize_scenario(s);
    const ScenarioFile back = parse_scenario(text);
    SCOPED_TRACE(name);
    expect_same(s, back);
    EXPECT_EQ(serialize_scenario(back), text);
  }
  ScenarioFile s = parse_scenario(kSmallUnicycle);
  s.problem.weights.length = 0.1 + 0.2;  // not exactly representable in short decimal
  s.problem.scene.boxes.push_back({{1.0 / 3.0, -2.0}, {0.25, 0.7}});
  expect_same(s, parse_scenario(serialize_scenario(s)));
}

TEST(Bench, RowsTracesAndAggregates) {
  const ScenarioFile s = parse_scenario(kSmallUnicycle);
  const fs::path out = fresh_dir("rows");
  const BenchReport report = run_benchmark(s, out);
  ASSERT_EQ(report.rows.size(), 6u);
  for (const RunRecord& r : report.rows) {
    EXPECT_EQ(r.status, "ok");
    EXPECT_TRUE(fs::exists(out / "traces" / (r.planner + "_seed" + std::to_string(r.seed) + ".csv")));
  }
  int traces = 0;
  for (const auto& e : fs::directory_iterator(out / "traces")) traces += e.is_regular_file();
  EXPECT_EQ(traces, 6);

  // Trace files: header plus one row per iteration.
  std::istringstream trace(read_file(out / "traces" / "csvn_seed0.csv"));
  std::string line;
  std::getline(trace, line);
  EXPECT_EQ(line, "iteration,mean_objective,mean_abs_h,best_objective");
  int lines = 0;
  while (std::getline(trace, line)) ++lines;
  EXPECT_EQ(lines, 12);

  // Aggregates recomputed from the rows (population standard deviation).
  ASSERT_EQ(report.aggregates.size(), 2u);
  for (const Aggregate& a : report.aggregates) {
    double sum = 0.0, sq = 0.0, succ = 0.0;
    int n = 0;
    for (const RunRecord& r : report.rows) {
      if (r.planner != a.planner) continue;
      sum += r.length;
      succ += r.success;
      ++n;
    }
    const double mean = sum / n;
    for (const RunRecord& r : report.rows)
      if (r.planner == a.planner) sq += (r.length - mean) * (r.length - mean);
    EXPECT_EQ(a.runs, n);
    EXPECT_NEAR(a.length.mean, mean, 1e-12 * std::abs(mean));
    EXPECT_NEAR(a.length.std, std::sqrt(sq / n), 1e-12 * std::max(1.0, mean));
    EXPECT_NEAR(a.success.mean, succ / n, 1e-12);
  }

  // The JSON summary carries the same rows.
  const auto j = nlohmann::json::parse(read_file(out / "summary.json"));
  EXPECT_EQ(j.at("runs").size(), 6u);
  EXPECT_EQ(j.at("aggregates").size(), 2u);
  std::istringstream csv(read_file(out / "summary.csv"));
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("planner,seed,length,smoothness,violation_mse,success,wall_time", 0), 0u) << line;
}

TEST(Bench, RepeatedRunsWriteIdenticalTraces) {
  const ScenarioFile s = parse_scenario(kSmallUnicycle);
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  run_benchmark(s, a);
  run_benchmark(s, b);
  for (const auto& e : fs::directory_iterator(a / "traces"))
    EXPECT_EQ(read_file(e.path()), read_file(b / "traces" / e.path().filename())) << e.path();
}

TEST(Bench, PlotDataShapesAndReproducibility) {
  ScenarioFile s = parse_scenario(kSmallUnicycle);
  const fs::path out = fresh_dir("plot");
  const BenchReport report = run_benchmark(s, out);
  emit_plot_data(report, s, out);
  const std::string first = read_file(out / "trajectories_csvn.csv");
  emit_plot_data(report, s, out);
  EXPECT_EQ(read_file(out / "trajectories_csvn.csv"), first);

  std::istringstream conv(read_file(out / "convergence_csvn.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(conv, line)) ++rows;
  EXPECT_EQ(rows, 12);

  std::istringstream traj(first);
  std::getline(traj, line);
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  EXPECT_EQ(columns, 1 + 4 * 3 * 2);
  rows = 0;
  while (std::getline(traj, line)) ++rows;
  EXPECT_EQ(rows, 8);
}

TEST(Bench, PriorDemoFiles) {
  const fs::path out = fresh_dir("demo");
  emit_prior_demo(out);
  EXPECT_TRUE(fs::exists(out / "prior_demo.csv"));
  EXPECT_TRUE(fs::exists(out / "observations.csv"));
  std::istringstream in(read_file(out / "prior_demo.csv"));
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 101);
}

TEST(Bench, ToyScenarioRuns) {
  ScenarioFile s = load_scenario(fs::path(SVNPLAN_SCENARIO_DIR) / "toy_gaussian.yaml");
  s.seeds = {0};
  for (PlannerConfig& p : s.planners) p.iterations = 5;
  const BenchReport report = run_benchmark(s, fresh_dir("toy"));
  ASSERT_EQ(report.rows.size(), s.planners.size());
  for (const RunRecord& r : report.rows) EXPECT_EQ(r.status, "ok");
}

}  // namespace
}  // namespace svnplan
