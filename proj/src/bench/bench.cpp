#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "svnplan/bench.hpp"
#include "svnplan/errors.hpp"

namespace svnplan {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

ParticleSet toy_initial_particles(const ToyGaussianSpec& toy, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  ParticleSet init(toy.mean.size(), count);
  for (int i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < toy.mean.size(); ++k) {
      init[i](k) = toy.init_mean(k) + toy.init_std * normal(rng);
    }
  }
  return init;
}

PlanResult run_toy(const ScenarioFile& scenario, const ConstrainedGaussian& target, const PlannerConfig& cfg) {
  const ParticleSet init = toy_initial_particles(scenario.toy, cfg.particles, cfg.seed);
  TrajectoryKernelSpec kernel = TrajectoryKernelSpec::isotropic(
      target.dim(), cfg.kernel_lengthscale > 0.0 ? cfg.kernel_lengthscale : 1.0);
  if (cfg.kernel_lengthscale <= 0.0) calibrate_lengthscales(kernel, init, 0.5);
  if (cfg.kind == PlannerKind::Csvn) return plan_csvn(target, init, kernel, cfg);
  if (cfg.kind == PlannerKind::Csvgd) return plan_csvgd(target, init, kernel, cfg);
  throw ConfigError("planner '" + to_string(cfg.kind) + "' needs a trajectory problem");
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

}  // namespace

TrajectoryProblem build_problem(const ScenarioFile& scenario) {
  if (scenario.kind == ProblemKind::ToyGaussian) throw ConfigError("the toy scenario has no trajectory problem");
  return TrajectoryProblem(scenario.problem, scenario.prior);
}

ConstrainedGaussian build_toy_target(const ScenarioFile& scenario) {
  if (scenario.kind != ProblemKind::ToyGaussian) throw ConfigError("not a toy scenario");
  ConstrainedGaussian target(scenario.toy.mean, scenario.toy.covariance);
  if (scenario.toy.ellipse) target.with_ellipse(*scenario.toy.ellipse);
  return target;
}

PlanResult run_planner(const ScenarioFile& scenario, const PlannerConfig& config) {
  config.validate();
  if (scenario.kind == ProblemKind::ToyGaussian) return run_toy(scenario, build_toy_target(scenario), config);
  return plan(build_problem(scenario), config);
}

std::vector<Aggregate> aggregate_rows(const std::vector<RunRecord>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const RunRecord& r : rows) {
    if (!groups.count(r.planner)) order.push_back(r.planner);
    groups[r.planner].push_back(&r);
  }
  std::vector<Aggregate> out;
  for (const std::string& name : order) {
    const auto& g = groups[name];
    auto collect = [&](auto field) {
      std::vector<double> v;
      for (const RunRecord* r : g) v.push_back(field(*r));
      return mean_std(v);
    };
    Aggregate a;
    a.planner = name;
    a.runs = static_cast<int>(g.size());
    a.length = collect([](const RunRecord& r) { return r.length; });
    a.smoothness = collect([](const RunRecord& r) { return r.smoothness; });
    a.violation_mse = collect([](const RunRecord& r) { return r.violation_mse; });
    a.max_violation = collect([](const RunRecord& r) { return r.max_violation; });
    a.success = collect([](const RunRecord& r) { return r.success ? 1.0 : 0.0; });
    a.wall_time = collect([](const RunRecord& r) { return r.wall_time; });
    out.push_back(a);
  }
  return out;
}

BenchReport run_benchmark(const ScenarioFile& scenario, const std::filesystem::path& out_dir) {
  scenario.validate();
  BenchReport report;
  report.scenario = scenario.name;

  std::optional<TrajectoryProblem> problem;
  std::optional<ConstrainedGaussian> toy;
  if (scenario.kind == ProblemKind::ToyGaussian) {
    toy.emplace(build_toy_target(scenario));
  } else {
    problem.emplace(build_problem(scenario));
  }

  for (std::size_t p = 0; p < scenario.planners.size(); ++p) {
    for (std::uint64_t seed : scenario.seeds) {
      const PlannerConfig cfg = scenario.planner_config(p, seed);
      RunRecord row;
      row.planner = to_string(cfg.kind);
      row.seed = seed;
      PlanResult result;
      try {
        result = toy ? run_toy(scenario, *toy, cfg) : plan(*problem, cfg);
        const ParticleMetrics& m = result.metrics.at(static_cast<std::size_t>(result.best));
        row.length = m.length;
        row.smoothness = m.smoothness;
        row.violation_mse = m.violation_mse;
        row.max_violation = m.max_violation;
        row.objective = m.objective;
        row.success = m.success && !result.aborted;
        row.wall_time = result.wall_time;
        row.queries = result.queries;
        if (result.aborted) row.status = "aborted: " + result.message;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
        row.success = false;
        result = PlanResult{};
        result.kind = cfg.kind;
      }
      write_trace_csv(out_dir / "traces" / (row.planner + "_seed" + std::to_string(seed) + ".csv"), result.trace);
      report.rows.push_back(row);
      report.results.push_back(std::move(result));
    }
  }
  report.aggregates = aggregate_rows(report.rows);
  write_summary(report, out_dir);
  return report;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream out = open_out(path);
  out << "iteration,mean_objective,mean_abs_h,best_objective\n";
  for (const TraceRow& r : trace) {
    out << r.iteration << ',' << num(r.mean_objective) << ',' << num(r.mean_abs_h) << ','
        << num(r.best_objective) << '\n';
  }
  close_out(out, path);
}

void write_summary(const BenchReport& report, const std::filesystem::path& out_dir) {
  const auto csv_path = out_dir / "summary.csv";
  std::ofstream csv = open_out(csv_path);
  csv << "planner,seed,length,smoothness,violation_mse,success,wall_time,max_violation,objective,queries,status\n";
  nlohmann::json runs = nlohmann::json::array();
  for (const RunRecord& r : report.rows) {
    std::string status = r.status;
    for (char& c : status) {
      if (c == ',' || c == '\n') c = ';';
    }
    csv << r.planner << ',' << r.seed << ',' << num(r.length) << ',' << num(r.smoothness) << ','
        << num(r.violation_mse) << ',' << (r.success ? 1 : 0) << ',' << num(r.wall_time) << ','
        << num(r.max_violation) << ',' << num(r.objective) << ',' << r.queries << ',' << status << '\n';
    runs.push_back({{"planner", r.planner},
                    {"seed", r.seed},
                    {"length", r.length},
                    {"smoothness", r.smoothness},
                    {"violation_mse", r.violation_mse},
                    {"success", r.success},
                    {"wall_time", r.wall_time},
                    {"max_violation", r.max_violation},
                    {"objective", r.objective},
                    {"queries", r.queries},
                    {"status", r.status}});
  }
  close_out(csv, csv_path);

  nlohmann::json aggregates = nlohmann::json::array();
  for (const Aggregate& a : report.aggregates) {
    aggregates.push_back({{"planner", a.planner},
                          {"runs", a.runs},
                          {"length", to_json(a.length)},
                          {"smoothness", to_json(a.smoothness)},
                          {"violation_mse", to_json(a.violation_mse)},
                          {"max_violation", to_json(a.max_violation)},
                          {"success", to_json(a.success)},
                          {"wall_time", to_json(a.wall_time)}});
  }
  const auto json_path = out_dir / "summary.json";
  std::ofstream json = open_out(json_path);
  json << nlohmann::json{{"scenario", report.scenario}, {"runs", runs}, {"aggregates", aggregates}}.dump(2)
       << '\n';
  close_out(json, json_path);
}

void emit_plot_data(const BenchReport& report, const ScenarioFile& scenario,
                    const std::filesystem::path& out_dir) {
  std::optional<TrajectoryProblem> problem;
  if (scenario.kind != ProblemKind::ToyGaussian) problem.emplace(build_problem(scenario));

  std::vector<std::string> order;
  std::map<std::string, std::vector<const PlanResult*>> groups;
  for (std::size_t i = 0; i < report.rows.size() && i < report.results.size(); ++i) {
    const std::string& name = report.rows[i].planner;
    if (!groups.count(name)) order.push_back(name);
    groups[name].push_back(&report.results[i]);
  }

  for (const std::string& name : order) {
    const auto& runs = groups[name];

    // Seed-averaged convergence; a row averages the runs that reached it.
    std::size_t rows = 0;
    for (const PlanResult* r : runs) rows = std::max(rows, r->trace.size());
    const auto conv_path = out_dir / ("convergence_" + name + ".csv");
    std::ofstream conv = open_out(conv_path);
    conv << "iteration,mean_objective,mean_abs_h,best_objective,max_abs_h,runs\n";
    for (std::size_t k = 0; k < rows; ++k) {
      TraceRow sum;
      int count = 0;
      for (const PlanResult* r : runs) {
        if (k >= r->trace.size()) continue;
        const TraceRow& t = r->trace[k];
        sum.iteration = t.iteration;
        sum.mean_objective += t.mean_objective;
        sum.mean_abs_h += t.mean_abs_h;
        sum.best_objective += t.best_objective;
        sum.max_abs_h += t.max_abs_h;
        ++count;
      }
      const double c = static_cast<double>(count);
      conv << sum.iteration << ',' << num(sum.mean_objective / c) << ',' << num(sum.mean_abs_h / c) << ','
           << num(sum.best_objective / c) << ',' << num(sum.max_abs_h / c) << ',' << count << '\n';
    }
    close_out(conv, conv_path);

    const PlanResult* first = nullptr;
    for (const PlanResult* r : runs) {
      if (!r->particles.empty()) {
        first = r;
        break;
      }
    }
    if (!first) continue;
    const ParticleSet& ps = first->particles;

    if (!problem) {
      const auto path = out_dir / ("particles_" + name + ".csv");
      std::ofstream out = open_out(path);
      out << "particle";
      for (Eigen::Index k = 0; k < ps.dim(); ++k) out << ",x" << k;
      out << '\n';
      for (Eigen::Index i = 0; i < ps.size(); ++i) {
        out << i;
        for (Eigen::Index k = 0; k < ps.dim(); ++k) out << ',' << num(ps[i](k));
        out << '\n';
      }
      close_out(out, path);
      continue;
    }

    // One time column plus position and velocity per DOF for every particle.
    std::vector<Trajectory> trajs;
    for (Eigen::Index i = 0; i < ps.size(); ++i) trajs.push_back(problem->view().expand(ps[i]));
    const int dofs = problem->view().dofs();
    const auto path = out_dir / ("trajectories_" + name + ".csv");
    std::ofstream out = open_out(path);
    out << 't';
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
      for (int k = 0; k < dofs; ++k) out << ",p" << i << "_x" << k << ",p" << i << "_v" << k;
    }
    out << '\n';
    for (int n = 0; n < problem->grid().size(); ++n) {
      out << num(problem->grid()[n]);
      for (const Trajectory& tr : trajs) {
        for (int k = 0; k < dofs; ++k) out << ',' << num(tr.pos(k, n)) << ',' << num(tr.vel(k, n));
      }
      out << '\n';
    }
    close_out(out, path);
  }
}

void emit_prior_demo(const std::filesystem::path& out_dir) {
  HsgpSpec spec;
  spec.family = KernelFamily::Matern32;
  spec.lengthscale = 1.0;
  spec.variance = 1.0;
  spec.noise = 1e-4;
  const TimeGrid grid(10.0, 101);
  BoundaryCondition bc;
  bc.x0_mean = 2.0;
  bc.x0_var = 1e-4;
  bc.xT = 2.0;
  const JointGpPrior prior = build_joint_prior(spec, grid, {bc});

  // Asynchronous observations: position and velocity at different nodes.
  const std::vector<Observation> obs = {
      {0, ObservationKind::Position, 25, 3.0, 1e-4},
      {0, ObservationKind::Velocity, 45, -1.0, 1e-4},
      {0, ObservationKind::Position, 70, 1.0, 1e-4},
      {0, ObservationKind::Velocity, 85, 0.5, 1e-4}};
  const JointGpPrior post = condition_prior(prior, obs);

  const int n = grid.size();
  const auto path = out_dir / "prior_demo.csv";
  std::ofstream out = open_out(path);
  out << "t,prior_x_mean,prior_x_lo,prior_x_hi,prior_v_mean,prior_v_lo,prior_v_hi,"
         "post_x_mean,post_x_lo,post_x_hi,post_v_mean,post_v_lo,post_v_hi\n";
  for (int i = 0; i < n; ++i) {
    out << num(grid[i]);
    for (const JointGpPrior* g : {&prior, &post}) {
      const GaussianBlock& b = g->block(0);
      for (int idx : {i, n + i}) {
        const double m = b.mean()(idx);
        const double two_sd = 2.0 * std::sqrt(std::max(0.0, b.covariance()(idx, idx)));
        out << ',' << num(m) << ',' << num(m - two_sd) << ',' << num(m + two_sd);
      }
    }
    out << '\n';
  }
  close_out(out, path);

  const auto obs_path = out_dir / "observations.csv";
  std::ofstream o = open_out(obs_path);
  o << "t,kind,value\n";
  for (const Observation& ob : obs) {
    o << num(grid[ob.node]) << ',' << (ob.kind == ObservationKind::Position ? "position" : "velocity") << ','
      << num(ob.value) << '\n';
  }
  close_out(o, obs_path);
}

}  // namespace svnplan
