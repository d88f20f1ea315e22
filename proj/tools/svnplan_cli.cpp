#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

#include "svnplan/bench.hpp"
#include "svnplan/errors.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

void print_rows(const svnplan::BenchReport& report) {
  for (const auto& r : report.rows) {
    std::cout << r.planner << " seed " << r.seed << ": success " << (r.success ? "yes" : "no")
              << ", max violation " << r.max_violation << ", length " << r.length << ", time "
              << r.wall_time << " s";
    if (r.status != "ok") std::cout << " [" << r.status << "]";
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Stein variational trajectory planning"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::string planner;
  std::uint64_t seed = 0;

  CLI::App* plan_cmd = app.add_subcommand("plan", "Run one planner on a scenario");
  plan_cmd->add_option("--scenario", scenario_path, "Scenario YAML file")->required();
  plan_cmd->add_option("--planner", planner, "csvn, csvgd, chomp or gpmp")->required();
  plan_cmd->add_option("--seed", seed, "Random seed")->required();
  plan_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* bench_cmd = app.add_subcommand("bench", "Run every planner and seed of a scenario");
  bench_cmd->add_option("--scenario", scenario_path, "Scenario YAML file")->required();
  bench_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* demo_cmd = app.add_subcommand("demo-prior", "Emit prior/posterior bands for a 1-D trajectory prior");
  demo_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  svnplan::configure_threads_from_env();
  try {
    if (*demo_cmd) {
      svnplan::emit_prior_demo(out_dir);
      std::cout << "wrote " << out_dir << "/prior_demo.csv\n";
      return kExitOk;
    }

    svnplan::ScenarioFile scenario = svnplan::load_scenario(scenario_path);
    if (*plan_cmd) {
      // Restrict the scenario to the requested planner and seed.
      const svnplan::PlannerKind kind = svnplan::planner_kind_from_string(planner);
      std::vector<svnplan::PlannerConfig> selected;
      for (const auto& cfg : scenario.planners) {
        if (cfg.kind == kind) selected.push_back(cfg);
      }
      if (selected.empty()) {
        svnplan::PlannerConfig cfg;
        cfg.kind = kind;
        selected.push_back(cfg);
      }
      scenario.planners = {selected.front()};
      scenario.seeds = {seed};
    }

    const svnplan::BenchReport report = svnplan::run_benchmark(scenario, out_dir);
    svnplan::emit_plot_data(report, scenario, out_dir);
    print_rows(report);
    for (const auto& r : report.rows) {
      if (r.status.rfind("error", 0) == 0) return kExitRuntime;
    }
    return kExitOk;
  } catch (const svnplan::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
