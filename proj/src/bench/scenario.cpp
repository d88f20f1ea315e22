#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "svnplan/bench.hpp"
#include "svnplan/errors.hpp"

namespace svnplan {
namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& what) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) throw ConfigError(what);
  throw ConfigError("line " + std::to_string(mark.line + 1) + ": " + what);
}

void expect_map(const YAML::Node& node, const std::string& field) {
  if (!node.IsMap()) fail_at(node, "'" + field + "' must be a mapping");
}

void check_keys(const YAML::Node& node, const std::string& field, const std::set<std::string>& allowed) {
  expect_map(node, field);
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      fail_at(kv.first, "unknown key '" + key + "' in " + (field.empty() ? "scenario" : "'" + field + "'"));
    }
  }
}

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) fail_at(node, "'" + field + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail_at(node, "'" + field + "' has an invalid value '" + node.Scalar() + "'");
  }
}

template <typename T>
void read(const YAML::Node& map, const std::string& parent, const std::string& key, T& out) {
  const YAML::Node node = map[key];
  if (node) out = scalar<T>(node, join(parent, key));
}

Eigen::VectorXd vector_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail_at(node, "'" + field + "' must be a list of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = scalar<double>(node[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

void read_vector(const YAML::Node& map, const std::string& parent, const std::string& key,
                 Eigen::VectorXd& out) {
  const YAML::Node node = map[key];
  if (node) out = vector_of(node, join(parent, key));
}

Eigen::Vector2d vector2(const YAML::Node& node, const std::string& field) {
  const Eigen::VectorXd v = vector_of(node, field);
  if (v.size() != 2) fail_at(node, "'" + field + "' must have 2 entries");
  return v;
}

Eigen::MatrixXd matrix_of(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() == 0) fail_at(node, "'" + field + "' must be a list of rows");
  const auto rows = static_cast<Eigen::Index>(node.size());
  Eigen::MatrixXd out;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_of(node[static_cast<std::size_t>(r)], field);
    if (r == 0) out.resize(rows, row.size());
    if (row.size() != out.cols()) fail_at(node, "'" + field + "' rows differ in length");
    out.row(r) = row.transpose();
  }
  return out;
}

template <typename E>
E enum_of(const YAML::Node& node, const std::string& field,
          const std::vector<std::pair<std::string, E>>& names) {
  const std::string value = scalar<std::string>(node, field);
  for (const auto& [name, e] : names) {
    if (name == value) return e;
  }
  std::string options;
  for (const auto& [name, e] : names) options += (options.empty() ? "" : ", ") + name;
  fail_at(node, "'" + field + "' must be one of " + options + " (got '" + value + "')");
}

const std::vector<std::pair<std::string, ProblemKind>> kProblemNames = {
    {"toy_gaussian", ProblemKind::ToyGaussian},
    {"unicycle", ProblemKind::Unicycle},
    {"pointmass", ProblemKind::PointMass}};
const std::vector<std::pair<std::string, KernelFamily>> kFamilyNames = {
    {"matern32", KernelFamily::Matern32}, {"squared_exponential", KernelFamily::SquaredExponential}};
const std::vector<std::pair<std::string, CostMode>> kModeNames = {
    {"exp", CostMode::Exp}, {"exp_sum", CostMode::ExpSum}, {"hinge", CostMode::Hinge}};
const std::vector<std::pair<std::string, KernelMetric>> kMetricNames = {
    {"covariance", KernelMetric::Covariance}, {"precision", KernelMetric::Precision}};
const std::vector<std::pair<std::string, PlannerKind>> kPlannerNames = {
    {"csvn", PlannerKind::Csvn},
    {"csvgd", PlannerKind::Csvgd},
    {"chomp", PlannerKind::Chomp},
    {"gpmp", PlannerKind::Gpmp}};

template <typename E>
std::string name_of(E e, const std::vector<std::pair<std::string, E>>& names) {
  for (const auto& [name, value] : names) {
    if (value == e) return name;
  }
  return "?";
}

void parse_scene(const YAML::Node& node, Scene2D& scene) {
  check_keys(node, "scene", {"circles", "boxes", "lower", "upper"});
  if (const YAML::Node circles = node["circles"]) {
    if (!circles.IsSequence()) fail_at(circles, "'scene.circles' must be a list");
    for (std::size_t i = 0; i < circles.size(); ++i) {
      const std::string field = "scene.circles[" + std::to_string(i) + "]";
      check_keys(circles[i], field, {"center", "radius"});
      Circle c;
      if (circles[i]["center"]) c.center = vector2(circles[i]["center"], field + ".center");
      read(circles[i], field, "radius", c.radius);
      scene.circles.push_back(c);
    }
  }
  if (const YAML::Node boxes = node["boxes"]) {
    if (!boxes.IsSequence()) fail_at(boxes, "'scene.boxes' must be a list");
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const std::string field = "scene.boxes[" + std::to_string(i) + "]";
      check_keys(boxes[i], field, {"center", "half_extents"});
      Box b;
      if (boxes[i]["center"]) b.center = vector2(boxes[i]["center"], field + ".center");
      if (boxes[i]["half_extents"]) b.half_extents = vector2(boxes[i]["half_extents"], field + ".half_extents");
      scene.boxes.push_back(b);
    }
  }
  if (node["lower"]) scene.lower = vector2(node["lower"], "scene.lower");
  if (node["upper"]) scene.upper = vector2(node["upper"], "scene.upper");
}

void parse_planner(const YAML::Node& node, const std::string& field, PlannerConfig& cfg) {
  check_keys(node, field,
             {"kind", "particles", "iterations", "rate", "warmup", "damping", "damping_retries",
              "slack_beta", "constraint_tol", "step_tol", "record_ksd", "baseline"});
  if (!node["kind"]) fail_at(node, "'" + field + ".kind' is required");
  cfg.kind = enum_of(node["kind"], field + ".kind", kPlannerNames);
  read(node, field, "particles", cfg.particles);
  read(node, field, "iterations", cfg.iterations);
  read(node, field, "rate", cfg.rate);
  read(node, field, "warmup", cfg.warmup);
  read(node, field, "damping", cfg.damping);
  read(node, field, "damping_retries", cfg.damping_retries);
  read(node, field, "slack_beta", cfg.slack_beta);
  read(node, field, "constraint_tol", cfg.constraint_tol);
  read(node, field, "step_tol", cfg.step_tol);
  read(node, field, "record_ksd", cfg.record_ksd);
  if (const YAML::Node b = node["baseline"]) {
    const std::string bf = field + ".baseline";
    check_keys(b, bf, {"order", "weight", "penalty", "perturbation"});
    read(b, bf, "order", cfg.baseline.order);
    read(b, bf, "weight", cfg.baseline.weight);
    read(b, bf, "penalty", cfg.baseline.penalty);
    read(b, bf, "perturbation", cfg.baseline.perturbation);
  }
}

void parse_toy(const YAML::Node& node, ToyGaussianSpec& toy) {
  check_keys(node, "toy", {"mean", "covariance", "ellipse", "init_mean", "init_std"});
  read_vector(node, "toy", "mean", toy.mean);
  if (node["covariance"]) toy.covariance = matrix_of(node["covariance"], "toy.covariance");
  if (const YAML::Node e = node["ellipse"]) {
    check_keys(e, "toy.ellipse", {"center", "axes"});
    ConstrainedGaussian::Ellipse ellipse;
    read_vector(e, "toy.ellipse", "center", ellipse.center);
    read_vector(e, "toy.ellipse", "axes", ellipse.axes);
    toy.ellipse = ellipse;
  }
  read_vector(node, "toy", "init_mean", toy.init_mean);
  read(node, "toy", "init_std", toy.init_std);
}

// %.17g round-trips every finite double exactly.
std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
  if (std::isnan(v)) return ".nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v(i));
  return out + "]";
}

}  // namespace

std::string to_string(ProblemKind kind) { return name_of(kind, kProblemNames); }

ProblemKind problem_kind_from_string(const std::string& name) {
  for (const auto& [n, k] : kProblemNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown problem kind '" + name + "'");
}

void ScenarioFile::validate() const {
  std::vector<std::string> errors;
  if (name.empty()) errors.push_back("name: must not be empty");
  if (planners.empty()) errors.push_back("planners: at least one planner is required");
  if (seeds.empty()) errors.push_back("seeds: at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    errors.push_back("seeds: must be distinct");
  }
  if (!std::isfinite(kernel_lengthscale)) errors.push_back("kernel.lengthscale: must be finite");
  for (std::size_t i = 0; i < planners.size(); ++i) {
    const std::string field = "planners[" + std::to_string(i) + "]";
    try {
      planners[i].validate();
    } catch (const ConfigError& e) {
      errors.push_back(field + ": " + e.what());
    }
    if (kind == ProblemKind::ToyGaussian &&
        (planners[i].kind == PlannerKind::Chomp || planners[i].kind == PlannerKind::Gpmp)) {
      errors.push_back(field + ".kind: baselines need a trajectory problem");
    }
  }
  if (kind == ProblemKind::ToyGaussian) {
    const Eigen::Index d = toy.mean.size();
    if (d < 1) errors.push_back("toy.mean: must not be empty");
    if (toy.covariance.rows() != d || toy.covariance.cols() != d) {
      errors.push_back("toy.covariance: must be " + std::to_string(d) + "x" + std::to_string(d));
    } else if (d > 0 && Eigen::LLT<Eigen::MatrixXd>(toy.covariance).info() != Eigen::Success) {
      errors.push_back("toy.covariance: must be symmetric positive definite");
    }
    if (toy.ellipse && (toy.ellipse->center.size() != d || toy.ellipse->axes.size() != d ||
                        !(toy.ellipse->axes.array() > 0.0).all())) {
      errors.push_back("toy.ellipse: center and positive axes need " + std::to_string(d) + " entries");
    }
    if (toy.init_mean.size() != d) errors.push_back("toy.init_mean: must have " + std::to_string(d) + " entries");
    if (!(toy.init_std > 0.0)) errors.push_back("toy.init_std: must be > 0");
  } else {
    if (!(prior.horizon > 0.0)) errors.push_back("time.horizon: must be > 0");
    if (prior.nodes < 3) errors.push_back("time.nodes: must be >= 3");
    if (!(prior.start_variance > 0.0)) errors.push_back("prior.start_variance: must be > 0");
    if (prior.horizon > 0.0) {
      try {
        prior.hsgp.validate(prior.horizon);
      } catch (const ConfigError& e) {
        errors.push_back(std::string("prior: ") + e.what());
      }
    }
    const DofLayout layout = kind == ProblemKind::Unicycle ? DofLayout::Unicycle : DofLayout::PointMass;
    if (problem.layout != layout) errors.push_back("problem: layout does not match the problem kind");
    try {
      problem.validate();
    } catch (const ConfigError& e) {
      errors.push_back(std::string("problem: ") + e.what());
    }
  }
  if (errors.empty()) return;
  std::string msg = "invalid scenario";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

PlannerConfig ScenarioFile::planner_config(std::size_t index, std::uint64_t seed) const {
  PlannerConfig cfg = planners.at(index);
  cfg.metric = kernel_metric;
  cfg.kernel_lengthscale = kernel_lengthscale;
  cfg.seed = seed;
  return cfg;
}

ScenarioFile parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": parse error: " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("line 1: parse error: empty scenario");
  if (!root.IsMap()) fail_at(root, "parse error: the scenario must be a mapping");
  check_keys(root, "",
             {"name", "problem", "seeds", "time", "prior", "scene", "start", "goal", "clamp_goal",
              "goal_variance", "costs", "workspace_inequalities", "kernel", "planners", "toy"});

  ScenarioFile s;
  read(root, "", "name", s.name);
  if (!root["problem"]) fail_at(root, "'problem' is required");
  s.kind = enum_of(root["problem"], "problem", kProblemNames);
  s.problem.layout = s.kind == ProblemKind::Unicycle ? DofLayout::Unicycle : DofLayout::PointMass;

  if (const YAML::Node seeds = root["seeds"]) {
    if (!seeds.IsSequence()) fail_at(seeds, "'seeds' must be a list");
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      s.seeds.push_back(scalar<std::uint64_t>(seeds[i], "seeds[" + std::to_string(i) + "]"));
    }
  }
  if (const YAML::Node t = root["time"]) {
    check_keys(t, "time", {"horizon", "nodes"});
    read(t, "time", "horizon", s.prior.horizon);
    read(t, "time", "nodes", s.prior.nodes);
  }
  if (const YAML::Node p = root["prior"]) {
    check_keys(p, "prior",
               {"family", "lengthscale", "variance", "noise", "features", "domain_radius", "start_variance"});
    if (p["family"]) s.prior.hsgp.family = enum_of(p["family"], "prior.family", kFamilyNames);
    read(p, "prior", "lengthscale", s.prior.hsgp.lengthscale);
    read(p, "prior", "variance", s.prior.hsgp.variance);
    read(p, "prior", "noise", s.prior.hsgp.noise);
    read(p, "prior", "features", s.prior.hsgp.feature_count);
    read(p, "prior", "domain_radius", s.prior.hsgp.domain_radius);
    read(p, "prior", "start_variance", s.prior.start_variance);
  }
  if (const YAML::Node scene = root["scene"]) parse_scene(scene, s.problem.scene);
  read_vector(root, "", "start", s.problem.start);
  read_vector(root, "", "goal", s.problem.goal);
  read(root, "", "clamp_goal", s.problem.clamp_goal);
  read(root, "", "goal_variance", s.problem.goal_variance);
  read(root, "", "workspace_inequalities", s.problem.workspace_inequalities);
  if (const YAML::Node c = root["costs"]) {
    check_keys(c, "costs", {"mode", "obstacle", "prior", "length", "limits", "safety_margin", "lower", "upper"});
    if (c["mode"]) s.problem.mode = enum_of(c["mode"], "costs.mode", kModeNames);
    read(c, "costs", "obstacle", s.problem.weights.obstacle);
    read(c, "costs", "prior", s.problem.weights.prior);
    read(c, "costs", "length", s.problem.weights.length);
    read(c, "costs", "limits", s.problem.weights.limits);
    read(c, "costs", "safety_margin", s.problem.safety_margin);
    read_vector(c, "costs", "lower", s.problem.lower);
    read_vector(c, "costs", "upper", s.problem.upper);
  }
  if (const YAML::Node k = root["kernel"]) {
    check_keys(k, "kernel", {"metric", "lengthscale"});
    if (k["metric"]) s.kernel_metric = enum_of(k["metric"], "kernel.metric", kMetricNames);
    read(k, "kernel", "lengthscale", s.kernel_lengthscale);
  }
  if (const YAML::Node planners = root["planners"]) {
    if (!planners.IsSequence()) fail_at(planners, "'planners' must be a list");
    for (std::size_t i = 0; i < planners.size(); ++i) {
      PlannerConfig cfg;
      parse_planner(planners[i], "planners[" + std::to_string(i) + "]", cfg);
      s.planners.push_back(cfg);
    }
  }
  if (const YAML::Node toy = root["toy"]) parse_toy(toy, s.toy);
  s.validate();
  return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_scenario(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_scenario(const ScenarioFile& s) {
  std::ostringstream os;
  os << "name: \"" << s.name << "\"\n";
  os << "problem: " << to_string(s.kind) << "\n";
  os << "seeds: [";
  for (std::size_t i = 0; i < s.seeds.size(); ++i) os << (i ? ", " : "") << s.seeds[i];
  os << "]\n";
  os << "kernel:\n  metric: " << name_of(s.kernel_metric, kMetricNames)
     << "\n  lengthscale: " << num(s.kernel_lengthscale) << "\n";

  if (s.kind == ProblemKind::ToyGaussian) {
    os << "toy:\n  mean: " << list(s.toy.mean) << "\n  covariance:\n";
    for (Eigen::Index r = 0; r < s.toy.covariance.rows(); ++r) {
      os << "    - " << list(s.toy.covariance.row(r).transpose()) << "\n";
    }
    if (s.toy.ellipse) {
      os << "  ellipse:\n    center: " << list(s.toy.ellipse->center) << "\n    axes: "
         << list(s.toy.ellipse->axes) << "\n";
    }
    os << "  init_mean: " << list(s.toy.init_mean) << "\n  init_std: " << num(s.toy.init_std) << "\n";
  } else {
    const ProblemSpec& p = s.problem;
    const HsgpSpec& h = s.prior.hsgp;
    os << "time:\n  horizon: " << num(s.prior.horizon) << "\n  nodes: " << s.prior.nodes << "\n";
    os << "prior:\n  family: " << name_of(h.family, kFamilyNames) << "\n  lengthscale: " << num(h.lengthscale)
       << "\n  variance: " << num(h.variance) << "\n  noise: " << num(h.noise)
       << "\n  features: " << h.feature_count << "\n  domain_radius: " << num(h.domain_radius)
       << "\n  start_variance: " << num(s.prior.start_variance) << "\n";
    os << "scene:\n  circles:" << (p.scene.circles.empty() ? " []" : "") << "\n";
    for (const Circle& c : p.scene.circles) {
      os << "    - {center: " << list(c.center) << ", radius: " << num(c.radius) << "}\n";
    }
    os << "  boxes:" << (p.scene.boxes.empty() ? " []" : "") << "\n";
    for (const Box& b : p.scene.boxes) {
      os << "    - {center: " << list(b.center) << ", half_extents: " << list(b.half_extents) << "}\n";
    }
    os << "  lower: " << list(p.scene.lower) << "\n  upper: " << list(p.scene.upper) << "\n";
    os << "start: " << list(p.start) << "\ngoal: " << list(p.goal) << "\n";
    os << "clamp_goal: " << (p.clamp_goal ? "true" : "false") << "\n";
    os << "goal_variance: " << num(p.goal_variance) << "\n";
    os << "workspace_inequalities: " << (p.workspace_inequalities ? "true" : "false") << "\n";
    os << "costs:\n  mode: " << name_of(p.mode, kModeNames) << "\n  obstacle: " << num(p.weights.obstacle)
       << "\n  prior: " << num(p.weights.prior) << "\n  length: " << num(p.weights.length)
       << "\n  limits: " << num(p.weights.limits) << "\n  safety_margin: " << num(p.safety_margin) << "\n";
    if (p.lower.size() > 0) os << "  lower: " << list(p.lower) << "\n";
    if (p.upper.size() > 0) os << "  upper: " << list(p.upper) << "\n";
  }

  os << "planners:\n";
  for (const PlannerConfig& c : s.planners) {
    os << "  - kind: " << to_string(c.kind) << "\n    particles: " << c.particles
       << "\n    iterations: " << c.iterations << "\n    rate: " << num(c.rate) << "\n    warmup: " << c.warmup
       << "\n    damping: " << num(c.damping) << "\n    damping_retries: " << c.damping_retries
       << "\n    slack_beta: " << num(c.slack_beta) << "\n    constraint_tol: " << num(c.constraint_tol)
       << "\n    step_tol: " << num(c.step_tol) << "\n    record_ksd: " << (c.record_ksd ? "true" : "false")
       << "\n    baseline: {order: " << c.baseline.order << ", weight: " << num(c.baseline.weight)
       << ", penalty: " << num(c.baseline.penalty) << ", perturbation: " << num(c.baseline.perturbation)
       << "}\n";
  }
  return os.str();
}

}  // namespace svnplan
