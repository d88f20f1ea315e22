#include "svnplan/planners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "svnplan/constraints.hpp"
#include "svnplan/errors.hpp"

namespace svnplan {

namespace {

constexpr double kSuccessViolation = 1e-4;
constexpr double kEndpointTol = 1e-3;
// BFGS blocks are reset to a scaled identity once a solve needed more retries than this.
constexpr int kResetAfterRetries = 3;
// Minimum cosine between a curvature pair's step and gradient change.
constexpr double kPairCosine = 0.5;

struct Evaluation {
  Eigen::VectorXd log_density;
  Eigen::MatrixXd scores;
  std::vector<ConstraintEval> constraints;
};

Evaluation evaluate(const Target& target, const ParticleSet& x) {
  const Eigen::Index n = x.size();
  Evaluation ev;
  ev.log_density.resize(n);
  ev.scores.resize(x.dim(), n);
  ev.constraints.resize(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd s;
    ev.log_density(i) = target.log_density(x[i], &s);
    ev.scores.col(i) = s;
    ev.constraints[static_cast<std::size_t>(i)] = target.constraints(x[i]);
  }
  return ev;
}

double max_violation(const ConstraintEval& c) {
  double v = c.h.size() > 0 ? c.h.cwiseAbs().maxCoeff() : 0.0;
  if (c.g.size() > 0) v = std::max(v, c.g.maxCoeff());
  return std::max(v, 0.0);
}

void fill_constraint_stats(const std::vector<ConstraintEval>& cons, TraceRow& row) {
  double sum = 0.0;
  double count = 0.0;
  double worst = 0.0;
  for (const auto& c : cons) {
    sum += c.h.cwiseAbs().sum();
    count += static_cast<double>(c.h.size());
    worst = std::max(worst, max_violation(c));
  }
  row.mean_abs_h = count > 0.0 ? sum / count : 0.0;
  row.max_abs_h = worst;
}

TraceRow stein_row(int iteration, const Target& target, const ParticleSet& x, const Evaluation& ev,
                   const TrajectoryKernelSpec& kernel, bool with_ksd) {
  TraceRow row;
  row.iteration = iteration;
  const Eigen::VectorXd objective = -ev.log_density;
  row.mean_objective = objective.mean();
  row.best_objective = objective.minCoeff();
  fill_constraint_stats(ev.constraints, row);
  double task = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) task += target.task_cost(x[i]);
  row.mean_task_cost = task / static_cast<double>(x.size());
  if (with_ksd && x.size() >= 2) row.ksd = ksd(x, ev.scores, kernel);
  return row;
}

// Quasi-Newton model of the part of -Hessian(log p) not known in closed form.
struct CurvatureModel {
  Eigen::MatrixXd block;
  bool scaled = false;

  void reset(Eigen::Index d, double score_norm) {
    block = (score_norm > 0.0 ? score_norm : 1.0) * Eigen::MatrixXd::Identity(d, d);
    scaled = false;
  }

  void update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
    // The learned part is generally indefinite. Pairs whose s and y are nearly
    // orthogonal would blow up y^T y / s^T y, so only well-aligned pairs count.
    const double sy = s.dot(y);
    if (!(sy > kPairCosine * s.norm() * y.norm())) return;
    if (!scaled) {
      block = (y.squaredNorm() / sy) * Eigen::MatrixXd::Identity(s.size(), s.size());
      scaled = true;
    }
    block = bfgs_update(block, s, y);
  }
};

void finalize_generic(PlanResult& result, const Target& target) {
  const Eigen::Index n = result.particles.size();
  result.metrics.assign(static_cast<std::size_t>(n), ParticleMetrics{});
  std::vector<double> objectives(static_cast<std::size_t>(n));
  std::vector<double> violations(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& m = result.metrics[static_cast<std::size_t>(i)];
    const Eigen::VectorXd x = result.particles[i];
    const ConstraintEval c = target.constraints(x);
    if (m.objective == 0.0) m.objective = -target.log_density(x, nullptr);
    m.max_violation = max_violation(c);
    m.violation_mse = c.h.size() > 0 ? c.h.squaredNorm() / static_cast<double>(c.h.size()) : 0.0;
    m.success = m.max_violation <= kSuccessViolation;
    objectives[static_cast<std::size_t>(i)] = m.objective;
    violations[static_cast<std::size_t>(i)] = m.max_violation;
  }
  if (n > 0) result.best = select_best(objectives, violations, kSuccessViolation);
}

void finalize_trajectory(PlanResult& result, const TrajectoryProblem& problem) {
  for (Eigen::Index i = 0; i < result.particles.size(); ++i) {
    auto& m = result.metrics[static_cast<std::size_t>(i)];
    const Eigen::VectorXd x = result.particles[i];
    const TrajectoryMetrics tm = trajectory_metrics(problem, x);
    m.length = tm.length;
    m.smoothness = tm.smoothness;
    m.success = m.success && problem.collision_free(x) && problem.endpoints_reached(x, kEndpointTol);
  }
}

PlanResult run_stein(const Target& target, ParticleSet x, const TrajectoryKernelSpec& kernel,
                     const PlannerConfig& cfg, bool newton) {
  cfg.validate();
  kernel.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index n = x.size();
  const Eigen::Index d = x.dim();
  if (n < 1) throw ConfigError("Stein planners need at least one particle");
  if (d != target.dim()) throw DimensionError("particles do not match the target dimension");
  if (!newton && target.has_inequalities())
    throw ConfigError("the projected SVGD planner supports equality constraints only");

  PlanResult result;
  result.kind = newton ? PlannerKind::Csvn : PlannerKind::Csvgd;
  result.kernel = kernel;

  const Eigen::MatrixXd& known = target.known_curvature();
  const bool has_known = known.size() > 0;
  std::vector<CurvatureModel> memory(static_cast<std::size_t>(n));
  std::vector<Eigen::MatrixXd> neg_hessians(static_cast<std::size_t>(n));
  std::vector<SlackState> slacks(static_cast<std::size_t>(n));

  Evaluation ev = evaluate(target, x);
  result.queries += n;
  if (newton && target.has_inequalities()) {
    for (Eigen::Index i = 0; i < n; ++i) slacks[static_cast<std::size_t>(i)].s = init_slack(ev.constraints[static_cast<std::size_t>(i)].g);
  }

  ParticleSet prev_x = x;
  Eigen::MatrixXd prev_scores = ev.scores;
  std::vector<ConstraintEval> prev_constraints = ev.constraints;
  Eigen::MatrixXd delta(d, n);
  std::vector<Eigen::VectorXd> slack_steps(static_cast<std::size_t>(n));
  std::vector<int> retries(static_cast<std::size_t>(n), 0);
  std::vector<std::string> failures(static_cast<std::size_t>(n));

  for (int it = 1; it <= cfg.iterations; ++it) {
    if (newton) {
#pragma omp parallel for schedule(static)
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto si = static_cast<std::size_t>(i);
        CurvatureModel& mem = memory[si];
        if (it == 1 || mem.block.size() == 0) {
          mem.reset(d, ev.scores.col(i).norm());
        } else {
          const Eigen::VectorXd step = x[i] - prev_x[i];
          Eigen::VectorXd grad_diff = prev_scores.col(i) - ev.scores.col(i);
          // Curvature pairs use the Lagrangian gradient with least-squares multipliers,
          // so the learned block also captures the constraint curvature.
          const Eigen::MatrixXd& jac = ev.constraints[si].dh;
          if (jac.cols() > 0) {
            const Eigen::VectorXd lambda = jac.completeOrthogonalDecomposition().solve(ev.scores.col(i));
            grad_diff.noalias() += (jac - prev_constraints[si].dh) * lambda;
          }
          if (has_known) grad_diff.noalias() -= known * step;
          mem.update(step, grad_diff);
        }
        neg_hessians[si] = has_known ? Eigen::MatrixXd(known + mem.block) : mem.block;
      }
    }

    const double anneal = anneal_scale(it - 1, cfg.warmup);
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      try {
        const KernelColumn col = kernel_column(x, x[j], kernel);
        const Eigen::VectorXd phi = svgd_direction(ev.scores, col, anneal);
        const ConstraintEval& cons = ev.constraints[sj];
        if (!newton) {
          delta.col(j) = csvgd_step(phi, cons);
          continue;
        }
        const Eigen::MatrixXd h = svn_block_hessian(neg_hessians, col, anneal);
        double mu = cfg.damping > 0.0 ? cfg.damping : 1e-3 * h.trace() / static_cast<double>(d);
        if (!(mu > 0.0)) mu = 1e-8;
        retries[sj] = 0;
        bool solved = false;
        for (int attempt = 0; attempt <= cfg.damping_retries && !solved; ++attempt) {
          try {
            if (cons.inequality_count() > 0) {
              SlackState slack = slacks[sj];
              slack.beta = cfg.slack_beta >= 0.0 ? cfg.slack_beta : mu;
              const KktSolution sol = slack_kkt_solve(h, phi, cons, slack, mu);
              delta.col(j) = sol.dx;
              slack_steps[sj] = sol.ds;
            } else {
              delta.col(j) = csvn_kkt_solve(h, phi, cons, mu).dx;
            }
            solved = true;
          } catch (const DampingRequired&) {
            mu *= 2.0;
            ++retries[sj];
          }
        }
        if (!solved) failures[sj] = "KKT solve failed after damping retries";
      } catch (const std::exception& e) {
        failures[sj] = e.what();
      }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!failures[static_cast<std::size_t>(j)].empty()) {
        result.aborted = true;
        std::ostringstream os;
        os << "particle " << j << " at iteration " << it << ": " << failures[static_cast<std::size_t>(j)];
        result.message = os.str();
      }
    }
    if (result.aborted) break;

    prev_x = x;
    prev_scores = ev.scores;
    prev_constraints = ev.constraints;
    x.matrix() += cfg.rate * delta;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto sj = static_cast<std::size_t>(j);
      if (slack_steps[sj].size() > 0) slacks[sj].s += cfg.rate * slack_steps[sj];
      if (newton && retries[sj] > kResetAfterRetries) memory[sj].block.resize(0, 0);
    }

    ev = evaluate(target, x);
    result.queries += n;
    result.trace.push_back(stein_row(it, target, x, ev, kernel, cfg.record_ksd));

    if (cfg.constraint_tol > 0.0 && cfg.step_tol > 0.0) {
      const double mean_step = delta.colwise().norm().mean();
      if (result.trace.back().mean_abs_h <= cfg.constraint_tol && mean_step <= cfg.step_tol) break;
    }
  }

  result.particles = std::move(x);
  finalize_generic(result, target);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// Residual rows r = R x + r0 over the decision vector, assembled into a quadratic.
class QuadraticBuilder {
 public:
  explicit QuadraticBuilder(const TrajectoryView& view) : view_(view) {
    prior_.a = Eigen::MatrixXd::Zero(view.dim(), view.dim());
    prior_.b = Eigen::VectorXd::Zero(view.dim());
    traj_ = view.expand(Eigen::VectorXd::Zero(view.dim()));  // clamped values, zeros elsewhere
  }

  struct Term {
    int dof;
    int node;
    bool velocity;
    double coeff;
  };

  void add_row(const std::vector<Term>& terms, double constant, double weight) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(view_.dim());
    double r0 = constant;
    for (const auto& t : terms) {
      const Eigen::Index idx = t.velocity ? view_.velocity_index(t.dof, t.node) : view_.position_index(t.dof, t.node);
      if (idx < 0) {
        r0 += t.coeff * traj_.pos(t.dof, t.node);
      } else {
        row(idx) += t.coeff;
      }
    }
    prior_.a.noalias() += weight * row * row.transpose();
    prior_.b.noalias() -= weight * r0 * row;
    prior_.c += 0.5 * weight * r0 * r0;
  }

  QuadraticPrior finish() {
    prior_.a = 0.5 * (prior_.a + prior_.a.transpose()).eval();
    return prior_;
  }

 private:
  const TrajectoryView& view_;
  Trajectory traj_;
  QuadraticPrior prior_;
};

void add_goal_anchor(QuadraticBuilder& qb, const TrajectoryProblem& problem) {
  const ProblemSpec& spec = problem.spec();
  if (spec.clamp_goal) return;
  const int last = problem.grid().size() - 1;
  for (int k = 0; k < spec.dofs(); ++k)
    qb.add_row({{k, last, false, 1.0}}, -spec.goal(k), 1.0 / spec.goal_variance);
}

struct PenaltyParts {
  double prior = 0.0;
  double cost = 0.0;
  double penalty = 0.0;
  ConstraintEval constraints;
};

PenaltyParts penalty_parts(const TrajectoryProblem& problem, const QuadraticPrior& prior, double penalty,
                           const Eigen::VectorXd& xi, Eigen::VectorXd* gradient) {
  PenaltyParts parts;
  Eigen::VectorXd cost_grad;
  parts.cost = problem.cost(xi, gradient ? &cost_grad : nullptr);
  parts.prior = prior.value(xi);
  parts.constraints = problem.constraints(xi);
  const Eigen::VectorXd& h = parts.constraints.h;
  parts.penalty = penalty * h.squaredNorm();
  if (gradient) {
    *gradient = prior.gradient(xi) + cost_grad;
    if (h.size() > 0) gradient->noalias() += (2.0 * penalty) * (parts.constraints.dh * h);
  }
  return parts;
}

PlanResult run_baseline(const TrajectoryProblem& problem, const PlannerConfig& cfg, PlannerKind kind) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const bool covariant = kind == PlannerKind::Chomp;
  const QuadraticPrior prior = covariant ? chomp_prior(problem, cfg.baseline) : gpmp_prior(problem, cfg.baseline);
  Eigen::LLT<Eigen::MatrixXd> metric;
  if (covariant) {
    metric.compute(prior.a);
    if (metric.info() != Eigen::Success) throw NumericalError("smoothness metric is not positive definite");
  }

  PlanResult result;
  result.kind = kind;
  ParticleSet x = baseline_initial_particles(problem, cfg);
  const Eigen::Index n = x.size();
  std::vector<PenaltyParts> parts(static_cast<std::size_t>(n));
  Eigen::MatrixXd grads(x.dim(), n);

  for (int it = 0; it <= cfg.iterations; ++it) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::VectorXd g;
      parts[static_cast<std::size_t>(i)] = penalty_parts(problem, prior, cfg.baseline.penalty, x[i], &g);
      grads.col(i) = g;
    }
    result.queries += n;
    if (it > 0) {
      TraceRow row;
      row.iteration = it;
      double best = std::numeric_limits<double>::infinity();
      std::vector<ConstraintEval> cons;
      cons.reserve(static_cast<std::size_t>(n));
      for (const auto& p : parts) {
        const double f = p.prior + p.cost + p.penalty;
        row.mean_objective += f / static_cast<double>(n);
        row.mean_task_cost += p.cost / static_cast<double>(n);
        best = std::min(best, f);
        cons.push_back(p.constraints);
      }
      row.best_objective = best;
      fill_constraint_stats(cons, row);
      result.trace.push_back(row);
    }
    if (it == cfg.iterations) break;
    if (covariant) {
      x.matrix().noalias() -= cfg.rate * metric.solve(grads);
    } else {
      x.matrix().noalias() -= cfg.rate * grads;
    }
    if (!x.matrix().allFinite()) {
      result.aborted = true;
      result.message = "baseline iterate diverged";
      break;
    }
  }

  result.particles = std::move(x);
  result.metrics.assign(static_cast<std::size_t>(n), ParticleMetrics{});
  for (Eigen::Index i = 0; i < n; ++i) {
    const PenaltyParts p = penalty_parts(problem, prior, cfg.baseline.penalty, result.particles[i], nullptr);
    result.metrics[static_cast<std::size_t>(i)].objective = p.prior + p.cost + p.penalty;
  }
  finalize_generic(result, problem);
  finalize_trajectory(result, problem);
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::Csvn: return "csvn";
    case PlannerKind::Csvgd: return "csvgd";
    case PlannerKind::Chomp: return "chomp";
    case PlannerKind::Gpmp: return "gpmp";
  }
  return "unknown";
}

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "csvn") return PlannerKind::Csvn;
  if (name == "csvgd") return PlannerKind::Csvgd;
  if (name == "chomp") return PlannerKind::Chomp;
  if (name == "gpmp") return PlannerKind::Gpmp;
  throw ConfigError("unknown planner kind '" + name + "'");
}

void PlannerConfig::validate() const {
  std::ostringstream os;
  if (particles < 1) os << "particles must be >= 1; ";
  if (iterations < 1) os << "iterations must be >= 1; ";
  if (!(rate > 0.0)) os << "rate must be > 0; ";
  if (warmup < 0) os << "warmup must be >= 0; ";
  if (damping_retries < 0) os << "damping_retries must be >= 0; ";
  if (baseline.order != 1 && baseline.order != 2) os << "baseline.order must be 1 or 2; ";
  if (baseline.weight < 0.0) os << "baseline.weight must be >= 0; ";
  if (baseline.penalty < 0.0) os << "baseline.penalty must be >= 0; ";
  if (baseline.perturbation < 0.0) os << "baseline.perturbation must be >= 0; ";
  if (!os.str().empty()) throw ConfigError("invalid planner config: " + os.str());
}

PlanResult plan_csvn(const Target& target, ParticleSet init, const TrajectoryKernelSpec& kernel,
                     const PlannerConfig& config) {
  return run_stein(target, std::move(init), kernel, config, true);
}

PlanResult plan_csvgd(const Target& target, ParticleSet init, const TrajectoryKernelSpec& kernel,
                      const PlannerConfig& config) {
  return run_stein(target, std::move(init), kernel, config, false);
}

ParticleSet stein_initial_particles(const TrajectoryProblem& problem, const PlannerConfig& config) {
  return sample_prior(problem.prior(), config.particles, config.seed);
}

TrajectoryKernelSpec stein_kernel(const TrajectoryProblem& problem, const ParticleSet& init,
                                  const PlannerConfig& config) {
  const double ls = config.kernel_lengthscale > 0.0 ? config.kernel_lengthscale : 1.0;
  TrajectoryKernelSpec kernel = TrajectoryKernelSpec::from_prior(problem.prior(), config.metric, ls);
  if (config.kernel_lengthscale <= 0.0) calibrate_lengthscales(kernel, init, 0.5);
  return kernel;
}

PlanResult plan_csvn(const TrajectoryProblem& problem, const PlannerConfig& config) {
  ParticleSet init = stein_initial_particles(problem, config);
  const TrajectoryKernelSpec kernel = stein_kernel(problem, init, config);
  PlanResult r = plan_csvn(static_cast<const Target&>(problem), std::move(init), kernel, config);
  finalize_trajectory(r, problem);
  return r;
}

PlanResult plan_csvgd(const TrajectoryProblem& problem, const PlannerConfig& config) {
  ParticleSet init = stein_initial_particles(problem, config);
  const TrajectoryKernelSpec kernel = stein_kernel(problem, init, config);
  PlanResult r = plan_csvgd(static_cast<const Target&>(problem), std::move(init), kernel, config);
  finalize_trajectory(r, problem);
  return r;
}

QuadraticPrior chomp_prior(const TrajectoryProblem& problem, const BaselinePriorSpec& spec) {
  QuadraticBuilder qb(problem.view());
  const int n = problem.grid().size();
  const double dt = problem.grid().step();
  for (int k = 0; k < problem.spec().dofs(); ++k) {
    // Position/velocity consistency (trapezoidal), in velocity units.
    for (int i = 0; i + 1 < n; ++i)
      qb.add_row({{k, i + 1, false, 1.0 / dt}, {k, i, false, -1.0 / dt}, {k, i, true, -0.5}, {k, i + 1, true, -0.5}},
                 0.0, spec.weight);
    if (spec.order == 1) {
      for (int i = 0; i + 1 < n; ++i)
        qb.add_row({{k, i + 1, true, 1.0 / dt}, {k, i, true, -1.0 / dt}}, 0.0, spec.weight);
    } else {
      for (int i = 1; i + 1 < n; ++i)
        qb.add_row({{k, i + 1, true, 1.0 / (dt * dt)}, {k, i, true, -2.0 / (dt * dt)}, {k, i - 1, true, 1.0 / (dt * dt)}},
                   0.0, spec.weight);
    }
  }
  add_goal_anchor(qb, problem);
  QuadraticPrior out = qb.finish();
  out.a.diagonal().array() += 1e-9 * std::max(1.0, out.a.trace() / static_cast<double>(out.a.rows()));
  return out;
}

QuadraticPrior gpmp_prior(const TrajectoryProblem& problem, const BaselinePriorSpec& spec) {
  QuadraticBuilder qb(problem.view());
  const int n = problem.grid().size();
  const double dt = problem.grid().step();
  // Q = Qc [[dt^3/3, dt^2/2], [dt^2/2, dt]] with Qc = 1 / weight; whiten with Q^-1 = W^T W.
  Eigen::Matrix2d q;
  q << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
  const double qc = spec.weight > 0.0 ? 1.0 / spec.weight : std::numeric_limits<double>::infinity();
  Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
  if (std::isfinite(qc)) info = (qc * q).inverse();
  Eigen::LLT<Eigen::Matrix2d> llt(info);
  const Eigen::Matrix2d w = std::isfinite(qc) ? Eigen::Matrix2d(llt.matrixU()) : Eigen::Matrix2d::Zero();
  for (int k = 0; k < problem.spec().dofs(); ++k) {
    for (int i = 0; i + 1 < n; ++i) {
      // e = [x_{i+1} - x_i - dt v_i ; v_{i+1} - v_i], rows of W e
      for (int r = 0; r < 2; ++r) {
        qb.add_row({{k, i + 1, false, w(r, 0)},
                    {k, i, false, -w(r, 0)},
                    {k, i, true, -dt * w(r, 0) - w(r, 1)},
                    {k, i + 1, true, w(r, 1)}},
                   0.0, 1.0);
      }
    }
  }
  add_goal_anchor(qb, problem);
  QuadraticPrior out = qb.finish();
  out.a.diagonal().array() += 1e-9 * std::max(1.0, out.a.trace() / static_cast<double>(out.a.rows()));
  return out;
}

double penalty_objective(const TrajectoryProblem& problem, const QuadraticPrior& prior, double penalty,
                         const Eigen::VectorXd& xi, Eigen::VectorXd* gradient) {
  const PenaltyParts p = penalty_parts(problem, prior, penalty, xi, gradient);
  return p.prior + p.cost + p.penalty;
}

Eigen::VectorXd covariant_step(const Eigen::MatrixXd& metric, const Eigen::VectorXd& gradient, double rate) {
  Eigen::LLT<Eigen::MatrixXd> llt(metric);
  if (llt.info() != Eigen::Success) throw NumericalError("covariant metric is not positive definite");
  return -rate * llt.solve(gradient);
}

ParticleSet baseline_initial_particles(const TrajectoryProblem& problem, const PlannerConfig& config) {
  const Eigen::VectorXd line = problem.straight_line();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ParticleSet out(line.size(), config.particles);
  for (int p = 0; p < config.particles; ++p) {
    for (Eigen::Index i = 0; i < line.size(); ++i)
      out[p](i) = line(i) + config.baseline.perturbation * normal(rng);
  }
  return out;
}

PlanResult plan_chomp(const TrajectoryProblem& problem, const PlannerConfig& config) {
  return run_baseline(problem, config, PlannerKind::Chomp);
}

PlanResult plan_gpmp(const TrajectoryProblem& problem, const PlannerConfig& config) {
  return run_baseline(problem, config, PlannerKind::Gpmp);
}

PlanResult plan(const TrajectoryProblem& problem, const PlannerConfig& config) {
  switch (config.kind) {
    case PlannerKind::Csvn: return plan_csvn(problem, config);
    case PlannerKind::Csvgd: return plan_csvgd(problem, config);
    case PlannerKind::Chomp: return plan_chomp(problem, config);
    case PlannerKind::Gpmp: return plan_gpmp(problem, config);
  }
  throw ConfigError("unknown planner kind");
}

int select_best(const std::vector<double>& objectives, const std::vector<double>& max_violations,
                double feasibility_tol) {
  if (objectives.empty() || objectives.size() != max_violations.size())
    throw DimensionError("select_best needs matching, nonempty objective and violation lists");
  int best = -1;
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    if (max_violations[i] > feasibility_tol) continue;
    if (best < 0 || objectives[i] < objectives[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  if (best >= 0) return best;
  best = 0;
  for (std::size_t i = 1; i < objectives.size(); ++i) {
    const auto b = static_cast<std::size_t>(best);
    if (max_violations[i] < max_violations[b] ||
        (max_violations[i] == max_violations[b] && objectives[i] < objectives[b]))
      best = static_cast<int>(i);
  }
  return best;
}

TrajectoryMetrics trajectory_metrics(const TrajectoryProblem& problem, const Eigen::VectorXd& xi) {
  const Trajectory t = problem.view().expand(xi);
  TrajectoryMetrics m;
  const int n = t.nodes();
  const int spatial = std::min(2, t.dofs());
  for (int i = 0; i + 1 < n; ++i) {
    m.length += (t.pos.col(i + 1).head(spatial) - t.pos.col(i).head(spatial)).norm();
    m.smoothness += (t.vel.col(i + 1) - t.vel.col(i)).squaredNorm();
  }
  if (n > 1) m.smoothness /= static_cast<double>(n - 1);
  const ConstraintEval c = problem.constraints(xi);
  if (c.h.size() > 0) m.violation_mse = c.h.squaredNorm() / static_cast<double>(c.h.size());
  return m;
}

std::vector<int> kernel_clusters(const ParticleSet& particles, const TrajectoryKernelSpec& kernel,
                                 double threshold) {
  std::vector<int> reps;
  for (Eigen::Index i = 0; i < particles.size(); ++i) {
    bool joined = false;
    for (int r : reps) {
      if (trajectory_kernel(particles[r], particles[i], kernel).value >= threshold) {
        joined = true;
        break;
      }
    }
    if (!joined) reps.push_back(static_cast<int>(i));
  }
  return reps;
}

void configure_threads_from_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SVNPLAN_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

}  // namespace svnplan
