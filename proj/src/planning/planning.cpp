#include "svnplan/planning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "svnplan/errors.hpp"

namespace svnplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Observation noise used to pin clamped nodes when conditioning the prior.
constexpr double kClampNoise = 1e-10;

double circle_distance(const Circle& c, const Eigen::Vector2d& p, Eigen::Vector2d* grad) {
  const Eigen::Vector2d r = p - c.center;
  const double n = r.norm();
  if (grad) *grad = n > 0.0 ? Eigen::Vector2d(r / n) : Eigen::Vector2d::Zero();
  return n - c.radius;
}

double box_distance(const Box& b, const Eigen::Vector2d& p, Eigen::Vector2d* grad) {
  const Eigen::Vector2d r = p - b.center;
  const Eigen::Vector2d sign(r.x() >= 0.0 ? 1.0 : -1.0, r.y() >= 0.0 ? 1.0 : -1.0);
  const Eigen::Vector2d q = r.cwiseAbs() - b.half_extents;
  if (q.x() > 0.0 || q.y() > 0.0) {
    const Eigen::Vector2d outside = q.cwiseMax(0.0);
    const double d = outside.norm();
    if (grad) *grad = sign.cwiseProduct(outside) / d;
    return d;
  }
  if (q.x() >= q.y()) {
    if (grad) *grad = Eigen::Vector2d(sign.x(), 0.0);
    return q.x();
  }
  if (grad) *grad = Eigen::Vector2d(0.0, sign.y());
  return q.y();
}

}  // namespace

bool Scene2D::contains(const Eigen::Vector2d& p) const {
  return (p.array() >= lower.array()).all() && (p.array() <= upper.array()).all();
}

void Scene2D::validate() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < circles.size(); ++i)
    if (!(circles[i].radius > 0.0)) os << "circle " << i << " radius must be > 0; ";
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (!(boxes[i].half_extents.array() > 0.0).all()) os << "box " << i << " is degenerate; ";
  if (!(lower.array() < upper.array()).all()) os << "workspace bounds are empty; ";
  if (!os.str().empty()) throw ConfigError("invalid scene: " + os.str());
}

double signed_distance(const Scene2D& scene, const Eigen::Vector2d& p, Eigen::Vector2d* gradient) {
  if (!p.allFinite()) throw DomainError("signed_distance needs a finite point");
  double best = kInf;
  Eigen::Vector2d best_grad = Eigen::Vector2d::Zero();
  Eigen::Vector2d g;
  for (const auto& c : scene.circles) {
    const double d = circle_distance(c, p, &g);
    if (d < best) {
      best = d;
      best_grad = g;
    }
  }
  for (const auto& b : scene.boxes) {
    const double d = box_distance(b, p, &g);
    if (d < best) {
      best = d;
      best_grad = g;
    }
  }
  if (gradient) *gradient = best_grad;
  return best;
}

int dof_count(DofLayout layout) { return layout == DofLayout::Unicycle ? 3 : 2; }

PositionCost obstacle_cost(const Trajectory& traj, const Scene2D& scene, CostMode mode,
                           double safety_margin) {
  PositionCost out;
  out.gradient = Eigen::MatrixXd::Zero(traj.dofs(), traj.nodes());
  if (scene.empty()) return out;
  Eigen::Vector2d g;
  for (int i = 0; i < traj.nodes(); ++i) {
    const Eigen::Vector2d p(traj.pos(0, i), traj.pos(1, i));
    if (mode == CostMode::ExpSum) {
      auto add = [&](double d) {
        const double e = std::exp(-d);
        out.value += e;
        out.gradient.block<2, 1>(0, i) -= e * g;
      };
      for (const auto& c : scene.circles) add(circle_distance(c, p, &g));
      for (const auto& b : scene.boxes) add(box_distance(b, p, &g));
      continue;
    }
    const double d = signed_distance(scene, p, &g);
    if (mode == CostMode::Exp) {
      const double e = std::exp(-d);
      out.value += e;
      out.gradient.block<2, 1>(0, i) -= e * g;
    } else if (d < safety_margin) {
      out.value += safety_margin - d;
      out.gradient.block<2, 1>(0, i) -= g;
    }
  }
  return out;
}

PositionCost path_length_cost(const Trajectory& traj, int spatial_dofs, double eps) {
  PositionCost out;
  out.gradient = Eigen::MatrixXd::Zero(traj.dofs(), traj.nodes());
  const int k = std::min(spatial_dofs, traj.dofs());
  for (int i = 0; i + 1 < traj.nodes(); ++i) {
    const Eigen::VectorXd delta = traj.pos.col(i + 1).head(k) - traj.pos.col(i).head(k);
    const double len = std::sqrt(delta.squaredNorm() + eps * eps);
    out.value += len;
    const Eigen::VectorXd u = delta / len;
    out.gradient.col(i + 1).head(k) += u;
    out.gradient.col(i).head(k) -= u;
  }
  return out;
}

PositionCost joint_limit_penalty(const Trajectory& traj, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, double weight) {
  if (lower.size() != traj.dofs() || upper.size() != traj.dofs())
    throw DimensionError("joint limits need one bound per DOF");
  if (!lower.allFinite() || !upper.allFinite()) throw DomainError("joint limits must be finite");
  PositionCost out;
  out.gradient = Eigen::MatrixXd::Zero(traj.dofs(), traj.nodes());
  for (int k = 0; k < traj.dofs(); ++k) {
    for (int i = 0; i < traj.nodes(); ++i) {
      const double q = traj.pos(k, i);
      const double over = std::max(0.0, q - upper(k));
      const double under = std::max(0.0, lower(k) - q);
      out.value += weight * (over * over + under * under);
      out.gradient(k, i) += 2.0 * weight * (over - under);
    }
  }
  return out;
}

TrajectoryView::TrajectoryView(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped,
                               Eigen::MatrixXd values)
    : clamped_(std::move(clamped)), values_(std::move(values)) {
  if (values_.rows() != clamped_.rows() || values_.cols() != clamped_.cols())
    throw DimensionError("clamp mask and values must have the same shape");
  pos_index_ = Eigen::MatrixXi::Constant(dofs(), nodes(), -1);
  Eigen::Index off = 0;
  for (int k = 0; k < dofs(); ++k) {
    offsets_.push_back(off);
    for (int i = 0; i < nodes(); ++i)
      if (!clamped_(k, i)) pos_index_(k, i) = static_cast<int>(off++);
    off += nodes();
  }
  dim_ = off;
}

Eigen::Index TrajectoryView::position_index(int dof, int node) const { return pos_index_(dof, node); }

Eigen::Index TrajectoryView::velocity_index(int dof, int node) const {
  const Eigen::Index next = dof + 1 < dofs() ? offsets_[static_cast<std::size_t>(dof + 1)] : dim_;
  return next - nodes() + node;
}

Trajectory TrajectoryView::expand(const Eigen::VectorXd& xi) const {
  if (xi.size() != dim_) throw DimensionError("decision vector does not match the trajectory layout");
  Trajectory t;
  t.pos.resize(dofs(), nodes());
  t.vel.resize(dofs(), nodes());
  for (int k = 0; k < dofs(); ++k) {
    for (int i = 0; i < nodes(); ++i) {
      const int idx = pos_index_(k, i);
      t.pos(k, i) = idx < 0 ? values_(k, i) : xi(idx);
      t.vel(k, i) = xi(velocity_index(k, i));
    }
  }
  return t;
}

Eigen::VectorXd TrajectoryView::flatten(const Trajectory& traj) const {
  if (traj.dofs() != dofs() || traj.nodes() != nodes()) throw DimensionError("trajectory shape mismatch");
  Eigen::VectorXd xi(dim_);
  for (int k = 0; k < dofs(); ++k) {
    for (int i = 0; i < nodes(); ++i) {
      if (pos_index_(k, i) >= 0) xi(pos_index_(k, i)) = traj.pos(k, i);
      xi(velocity_index(k, i)) = traj.vel(k, i);
    }
  }
  return xi;
}

Eigen::VectorXd TrajectoryView::gather(const Eigen::MatrixXd& grad_pos, const Eigen::MatrixXd& grad_vel) const {
  Eigen::VectorXd g(dim_);
  for (int k = 0; k < dofs(); ++k) {
    for (int i = 0; i < nodes(); ++i) {
      if (pos_index_(k, i) >= 0) g(pos_index_(k, i)) = grad_pos(k, i);
      g(velocity_index(k, i)) = grad_vel(k, i);
    }
  }
  return g;
}

std::vector<std::vector<int>> TrajectoryView::free_coordinates() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(dofs()));
  for (int k = 0; k < dofs(); ++k) {
    auto& ids = out[static_cast<std::size_t>(k)];
    for (int i = 0; i < nodes(); ++i)
      if (!clamped_(k, i)) ids.push_back(i);
    for (int i = 0; i < nodes(); ++i) ids.push_back(nodes() + i);
  }
  return out;
}

ConstraintEval unicycle_constraint(const TrajectoryView& view, const Eigen::VectorXd& xi) {
  if (view.dofs() != 3) throw ConfigError("unicycle constraint needs an (x, y, theta) layout");
  const Trajectory t = view.expand(xi);
  const int n = view.nodes();
  const int m = std::max(0, n - 2);
  ConstraintEval e = ConstraintEval::none(view.dim());
  e.h.resize(m);
  e.dh = Eigen::MatrixXd::Zero(view.dim(), m);
  for (int c = 0; c < m; ++c) {
    const int i = c + 1;
    const double vx = t.vel(0, i);
    const double vy = t.vel(1, i);
    const double th = t.pos(2, i);
    const double cs = std::cos(th);
    const double sn = std::sin(th);
    e.h(c) = vy * cs - vx * sn;
    e.dh(view.velocity_index(0, i), c) = -sn;
    e.dh(view.velocity_index(1, i), c) = cs;
    const Eigen::Index ti = view.position_index(2, i);
    if (ti >= 0) e.dh(ti, c) = -vy * sn - vx * cs;
  }
  return e;
}

void ProblemSpec::validate() const {
  std::ostringstream os;
  const int k = dofs();
  if (start.size() != k) os << "start must have " << k << " entries; ";
  if (goal.size() != k) os << "goal must have " << k << " entries; ";
  if (weights.obstacle < 0.0 || weights.prior < 0.0 || weights.length < 0.0 || weights.limits < 0.0)
    os << "cost weights must be >= 0; ";
  if (!(goal_variance > 0.0)) os << "goal_variance must be > 0; ";
  if ((lower.size() != 0 || upper.size() != 0) && (lower.size() != k || upper.size() != k))
    os << "joint limits need one bound per DOF; ";
  if (start.size() >= 2 && !scene.contains(start.head<2>())) os << "start lies outside the workspace; ";
  if (goal.size() >= 2 && !scene.contains(goal.head<2>())) os << "goal lies outside the workspace; ";
  if (!os.str().empty()) throw ConfigError("invalid problem: " + os.str());
  scene.validate();
}

TrajectoryProblem::TrajectoryProblem(ProblemSpec spec, const TrajectoryPriorSpec& prior_spec)
    : spec_(std::move(spec)), grid_(prior_spec.horizon, prior_spec.nodes) {
  spec_.validate();
  const int k = spec_.dofs();
  const int n = grid_.size();

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, n, false);
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(k, n);
  clamped.col(0).setConstant(true);
  values.col(0) = spec_.start;
  if (spec_.clamp_goal) {
    clamped.col(n - 1).setConstant(true);
    values.col(n - 1) = spec_.goal;
  }
  view_ = TrajectoryView(clamped, values);

  std::vector<BoundaryCondition> bcs;
  std::vector<Observation> obs;
  for (int d = 0; d < k; ++d) {
    bcs.push_back({spec_.start(d), prior_spec.start_variance, spec_.goal(d)});
    obs.push_back({d, ObservationKind::Position, 0, spec_.start(d), kClampNoise});
    obs.push_back({d, ObservationKind::Position, n - 1, spec_.goal(d),
                   spec_.clamp_goal ? kClampNoise : spec_.goal_variance});
  }
  full_prior_ = build_joint_prior(prior_spec.hsgp, grid_, bcs);
  prior_ = marginal_prior(condition_prior(full_prior_, obs), view_.free_coordinates());
  curvature_ = spec_.weights.prior * prior_.precision();
}

double TrajectoryProblem::cost(const Eigen::VectorXd& xi, Eigen::VectorXd* gradient) const {
  const Trajectory t = view_.expand(xi);
  const CostWeights& w = spec_.weights;
  double value = 0.0;
  Eigen::MatrixXd grad_pos = Eigen::MatrixXd::Zero(t.dofs(), t.nodes());
  if (w.obstacle > 0.0) {
    const PositionCost c = obstacle_cost(t, spec_.scene, spec_.mode, spec_.safety_margin);
    value += w.obstacle * c.value;
    grad_pos += w.obstacle * c.gradient;
  }
  if (w.length > 0.0) {
    const PositionCost c = path_length_cost(t, 2);
    value += w.length * c.value;
    grad_pos += w.length * c.gradient;
  }
  if (w.limits > 0.0 && spec_.lower.size() == t.dofs()) {
    const PositionCost c = joint_limit_penalty(t, spec_.lower, spec_.upper, 1.0);
    value += w.limits * c.value;
    grad_pos += w.limits * c.gradient;
  }
  if (gradient) *gradient = view_.gather(grad_pos, Eigen::MatrixXd::Zero(t.dofs(), t.nodes()));
  return value;
}

double TrajectoryProblem::log_density(const Eigen::VectorXd& xi, Eigen::VectorXd* score) const {
  Eigen::VectorXd cost_grad;
  const double c = cost(xi, score ? &cost_grad : nullptr);
  const auto [q, q_grad] = prior_quadratic_form(prior_, xi);
  if (score) *score = -spec_.weights.prior * q_grad - cost_grad;
  return -spec_.weights.prior * q - c;
}

double TrajectoryProblem::task_cost(const Eigen::VectorXd& xi) const { return cost(xi, nullptr); }

ConstraintEval TrajectoryProblem::constraints(const Eigen::VectorXd& xi) const {
  ConstraintEval e = has_equalities() ? unicycle_constraint(view_, xi) : ConstraintEval::none(dim());
  if (!spec_.workspace_inequalities) return e;
  std::vector<std::pair<Eigen::Index, double>> rows;  // (index, sign) pairs with bound
  std::vector<double> bounds;
  for (int d = 0; d < 2; ++d) {
    for (int i = 0; i < grid_.size(); ++i) {
      const Eigen::Index idx = view_.position_index(d, i);
      if (idx < 0) continue;
      if (std::isfinite(spec_.scene.lower(d))) {
        rows.emplace_back(idx, -1.0);
        bounds.push_back(spec_.scene.lower(d));
      }
      if (std::isfinite(spec_.scene.upper(d))) {
        rows.emplace_back(idx, 1.0);
        bounds.push_back(spec_.scene.upper(d));
      }
    }
  }
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  e.g.resize(m);
  e.dg = Eigen::MatrixXd::Zero(dim(), m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto [idx, sign] = rows[static_cast<std::size_t>(r)];
    e.g(r) = sign * (xi(idx) - bounds[static_cast<std::size_t>(r)]);
    e.dg(idx, r) = sign;
  }
  return e;
}

Eigen::VectorXd TrajectoryProblem::straight_line() const {
  Trajectory t;
  t.pos.resize(spec_.dofs(), grid_.size());
  t.vel.resize(spec_.dofs(), grid_.size());
  const Eigen::VectorXd rate = (spec_.goal - spec_.start) / grid_.horizon();
  for (int i = 0; i < grid_.size(); ++i) {
    t.pos.col(i) = spec_.start + rate * grid_[i];
    t.vel.col(i) = rate;
  }
  return view_.flatten(t);
}

bool TrajectoryProblem::endpoints_reached(const Eigen::VectorXd& xi, double tol) const {
  const Trajectory t = view_.expand(xi);
  return (t.pos.col(0) - spec_.start).cwiseAbs().maxCoeff() <= tol &&
         (t.pos.col(grid_.size() - 1) - spec_.goal).cwiseAbs().maxCoeff() <= tol;
}

bool TrajectoryProblem::collision_free(const Eigen::VectorXd& xi) const {
  if (spec_.scene.empty()) return true;
  const Trajectory t = view_.expand(xi);
  for (int i = 0; i < t.nodes(); ++i)
    if (!(signed_distance(spec_.scene, Eigen::Vector2d(t.pos(0, i), t.pos(1, i))) > 0.0)) return false;
  return true;
}

ConstrainedGaussian::ConstrainedGaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size())
    throw DimensionError("Gaussian mean/covariance size mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() != Eigen::Success) throw ConfigError("target covariance must be positive definite");
  precision_ = llt.solve(Eigen::MatrixXd::Identity(mean_.size(), mean_.size()));
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
}

ConstrainedGaussian& ConstrainedGaussian::with_ellipse(Ellipse e) {
  if (e.center.size() != dim() || e.axes.size() != dim() || !(e.axes.array() > 0.0).all())
    throw ConfigError("ellipse needs a center and positive axes of the target dimension");
  ellipse_ = std::move(e);
  return *this;
}

ConstrainedGaussian& ConstrainedGaussian::with_hyperplane(Hyperplane p) {
  if (p.normal.size() != dim() || p.normal.norm() == 0.0)
    throw ConfigError("hyperplane needs a nonzero normal of the target dimension");
  plane_ = std::move(p);
  return *this;
}

ConstrainedGaussian& ConstrainedGaussian::flat(bool on) {
  flat_ = on;
  return *this;
}

double ConstrainedGaussian::log_density(const Eigen::VectorXd& x, Eigen::VectorXd* score) const {
  if (x.size() != dim()) throw DimensionError("point does not match target dimension");
  if (flat_) {
    if (score) *score = Eigen::VectorXd::Zero(dim());
    return 0.0;
  }
  const Eigen::VectorXd r = x - mean_;
  const Eigen::VectorXd pr = precision_ * r;
  if (score) *score = -pr;
  return -0.5 * r.dot(pr);
}

ConstraintEval ConstrainedGaussian::constraints(const Eigen::VectorXd& x) const {
  const Eigen::Index m = (ellipse_ ? 1 : 0) + (plane_ ? 1 : 0);
  ConstraintEval e = ConstraintEval::none(dim());
  e.h.resize(m);
  e.dh.resize(dim(), m);
  Eigen::Index c = 0;
  if (ellipse_) {
    const Eigen::ArrayXd r = (x - ellipse_->center).array() / ellipse_->axes.array();
    e.h(c) = r.square().sum() - 1.0;
    e.dh.col(c) = (2.0 * r / ellipse_->axes.array()).matrix();
    ++c;
  }
  if (plane_) {
    e.h(c) = plane_->normal.dot(x) - plane_->offset;
    e.dh.col(c) = plane_->normal;
  }
  return e;
}

}  // namespace svnplan
