#pragma once

// 2D planning problems over joint position/velocity trajectories: scene
// geometry, costs, the unicycle no-slip constraint and the assembled target.

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

#include "svnplan/constraints.hpp"
#include "svnplan/gp_prior.hpp"
#include "svnplan/target.hpp"

namespace svnplan {

struct Circle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
};

struct Box {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half_extents = Eigen::Vector2d::Ones();
};

struct Scene2D {
  std::vector<Circle> circles;
  std::vector<Box> boxes;
  Eigen::Vector2d lower = Eigen::Vector2d::Constant(-std::numeric_limits<double>::infinity());
  Eigen::Vector2d upper = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());

  bool empty() const { return circles.empty() && boxes.empty(); }
  bool contains(const Eigen::Vector2d& p) const;
  void validate() const;
};

/// Exact signed distance to the nearest obstacle (negative inside); +inf for
/// an empty scene. `gradient` receives the SDF gradient when non-null.
double signed_distance(const Scene2D& scene, const Eigen::Vector2d& p,
                       Eigen::Vector2d* gradient = nullptr);

/// Exp: exp(-d) of the nearest-obstacle distance. ExpSum: sum of exp(-d) over
/// obstacles, which stays smooth where two obstacles are equidistant.
/// Hinge: max(0, margin - d) of the nearest-obstacle distance.
enum class CostMode { Exp, ExpSum, Hinge };
enum class DofLayout { PointMass, Unicycle };

int dof_count(DofLayout layout);

/// Full-grid trajectory, one row per DOF.
struct Trajectory {
  Eigen::MatrixXd pos;
  Eigen::MatrixXd vel;

  int dofs() const { return static_cast<int>(pos.rows()); }
  int nodes() const { return static_cast<int>(pos.cols()); }
};

/// Value plus gradient with respect to the position rows of a Trajectory.
struct PositionCost {
  double value = 0.0;
  Eigen::MatrixXd gradient;
};

PositionCost obstacle_cost(const Trajectory& traj, const Scene2D& scene, CostMode mode,
                           double safety_margin);

/// Sum of smoothed segment lengths over the first `spatial_dofs` rows.
PositionCost path_length_cost(const Trajectory& traj, int spatial_dofs = 2, double eps = 1e-8);

/// weight * sum of squared bound violations over every DOF and node.
PositionCost joint_limit_penalty(const Trajectory& traj, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, double weight);

/// Maps decision vectors to full trajectories. Per DOF the decision vector holds
/// the unclamped positions followed by all velocities.
class TrajectoryView {
 public:
  TrajectoryView() = default;
  /// `clamped(k, i)` marks position node i of DOF k as fixed to `values(k, i)`.
  TrajectoryView(Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped, Eigen::MatrixXd values);

  int dofs() const { return static_cast<int>(clamped_.rows()); }
  int nodes() const { return static_cast<int>(clamped_.cols()); }
  Eigen::Index dim() const { return dim_; }

  /// Decision index of a position node, or -1 when clamped.
  Eigen::Index position_index(int dof, int node) const;
  Eigen::Index velocity_index(int dof, int node) const;
  Eigen::Index dof_offset(int dof) const { return offsets_[static_cast<std::size_t>(dof)]; }

  Trajectory expand(const Eigen::VectorXd& xi) const;
  Eigen::VectorXd flatten(const Trajectory& traj) const;
  /// Chain rule from full-grid position/velocity gradients to the decision vector.
  Eigen::VectorXd gather(const Eigen::MatrixXd& grad_pos, const Eigen::MatrixXd& grad_vel) const;

  /// Kept coordinates per DOF in the [positions; velocities] full-grid block layout.
  std::vector<std::vector<int>> free_coordinates() const;

 private:
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> clamped_;
  Eigen::MatrixXd values_;
  Eigen::MatrixXi pos_index_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index dim_ = 0;
};

/// No-slip constraint vy cos(theta) - vx sin(theta) = 0 at every interior node.
ConstraintEval unicycle_constraint(const TrajectoryView& view, const Eigen::VectorXd& xi);

struct CostWeights {
  double obstacle = 1.0;
  double prior = 1e-2;
  double length = 0.0;
  double limits = 0.0;
};

struct ProblemSpec {
  Scene2D scene;
  DofLayout layout = DofLayout::PointMass;
  Eigen::VectorXd start;
  Eigen::VectorXd goal;
  CostWeights weights;
  CostMode mode = CostMode::Exp;
  double safety_margin = 0.5;
  /// Per-DOF joint limits; empty means unbounded.
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  /// Fix the goal position; otherwise it enters via a tight prior observation.
  bool clamp_goal = false;
  double goal_variance = 1e-6;
  /// Keep spatial positions inside the scene bounds through g(x) <= 0.
  bool workspace_inequalities = false;

  int dofs() const { return dof_count(layout); }
  void validate() const;
};

struct TrajectoryPriorSpec {
  HsgpSpec hsgp;
  double horizon = 1.0;
  int nodes = 32;
  double start_variance = 1e-4;
};

/// Posterior-form target -w_prior/2 ||xi - mu||_K^2 - L(xi) over free nodes.
class TrajectoryProblem : public Target {
 public:
  TrajectoryProblem(ProblemSpec spec, const TrajectoryPriorSpec& prior_spec);

  Eigen::Index dim() const override { return view_.dim(); }
  double log_density(const Eigen::VectorXd& xi, Eigen::VectorXd* score) const override;
  ConstraintEval constraints(const Eigen::VectorXd& xi) const override;
  bool has_inequalities() const override { return spec_.workspace_inequalities; }
  const Eigen::MatrixXd& known_curvature() const override { return curvature_; }
  double task_cost(const Eigen::VectorXd& xi) const override;

  /// Weighted costs L(xi) and their gradient (no prior term).
  double cost(const Eigen::VectorXd& xi, Eigen::VectorXd* gradient) const;
  bool has_equalities() const { return spec_.layout == DofLayout::Unicycle; }

  const ProblemSpec& spec() const { return spec_; }
  const TrajectoryView& view() const { return view_; }
  const TimeGrid& grid() const { return grid_; }
  /// Prior over the decision vector (free nodes, conditioned on clamps).
  const JointGpPrior& prior() const { return prior_; }
  /// Full-grid prior before clamping, for diagnostics.
  const JointGpPrior& full_prior() const { return full_prior_; }

  /// Straight line from start to goal with constant velocity.
  Eigen::VectorXd straight_line() const;
  bool endpoints_reached(const Eigen::VectorXd& xi, double tol) const;
  bool collision_free(const Eigen::VectorXd& xi) const;

 private:
  ProblemSpec spec_;
  TimeGrid grid_;
  TrajectoryView view_;
  JointGpPrior full_prior_;
  JointGpPrior prior_;
  Eigen::MatrixXd curvature_;
};

/// Correlated Gaussian with an optional ellipse or hyperplane equality; the
/// decision vector is the point itself.
class ConstrainedGaussian : public Target {
 public:
  struct Ellipse {
    Eigen::VectorXd center;
    Eigen::VectorXd axes;
  };
  struct Hyperplane {
    Eigen::VectorXd normal;
    double offset = 0.0;
  };

  ConstrainedGaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

  ConstrainedGaussian& with_ellipse(Ellipse e);
  ConstrainedGaussian& with_hyperplane(Hyperplane p);
  /// Zero the score (the density becomes flat); used to isolate kernel repulsion.
  ConstrainedGaussian& flat(bool on = true);

  Eigen::Index dim() const override { return mean_.size(); }
  double log_density(const Eigen::VectorXd& x, Eigen::VectorXd* score) const override;
  ConstraintEval constraints(const Eigen::VectorXd& x) const override;

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd precision_;
  std::optional<Ellipse> ellipse_;
  std::optional<Hyperplane> plane_;
  bool flat_ = false;
};

}  // namespace svnplan
