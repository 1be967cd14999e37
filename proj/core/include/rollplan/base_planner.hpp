#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rollplan/gait.hpp"
#include "rollplan/qp_solver.hpp"
#include "rollplan/robot_state.hpp"
#include "rollplan/spline.hpp"
#include "rollplan/terrain.hpp"
#include "rollplan/wheel_planner.hpp"

namespace rollplan {

// Thrown when the contact is not pressing, e.g. in free fall, where the
// zero-moment point is undefined.
class DegenerateContactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lumped-mass wrench of gravity minus inertia about the reference origin:
// f_gi = m (g - a), m_gi = m r x (g - a) - l_dot.
struct GravitoInertialWrench {
  Vec3 f_gi = Vec3::Zero();   // N
  Vec3 m_gi = Vec3::Zero();   // N m
  double mass = 0.0;          // kg
  Vec3 gravity = Vec3(0.0, 0.0, -kGravity);
  Vec3 l_dot = Vec3::Zero();  // angular-momentum rate about the COM, N m
};

GravitoInertialWrench gravito_inertial_wrench(const Vec3& r_com, const Vec3& a_com, double mass,
                                              const Vec3& gravity = Vec3(0.0, 0.0, -kGravity),
                                              const Vec3& l_dot = Vec3::Zero());

// Zero-moment point n x m_gi / (n' f_gi) on the plane through the origin
// with normal n. The contact presses the ground when the reaction component
// n' m (a - g) is positive, which makes the printed denominator negative;
// anything else throws DegenerateContactError.
Vec3 zmp_point(const GravitoInertialWrench& w, const Vec3& normal);

// ZMP as a world point on the terrain plane: moments are taken about the
// plane's anchor point and the result shifted back.
Vec3 zmp_world(const Vec3& r_com, const Vec3& a_com, double mass, const Vec3& l_dot,
               const TerrainPlane& plane);

// Support region at one sample time: the CCW convex hull of the planned
// in-contact wheel positions projected to the terrain plane, described by
// edge lines d = [p, q, r] with unit (p, q) and p x + q y + r > 0 strictly
// inside. Two contacts (or a collinear set) give a slab of half-width eps
// around the support line, one contact a box of half-width eps, and no
// contact the full-flight marker with no edges.
struct SupportPolygonEdges {
  double time = 0.0;
  bool full_flight = false;
  std::vector<Vec2> hull;   // world xy, CCW
  std::vector<Vec3> edges;  // [p, q, r] on world xy
};

SupportPolygonEdges support_polygon(double t, const std::vector<Vec3>& contacts_world,
                                    const TerrainPlane& plane, double eps);

// World positions of the wheels that are planned to be in contact at time t.
// Legs with a plan use the planned segment kind and position (clamped to the
// plan horizon); legs without one fall back to the measured state.
std::vector<Vec3> planned_contact_points(double t,
                                         const std::array<const WheelPlan*, kNumLegs>& wheels,
                                         const RobotState& state);

// Denominator-free slack of one edge at a COM state: [p q 0] . (n x m_r) +
// r' . (n' f_r) with the reaction wrench f_r = m (a - g), m_r about the
// plane anchor, and the edge offset shifted to the anchor. Positive inside,
// homogeneous of degree one in d, and shares its sign with the point margin
// [p q] . zmp_xy + r whenever the contact presses.
double zmp_edge_slack(const Vec3& d, const Vec3& r_com, const Vec3& a_com, double mass,
                      const Vec3& l_dot, const TerrainPlane& plane);

// Weights and knobs of the base trajectory optimization.
struct BaseToConfig {
  int num_segments = 4;        // quintic segments per spline over the horizon
  int num_samples = 40;        // constraint and cost sample grid
  double w_acc_lin = 1e-2;     // COM acceleration penalty
  double w_acc_ang = 1e-2;     // angular acceleration penalty
  double w_vel = 10.0;         // COM xy velocity tracking
  double w_yaw_rate = 10.0;    // yaw rate tracking
  // Strong enough that a 5 cm offset contracts below 1 cm within two trot
  // strides of replanning; the thin diagonal supports brake lateral recovery
  // to a fraction of what the unconstrained weight ratio would give.
  double w_pose_xy = 80.0;     // integrated-reference position pull
  double w_pose_yaw = 5.0;     // integrated-reference yaw pull
  double w_height = 10.0;      // COM height above terrain
  double w_attitude = 5.0;     // pitch/roll toward the terrain slope
  double w_pre_pos = 0.5;      // previous-solution deviation, position
  double w_pre_vel = 0.05;     //   velocity
  double w_pre_acc = 5e-4;     //   acceleration
  double eps_support = 0.02;   // slab/box half-width for thin supports, m
  double g_min = 1.0;          // lower bound on n.(a - g), m/s^2
  Vec3 l_dot = Vec3::Zero();   // angular-momentum rate, kept at zero
  int max_sqp_iterations = 5;
  double merit_penalty = 1e3;  // constraint-violation weight in the merit
  double step_tol = 1e-5;      // SQP convergence on the step infinity norm
  double margin_tol = 1e-6;    // accepted nonlinear ZMP margin, m
  double rho = 1e-8;           // Hessian regularizer

  void validate() const;  // throws std::invalid_argument
};

// Optimized base motion: COM position and yaw-pitch-roll angles, each a
// sequence of quintic segments on absolute time. The angle sequence maps
// x = yaw, y = pitch, z = roll.
struct BaseTrajectory {
  SegmentSequence com;
  SegmentSequence angles;

  double t0() const { return com.t_begin(); }
  double t_end() const { return com.t_end(); }
  Motion com_at(double t) const { return com.eval(t); }
  Motion angles_at(double t) const { return angles.eval(t); }
};

// Stacked decision vector [com segment coefficients | angle segment
// coefficients], 18 per segment per group.
VecX stack_base(const BaseTrajectory& traj);
BaseTrajectory unstack_base(const VecX& xi, double t0, double t_f, int num_segments);

// One ZMP sample: absolute time plus the support region there.
struct ZmpSample {
  double t = 0.0;
  SupportPolygonEdges support;
};

// Reference inputs of one base plan: the integrated planar pose at the plan
// start, the velocity command it keeps integrating, and the COM height.
struct BaseReference {
  ReferencePose pose;
  VelocityCommand cmd;
  double height = 0.5;
};

// Assembled base problem: the iterate-independent QP (costs, initial-state
// and junction equalities, no inequalities) plus everything the SQP loop
// needs to relinearize the ZMP rows.
struct BaseQp {
  QpProblem fixed;
  std::vector<ZmpSample> samples;
  double t0 = 0.0;
  double t_f = 0.0;
  int num_segments = 0;
  double mass = 0.0;
  Vec3 l_dot = Vec3::Zero();
  double g_min = 1.0;
  TerrainPlane plane;
};

BaseQp assemble_base(const RobotState& state, const BaseReference& ref, double t_f,
                     const std::vector<ZmpSample>& samples, const TerrainPlane& plane,
                     const BaseToConfig& cfg, const RobotModel& model,
                     const BaseTrajectory* prev);

// Appends the linearized ZMP rows about the iterate xi_bar (D xi <= f, one
// row per edge per non-flight sample) and one pressing row n.(a - g) >= g_min
// per such sample. Rows are exact at xi_bar, so their slack there equals the
// nonlinear slack.
void zmp_constraint_rows(const BaseQp& qp, const VecX& xi_bar, MatX& D, VecX& f);

// Same rows, anchored at the COM position and acceleration of a previously
// planned trajectory evaluated at each sample time (clamped to its horizon).
// Lets a replan linearize its first QP about the plan it is about to replace.
void zmp_constraint_rows(const BaseQp& qp, const BaseTrajectory& about, MatX& D, VecX& f);

// Nonlinear feasibility data of an iterate, used for the merit function and
// the final certificate.
struct ZmpEvaluation {
  double worst_margin = 0.0;    // min point margin over samples, m
  double worst_pressing = 0.0;  // min of n.(a - g) - g_min, m/s^2
  double violation = 0.0;       // summed negative slack, denominator-free form
  bool degenerate = false;      // some constrained sample is not pressing
};

ZmpEvaluation evaluate_zmp(const BaseQp& qp, const VecX& xi);

struct BaseSolveReport {
  QpStatus status = QpStatus::kNumericalFailure;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  double worst_margin = 0.0;
  double worst_pressing = 0.0;
  double continuity_residual = 0.0;
  std::vector<double> merit;  // initial iterate first, then accepted steps
  std::vector<int> active_set;
};

struct BaseSolve {
  BaseSolveReport report;
  std::optional<BaseTrajectory> trajectory;
};

// Damped Gauss-Newton loop. The first QP carries ZMP rows anchored at init
// when one is given (the previous plan, in receding-horizon use) and no ZMP
// rows otherwise; its solution is the first iterate. Later iterations
// relinearize about the iterate and accept the longest backtracked step that
// does not increase the merit function. After the loop the nonlinear margins
// are recomputed from the returned splines; a worst margin below -margin_tol
// reports kMaxIterations. The trajectory of the final iterate is returned
// either way so the caller can seed the next solve with it.
BaseSolve sqp_solve(const BaseQp& qp, const BaseTrajectory* init, const BaseToConfig& cfg,
                    QpSolver& solver, std::span<const int> warm = {});

// Stateful base planner: builds the sample grid from the wheel plans and
// keeps the last SQP iterate across calls. The stored trajectory serves as
// deviation-cost reference and as the linearization point of the next solve,
// so successive replans continue the Gauss-Newton sequence even when a single
// call runs out of iterations; the report's status says whether the returned
// plan certified. The previous active set warm-starts the QPs.
class BasePlanner {
 public:
  BasePlanner(BaseToConfig cfg, RobotModel model);

  struct Result {
    BaseSolveReport report;
    std::optional<BaseTrajectory> plan;
  };

  Result replan(const RobotState& state, const VelocityCommand& cmd, const ReferencePose& pose,
                const GaitPattern& gait, const TerrainPlane& terrain,
                const std::array<const WheelPlan*, kNumLegs>& wheels);

  const BaseToConfig& config() const { return cfg_; }
  void reset();

 private:
  BaseToConfig cfg_;
  RobotModel model_;
  std::optional<BaseTrajectory> prev_;
  std::vector<int> warm_;
  QpSolver solver_;
};

}  // namespace rollplan
