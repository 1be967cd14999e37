#pragma once

#include <optional>
#include <span>
#include <vector>

#include "rollplan/gait.hpp"
#include "rollplan/qp_solver.hpp"
#include "rollplan/robot_state.hpp"
#include "rollplan/spline.hpp"
#include "rollplan/terrain.hpp"

namespace rollplan {

// Weights, limits, and knobs of the per-wheel trajectory QP. Cost weights
// are scalars per term (isotropic diagonals), which is how they are tuned in
// practice.
struct WheelToConfig {
  Vec3 w_acc = Vec3::Constant(1e-2);  // acceleration penalty per axis
  double w_pre_pos = 1.0;             // previous-solution deviation, position
  double w_pre_vel = 0.1;             //   velocity
  double w_pre_acc = 1e-3;            //   acceleration
  double w_ref = 10.0;                // rolling-velocity tracking at stance start
  double w_def = 1.0;                 // default-position pull while rolling
  double w_fh = 50.0;                 // foothold target at touch-down, xy
  double w_sh = 50.0;                 // swing apex height
  double w_apex = 50.0;               // swing apex xy toward the stride midpoint

  Vec3 r_def = Vec3::Zero();          // default wheel position under the hip, frame W
  double x_kin = 0.25;                // kinematic cuboid half-extents, m
  double y_kin = 0.15;
  double z_kin = 0.22;
  double z_sh = 0.08;                 // swing apex height target, m
  double k_inv = 1.0;                 // balance gain on the touch-down offset
  int num_samples = 40;               // sample grid N over the horizon
  double rho = 1e-8;                  // Hessian regularizer

  void validate() const;  // throws std::invalid_argument
};

// Per-wheel reference quantities, all expressed in the wheel's terrain
// frame W (x rolling direction, z terrain normal).
struct WheelReference {
  Vec3 v_ref = Vec3::Zero();      // commanded base velocity
  double omega_ref = 0.0;         // commanded yaw rate about z
  Vec3 v_bh_ref = Vec3::Zero();   // reference hip velocity
  Vec3 v_bh = Vec3::Zero();       // measured hip velocity
  double h = 0.5;                 // hip height above the terrain, m
  double g = kGravity;
  Vec3 r_bw_xy = Vec3::Zero();    // COM to projected wheel, in-plane
  Vec2 hip_proj_xy = Vec2::Zero();  // projected hip position
};

// Touch-down offset that leans the next foothold against a velocity error,
// scaled like an inverted pendulum: k_inv * (v_bh_ref - v_bh) * sqrt(h/g).
Vec3 inverted_pendulum_offset(const WheelReference& ref, double k_inv);

// Velocity-guided foothold: r_def_xy plus the in-plane travel of the wheel
// (v_ref + omega_ref z x r_bw) over dt_i.
Vec2 foothold_reference(const WheelReference& ref, const Vec2& r_def_xy, double dt_i);

// One optimization segment: a phase of the contact schedule bound to a slice
// of the QP variable vector.
struct PlannedSegment {
  PhaseKind kind = PhaseKind::kContact;
  double t_begin = 0.0;
  double t_end = 0.0;
  bool truncated_begin = false;
  bool truncated_end = false;
  int var_offset = 0;
  int num_vars = 0;

  double duration() const { return t_end - t_begin; }
};

// Variable layout of one wheel's QP over the horizon [t0, t0 + t_f].
struct SegmentPlan {
  double t0 = 0.0;
  double t_f = 0.0;
  std::vector<PlannedSegment> segments;
  int num_vars = 0;
};

// Maps one leg's schedule onto QP variables: 5 per contact phase, 18 per air
// phase.
SegmentPlan build_plan(const ContactSchedule& schedule, int leg);

// Which planned segment covers absolute time t (junctions belong to the
// later segment); throws std::out_of_range outside the horizon.
int plan_segment_index(const SegmentPlan& plan, double t);

// Stacked position/velocity/acceleration rows (3 x num_vars) of the plan at
// absolute time t; only the covering segment's columns are nonzero.
MatX plan_time_matrix(const SegmentPlan& plan, double omega_ref, double t, int deriv);

// A solved wheel trajectory: segments on absolute time, positions in the
// frame the plan was assembled in.
struct WheelPlan {
  SegmentSequence trajectory;
  WheelFrame frame;
  double omega_ref = 0.0;
  std::vector<int> active_set;  // QP active set, kept for warm starts

  double t0() const { return trajectory.t_begin(); }
  Motion eval_local(double t) const { return trajectory.eval(t); }
  Motion eval_world(double t) const;
};

struct SampledMotion {
  std::vector<double> t_local;   // sample offsets from the new plan start
  std::vector<Motion> samples;   // previous solution in its own frame
};

// Evaluates prev at its start + t_pre + t_local for the deviation cost,
// clamping past the horizon end to the final state.
SampledMotion shift_previous(const SegmentSequence& prev, double t_pre, int n_samples);

// Fully assembled QP for one wheel together with its variable layout.
struct WheelQp {
  QpProblem problem;
  SegmentPlan plan;
};

// Builds the wheel QP: acceleration Hessians, previous-solution deviation,
// rolling-velocity and default-position terms on a leading contact segment,
// foothold/apex/swing-height terms per swing, initial-state and continuity
// equalities, and sampled cuboid limits. state is world-frame and w maps it
// into the plan frame; ref is already expressed in w. prev may be null
// (first plan); t_pre is the time elapsed since prev was computed.
WheelQp assemble(const RobotState& state, int leg, const WheelFrame& w,
                 const ContactSchedule& schedule, const WheelToConfig& cfg,
                 const WheelPlan* prev, const WheelReference& ref, double t_pre);

struct WheelSolveResult {
  QpStatus status = QpStatus::kNumericalFailure;
  std::optional<SegmentSequence> trajectory;
  QpSolution qp;
};

// Solves the assembled QP (warm-started when a hint is given) and rebuilds
// the segment sequence from the optimal coefficients.
WheelSolveResult solve_wheel(const WheelQp& qp, double omega_ref, QpSolver& solver,
                             std::span<const int> warm_hint = {});

// Stateful per-robot wheel planner: owns the previous solutions and QP warm
// starts of all four legs and produces one plan per call.
class WheelPlanner {
 public:
  WheelPlanner(WheelToConfig cfg, RobotModel model);

  struct Result {
    QpStatus status = QpStatus::kNumericalFailure;
    std::optional<WheelPlan> plan;
    int iterations = 0;
    double continuity_residual = 0.0;  // worst junction mismatch, certificate
    Vec2 r_inv = Vec2::Zero();         // applied balance offset, logged
  };

  Result replan(const RobotState& state, int leg, const ContactSchedule& schedule,
                const TerrainPlane& terrain, const VelocityCommand& cmd);

  const WheelToConfig& config() const { return cfg_; }
  void reset();  // drops previous solutions (fresh episode)

 private:
  WheelToConfig cfg_;
  RobotModel model_;
  std::array<std::optional<WheelPlan>, kNumLegs> prev_;
  std::array<QpSolver, kNumLegs> solvers_;
};

// Worst junction mismatch of a solved sequence: position and velocity at
// every junction, acceleration only where both sides are airborne.
double continuity_residual(const SegmentSequence& seq);

}  // namespace rollplan
