#include "rollplan/wheel_planner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

#include <Eigen/Geometry>

namespace rollplan {
namespace {

constexpr double kBoundaryTol = 1e-9;

// Collects cost and constraint rows before the dense problem is formed.
struct QpAccumulator {
  MatX Q;
  VecX c;
  std::vector<VecX> eq_rows;
  std::vector<double> eq_vals;
  std::vector<VecX> ineq_rows;
  std::vector<double> ineq_vals;

  explicit QpAccumulator(int n) : Q(MatX::Zero(n, n)), c(VecX::Zero(n)) {}

  // Adds w * (row . xi - target)^2 to the objective.
  void cost_row(const VecX& row, double target, double w) {
    if (w <= 0.0) return;
    Q.noalias() += (2.0 * w) * (row * row.transpose());
    c.noalias() -= (2.0 * w * target) * row;
  }

  void cost_rows(const MatX& rows, const VecX& targets, double w) {
    for (int i = 0; i < rows.rows(); ++i) cost_row(rows.row(i).transpose(), targets(i), w);
  }

  void eq(const VecX& row, double value) {
    eq_rows.push_back(row);
    eq_vals.push_back(value);
  }

  void eq_block(const MatX& rows, const VecX& values) {
    for (int i = 0; i < rows.rows(); ++i) eq(rows.row(i).transpose(), values(i));
  }

  // row . xi <= bound
  void ineq(const VecX& row, double bound) {
    ineq_rows.push_back(row);
    ineq_vals.push_back(bound);
  }

  QpProblem finish(double rho) const {
    QpProblem p;
    const int n = static_cast<int>(c.size());
    p.Q = regularize(0.5 * (Q + Q.transpose()), rho);
    p.c = c;
    p.A.resize(static_cast<int>(eq_rows.size()), n);
    p.b.resize(static_cast<int>(eq_rows.size()));
    for (size_t i = 0; i < eq_rows.size(); ++i) {
      p.A.row(static_cast<int>(i)) = eq_rows[i].transpose();
      p.b(static_cast<int>(i)) = eq_vals[i];
    }
    p.D.resize(static_cast<int>(ineq_rows.size()), n);
    p.f.resize(static_cast<int>(ineq_rows.size()));
    for (size_t i = 0; i < ineq_rows.size(); ++i) {
      p.D.row(static_cast<int>(i)) = ineq_rows[i].transpose();
      p.f(static_cast<int>(i)) = ineq_vals[i];
    }
    return p;
  }
};

MatX segment_rows(const SegmentPlan& plan, int seg_idx, double omega_ref, double tau, int deriv) {
  const PlannedSegment& seg = plan.segments[seg_idx];
  MatX rows = MatX::Zero(3, plan.num_vars);
  if (seg.kind == PhaseKind::kContact) {
    rows.block(0, seg.var_offset, 3, ContactSegment::kNumVars) =
        contact_time_matrix(omega_ref, tau, deriv);
  } else {
    rows.block(0, seg.var_offset, 3, AirSegment::kNumVars) = air_time_matrix(tau, deriv);
  }
  return rows;
}

bool is_air(PhaseKind k) { return k != PhaseKind::kContact; }

Vec3 travel_velocity(const WheelReference& ref) {
  return ref.v_ref + ref.omega_ref * Vec3::UnitZ().cross(ref.r_bw_xy);
}

// Where the default wheel spot sits at local time tau when the base follows
// the commanded twist: the COM advances along the arc while the body-fixed
// offset turns with the yaw. Reduces to p0 + v_ref tau for straight driving.
Vec2 traveling_center(const WheelReference& ref, const Vec2& r_def_xy, double tau) {
  const Vec2 p0 = ref.hip_proj_xy + r_def_xy;
  const double w = ref.omega_ref;
  const double cw = std::cos(w * tau);
  const double sw = std::sin(w * tau);
  double ic, is;  // integrals of cos/sin of the sweeping yaw
  if (std::abs(w) < 1e-9) {
    ic = tau;
    is = 0.5 * w * tau * tau;
  } else {
    ic = sw / w;
    is = (1.0 - cw) / w;
  }
  const Vec2 c0 = -ref.r_bw_xy.head<2>();  // COM projection, frame W
  const Vec2 arc(ref.v_ref.x() * ic - ref.v_ref.y() * is,
                 ref.v_ref.x() * is + ref.v_ref.y() * ic);
  const Vec2 r = p0 - c0;
  return c0 + arc + Vec2(cw * r.x() - sw * r.y(), sw * r.x() + cw * r.y());
}

}  // namespace

void WheelToConfig::validate() const {
  const double weights[] = {w_acc.x(), w_acc.y(), w_acc.z(), w_pre_pos, w_pre_vel, w_pre_acc,
                            w_ref,     w_def,     w_fh,      w_sh,      w_apex};
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("WheelToConfig: weights must be nonnegative");
  }
  if (!(x_kin > 0.0 && y_kin > 0.0 && z_kin > 0.0)) {
    throw std::invalid_argument("WheelToConfig: kinematic half-extents must be positive");
  }
  if (num_samples < 10) throw std::invalid_argument("WheelToConfig: need at least 10 samples");
  if (!(rho > 0.0)) throw std::invalid_argument("WheelToConfig: rho must be positive");
}

Vec3 inverted_pendulum_offset(const WheelReference& ref, double k_inv) {
  if (!(ref.h > 0.0) || !(ref.g > 0.0)) {
    throw std::invalid_argument("inverted_pendulum_offset: h and g must be positive");
  }
  return k_inv * std::sqrt(ref.h / ref.g) * (ref.v_bh_ref - ref.v_bh);
}

Vec2 foothold_reference(const WheelReference& ref, const Vec2& r_def_xy, double dt_i) {
  if (!(dt_i > 0.0)) throw std::invalid_argument("foothold_reference: dt_i must be positive");
  return r_def_xy + dt_i * travel_velocity(ref).head<2>();
}

SegmentPlan build_plan(const ContactSchedule& schedule, int leg) {
  if (leg < 0 || leg >= kNumLegs) throw std::invalid_argument("build_plan: bad leg index");
  SegmentPlan plan;
  plan.t0 = schedule.t0;
  plan.t_f = schedule.t_f;
  int offset = 0;
  for (const Phase& p : schedule.legs[leg]) {
    PlannedSegment seg;
    seg.kind = p.kind;
    seg.t_begin = p.t_begin;
    seg.t_end = p.t_end;
    seg.truncated_begin = p.truncated_begin;
    seg.truncated_end = p.truncated_end;
    seg.var_offset = offset;
    seg.num_vars = is_air(p.kind) ? AirSegment::kNumVars : ContactSegment::kNumVars;
    offset += seg.num_vars;
    plan.segments.push_back(seg);
  }
  plan.num_vars = offset;
  return plan;
}

int plan_segment_index(const SegmentPlan& plan, double t) {
  if (t < plan.t0 - kBoundaryTol || t > plan.t0 + plan.t_f + kBoundaryTol) {
    throw std::out_of_range("plan_segment_index: time outside horizon");
  }
  for (int i = static_cast<int>(plan.segments.size()) - 1; i > 0; --i) {
    if (t >= plan.segments[i].t_begin) return i;
  }
  return 0;
}

MatX plan_time_matrix(const SegmentPlan& plan, double omega_ref, double t, int deriv) {
  const int idx = plan_segment_index(plan, t);
  const PlannedSegment& seg = plan.segments[idx];
  const double tau = std::clamp(t - seg.t_begin, 0.0, seg.duration());
  return segment_rows(plan, idx, omega_ref, tau, deriv);
}

Motion WheelPlan::eval_world(double t) const {
  const Motion local = trajectory.eval(t);
  Motion world;
  world.position = frame.to_world(local.position);
  world.velocity = frame.rotation * local.velocity;
  world.acceleration = frame.rotation * local.acceleration;
  return world;
}

SampledMotion shift_previous(const SegmentSequence& prev, double t_pre, int n_samples) {
  if (prev.empty()) throw std::invalid_argument("shift_previous: empty previous solution");
  if (t_pre < 0.0) throw std::invalid_argument("shift_previous: t_pre must be nonnegative");
  const double t_f = prev.t_end() - prev.t_begin();
  SampledMotion out;
  out.t_local.reserve(n_samples);
  out.samples.reserve(n_samples);
  for (int k = 1; k <= n_samples; ++k) {
    const double tau = k * t_f / n_samples;
    const double t = std::min(prev.t_begin() + t_pre + tau, prev.t_end());
    out.t_local.push_back(tau);
    out.samples.push_back(prev.eval(t));
  }
  return out;
}

WheelQp assemble(const RobotState& state, int leg, const WheelFrame& w,
                 const ContactSchedule& schedule, const WheelToConfig& cfg,
                 const WheelPlan* prev, const WheelReference& ref, double t_pre) {
  cfg.validate();
  WheelQp out;
  out.plan = build_plan(schedule, leg);
  const SegmentPlan& plan = out.plan;
  if (plan.segments.empty()) throw std::invalid_argument("assemble: empty schedule");

  QpAccumulator acc(plan.num_vars);
  const double omega = ref.omega_ref;
  const Mat3 to_local = w.rotation.transpose();
  const Vec3 p_init = w.to_local(state.wheel_pos[leg]);
  const Vec3 v_init = to_local * state.wheel_vel[leg];
  const Vec3 a_init = to_local * state.wheel_acc[leg];

  // Initial state. A contact start pins the ground-plane position (z is
  // structurally on the plane); an air start pins the full kinematic state.
  const PlannedSegment& first = plan.segments.front();
  if (first.kind == PhaseKind::kContact) {
    VecX row = VecX::Zero(plan.num_vars);
    row(first.var_offset + 3) = 1.0;  // x0
    acc.eq(row, p_init.x());
    row.setZero();
    row(first.var_offset + 4) = 1.0;  // y0
    acc.eq(row, p_init.y());
  } else {
    acc.eq_block(segment_rows(plan, 0, omega, 0.0, 0), p_init);
    acc.eq_block(segment_rows(plan, 0, omega, 0.0, 1), v_init);
    acc.eq_block(segment_rows(plan, 0, omega, 0.0, 2), a_init);
  }

  // Junction continuity: position and velocity everywhere; acceleration only
  // between the two halves of a swing.
  for (size_t i = 0; i + 1 < plan.segments.size(); ++i) {
    const PlannedSegment& a = plan.segments[i];
    const PlannedSegment& b = plan.segments[i + 1];
    const int max_deriv = is_air(a.kind) && is_air(b.kind) ? 2 : 1;
    for (int d = 0; d <= max_deriv; ++d) {
      const MatX rows = segment_rows(plan, static_cast<int>(i), omega, a.duration(), d) -
                        segment_rows(plan, static_cast<int>(i) + 1, omega, 0.0, d);
      acc.eq_block(rows, Vec3::Zero());
    }
  }

  // Acceleration effort. The contact form is isotropic in the ground plane,
  // so it takes the mean of the xy weights.
  for (const PlannedSegment& seg : plan.segments) {
    if (seg.kind == PhaseKind::kContact) {
      const double w_c = 0.5 * (cfg.w_acc.x() + cfg.w_acc.y());
      acc.Q.block(seg.var_offset, seg.var_offset, 5, 5) +=
          accel_hessian_contact(seg.duration(), omega, w_c);
    } else {
      acc.Q.block(seg.var_offset, seg.var_offset, 18, 18) +=
          accel_hessian_air(seg.duration(), cfg.w_acc);
    }
  }

  // Deviation from the previous solution, rigidly remapped into the current
  // frame and shifted by the elapsed time.
  if (prev != nullptr) {
    const SampledMotion shifted = shift_previous(prev->trajectory, t_pre, cfg.num_samples);
    const Mat3 relative = to_local * prev->frame.rotation;
    for (size_t k = 0; k < shifted.samples.size(); ++k) {
      const double t = plan.t0 + shifted.t_local[k];
      if (t > plan.t0 + plan.t_f + kBoundaryTol) break;
      const Motion& m = shifted.samples[k];
      const Vec3 pos = w.to_local(prev->frame.to_world(m.position));
      const Vec3 vel = relative * m.velocity;
      const Vec3 accel = relative * m.acceleration;
      acc.cost_rows(plan_time_matrix(plan, omega, t, 0), pos, cfg.w_pre_pos);
      acc.cost_rows(plan_time_matrix(plan, omega, t, 1), vel, cfg.w_pre_vel);
      acc.cost_rows(plan_time_matrix(plan, omega, t, 2), accel, cfg.w_pre_acc);
    }
  }

  const Vec3 v_travel = travel_velocity(ref);

  if (first.kind == PhaseKind::kContact) {
    // Rolling-velocity tracking at stance start: the contact velocity at
    // tau = 0 is [a0, 0, 0], so a single row on a0 suffices.
    VecX row = VecX::Zero(plan.num_vars);
    row(first.var_offset + 0) = 1.0;
    acc.cost_row(row, v_travel.x(), cfg.w_ref);

    // Default-position pull along the rolling direction, sampled over the
    // leading stance and traveling with the commanded twist.
    for (int k = 1; k <= cfg.num_samples; ++k) {
      const double tau = k * plan.t_f / cfg.num_samples;
      const double t = plan.t0 + tau;
      if (t > first.t_end + kBoundaryTol) break;
      const MatX rows = plan_time_matrix(plan, omega, t, 0);
      acc.cost_row(rows.row(0).transpose(),
                   traveling_center(ref, cfg.r_def.head<2>(), tau).x(), cfg.w_def);
    }
  }

  // Swing shaping: foothold target at touch-down, apex height, and apex xy
  // at the midpoint of lift-off and touch-down.
  for (size_t i = 0; i < plan.segments.size(); ++i) {
    const PlannedSegment& seg = plan.segments[i];
    if (seg.kind != PhaseKind::kAirFall) continue;

    const double t_td = seg.t_end;
    const bool td_in_plan = !seg.truncated_end;
    const double dt_i = std::max(t_td - plan.t0, 1e-3);
    const Vec2 target_xy = ref.hip_proj_xy + foothold_reference(ref, cfg.r_def.head<2>(), dt_i) +
                           inverted_pendulum_offset(ref, cfg.k_inv).head<2>();

    if (td_in_plan) {
      const MatX rows = plan_time_matrix(plan, omega, t_td, 0);
      acc.cost_rows(rows.topRows(2), target_xy, cfg.w_fh);
    }

    // The apex belongs to this fall's leading rise half, when it is in plan.
    const bool has_rise = i > 0 && plan.segments[i - 1].kind == PhaseKind::kAirRise;
    if (!has_rise) continue;
    const PlannedSegment& rise = plan.segments[i - 1];
    const double t_sh = seg.t_begin;

    const MatX apex_rows = plan_time_matrix(plan, omega, t_sh, 0);
    acc.cost_row(apex_rows.row(2).transpose(), cfg.z_sh, cfg.w_sh);

    // Midpoint cost in the plane: anchors are in-plan expressions when the
    // events are inside the horizon, constants otherwise.
    MatX mid_rows = apex_rows.topRows(2);
    Vec2 mid_target = Vec2::Zero();
    if (rise.truncated_begin) {
      mid_target += 0.5 * p_init.head<2>();
    } else {
      mid_rows -= 0.5 * plan_time_matrix(plan, omega, rise.t_begin, 0).topRows(2);
    }
    if (td_in_plan) {
      mid_rows -= 0.5 * plan_time_matrix(plan, omega, t_td, 0).topRows(2);
    } else {
      mid_target += 0.5 * target_xy;
    }
    acc.cost_rows(mid_rows, mid_target, cfg.w_apex);
  }

  // Cuboid kinematic limits around the traveling default position. The z
  // rows are skipped during stance, where the height is structurally zero.
  for (int k = 1; k <= cfg.num_samples; ++k) {
    const double tau = k * plan.t_f / cfg.num_samples;
    const double t = plan.t0 + tau;
    const int idx = plan_segment_index(plan, t);
    const MatX rows = plan_time_matrix(plan, omega, t, 0);
    const Vec2 center = traveling_center(ref, cfg.r_def.head<2>(), tau);
    acc.ineq(rows.row(0).transpose(), center.x() + cfg.x_kin);
    acc.ineq(-rows.row(0).transpose(), -(center.x() - cfg.x_kin));
    acc.ineq(rows.row(1).transpose(), center.y() + cfg.y_kin);
    acc.ineq(-rows.row(1).transpose(), -(center.y() - cfg.y_kin));
    if (is_air(plan.segments[idx].kind)) {
      acc.ineq(rows.row(2).transpose(), cfg.z_kin);
      acc.ineq(-rows.row(2).transpose(), cfg.z_kin);
    }
  }

  out.problem = acc.finish(cfg.rho);
  return out;
}

WheelSolveResult solve_wheel(const WheelQp& qp, double omega_ref, QpSolver& solver,
                             std::span<const int> warm_hint) {
  WheelSolveResult out;
  out.qp = warm_hint.empty() ? solver.solve(qp.problem) : solver.solve_warm(qp.problem, warm_hint);
  out.status = out.qp.status;
  if (out.status != QpStatus::kOptimal) return out;

  std::vector<Segment> segments;
  segments.reserve(qp.plan.segments.size());
  for (const PlannedSegment& seg : qp.plan.segments) {
    const VecX xi = out.qp.x.segment(seg.var_offset, seg.num_vars);
    if (seg.kind == PhaseKind::kContact) {
      segments.emplace_back(
          ContactSegment(xi(0), xi(1), xi(2), xi(3), xi(4), omega_ref, seg.t_begin,
                         seg.duration()));
    } else {
      segments.emplace_back(AirSegment(xi.segment<6>(0), xi.segment<6>(6), xi.segment<6>(12),
                                       seg.t_begin, seg.duration()));
    }
  }
  out.trajectory = SegmentSequence(std::move(segments));
  return out;
}

double continuity_residual(const SegmentSequence& seq) {
  double worst = 0.0;
  for (size_t i = 0; i + 1 < seq.size(); ++i) {
    const double t_j = segment_t_start(seq[i + 1]);
    const auto eval_at = [&](const Segment& s, double t) {
      return std::visit([&](const auto& seg) { return seg.eval(t); }, s);
    };
    const Motion a = eval_at(seq[i], t_j);
    const Motion b = eval_at(seq[i + 1], t_j);
    worst = std::max(worst, (a.position - b.position).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a.velocity - b.velocity).cwiseAbs().maxCoeff());
    const bool both_air = std::holds_alternative<AirSegment>(seq[i]) &&
                          std::holds_alternative<AirSegment>(seq[i + 1]);
    if (both_air) {
      worst = std::max(worst, (a.acceleration - b.acceleration).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

WheelPlanner::WheelPlanner(WheelToConfig cfg, RobotModel model)
    : cfg_(std::move(cfg)), model_(std::move(model)) {
  cfg_.validate();
}

void WheelPlanner::reset() {
  for (auto& p : prev_) p.reset();
}

WheelPlanner::Result WheelPlanner::replan(const RobotState& state, int leg,
                                          const ContactSchedule& schedule,
                                          const TerrainPlane& terrain,
                                          const VelocityCommand& cmd) {
  const double yaw = state.base_angles(0);
  const Vec3 heading(std::cos(yaw), std::sin(yaw), 0.0);
  const WheelFrame w = wheel_frame(terrain, state.wheel_pos[leg], heading);
  const Mat3 to_local = w.rotation.transpose();
  // The command is given in the yaw-aligned frame.
  const Vec3 v_world(std::cos(yaw) * cmd.v_ref.x() - std::sin(yaw) * cmd.v_ref.y(),
                     std::sin(yaw) * cmd.v_ref.x() + std::cos(yaw) * cmd.v_ref.y(),
                     cmd.v_ref.z());

  WheelReference ref;
  ref.v_ref = to_local * v_world;
  ref.omega_ref = cmd.omega_ref;
  const Vec3 hip = model_.hip_world(leg, state.r_com, yaw);
  ref.hip_proj_xy = w.to_local(terrain.project(hip)).head<2>();
  ref.r_bw_xy = to_local * (terrain.project(state.wheel_pos[leg]) - terrain.project(state.r_com));
  const Vec3 r_bh = hip - state.r_com;
  const Vec3 spin = Vec3(0.0, 0.0, 1.0);
  ref.v_bh_ref = to_local * (v_world + cmd.omega_ref * spin.cross(r_bh));
  ref.v_bh = to_local * (state.v_com + state.base_rates(0) * spin.cross(r_bh));
  ref.h = std::max(terrain.height_offset(hip), 0.05);
  ref.g = kGravity;

  const WheelPlan* prev = prev_[leg] ? &*prev_[leg] : nullptr;
  double t_pre = prev != nullptr ? state.time - prev->t0() : 0.0;
  if (prev != nullptr && (t_pre < 0.0 || t_pre >= schedule.t_f)) {
    prev = nullptr;
    t_pre = 0.0;
  }

  const WheelQp qp = assemble(state, leg, w, schedule, cfg_, prev, ref, t_pre);
  const std::span<const int> hint =
      prev != nullptr ? std::span<const int>(prev->active_set) : std::span<const int>();
  const WheelSolveResult solved = solve_wheel(qp, cmd.omega_ref, solvers_[leg], hint);

  Result out;
  out.status = solved.status;
  out.iterations = solved.qp.iterations;
  out.r_inv = inverted_pendulum_offset(ref, cfg_.k_inv).head<2>();
  if (solved.status == QpStatus::kOptimal) {
    WheelPlan plan;
    plan.trajectory = *solved.trajectory;
    plan.frame = w;
    plan.omega_ref = cmd.omega_ref;
    plan.active_set = solved.qp.active_set;
    out.continuity_residual = continuity_residual(plan.trajectory);
    out.plan = plan;
    prev_[leg] = std::move(plan);
  }
  return out;
}

}  // namespace rollplan
