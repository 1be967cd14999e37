#include "rollplan/simulation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <thread>
#include <variant>

namespace rollplan {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kTimeTol = 1e-9;
constexpr double kCertContinuity = 1e-6;
// Replans the base until its first plan certifies; a cold start of a hard
// gait needs a few calls because each one is capped at max_sqp_iterations.
constexpr int kBaseBootstrapAttempts = 12;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double gait_phase(const GaitPattern& g, double t) {
  const double phase = std::fmod(t / g.stride_duration, 1.0);
  return phase < 0.0 ? phase + 1.0 : phase;
}

bool hard_failure(QpStatus s) {
  return s == QpStatus::kInfeasible || s == QpStatus::kNumericalFailure;
}

// Wheel certificate mirrored from the planner tests: solved to optimality
// with matching segment junctions. The sampled limits are QP constraints, so
// optimality already carries them.
bool wheel_certified(const WheelPlanner::Result& res) {
  return res.status == QpStatus::kOptimal && res.plan.has_value() &&
         res.continuity_residual < kCertContinuity;
}

struct ActivePlans {
  std::array<std::shared_ptr<const WheelPlan>, kNumLegs> wheels;
  std::shared_ptr<const BaseTrajectory> base;

  std::array<const WheelPlan*, kNumLegs> wheel_ptrs() const {
    std::array<const WheelPlan*, kNumLegs> out{};
    for (int leg = 0; leg < kNumLegs; ++leg) out[leg] = wheels[leg].get();
    return out;
  }
  bool complete() const {
    return base != nullptr &&
           std::all_of(wheels.begin(), wheels.end(), [](const auto& w) { return w != nullptr; });
  }
};

// Executed motion that survives between plan publications: a disturbance
// displaces the playback until the planner that owns the quantity has
// re-initialized from the displaced state (the fresh plan then carries the
// displacement itself).
struct PlaybackOffsets {
  Vec3 com_pos = Vec3::Zero();
  Vec3 com_vel = Vec3::Zero();
  std::array<Vec3, kNumLegs> wheel = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  void add(const Disturbance& d) {
    switch (d.target) {
      case DisturbanceTarget::kComOffset:
        com_pos += d.magnitude;
        break;
      case DisturbanceTarget::kComVelocityKick:
        com_vel += d.magnitude;
        break;
      case DisturbanceTarget::kWheelOffset:
        wheel[d.leg] += d.magnitude;
        break;
    }
  }
  void apply(RobotState& s) const {
    s.r_com += com_pos;
    s.v_com += com_vel;
    for (int leg = 0; leg < kNumLegs; ++leg) s.wheel_pos[leg] += wheel[leg];
  }
};

EpisodeTick make_tick(const RobotState& state, const ActivePlans& active, const Scenario& sc) {
  EpisodeTick tick;
  tick.state = state;
  const double t = state.time;
  if (active.base != nullptr) {
    tick.planned_com = active.base->com_at(std::min(t, active.base->t_end())).position;
  }
  const auto ptrs = active.wheel_ptrs();
  for (int leg = 0; leg < kNumLegs; ++leg) {
    if (ptrs[leg] == nullptr) continue;
    const double t_eval = std::min(t, ptrs[leg]->trajectory.t_end());
    tick.planned_wheel[leg] = ptrs[leg]->eval_world(t_eval).position;
  }

  const SupportPolygonEdges support =
      support_polygon(t, planned_contact_points(t, ptrs, state), sc.terrain, sc.base_to.eps_support);
  if (!support.full_flight && !support.edges.empty()) {
    const Vec3 g(0.0, 0.0, -kGravity);
    if (sc.terrain.normal.dot(state.a_com - g) > 1e-9) {
      const Vec3 z =
          zmp_world(state.r_com, state.a_com, sc.robot.mass, sc.base_to.l_dot, sc.terrain);
      double margin = std::numeric_limits<double>::infinity();
      for (const Vec3& d : support.edges) {
        margin = std::min(margin, d.x() * z.x() + d.y() * z.y() + d.z());
      }
      tick.zmp = Vec2(z.x(), z.y());
      tick.zmp_margin = margin;
    }
  }
  return tick;
}

SolveRecord wheel_record(double t, int leg, const WheelPlanner::Result& res, double wall_ms,
                         bool published) {
  SolveRecord rec;
  rec.t = t;
  rec.planner = leg;
  rec.status = res.status;
  rec.wall_ms = wall_ms;
  rec.iterations = res.iterations;
  rec.continuity_residual = res.continuity_residual;
  rec.published = published;
  return rec;
}

SolveRecord base_record(double t, const BaseSolveReport& rep, double wall_ms, bool published) {
  SolveRecord rec;
  rec.t = t;
  rec.planner = kBaseSolver;
  rec.status = rep.status;
  rec.wall_ms = wall_ms;
  rec.iterations = rep.qp_iterations;
  rec.sqp_iterations = rep.sqp_iterations;
  rec.worst_margin = rep.worst_margin;
  rec.continuity_residual = rep.continuity_residual;
  rec.published = published;
  return rec;
}

void mark_failed(EpisodeLog& log, QpStatus status, std::string msg) {
  if (log.failed) return;
  log.failed = true;
  log.failure_status = status;
  log.failure = std::move(msg);
}

int ticks_per(double sim_hz, double rate_hz) {
  return std::max(1, static_cast<int>(std::lround(sim_hz / rate_hz)));
}

EpisodeLog run_synchronous(const Scenario& sc, const SimRates& rates) {
  EpisodeLog log;
  const GaitPattern& gait = sc.gait_pattern();
  const double dt = 1.0 / rates.sim_hz;
  log.dt = dt;
  const int wheel_every = ticks_per(rates.sim_hz, rates.wheel_hz);
  const int base_every = ticks_per(rates.sim_hz, rates.base_hz);
  const int last_tick = static_cast<int>(std::lround(sc.duration * rates.sim_hz));

  WheelPlanner wheel_planner(sc.wheel_to, sc.robot);
  BasePlanner base_planner(sc.base_to, sc.robot);
  RobotState state = initial_state(sc);
  ActivePlans active;
  PlaybackOffsets offsets;

  std::vector<Disturbance> pending = sc.disturbances;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Disturbance& a, const Disturbance& b) { return a.t_apply < b.t_apply; });
  size_t next_disturbance = 0;

  for (int i = 0; i <= last_tick; ++i) {
    const double t = i * dt;

    while (next_disturbance < pending.size() &&
           pending[next_disturbance].t_apply <= t + kTimeTol) {
      const Disturbance& d = pending[next_disturbance++];
      state = inject(state, d);
      offsets.add(d);
    }

    if (i % wheel_every == 0) {
      const VelocityCommand cmd = sc.command_at(t);
      for (int leg = 0; leg < kNumLegs; ++leg) {
        try {
          const ContactSchedule sched = build_schedule(gait, t, gait_phase(gait, t));
          const auto clock0 = Clock::now();
          const WheelPlanner::Result res =
              wheel_planner.replan(state, leg, sched, sc.terrain, cmd);
          const bool ok = wheel_certified(res);
          log.solves.push_back(wheel_record(t, leg, res, elapsed_ms(clock0), ok));
          if (ok) {
            active.wheels[leg] = std::make_shared<const WheelPlan>(*res.plan);
            offsets.wheel[leg].setZero();
          } else if (hard_failure(res.status)) {
            mark_failed(log, res.status,
                        std::string("wheel ") + std::string(kLegNames[leg]) +
                            " planner reported " + to_string(res.status) +
                            " at t = " + std::to_string(t));
          }
        } catch (const std::exception& e) {
          mark_failed(log, QpStatus::kNumericalFailure,
                      std::string("wheel ") + std::string(kLegNames[leg]) + " planner threw: " +
                          e.what());
        }
      }
    }

    if (i % base_every == 0) {
      const VelocityCommand cmd = sc.command_at(t);
      const ReferencePose pose = reference_pose_at(sc, t);
      const int attempts = active.base == nullptr ? kBaseBootstrapAttempts : 1;
      for (int attempt = 0; attempt < attempts; ++attempt) {
        try {
          const auto clock0 = Clock::now();
          const BasePlanner::Result res =
              base_planner.replan(state, cmd, pose, gait, sc.terrain, active.wheel_ptrs());
          const bool ok = res.report.status == QpStatus::kOptimal && res.plan.has_value();
          log.solves.push_back(base_record(t, res.report, elapsed_ms(clock0), ok));
          if (ok) {
            active.base = std::make_shared<const BaseTrajectory>(*res.plan);
            offsets.com_pos.setZero();
            offsets.com_vel.setZero();
            break;
          }
          if (hard_failure(res.report.status)) {
            mark_failed(log, res.report.status,
                        std::string("base planner reported ") + to_string(res.report.status) +
                            " at t = " + std::to_string(t));
            break;
          }
        } catch (const std::exception& e) {
          mark_failed(log, QpStatus::kNumericalFailure,
                      std::string("base planner threw: ") + e.what());
          break;
        }
      }
      if (active.base == nullptr) {
        mark_failed(log, QpStatus::kMaxIterations, "base plan never certified at episode start");
        break;
      }
    }

    if (!active.complete()) {
      mark_failed(log, QpStatus::kNumericalFailure, "missing wheel plan at episode start");
      break;
    }

    log.ticks.push_back(make_tick(state, active, sc));

    if (i == last_tick) break;
    try {
      RobotState next = step(state, *active.base, active.wheel_ptrs(), dt);
      offsets.apply(next);
      state = next;
    } catch (const PlanHorizonError& e) {
      mark_failed(log, QpStatus::kNumericalFailure, e.what());
      break;
    }
  }
  return log;
}

// Latest-value mailbox: one writer replaces the snapshot, readers copy it.
template <typename T>
class Mailbox {
 public:
  void put(T value) {
    const std::lock_guard<std::mutex> lock(mu_);
    value_ = std::move(value);
  }
  T get() const {
    const std::lock_guard<std::mutex> lock(mu_);
    return value_;
  }

 private:
  mutable std::mutex mu_;
  T value_{};
};

// Snapshots carry the epoch of the disturbance history they observed, so the
// plant can tell whether a published plan already absorbed an offset.
struct StateSnapshot {
  RobotState state;
  std::uint64_t epoch = 0;
};

template <typename Plan>
struct PlanSnapshot {
  std::shared_ptr<const Plan> plan;
  std::uint64_t epoch = 0;
};

struct FreeRunShared {
  Mailbox<StateSnapshot> state;
  std::array<Mailbox<PlanSnapshot<WheelPlan>>, kNumLegs> wheels;
  Mailbox<PlanSnapshot<BaseTrajectory>> base;
  std::atomic<bool> stop{false};

  std::mutex log_mu;
  std::vector<SolveRecord> solves;
  bool hard_failed = false;
  QpStatus fail_status = QpStatus::kOptimal;
  std::string fail_msg;

  void record(SolveRecord rec) {
    const std::lock_guard<std::mutex> lock(log_mu);
    solves.push_back(std::move(rec));
  }
  void record_failure(QpStatus status, std::string msg) {
    const std::lock_guard<std::mutex> lock(log_mu);
    if (hard_failed) return;
    hard_failed = true;
    fail_status = status;
    fail_msg = std::move(msg);
  }
};

Clock::duration period_of(double hz) {
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / hz));
}

void wheel_task(int leg, const Scenario& sc, const SimRates& rates, FreeRunShared& sh) {
  try {
    const GaitPattern& gait = sc.gait_pattern();
    WheelPlanner planner(sc.wheel_to, sc.robot);
    const auto period = period_of(rates.wheel_hz);
    auto next = Clock::now();
    while (!sh.stop.load(std::memory_order_relaxed)) {
      const StateSnapshot snap = sh.state.get();
      const double t = snap.state.time;
      const ContactSchedule sched = build_schedule(gait, t, gait_phase(gait, t));
      const auto clock0 = Clock::now();
      const WheelPlanner::Result res =
          planner.replan(snap.state, leg, sched, sc.terrain, sc.command_at(t));
      const bool ok = wheel_certified(res);
      sh.record(wheel_record(t, leg, res, elapsed_ms(clock0), ok));
      if (ok) {
        sh.wheels[leg].put({std::make_shared<const WheelPlan>(*res.plan), snap.epoch});
      } else if (hard_failure(res.status)) {
        sh.record_failure(res.status, std::string("wheel ") + std::string(kLegNames[leg]) +
                                          " planner reported " + to_string(res.status) +
                                          " at t = " + std::to_string(t));
      }
      next += period;
      std::this_thread::sleep_until(next);
    }
  } catch (const std::exception& e) {
    sh.record_failure(QpStatus::kNumericalFailure,
                      std::string("wheel ") + std::string(kLegNames[leg]) + " task threw: " +
                          e.what());
  }
}

void base_task(const Scenario& sc, const SimRates& rates, FreeRunShared& sh) {
  try {
    const GaitPattern& gait = sc.gait_pattern();
    BasePlanner planner(sc.base_to, sc.robot);
    const auto period = period_of(rates.base_hz);
    auto next = Clock::now();
    while (!sh.stop.load(std::memory_order_relaxed)) {
      const StateSnapshot snap = sh.state.get();
      const double t = snap.state.time;

      // Hold the wheel snapshots alive for the whole solve.
      std::array<PlanSnapshot<WheelPlan>, kNumLegs> wheel_snaps;
      std::array<const WheelPlan*, kNumLegs> ptrs{};
      bool have_all = true;
      for (int leg = 0; leg < kNumLegs; ++leg) {
        wheel_snaps[leg] = sh.wheels[leg].get();
        ptrs[leg] = wheel_snaps[leg].plan.get();
        have_all = have_all && ptrs[leg] != nullptr;
      }
      if (have_all) {
        const auto clock0 = Clock::now();
        const BasePlanner::Result res = planner.replan(snap.state, sc.command_at(t),
                                                       reference_pose_at(sc, t), gait,
                                                       sc.terrain, ptrs);
        const bool ok = res.report.status == QpStatus::kOptimal && res.plan.has_value();
        sh.record(base_record(t, res.report, elapsed_ms(clock0), ok));
        if (ok) {
          sh.base.put({std::make_shared<const BaseTrajectory>(*res.plan), snap.epoch});
        } else if (hard_failure(res.report.status)) {
          sh.record_failure(res.report.status, std::string("base planner reported ") +
                                                   to_string(res.report.status) +
                                                   " at t = " + std::to_string(t));
        }
      }
      next += period;
      std::this_thread::sleep_until(next);
    }
  } catch (const std::exception& e) {
    sh.record_failure(QpStatus::kNumericalFailure, std::string("base task threw: ") + e.what());
  }
}

EpisodeLog run_free_running(const Scenario& sc, const SimRates& rates) {
  EpisodeLog log;
  const double dt = 1.0 / rates.sim_hz;
  log.dt = dt;
  const int last_tick = static_cast<int>(std::lround(sc.duration * rates.sim_hz));

  FreeRunShared sh;
  RobotState state = initial_state(sc);
  std::uint64_t epoch = 0;
  sh.state.put({state, epoch});

  std::vector<std::thread> tasks;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    tasks.emplace_back(wheel_task, leg, std::cref(sc), std::cref(rates), std::ref(sh));
  }
  tasks.emplace_back(base_task, std::cref(sc), std::cref(rates), std::ref(sh));
  const auto join_all = [&] {
    sh.stop.store(true, std::memory_order_relaxed);
    for (std::thread& th : tasks) th.join();
  };

  // Wait until every planner has published a first certified plan.
  const auto deadline = Clock::now() + std::chrono::seconds(10);
  ActivePlans active;
  for (;;) {
    active.base = sh.base.get().plan;
    for (int leg = 0; leg < kNumLegs; ++leg) active.wheels[leg] = sh.wheels[leg].get().plan;
    if (active.complete()) break;
    if (Clock::now() > deadline) {
      join_all();
      mark_failed(log, QpStatus::kMaxIterations, "planners never published a first plan");
      log.solves = std::move(sh.solves);
      return log;
    }
    std::this_thread::sleep_for(std::chrono::microseconds(200));
  }

  PlaybackOffsets offsets;
  std::uint64_t com_epoch = 0;
  std::array<std::uint64_t, kNumLegs> wheel_epoch{};

  std::vector<Disturbance> pending = sc.disturbances;
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Disturbance& a, const Disturbance& b) { return a.t_apply < b.t_apply; });
  size_t next_disturbance = 0;

  const auto period = period_of(rates.sim_hz);
  auto next_wake = Clock::now();
  for (int i = 0; i <= last_tick; ++i) {
    const double t = i * dt;

    while (next_disturbance < pending.size() &&
           pending[next_disturbance].t_apply <= t + kTimeTol) {
      const Disturbance& d = pending[next_disturbance++];
      state = inject(state, d);
      offsets.add(d);
      ++epoch;
      if (d.target == DisturbanceTarget::kWheelOffset) {
        wheel_epoch[d.leg] = epoch;
      } else {
        com_epoch = epoch;
      }
    }
    sh.state.put({state, epoch});

    const PlanSnapshot<BaseTrajectory> base_snap = sh.base.get();
    if (base_snap.plan != nullptr) {
      active.base = base_snap.plan;
      if (base_snap.epoch >= com_epoch) {
        offsets.com_pos.setZero();
        offsets.com_vel.setZero();
      }
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const PlanSnapshot<WheelPlan> snap = sh.wheels[leg].get();
      if (snap.plan != nullptr) {
        active.wheels[leg] = snap.plan;
        if (snap.epoch >= wheel_epoch[leg]) offsets.wheel[leg].setZero();
      }
    }

    log.ticks.push_back(make_tick(state, active, sc));

    if (i == last_tick) break;
    try {
      RobotState next = step(state, *active.base, active.wheel_ptrs(), dt);
      offsets.apply(next);
      state = next;
    } catch (const PlanHorizonError& e) {
      mark_failed(log, QpStatus::kNumericalFailure, e.what());
      break;
    }
    next_wake += period;
    std::this_thread::sleep_until(next_wake);
  }

  join_all();
  {
    const std::lock_guard<std::mutex> lock(sh.log_mu);
    if (sh.hard_failed) mark_failed(log, sh.fail_status, sh.fail_msg);
    log.solves = std::move(sh.solves);
  }
  std::stable_sort(log.solves.begin(), log.solves.end(),
                   [](const SolveRecord& a, const SolveRecord& b) { return a.t < b.t; });
  return log;
}

void append_field(std::string& row, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  row += buf;
}

void append_field(std::string& row, const Vec3& v) {
  append_field(row, v.x());
  row += ',';
  append_field(row, v.y());
  row += ',';
  append_field(row, v.z());
}

}  // namespace

RobotState inject(const RobotState& state, const Disturbance& d) {
  d.validate();
  RobotState out = state;
  switch (d.target) {
    case DisturbanceTarget::kComOffset:
      out.r_com += d.magnitude;
      break;
    case DisturbanceTarget::kComVelocityKick:
      out.v_com += d.magnitude;
      break;
    case DisturbanceTarget::kWheelOffset:
      out.wheel_pos[d.leg] += d.magnitude;
      break;
  }
  return out;
}

RobotState step(const RobotState& state, const BaseTrajectory& base,
                const std::array<const WheelPlan*, kNumLegs>& wheels, double dt) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step: dt must be finite and non-negative");
  }
  const double t = state.time + dt;
  if (t < base.t0() - kTimeTol || t > base.t_end() + kTimeTol) {
    throw PlanHorizonError("step: base plan covers [" + std::to_string(base.t0()) + ", " +
                           std::to_string(base.t_end()) + "] but t = " + std::to_string(t));
  }

  RobotState out;
  out.time = t;
  const Motion com = base.com_at(t);
  out.r_com = com.position;
  out.v_com = com.velocity;
  out.a_com = com.acceleration;
  const Motion ang = base.angles_at(t);
  out.base_angles = ang.position;
  out.base_rates = ang.velocity;
  out.base_angle_acc = ang.acceleration;

  for (int leg = 0; leg < kNumLegs; ++leg) {
    const WheelPlan* plan = wheels[leg];
    if (plan == nullptr) throw std::invalid_argument("step: missing wheel plan");
    const SegmentSequence& seq = plan->trajectory;
    if (t < seq.t_begin() - kTimeTol || t > seq.t_end() + kTimeTol) {
      throw PlanHorizonError("step: wheel " + std::string(kLegNames[leg]) + " plan covers [" +
                             std::to_string(seq.t_begin()) + ", " + std::to_string(seq.t_end()) +
                             "] but t = " + std::to_string(t));
    }
    const Motion m = plan->eval_world(t);
    out.wheel_pos[leg] = m.position;
    out.wheel_vel[leg] = m.velocity;
    out.wheel_acc[leg] = m.acceleration;
    out.contact[leg] = std::holds_alternative<ContactSegment>(seq[seq.segment_index(t)]);
  }
  return out;
}

RobotState initial_state(const Scenario& sc) {
  const GaitPattern& gait = sc.gait_pattern();
  const VelocityCommand cmd = sc.command_at(0.0);
  const ContactSchedule sched = build_schedule(gait, 0.0, 0.0);

  RobotState s;
  s.time = 0.0;
  s.r_com = sc.terrain.project(Vec3::Zero()) + sc.terrain.normal * sc.robot.h_ref;
  s.v_com = cmd.v_ref;
  const Vec3 omega(0.0, 0.0, cmd.omega_ref);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 hip = sc.robot.hip_world(leg, s.r_com, 0.0);
    s.wheel_pos[leg] = sc.terrain.project(hip);
    s.wheel_vel[leg] = cmd.v_ref + omega.cross(s.wheel_pos[leg] - s.r_com);
    s.contact[leg] = sched.in_contact(leg, 0.0);
  }
  s.base_rates = Vec3(cmd.omega_ref, 0.0, 0.0);
  return s;
}

const char* solver_name(int planner) {
  if (planner >= 0 && planner < kNumLegs) return kLegNames[planner].data();
  return "base";
}

EpisodeLog run_episode(const Scenario& sc, const SimRates& rates) {
  sc.validate();
  rates.validate();
  return rates.synchronous ? run_synchronous(sc, rates) : run_free_running(sc, rates);
}

EpisodeLog run_episode(const Scenario& sc) { return run_episode(sc, sc.rates); }

void write_episode_csv(const EpisodeLog& log, std::ostream& out) {
  std::string row = "t,com_x,com_y,com_z,com_vx,com_vy,com_vz,yaw,pitch,roll,"
                    "plan_com_x,plan_com_y,plan_com_z,zmp_x,zmp_y,zmp_margin";
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const std::string n(kLegNames[leg]);
    row += "," + n + "_x," + n + "_y," + n + "_z," + n + "_contact," + n + "_plan_x," + n +
           "_plan_y," + n + "_plan_z";
  }
  out << row << '\n';

  for (const EpisodeTick& tick : log.ticks) {
    row.clear();
    const RobotState& s = tick.state;
    append_field(row, s.time);
    row += ',';
    append_field(row, s.r_com);
    row += ',';
    append_field(row, s.v_com);
    row += ',';
    append_field(row, s.base_angles);
    row += ',';
    append_field(row, tick.planned_com);
    row += ',';
    if (tick.zmp.has_value()) {
      append_field(row, tick.zmp->x());
      row += ',';
      append_field(row, tick.zmp->y());
      row += ',';
      append_field(row, *tick.zmp_margin);
    } else {
      row += ",,";
    }
    for (int leg = 0; leg < kNumLegs; ++leg) {
      row += ',';
      append_field(row, s.wheel_pos[leg]);
      row += s.contact[leg] ? ",1," : ",0,";
      append_field(row, tick.planned_wheel[leg]);
    }
    out << row << '\n';
  }
}

void write_timing_csv(const EpisodeLog& log, std::ostream& out) {
  out << "t,planner,status,wall_ms,iterations,sqp_iterations,worst_margin,continuity_residual,"
         "published\n";
  std::string row;
  for (const SolveRecord& rec : log.solves) {
    row.clear();
    append_field(row, rec.t);
    row += ',';
    row += solver_name(rec.planner);
    row += ',';
    row += to_string(rec.status);
    row += ',';
    append_field(row, rec.wall_ms);
    row += ',' + std::to_string(rec.iterations) + ',' + std::to_string(rec.sqp_iterations) + ',';
    append_field(row, rec.worst_margin);
    row += ',';
    append_field(row, rec.continuity_residual);
    row += rec.published ? ",1" : ",0";
    out << row << '\n';
  }
}

TimingStats timing_stats(const EpisodeLog& log, int planner) {
  std::vector<double> times;
  for (const SolveRecord& rec : log.solves) {
    const bool match = planner < 0 ? rec.planner < kNumLegs : rec.planner == planner;
    if (match) times.push_back(rec.wall_ms);
  }
  TimingStats stats;
  stats.count = static_cast<int>(times.size());
  if (times.empty()) return stats;
  std::sort(times.begin(), times.end());
  double sum = 0.0;
  for (const double v : times) sum += v;
  stats.mean_ms = sum / static_cast<double>(times.size());
  const auto rank = [&](double q) {
    const auto idx = static_cast<size_t>(std::ceil(q * static_cast<double>(times.size()))) - 1;
    return times[std::min(idx, times.size() - 1)];
  };
  stats.p50_ms = rank(0.50);
  stats.p95_ms = rank(0.95);
  stats.max_ms = times.back();
  return stats;
}

}  // namespace rollplan
