#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rollplan/base_planner.hpp"
#include "rollplan/scenario.hpp"

namespace rollplan {

// Applies one disturbance to a measured state: the targeted field is offset
// by the magnitude and nothing else changes. Contact wheels may leave the
// terrain plane here; the next plan squashes them back on.
RobotState inject(const RobotState& state, const Disturbance& d);

// Thrown by step when a plan does not cover the requested time.
class PlanHorizonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Kinematic playback: the new state is the plans evaluated at
// state.time + dt, standing in for a whole-body tracking controller.
// Contact flags follow the wheel plans' segment kinds, so wheels in contact
// sit exactly on the terrain plane. All four wheel plans must be present and
// every plan must cover the advanced time. dt = 0 reproduces the state.
RobotState step(const RobotState& state, const BaseTrajectory& base,
                const std::array<const WheelPlan*, kNumLegs>& wheels, double dt);

// Standing start of a scenario: COM at h_ref above the terrain over the
// origin, wheels under the hips on the plane, velocities from the commanded
// twist at t = 0, contact flags from the gait at phase 0.
RobotState initial_state(const Scenario& sc);

// Identifies the planner of a solve record; legs use their LegId.
inline constexpr int kBaseSolver = kNumLegs;
const char* solver_name(int planner);

struct SolveRecord {
  double t = 0.0;  // sim time the solve was initialized from
  int planner = 0;
  QpStatus status = QpStatus::kNumericalFailure;
  double wall_ms = 0.0;
  int iterations = 0;      // QP iterations, summed over the SQP for the base
  int sqp_iterations = 0;  // base only
  double worst_margin = 0.0;   // base only, nonlinear certificate
  double continuity_residual = 0.0;
  bool published = false;  // certified and handed to the plant
};

// One plant tick: the executed state next to the active plans' values, so
// logs show planned versus executed directly. The ZMP fields are empty in
// full flight and when the contact is not pressing.
struct EpisodeTick {
  RobotState state;
  Vec3 planned_com = Vec3::Zero();
  std::array<Vec3, kNumLegs> planned_wheel = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(),
                                              Vec3::Zero()};
  std::optional<Vec2> zmp;
  std::optional<double> zmp_margin;
};

struct EpisodeLog {
  double dt = 0.0;
  std::vector<EpisodeTick> ticks;
  std::vector<SolveRecord> solves;
  bool failed = false;
  QpStatus failure_status = QpStatus::kOptimal;
  std::string failure;
};

// Plays the scenario through the receding-horizon loop. Synchronous rates
// invoke the planners inline every sim_hz/rate ticks in a fixed order
// (wheels lf, rf, lh, rh, then base), which makes the log deterministic;
// free-running rates put each planner in its own thread at wall-clock rate
// with latest-value mailboxes between them, so the plant never waits on a
// solve. Only certified plans are handed to the plant; a planner that fails
// outright marks the episode failed. Disturbances displace the executed
// motion until the affected planner has re-initialized from the disturbed
// state.
EpisodeLog run_episode(const Scenario& sc, const SimRates& rates);
EpisodeLog run_episode(const Scenario& sc);  // sc.rates

// episode.csv: one row per tick, stable documented schema, header always
// written. Fully reproducible for a fixed scenario in synchronous mode.
void write_episode_csv(const EpisodeLog& log, std::ostream& out);

// timing.csv: one row per solve. Kept separate because wall-clock times are
// not reproducible.
void write_timing_csv(const EpisodeLog& log, std::ostream& out);

struct TimingStats {
  int count = 0;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

// Wall-clock statistics over an episode's solves. planner filters by
// SolveRecord.planner; -1 pools the four wheel planners.
TimingStats timing_stats(const EpisodeLog& log, int planner);

}  // namespace rollplan
