#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rollplan/base_planner.hpp"
#include "rollplan/gait.hpp"
#include "rollplan/robot_state.hpp"
#include "rollplan/terrain.hpp"
#include "rollplan/wheel_planner.hpp"

namespace rollplan {

// One-shot modification of the simulated state. COM targets displace the
// executed motion until the base planner has re-initialized from the
// disturbed state; a wheel offset persists until that leg's next plan.
enum class DisturbanceTarget { kComOffset, kComVelocityKick, kWheelOffset };

struct Disturbance {
  double t_apply = 0.0;
  DisturbanceTarget target = DisturbanceTarget::kComOffset;
  int leg = 0;  // wheel offsets only
  Vec3 magnitude = Vec3::Zero();

  void validate() const;  // throws std::invalid_argument
};

// Planner and plant cadences. The plant plays plans back at sim_hz; the
// planners are invoked every sim_hz/rate ticks in synchronous mode or from
// their own threads at wall-clock rate in free-running mode.
struct SimRates {
  double wheel_hz = 100.0;
  double base_hz = 50.0;
  double sim_hz = 400.0;
  bool synchronous = true;

  void validate() const;  // throws std::invalid_argument
};

// Piecewise-constant command: cmd applies from t_start until the next
// segment (or the scenario end).
struct VelocityProfileSegment {
  double t_start = 0.0;
  VelocityCommand cmd;
};

// Everything one run needs: the gait, how long and how fast to drive, the
// terrain, what goes wrong along the way, and every planner knob. The same
// struct backs single-shot plans and full episodes.
struct Scenario {
  std::string name = "scenario";
  std::string gait = "driving";
  std::optional<GaitPattern> custom_gait;  // takes precedence over gait
  double duration = 5.0;
  std::uint64_t seed = 0;
  std::vector<VelocityProfileSegment> profile = {VelocityProfileSegment{}};
  TerrainPlane terrain;
  std::vector<Disturbance> disturbances;
  WheelToConfig wheel_to;
  BaseToConfig base_to;
  RobotModel robot;
  SimRates rates;

  // Resolves custom_gait or the named built-in; throws std::invalid_argument
  // on an unknown name.
  const GaitPattern& gait_pattern() const;

  // Command of the profile segment covering t (the last one starting at or
  // before t).
  VelocityCommand command_at(double t) const;

  void validate() const;  // throws std::invalid_argument
};

// Reference pose at time t: the profile integrated segment by segment from
// the origin with the closed-form constant-command advance.
ReferencePose reference_pose_at(const Scenario& sc, double t);

class ScenarioParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON round trip. Parsing is strict: unknown keys, a missing or unsupported
// schema_version, and type mismatches all throw ScenarioParseError. Every
// field is optional and defaults as in the struct, so "{\"schema_version\": 1}"
// is a valid stationary scenario. scenario_to_json dumps every effective
// field, and parsing its output reproduces the scenario exactly.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& sc);

Scenario load_scenario(const std::filesystem::path& file);
void save_scenario(const Scenario& sc, const std::filesystem::path& file);

}  // namespace rollplan
