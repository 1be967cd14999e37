#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "rollplan/types.hpp"

namespace rollplan {

// Periodic gait description. Phase is normalized to [0, 1) over one stride.
// Each leg owns a swing window [swing_start, swing_end) in its local phase,
// where local phase = global phase - phase_offset (mod 1). A window with
// swing_start == swing_end never swings, so the leg rolls in contact for the
// whole stride.
struct GaitPattern {
  std::string name;
  double stride_duration = 0.0;  // t_f, seconds; also the planning horizon
  std::array<double, kNumLegs> swing_start{};
  std::array<double, kNumLegs> swing_end{};
  std::array<double, kNumLegs> phase_offset{};

  void validate() const;  // throws std::invalid_argument on bad windows
};

// The five stock gaits: driving (1.7 s, no swing), hybrid walk (2.0 s),
// hybrid pace (0.95 s), hybrid trot (0.85 s), hybrid running trot (0.64 s,
// has full-flight intervals). Duty factors and leg offsets follow the usual
// quadruped phase structures for these names.
const std::vector<GaitPattern>& builtin_gaits();

// Lookup by name; '_' matches ' ' so CLI-friendly spellings work. Returns
// nullptr when unknown.
const GaitPattern* find_gait(std::string_view name);

enum class PhaseKind { kContact, kAirRise, kAirFall };

// One phase of a leg's schedule, absolute time, half-open [t_begin, t_end).
// Lift-off therefore belongs to the air phase and touch-down to the contact
// phase. The truncated flags mark ends that were cut by the horizon boundary
// instead of a gait event.
struct Phase {
  PhaseKind kind = PhaseKind::kContact;
  double t_begin = 0.0;
  double t_end = 0.0;
  bool truncated_begin = false;
  bool truncated_end = false;

  double duration() const { return t_end - t_begin; }
};

// Per-leg phase lists tiling [t0, t0 + t_f] exactly. Air time between two
// contacts is always split into a rise and a fall phase at the swing apex
// t_sh, the midpoint of the swing window.
struct ContactSchedule {
  double t0 = 0.0;
  double t_f = 0.0;
  std::array<std::vector<Phase>, kNumLegs> legs;

  double t_end() const { return t0 + t_f; }
  // Index into legs[leg] for time t; throws std::out_of_range outside the
  // horizon (with a small boundary tolerance, like the spline sequences).
  int phase_index(int leg, double t) const;
  bool in_contact(int leg, double t) const;
};

// Builds the schedule for one horizon starting at t0 with global phase
// phase0 (any real, wrapped into [0, 1)).
ContactSchedule build_schedule(const GaitPattern& g, double t0, double phase0);

// Contact flag per leg at time t. Throws like ContactSchedule::phase_index.
std::array<bool, kNumLegs> contact_flags(const ContactSchedule& s, double t);

}  // namespace rollplan
