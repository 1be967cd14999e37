#include "rollplan/gait.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace rollplan {
namespace {

constexpr double kBoundaryTol = 1e-9;  // time slack at the horizon edges
constexpr double kEventTol = 1e-12;    // phase slack for "exactly at an event"

double wrap_phase(double phi) {
  double w = std::fmod(phi, 1.0);
  if (w < 0.0) w += 1.0;
  return w;
}

GaitPattern make_gait(std::string name, double t_f, double duty,
                      std::array<double, kNumLegs> offsets) {
  GaitPattern g;
  g.name = std::move(name);
  g.stride_duration = t_f;
  const double swing = 1.0 - duty;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    g.swing_start[leg] = 0.0;
    g.swing_end[leg] = swing;
    g.phase_offset[leg] = offsets[leg];
  }
  return g;
}

std::string normalized(std::string_view name) {
  std::string out(name);
  for (char& ch : out) {
    if (ch == '_') ch = ' ';
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

PhaseKind kind_at_phase(double local, double s, double e) {
  if (s == e) return PhaseKind::kContact;
  const double mid = 0.5 * (s + e);
  if (local >= s && local < mid) return PhaseKind::kAirRise;
  if (local >= mid && local < e) return PhaseKind::kAirFall;
  return PhaseKind::kContact;
}

}  // namespace

void GaitPattern::validate() const {
  if (!(stride_duration > 0.0)) {
    throw std::invalid_argument("GaitPattern: stride_duration must be positive");
  }
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const double s = swing_start[leg];
    const double e = swing_end[leg];
    if (!(0.0 <= s && s <= e && e < 1.0)) {
      throw std::invalid_argument("GaitPattern: swing window must satisfy 0 <= start <= end < 1");
    }
  }
}

const std::vector<GaitPattern>& builtin_gaits() {
  static const std::vector<GaitPattern> gaits = {
      make_gait("driving", 1.7, 1.0, {0.0, 0.0, 0.0, 0.0}),
      // Leg order in the offset arrays is LF, RF, LH, RH.
      make_gait("hybrid walk", 2.0, 0.85, {0.0, 0.5, 0.75, 0.25}),
      make_gait("hybrid pace", 0.95, 0.6, {0.0, 0.5, 0.0, 0.5}),
      make_gait("hybrid trot", 0.85, 0.55, {0.0, 0.5, 0.5, 0.0}),
      make_gait("hybrid running trot", 0.64, 0.4, {0.0, 0.5, 0.5, 0.0}),
  };
  return gaits;
}

const GaitPattern* find_gait(std::string_view name) {
  const std::string wanted = normalized(name);
  for (const GaitPattern& g : builtin_gaits()) {
    if (normalized(g.name) == wanted) return &g;
  }
  return nullptr;
}

ContactSchedule build_schedule(const GaitPattern& g, double t0, double phase0) {
  g.validate();
  ContactSchedule sched;
  sched.t0 = t0;
  sched.t_f = g.stride_duration;
  const double t_f = g.stride_duration;
  const double phi0 = wrap_phase(phase0);

  for (int leg = 0; leg < kNumLegs; ++leg) {
    auto& phases = sched.legs[leg];
    const double s = g.swing_start[leg];
    const double e = g.swing_end[leg];
    if (s == e) {
      // Rolls through the whole horizon; both ends are horizon cuts.
      phases.push_back({PhaseKind::kContact, t0, t0 + t_f, true, true});
      continue;
    }

    const double leg_phi0 = wrap_phase(phi0 - g.phase_offset[leg]);
    const double mid = 0.5 * (s + e);

    // Each gait event happens exactly once inside one stride. u is the
    // normalized time from t0 until the event fires.
    struct Event {
      double u;
      PhaseKind starts;
    };
    std::array<Event, 3> events = {{
        {wrap_phase(s - leg_phi0), PhaseKind::kAirRise},
        {wrap_phase(mid - leg_phi0), PhaseKind::kAirFall},
        {wrap_phase(e - leg_phi0), PhaseKind::kContact},
    }};
    for (Event& ev : events) {
      if (ev.u > 1.0 - kEventTol || ev.u < kEventTol) ev.u = 0.0;
    }
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.u < b.u; });

    const bool aligned = events[0].u == 0.0;
    if (!aligned) {
      phases.push_back({kind_at_phase(leg_phi0, s, e), t0, t0 + events[0].u * t_f, true, false});
    }
    for (int k = 0; k < 3; ++k) {
      const double begin = t0 + events[k].u * t_f;
      const double end = k + 1 < 3 ? t0 + events[k + 1].u * t_f : t0 + t_f;
      phases.push_back({events[k].starts, begin, end, false, false});
    }
    // The horizon edge coincides with the first event's next occurrence only
    // when that event fired exactly at t0.
    phases.back().truncated_end = !aligned;
  }
  return sched;
}

int ContactSchedule::phase_index(int leg, double t) const {
  if (leg < 0 || leg >= kNumLegs) throw std::out_of_range("ContactSchedule: bad leg index");
  if (t < t0 - kBoundaryTol || t > t0 + t_f + kBoundaryTol) {
    throw std::out_of_range("ContactSchedule: time outside horizon");
  }
  const auto& phases = legs[leg];
  for (int i = static_cast<int>(phases.size()) - 1; i >= 0; --i) {
    if (t >= phases[i].t_begin) return i;
  }
  return 0;
}

bool ContactSchedule::in_contact(int leg, double t) const {
  return legs[leg][phase_index(leg, t)].kind == PhaseKind::kContact;
}

std::array<bool, kNumLegs> contact_flags(const ContactSchedule& s, double t) {
  std::array<bool, kNumLegs> flags{};
  for (int leg = 0; leg < kNumLegs; ++leg) flags[leg] = s.in_contact(leg, t);
  return flags;
}

}  // namespace rollplan
