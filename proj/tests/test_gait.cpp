#include "rollplan/gait.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "doctest.h"

using namespace rollplan;

namespace {

double leg_duration_sum(const ContactSchedule& s, int leg) {
  double sum = 0.0;
  for (const Phase& p : s.legs[leg]) sum += p.duration();
  return sum;
}

bool phases_equal(const std::vector<Phase>& a, const std::vector<Phase>& b, double shift = 0.0) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind != b[i].kind) return false;
    if (std::abs(a[i].t_begin + shift - b[i].t_begin) > 1e-12) return false;
    if (std::abs(a[i].t_end + shift - b[i].t_end) > 1e-12) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("builtin gaits carry the published stride durations") {
  const auto& gaits = builtin_gaits();
  REQUIRE(gaits.size() == 5);
  CHECK(gaits[0].name == "driving");
  CHECK(gaits[0].stride_duration == 1.7);
  CHECK(gaits[1].name == "hybrid walk");
  CHECK(gaits[1].stride_duration == 2.0);
  CHECK(gaits[2].name == "hybrid pace");
  CHECK(gaits[2].stride_duration == 0.95);
  CHECK(gaits[3].name == "hybrid trot");
  CHECK(gaits[3].stride_duration == 0.85);
  CHECK(gaits[4].name == "hybrid running trot");
  CHECK(gaits[4].stride_duration == 0.64);

  for (int leg = 0; leg < kNumLegs; ++leg) {
    CHECK(gaits[0].swing_start[leg] == gaits[0].swing_end[leg]);
  }
}

TEST_CASE("find_gait accepts underscore spellings") {
  REQUIRE(find_gait("hybrid_trot") != nullptr);
  CHECK(find_gait("hybrid_trot")->name == "hybrid trot");
  CHECK(find_gait("Hybrid Running Trot") == find_gait("hybrid_running_trot"));
  CHECK(find_gait("gallop") == nullptr);
}

TEST_CASE("phases tile the horizon for every gait and phase") {
  for (const GaitPattern& g : builtin_gaits()) {
    for (double phase0 : {0.0, 0.13, 0.5, 0.731, 0.99}) {
      const ContactSchedule s = build_schedule(g, 3.2, phase0);
      for (int leg = 0; leg < kNumLegs; ++leg) {
        const auto& phases = s.legs[leg];
        REQUIRE(!phases.empty());
        CHECK(phases.front().t_begin == s.t0);
        CHECK(phases.back().t_end == doctest::Approx(s.t_end()).epsilon(1e-14));
        CHECK(leg_duration_sum(s, leg) == doctest::Approx(g.stride_duration).epsilon(1e-12));
        for (size_t i = 1; i < phases.size(); ++i) {
          CHECK(phases[i].t_begin == phases[i - 1].t_end);
          CHECK(phases[i].duration() > 0.0);
        }
      }
    }
  }
}

TEST_CASE("air time is split into a rise and a fall at the apex") {
  for (const GaitPattern& g : builtin_gaits()) {
    if (g.swing_start[0] == g.swing_end[0]) continue;  // no air in driving
    for (double phase0 : {0.0, 0.37, 0.81}) {
      const ContactSchedule s = build_schedule(g, 0.0, phase0);
      for (int leg = 0; leg < kNumLegs; ++leg) {
        const auto& phases = s.legs[leg];
        for (size_t i = 0; i < phases.size(); ++i) {
          if (phases[i].kind == PhaseKind::kAirFall && !phases[i].truncated_begin) {
            REQUIRE(i > 0);
            CHECK(phases[i - 1].kind == PhaseKind::kAirRise);
            if (!phases[i - 1].truncated_begin && !phases[i].truncated_end) {
              CHECK(phases[i - 1].duration() == doctest::Approx(phases[i].duration()).epsilon(1e-12));
            }
          }
          if (phases[i].kind == PhaseKind::kAirRise && !phases[i].truncated_end) {
            REQUIRE(i + 1 < phases.size());
            CHECK(phases[i + 1].kind == PhaseKind::kAirFall);
          }
        }
      }
    }
  }
}

TEST_CASE("driving keeps all legs in contact over the whole stride") {
  const ContactSchedule s = build_schedule(*find_gait("driving"), 0.0, 0.42);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    REQUIRE(s.legs[leg].size() == 1);
    CHECK(s.legs[leg][0].kind == PhaseKind::kContact);
    CHECK(s.legs[leg][0].duration() == doctest::Approx(1.7).epsilon(1e-14));
    CHECK(s.legs[leg][0].truncated_begin);
    CHECK(s.legs[leg][0].truncated_end);
  }
  for (double t : {0.0, 0.6, 1.7}) {
    const auto flags = contact_flags(s, t);
    CHECK(flags == std::array<bool, 4>{true, true, true, true});
  }
}

TEST_CASE("trot pairs diagonal legs") {
  const GaitPattern& trot = *find_gait("hybrid trot");
  const ContactSchedule s = build_schedule(trot, 0.0, 0.0);
  CHECK(phases_equal(s.legs[kLF], s.legs[kRH]));
  CHECK(phases_equal(s.legs[kRF], s.legs[kLH]));
  CHECK(!phases_equal(s.legs[kLF], s.legs[kRF]));

  // phase0 = 0 puts LF and RH at lift-off, so they start mid-air.
  CHECK(s.legs[kLF].front().kind == PhaseKind::kAirRise);
  CHECK(!s.in_contact(kLF, 0.0));
  CHECK(s.in_contact(kRF, 0.0));
}

TEST_CASE("pace pairs lateral legs") {
  const ContactSchedule s = build_schedule(*find_gait("hybrid pace"), 0.0, 0.0);
  CHECK(phases_equal(s.legs[kLF], s.legs[kLH]));
  CHECK(phases_equal(s.legs[kRF], s.legs[kRH]));
  CHECK(!phases_equal(s.legs[kLF], s.legs[kRF]));
}

TEST_CASE("walk staggers the legs at quarter-stride offsets") {
  const GaitPattern& walk = *find_gait("hybrid walk");
  const ContactSchedule s = build_schedule(walk, 0.0, 0.0);
  std::set<double> lift_offs;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    for (const Phase& p : s.legs[leg]) {
      if (p.kind == PhaseKind::kAirRise && !p.truncated_begin) lift_offs.insert(p.t_begin);
    }
  }
  // Four distinct lift-off instants, one per leg, a quarter stride apart.
  REQUIRE(lift_offs.size() == 4);
  double expected = 0.0;
  for (double t : lift_offs) {
    CHECK(t == doctest::Approx(expected).epsilon(1e-12));
    expected += 0.25 * walk.stride_duration;
  }
}

TEST_CASE("half-stride phase shift slides the trot schedule") {
  const GaitPattern& trot = *find_gait("hybrid trot");
  const ContactSchedule a = build_schedule(trot, 0.0, 0.0);
  const ContactSchedule b = build_schedule(trot, 0.0, 0.5);
  const double half = 0.5 * trot.stride_duration;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    for (double t = 0.0; t < half; t += 0.01) {
      CHECK(a.in_contact(leg, t + half) == b.in_contact(leg, t));
    }
  }
}

TEST_CASE("running trot has full-flight intervals") {
  const GaitPattern& rt = *find_gait("hybrid running trot");
  const ContactSchedule s = build_schedule(rt, 0.0, 0.0);

  // Swing windows: LF/RH over [0, 0.6), RF/LH over [0.5, 1.1) wrapped, so
  // everything is airborne for phase in [0.5, 0.6) and [0, 0.1).
  const auto flight = contact_flags(s, 0.55 * rt.stride_duration);
  CHECK(flight == std::array<bool, 4>{false, false, false, false});
  const auto early = contact_flags(s, 0.05 * rt.stride_duration);
  CHECK(early == std::array<bool, 4>{false, false, false, false});

  int airborne_samples = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) / n * rt.stride_duration;
    const auto flags = contact_flags(s, t);
    if (!flags[0] && !flags[1] && !flags[2] && !flags[3]) ++airborne_samples;
  }
  CHECK(static_cast<double>(airborne_samples) / n == doctest::Approx(0.2).epsilon(1e-3));
}

TEST_CASE("touch-down belongs to contact and lift-off to air") {
  const GaitPattern& trot = *find_gait("hybrid trot");
  const ContactSchedule s = build_schedule(trot, 0.0, 0.0);
  const double t_td = 0.45 * trot.stride_duration;  // LF swing window is [0, 0.45)
  CHECK(s.in_contact(kLF, t_td));
  CHECK(!s.in_contact(kLF, t_td - 1e-9));
  CHECK(!s.in_contact(kLF, 0.0));  // lift-off instant counts as air
}

TEST_CASE("truncation flags mark horizon cuts only") {
  const GaitPattern& trot = *find_gait("hybrid trot");

  const ContactSchedule aligned = build_schedule(trot, 0.0, 0.0);
  CHECK(!aligned.legs[kLF].front().truncated_begin);
  CHECK(!aligned.legs[kLF].back().truncated_end);
  REQUIRE(aligned.legs[kLF].size() == 3);  // rise, fall, contact

  const ContactSchedule cut = build_schedule(trot, 0.0, 0.1);
  REQUIRE(cut.legs[kLF].size() == 4);
  CHECK(cut.legs[kLF].front().truncated_begin);
  CHECK(cut.legs[kLF].front().kind == PhaseKind::kAirRise);
  CHECK(cut.legs[kLF].back().truncated_end);
  CHECK(cut.legs[kLF].back().kind == PhaseKind::kAirRise);
  for (size_t i = 1; i + 1 < cut.legs[kLF].size(); ++i) {
    CHECK(!cut.legs[kLF][i].truncated_begin);
    CHECK(!cut.legs[kLF][i].truncated_end);
  }
}

TEST_CASE("queries outside the horizon are rejected") {
  const ContactSchedule s = build_schedule(*find_gait("hybrid trot"), 1.0, 0.0);
  CHECK_THROWS_AS(s.in_contact(kLF, 0.5), std::out_of_range);
  CHECK_THROWS_AS(contact_flags(s, 1.0 + 0.85 + 1e-6), std::out_of_range);
  CHECK_NOTHROW(contact_flags(s, 1.0));
  CHECK_NOTHROW(contact_flags(s, 1.85));
}

TEST_CASE("schedule construction is deterministic") {
  const GaitPattern& walk = *find_gait("hybrid walk");
  const ContactSchedule a = build_schedule(walk, 2.5, 0.37);
  const ContactSchedule b = build_schedule(walk, 2.5, 0.37);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    REQUIRE(a.legs[leg].size() == b.legs[leg].size());
    for (size_t i = 0; i < a.legs[leg].size(); ++i) {
      CHECK(a.legs[leg][i].t_begin == b.legs[leg][i].t_begin);
      CHECK(a.legs[leg][i].t_end == b.legs[leg][i].t_end);
      CHECK(a.legs[leg][i].kind == b.legs[leg][i].kind);
    }
  }
}

TEST_CASE("bad gait definitions are rejected") {
  GaitPattern g = *find_gait("hybrid trot");
  g.stride_duration = 0.0;
  CHECK_THROWS_AS(build_schedule(g, 0.0, 0.0), std::invalid_argument);

  g = *find_gait("hybrid trot");
  g.swing_end[0] = 1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
