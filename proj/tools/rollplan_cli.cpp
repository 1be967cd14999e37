// Command-line front end: loads a scenario (JSON file, flags, or both),
// solves a single wheel+base plan or runs a full receding-horizon episode,
// and exports CSV logs plus the effective scenario for exact reruns.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rollplan/scenario.hpp"
#include "rollplan/simulation.hpp"

namespace {

using namespace rollplan;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitBadInput = 4;

int exit_for(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal:
      return kExitOk;
    case QpStatus::kInfeasible:
      return kExitInfeasible;
    default:
      return kExitNumerical;
  }
}

struct Options {
  std::string scenario_file;
  std::string out_dir = ".";
  std::optional<std::string> gait;
  std::optional<double> vx;
  std::optional<double> vy;
  std::optional<double> wz;
  std::optional<double> duration;
  std::optional<std::uint64_t> seed;
  bool force_sync = false;
  bool force_async = false;
};

void add_common_flags(CLI::App& cmd, Options& o) {
  cmd.add_option("--scenario", o.scenario_file, "Scenario JSON file; flags override its values")
      ->check(CLI::ExistingFile);
  cmd.add_option("--gait", o.gait, "Gait name (see the gaits subcommand)");
  cmd.add_option("--vx", o.vx, "Forward velocity command, m/s; any of --vx/--vy/--wz replaces "
                               "the whole velocity profile with one constant segment");
  cmd.add_option("--vy", o.vy, "Lateral velocity command, m/s");
  cmd.add_option("--wz", o.wz, "Yaw rate command, rad/s");
  cmd.add_option("--duration", o.duration, "Episode length, s");
  cmd.add_option("--seed", o.seed, "Random seed recorded in the scenario");
  cmd.add_flag("--sync", o.force_sync, "Force the deterministic synchronous mode");
  cmd.add_flag("--async", o.force_async, "Force the free-running threaded mode");
  cmd.add_option("--out", o.out_dir, "Output directory (created if missing)");
}

Scenario effective_scenario(const Options& o) {
  Scenario sc;
  if (!o.scenario_file.empty()) sc = load_scenario(o.scenario_file);
  if (o.gait) {
    sc.gait = *o.gait;
    sc.custom_gait.reset();
  }
  if (o.vx || o.vy || o.wz) {
    VelocityProfileSegment seg;
    seg.cmd.v_ref = Vec3(o.vx.value_or(0.0), o.vy.value_or(0.0), 0.0);
    seg.cmd.omega_ref = o.wz.value_or(0.0);
    sc.profile = {seg};
  }
  if (o.duration) sc.duration = *o.duration;
  if (o.seed) sc.seed = *o.seed;
  if (o.force_sync && o.force_async) {
    throw std::invalid_argument("--sync and --async are mutually exclusive");
  }
  if (o.force_sync) sc.rates.synchronous = true;
  if (o.force_async) sc.rates.synchronous = false;
  sc.validate();
  return sc;
}

std::filesystem::path prepare_out_dir(const Options& o) {
  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void append_field(std::string& row, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  row += buf;
}

// One row of the plan export: executed wheel and base samples plus the
// recomputed ZMP and its distance to every support edge. Time samples in
// the air or not pressing leave the ZMP fields blank.
void append_plan_row(std::string& row, double t, const std::array<const WheelPlan*, kNumLegs>& wheels,
                     const BaseTrajectory& base, const RobotState& state, const Scenario& sc) {
  append_field(row, t);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 p = wheels[leg]->eval_world(t).position;
    for (int k = 0; k < 3; ++k) {
      row += ',';
      append_field(row, p[k]);
    }
  }
  const Motion com = base.com_at(t);
  const Motion ang = base.angles_at(t);
  for (int k = 0; k < 3; ++k) {
    row += ',';
    append_field(row, com.position[k]);
  }
  for (int k = 0; k < 3; ++k) {
    row += ',';
    append_field(row, ang.position[k]);
  }

  const std::vector<Vec3> contacts = planned_contact_points(t, wheels, state);
  const SupportPolygonEdges sp = support_polygon(t, contacts, sc.terrain, sc.base_to.eps_support);
  std::optional<Vec3> zmp;
  if (!sp.full_flight) {
    try {
      zmp = zmp_world(com.position, com.acceleration, sc.robot.mass, sc.base_to.l_dot, sc.terrain);
    } catch (const DegenerateContactError&) {
    }
  }
  if (zmp.has_value()) {
    row += ',';
    append_field(row, zmp->x());
    row += ',';
    append_field(row, zmp->y());
    for (size_t e = 0; e < 4; ++e) {
      row += ',';
      if (e < sp.edges.size()) {
        const Vec3& d = sp.edges[e];
        append_field(row, d.x() * zmp->x() + d.y() * zmp->y() + d.z());
      }
    }
  } else {
    row += ",,,,,,";
  }
  row += '\n';
}

int cmd_plan(const Options& o) {
  const Scenario sc = effective_scenario(o);
  const std::filesystem::path dir = prepare_out_dir(o);
  const GaitPattern& gait = sc.gait_pattern();
  const VelocityCommand cmd = sc.command_at(0.0);
  const RobotState state = initial_state(sc);
  const ContactSchedule schedule = build_schedule(gait, 0.0, 0.0);

  WheelPlanner wheel_planner(sc.wheel_to, sc.robot);
  std::array<std::optional<WheelPlan>, kNumLegs> plans;
  std::array<const WheelPlan*, kNumLegs> ptrs{};
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const auto res = wheel_planner.replan(state, leg, schedule, sc.terrain, cmd);
    if (res.status != QpStatus::kOptimal) {
      std::cerr << "wheel " << kLegNames[leg] << " planner failed: " << to_string(res.status)
                << "\n";
      return exit_for(res.status);
    }
    plans[leg] = *res.plan;
    ptrs[leg] = &*plans[leg];
  }

  BasePlanner base_planner(sc.base_to, sc.robot);
  BasePlanner::Result base;
  for (int attempt = 0; attempt < 12; ++attempt) {
    base = base_planner.replan(state, cmd, ReferencePose{}, gait, sc.terrain, ptrs);
    if (base.report.status == QpStatus::kOptimal) break;
  }
  if (base.report.status != QpStatus::kOptimal) {
    std::cerr << "base planner failed: " << to_string(base.report.status)
              << " (worst ZMP margin " << base.report.worst_margin << " m)\n";
    return exit_for(base.report.status);
  }

  save_scenario(sc, dir / "scenario.json");
  std::ofstream csv(dir / "plan.csv");
  if (!csv) {
    std::cerr << "cannot write " << (dir / "plan.csv").string() << "\n";
    return kExitBadInput;
  }
  csv << "t,lf_x,lf_y,lf_z,rf_x,rf_y,rf_z,lh_x,lh_y,lh_z,rh_x,rh_y,rh_z,"
         "com_x,com_y,com_z,yaw,pitch,roll,zmp_x,zmp_y,"
         "margin_e1,margin_e2,margin_e3,margin_e4\n";
  const double dt = 1.0 / sc.rates.sim_hz;
  const int steps = static_cast<int>(std::lround(gait.stride_duration / dt));
  std::string row;
  for (int i = 0; i <= steps; ++i) {
    row.clear();
    append_plan_row(row, std::min(i * dt, gait.stride_duration), ptrs, *base.plan, state, sc);
    csv << row;
  }

  std::printf("planned one %s stride (t_f=%g s), worst ZMP margin %.3e m, %d SQP iterations\n",
              gait.name.c_str(), gait.stride_duration, base.report.worst_margin,
              base.report.sqp_iterations);
  std::printf("wrote %s and %s\n", (dir / "plan.csv").string().c_str(),
              (dir / "scenario.json").string().c_str());
  return kExitOk;
}

void print_timing_row(const char* label, const TimingStats& s) {
  std::printf("  %-12s %8d %9.3f %9.3f %9.3f %9.3f\n", label, s.count, s.mean_ms, s.p50_ms,
              s.p95_ms, s.max_ms);
}

int cmd_simulate(const Options& o) {
  const Scenario sc = effective_scenario(o);
  const std::filesystem::path dir = prepare_out_dir(o);
  const EpisodeLog log = run_episode(sc);

  save_scenario(sc, dir / "scenario.json");
  {
    std::ofstream csv(dir / "episode.csv");
    if (!csv) {
      std::cerr << "cannot write " << (dir / "episode.csv").string() << "\n";
      return kExitBadInput;
    }
    write_episode_csv(log, csv);
  }
  {
    std::ofstream csv(dir / "timing.csv");
    write_timing_csv(log, csv);
  }

  std::printf("scenario \"%s\": gait=%s duration=%g s seed=%llu mode=%s\n", sc.name.c_str(),
              sc.gait_pattern().name.c_str(), sc.duration,
              static_cast<unsigned long long>(sc.seed),
              sc.rates.synchronous ? "synchronous" : "free-running");
  std::printf("%zu ticks at %g Hz, %zu solves\n", log.ticks.size(), sc.rates.sim_hz,
              log.solves.size());
  std::printf("solve times (ms): %6s %9s %9s %9s %9s\n", "count", "mean", "p50", "p95", "max");
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const std::string label = std::string("wheel ") + std::string(kLegNames[leg]);
    print_timing_row(label.c_str(), timing_stats(log, leg));
  }
  print_timing_row("wheels (all)", timing_stats(log, -1));
  print_timing_row("base", timing_stats(log, kBaseSolver));

  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_handover = 0.0;
  for (const SolveRecord& rec : log.solves) {
    if (!rec.published) continue;
    worst_handover = std::max(worst_handover, rec.continuity_residual);
    if (rec.planner == kBaseSolver) worst_margin = std::min(worst_margin, rec.worst_margin);
  }
  if (std::isfinite(worst_margin)) {
    std::printf("worst published ZMP margin: %.6e m\n", worst_margin);
  } else {
    std::printf("worst published ZMP margin: n/a (no published base plan)\n");
  }
  std::printf("max plan hand-over residual: %.6e m\n", worst_handover);
  std::printf("wrote %s, %s, %s\n", (dir / "episode.csv").string().c_str(),
              (dir / "timing.csv").string().c_str(), (dir / "scenario.json").string().c_str());

  if (log.failed) {
    std::cerr << "episode failed: " << log.failure << "\n";
    for (const SolveRecord& rec : log.solves) {
      if (rec.status != QpStatus::kOptimal) {
        std::cerr << "first failing certificate: t=" << rec.t << " planner="
                  << solver_name(rec.planner) << " status=" << to_string(rec.status) << "\n";
        break;
      }
    }
    return exit_for(log.failure_status);
  }
  return kExitOk;
}

int cmd_gaits() {
  std::printf("%-22s %8s %6s  %s\n", "name", "t_f [s]", "duty", "phase structure");
  for (const GaitPattern& g : builtin_gaits()) {
    double duty = 1.0;
    int swing_legs = 0;
    for (int leg = 0; leg < kNumLegs; ++leg) {
      const double swing = g.swing_end[leg] - g.swing_start[leg];
      if (swing > 0.0) {
        duty = std::min(duty, 1.0 - swing);
        ++swing_legs;
      }
    }
    std::string note;
    if (swing_legs == 0) {
      note = "all wheels grounded, pure rolling";
    } else {
      note = std::to_string(swing_legs) + " legs stepping, phase offsets";
      std::vector<double> offsets(g.phase_offset.begin(), g.phase_offset.end());
      std::sort(offsets.begin(), offsets.end());
      offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
      for (size_t i = 0; i < offsets.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%g", offsets[i]);
        note += (i == 0 ? " " : "/") + std::string(buf);
      }
    }
    std::printf("%-22s %8.2f %6.2f  %s\n", g.name.c_str(), g.stride_duration, duty, note.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-planning toolkit for wheeled-legged quadrupeds"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* plan = app.add_subcommand(
      "plan", "Solve one wheel+base plan from the scenario's initial state and export CSV");
  add_common_flags(*plan, opt);
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a receding-horizon episode and export episode/timing CSV logs");
  add_common_flags(*simulate, opt);
  app.add_subcommand("gaits", "List the built-in gait patterns");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("plan")) return cmd_plan(opt);
    if (app.got_subcommand("simulate")) return cmd_simulate(opt);
    return cmd_gaits();
  } catch (const ScenarioParseError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
