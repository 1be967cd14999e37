#include "rollplan/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include <json.hpp>

namespace rollplan {

namespace {

constexpr int kSchemaVersion = 1;

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioParseError(msg); }

// Every object is parsed with a closed key set so typos surface instead of
// silently keeping a default.
void check_keys(const json& obj, const char* where, std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) fail(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

Vec3 vec3_from(const json& j, const char* where) {
  if (!j.is_array() || j.size() != 3) fail(std::string(where) + ": expected [x, y, z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (const auto it = obj.find(key); it != obj.end()) out = it->get<T>();
}

void read(const json& obj, const char* key, Vec3& out) {
  if (const auto it = obj.find(key); it != obj.end()) out = vec3_from(*it, key);
}

constexpr std::array<std::pair<DisturbanceTarget, std::string_view>, 3> kTargetNames = {{
    {DisturbanceTarget::kComOffset, "com_offset"},
    {DisturbanceTarget::kComVelocityKick, "com_velocity_kick"},
    {DisturbanceTarget::kWheelOffset, "wheel_offset"},
}};

std::string_view target_name(DisturbanceTarget t) {
  for (const auto& [value, name] : kTargetNames) {
    if (value == t) return name;
  }
  return "com_offset";
}

DisturbanceTarget target_from(const std::string& name) {
  for (const auto& [value, n] : kTargetNames) {
    if (n == name) return value;
  }
  fail("disturbance: unknown target '" + name + "'");
}

int leg_from(const std::string& name) {
  for (int i = 0; i < kNumLegs; ++i) {
    if (kLegNames[i] == name) return i;
  }
  fail("disturbance: unknown leg '" + name + "'");
}

std::array<double, kNumLegs> legs_array_from(const json& j, const char* where) {
  if (!j.is_array() || j.size() != kNumLegs) fail(std::string(where) + ": expected four values");
  std::array<double, kNumLegs> out{};
  for (int i = 0; i < kNumLegs; ++i) out[i] = j[i].get<double>();
  return out;
}

GaitPattern gait_from(const json& j) {
  check_keys(j, "custom_gait",
             {"name", "stride_duration", "swing_start", "swing_end", "phase_offset"});
  GaitPattern g;
  g.name = j.at("name").get<std::string>();
  g.stride_duration = j.at("stride_duration").get<double>();
  g.swing_start = legs_array_from(j.at("swing_start"), "custom_gait.swing_start");
  g.swing_end = legs_array_from(j.at("swing_end"), "custom_gait.swing_end");
  g.phase_offset = legs_array_from(j.at("phase_offset"), "custom_gait.phase_offset");
  return g;
}

json gait_to(const GaitPattern& g) {
  json legs_start = json::array();
  json legs_end = json::array();
  json offsets = json::array();
  for (int i = 0; i < kNumLegs; ++i) {
    legs_start.push_back(g.swing_start[i]);
    legs_end.push_back(g.swing_end[i]);
    offsets.push_back(g.phase_offset[i]);
  }
  return json{{"name", g.name},
              {"stride_duration", g.stride_duration},
              {"swing_start", legs_start},
              {"swing_end", legs_end},
              {"phase_offset", offsets}};
}

void wheel_cfg_from(const json& j, WheelToConfig& c) {
  check_keys(j, "wheel_to",
             {"w_acc", "w_pre_pos", "w_pre_vel", "w_pre_acc", "w_ref", "w_def", "w_fh", "w_sh",
              "w_apex", "r_def", "x_kin", "y_kin", "z_kin", "z_sh", "k_inv", "num_samples",
              "rho"});
  read(j, "w_acc", c.w_acc);
  read(j, "w_pre_pos", c.w_pre_pos);
  read(j, "w_pre_vel", c.w_pre_vel);
  read(j, "w_pre_acc", c.w_pre_acc);
  read(j, "w_ref", c.w_ref);
  read(j, "w_def", c.w_def);
  read(j, "w_fh", c.w_fh);
  read(j, "w_sh", c.w_sh);
  read(j, "w_apex", c.w_apex);
  read(j, "r_def", c.r_def);
  read(j, "x_kin", c.x_kin);
  read(j, "y_kin", c.y_kin);
  read(j, "z_kin", c.z_kin);
  read(j, "z_sh", c.z_sh);
  read(j, "k_inv", c.k_inv);
  read(j, "num_samples", c.num_samples);
  read(j, "rho", c.rho);
}

json wheel_cfg_to(const WheelToConfig& c) {
  return json{{"w_acc", vec3_to(c.w_acc)},
              {"w_pre_pos", c.w_pre_pos},
              {"w_pre_vel", c.w_pre_vel},
              {"w_pre_acc", c.w_pre_acc},
              {"w_ref", c.w_ref},
              {"w_def", c.w_def},
              {"w_fh", c.w_fh},
              {"w_sh", c.w_sh},
              {"w_apex", c.w_apex},
              {"r_def", vec3_to(c.r_def)},
              {"x_kin", c.x_kin},
              {"y_kin", c.y_kin},
              {"z_kin", c.z_kin},
              {"z_sh", c.z_sh},
              {"k_inv", c.k_inv},
              {"num_samples", c.num_samples},
              {"rho", c.rho}};
}

void base_cfg_from(const json& j, BaseToConfig& c) {
  check_keys(j, "base_to",
             {"num_segments", "num_samples", "w_acc_lin", "w_acc_ang", "w_vel", "w_yaw_rate",
              "w_pose_xy", "w_pose_yaw", "w_height", "w_attitude", "w_pre_pos", "w_pre_vel",
              "w_pre_acc", "eps_support", "g_min", "l_dot", "max_sqp_iterations",
              "merit_penalty", "step_tol", "margin_tol", "rho"});
  read(j, "num_segments", c.num_segments);
  read(j, "num_samples", c.num_samples);
  read(j, "w_acc_lin", c.w_acc_lin);
  read(j, "w_acc_ang", c.w_acc_ang);
  read(j, "w_vel", c.w_vel);
  read(j, "w_yaw_rate", c.w_yaw_rate);
  read(j, "w_pose_xy", c.w_pose_xy);
  read(j, "w_pose_yaw", c.w_pose_yaw);
  read(j, "w_height", c.w_height);
  read(j, "w_attitude", c.w_attitude);
  read(j, "w_pre_pos", c.w_pre_pos);
  read(j, "w_pre_vel", c.w_pre_vel);
  read(j, "w_pre_acc", c.w_pre_acc);
  read(j, "eps_support", c.eps_support);
  read(j, "g_min", c.g_min);
  read(j, "l_dot", c.l_dot);
  read(j, "max_sqp_iterations", c.max_sqp_iterations);
  read(j, "merit_penalty", c.merit_penalty);
  read(j, "step_tol", c.step_tol);
  read(j, "margin_tol", c.margin_tol);
  read(j, "rho", c.rho);
}

json base_cfg_to(const BaseToConfig& c) {
  return json{{"num_segments", c.num_segments},
              {"num_samples", c.num_samples},
              {"w_acc_lin", c.w_acc_lin},
              {"w_acc_ang", c.w_acc_ang},
              {"w_vel", c.w_vel},
              {"w_yaw_rate", c.w_yaw_rate},
              {"w_pose_xy", c.w_pose_xy},
              {"w_pose_yaw", c.w_pose_yaw},
              {"w_height", c.w_height},
              {"w_attitude", c.w_attitude},
              {"w_pre_pos", c.w_pre_pos},
              {"w_pre_vel", c.w_pre_vel},
              {"w_pre_acc", c.w_pre_acc},
              {"eps_support", c.eps_support},
              {"g_min", c.g_min},
              {"l_dot", vec3_to(c.l_dot)},
              {"max_sqp_iterations", c.max_sqp_iterations},
              {"merit_penalty", c.merit_penalty},
              {"step_tol", c.step_tol},
              {"margin_tol", c.margin_tol},
              {"rho", c.rho}};
}

}  // namespace

void Disturbance::validate() const {
  if (!std::isfinite(t_apply) || t_apply < 0.0) {
    throw std::invalid_argument("disturbance: apply time must be finite and non-negative");
  }
  if (!magnitude.allFinite()) {
    throw std::invalid_argument("disturbance: magnitude must be finite");
  }
  if (target == DisturbanceTarget::kWheelOffset && (leg < 0 || leg >= kNumLegs)) {
    throw std::invalid_argument("disturbance: wheel offset needs a valid leg");
  }
}

void SimRates::validate() const {
  for (const double r : {wheel_hz, base_hz, sim_hz}) {
    if (!std::isfinite(r) || r <= 0.0) {
      throw std::invalid_argument("rates must be positive and finite");
    }
  }
  if (sim_hz + 1e-9 < wheel_hz || sim_hz + 1e-9 < base_hz) {
    throw std::invalid_argument("the plant must tick at least as fast as the planners");
  }
}

const GaitPattern& Scenario::gait_pattern() const {
  if (custom_gait.has_value()) return *custom_gait;
  const GaitPattern* g = find_gait(gait);
  if (g == nullptr) throw std::invalid_argument("unknown gait: " + gait);
  return *g;
}

VelocityCommand Scenario::command_at(double t) const {
  VelocityCommand cmd;
  for (const VelocityProfileSegment& seg : profile) {
    if (seg.t_start > t + 1e-12) break;
    cmd = seg.cmd;
  }
  return cmd;
}

void Scenario::validate() const {
  if (!std::isfinite(duration) || duration <= 0.0) {
    throw std::invalid_argument("scenario duration must be positive");
  }
  const GaitPattern& g = gait_pattern();
  g.validate();
  if (profile.empty() || profile.front().t_start > 1e-12) {
    throw std::invalid_argument("velocity profile must cover the scenario from t = 0");
  }
  for (size_t i = 0; i < profile.size(); ++i) {
    if (!std::isfinite(profile[i].t_start) || !profile[i].cmd.v_ref.allFinite() ||
        !std::isfinite(profile[i].cmd.omega_ref)) {
      throw std::invalid_argument("velocity profile entries must be finite");
    }
    if (i > 0 && profile[i].t_start < profile[i - 1].t_start) {
      throw std::invalid_argument("velocity profile must be sorted by start time");
    }
  }
  if (std::abs(terrain.normal.norm() - 1.0) > 1e-9 || terrain.normal.z() <= 0.0) {
    throw std::invalid_argument("terrain normal must be a unit vector facing up");
  }
  if (!terrain.point.allFinite()) throw std::invalid_argument("terrain point must be finite");
  for (const Disturbance& d : disturbances) d.validate();
  wheel_to.validate();
  base_to.validate();
  rates.validate();
  if (!(robot.mass > 0.0) || !(robot.h_ref > 0.0)) {
    throw std::invalid_argument("robot mass and reference height must be positive");
  }
}

ReferencePose reference_pose_at(const Scenario& sc, double t) {
  ReferencePose pose;
  double cursor = 0.0;
  while (cursor < t - 1e-12) {
    const VelocityCommand cmd = sc.command_at(cursor);
    double next = t;
    for (const VelocityProfileSegment& seg : sc.profile) {
      if (seg.t_start > cursor + 1e-12) {
        next = std::min(next, seg.t_start);
        break;
      }
    }
    pose = advance_reference(pose, cmd, next - cursor);
    cursor = next;
  }
  return pose;
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("scenario: ") + e.what());
  }

  try {
    if (!j.is_object()) fail("scenario: top level must be an object");
    check_keys(j, "scenario",
               {"schema_version", "name", "gait", "custom_gait", "duration", "seed", "profile",
                "terrain", "disturbances", "wheel_to", "base_to", "robot", "rates"});
    const auto version = j.find("schema_version");
    if (version == j.end()) fail("scenario: missing schema_version");
    if (version->get<int>() != kSchemaVersion) {
      fail("scenario: unsupported schema_version " + version->dump());
    }

    Scenario sc;
    read(j, "name", sc.name);
    read(j, "gait", sc.gait);
    read(j, "duration", sc.duration);
    read(j, "seed", sc.seed);
    if (const auto it = j.find("custom_gait"); it != j.end()) sc.custom_gait = gait_from(*it);

    if (const auto it = j.find("profile"); it != j.end()) {
      sc.profile.clear();
      for (const json& seg : *it) {
        check_keys(seg, "profile segment", {"t_start", "vx", "vy", "wz"});
        VelocityProfileSegment p;
        read(seg, "t_start", p.t_start);
        double vx = 0.0, vy = 0.0;
        read(seg, "vx", vx);
        read(seg, "vy", vy);
        read(seg, "wz", p.cmd.omega_ref);
        p.cmd.v_ref = Vec3(vx, vy, 0.0);
        sc.profile.push_back(p);
      }
    }

    if (const auto it = j.find("terrain"); it != j.end()) {
      check_keys(*it, "terrain", {"normal", "point"});
      read(*it, "normal", sc.terrain.normal);
      read(*it, "point", sc.terrain.point);
      if (sc.terrain.normal.norm() < 1e-9) fail("terrain: normal must be nonzero");
      // Skip when already unit length so a dump/parse cycle is bit exact.
      if (std::abs(sc.terrain.normal.norm() - 1.0) > 1e-12) sc.terrain.normal.normalize();
    }

    if (const auto it = j.find("disturbances"); it != j.end()) {
      for (const json& dj : *it) {
        check_keys(dj, "disturbance", {"t_apply", "target", "leg", "magnitude"});
        Disturbance d;
        read(dj, "t_apply", d.t_apply);
        d.target = target_from(dj.at("target").get<std::string>());
        if (const auto leg = dj.find("leg"); leg != dj.end()) {
          d.leg = leg_from(leg->get<std::string>());
        } else if (d.target == DisturbanceTarget::kWheelOffset) {
          fail("disturbance: wheel_offset needs a leg");
        }
        read(dj, "magnitude", d.magnitude);
        sc.disturbances.push_back(d);
      }
    }

    if (const auto it = j.find("wheel_to"); it != j.end()) wheel_cfg_from(*it, sc.wheel_to);
    if (const auto it = j.find("base_to"); it != j.end()) base_cfg_from(*it, sc.base_to);

    if (const auto it = j.find("robot"); it != j.end()) {
      check_keys(*it, "robot", {"mass", "h_ref", "hip_offset"});
      read(*it, "mass", sc.robot.mass);
      read(*it, "h_ref", sc.robot.h_ref);
      if (const auto hips = it->find("hip_offset"); hips != it->end()) {
        if (!hips->is_array() || hips->size() != kNumLegs) {
          fail("robot.hip_offset: expected four [x, y, z] entries");
        }
        for (int i = 0; i < kNumLegs; ++i) {
          sc.robot.hip_offset[i] = vec3_from((*hips)[i], "robot.hip_offset");
        }
      }
    }

    if (const auto it = j.find("rates"); it != j.end()) {
      check_keys(*it, "rates", {"wheel_hz", "base_hz", "sim_hz", "synchronous"});
      read(*it, "wheel_hz", sc.rates.wheel_hz);
      read(*it, "base_hz", sc.rates.base_hz);
      read(*it, "sim_hz", sc.rates.sim_hz);
      read(*it, "synchronous", sc.rates.synchronous);
    }
    return sc;
  } catch (const json::exception& e) {
    fail(std::string("scenario: ") + e.what());
  }
}

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["name"] = sc.name;
  j["gait"] = sc.gait;
  if (sc.custom_gait.has_value()) j["custom_gait"] = gait_to(*sc.custom_gait);
  j["duration"] = sc.duration;
  j["seed"] = sc.seed;

  json profile = json::array();
  for (const VelocityProfileSegment& seg : sc.profile) {
    profile.push_back(json{{"t_start", seg.t_start},
                           {"vx", seg.cmd.v_ref.x()},
                           {"vy", seg.cmd.v_ref.y()},
                           {"wz", seg.cmd.omega_ref}});
  }
  j["profile"] = std::move(profile);

  j["terrain"] = json{{"normal", vec3_to(sc.terrain.normal)}, {"point", vec3_to(sc.terrain.point)}};

  json disturbances = json::array();
  for (const Disturbance& d : sc.disturbances) {
    json dj{{"t_apply", d.t_apply},
            {"target", std::string(target_name(d.target))},
            {"magnitude", vec3_to(d.magnitude)}};
    if (d.target == DisturbanceTarget::kWheelOffset) dj["leg"] = std::string(kLegNames[d.leg]);
    disturbances.push_back(std::move(dj));
  }
  j["disturbances"] = std::move(disturbances);

  j["wheel_to"] = wheel_cfg_to(sc.wheel_to);
  j["base_to"] = base_cfg_to(sc.base_to);

  json hips = json::array();
  for (int i = 0; i < kNumLegs; ++i) hips.push_back(vec3_to(sc.robot.hip_offset[i]));
  j["robot"] = json{{"mass", sc.robot.mass}, {"h_ref", sc.robot.h_ref}, {"hip_offset", hips}};

  j["rates"] = json{{"wheel_hz", sc.rates.wheel_hz},
                    {"base_hz", sc.rates.base_hz},
                    {"sim_hz", sc.rates.sim_hz},
                    {"synchronous", sc.rates.synchronous}};
  return j.dump(2) + "\n";
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioParseError("cannot open scenario file: " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

void save_scenario(const Scenario& sc, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write scenario file: " + file.string());
  out << scenario_to_json(sc);
}

}  // namespace rollplan
