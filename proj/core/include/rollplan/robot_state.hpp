#pragma once

#include <array>
#include <cmath>

#include "rollplan/types.hpp"

namespace rollplan {

// Measured (or simulated) snapshot of the robot. Angles follow the
// yaw-pitch-roll convention: base_angles = (yaw, pitch, roll) with rates in
// the same order. Everything else is world-frame.
struct RobotState {
  double time = 0.0;
  Vec3 r_com = Vec3::Zero();
  Vec3 v_com = Vec3::Zero();
  Vec3 a_com = Vec3::Zero();
  Vec3 base_angles = Vec3::Zero();
  Vec3 base_rates = Vec3::Zero();
  Vec3 base_angle_acc = Vec3::Zero();
  // Eigen members need explicit zeroing; value-initialization leaves their
  // coefficients indeterminate.
  std::array<Vec3, kNumLegs> wheel_pos = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, kNumLegs> wheel_vel = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<Vec3, kNumLegs> wheel_acc = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumLegs> contact{};
};

// Fixed geometry and inertial lumped parameters. Hip offsets are expressed
// in the base frame, ordered LF, RF, LH, RH.
struct RobotModel {
  double mass = 30.0;   // kg
  double h_ref = 0.5;   // default COM height above the terrain plane, m
  std::array<Vec3, kNumLegs> hip_offset = {
      Vec3(0.36, 0.22, 0.0),
      Vec3(0.36, -0.22, 0.0),
      Vec3(-0.36, 0.22, 0.0),
      Vec3(-0.36, -0.22, 0.0),
  };

  // Hip position in world coordinates for a given COM position and yaw.
  Vec3 hip_world(int leg, const Vec3& r_com, double yaw) const {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    const Vec3& o = hip_offset[leg];
    return r_com + Vec3(c * o.x() - s * o.y(), s * o.x() + c * o.y(), o.z());
  }
};

// Commanded base motion. v_ref is expressed in the yaw-aligned horizontal
// frame (x forward), omega_ref is the yaw rate, so a constant command with
// nonzero omega_ref drives an arc.
struct VelocityCommand {
  Vec3 v_ref = Vec3::Zero();
  double omega_ref = 0.0;
};

// Planar reference pose that the commands integrate; the simulator owns one
// and planners track it.
struct ReferencePose {
  Vec2 xy = Vec2::Zero();
  double yaw = 0.0;
};

// Closed-form integration of a constant command over dt: straight line for
// zero yaw rate, circular arc otherwise.
inline ReferencePose advance_reference(const ReferencePose& p, const VelocityCommand& cmd,
                                       double dt) {
  ReferencePose out;
  out.yaw = p.yaw + cmd.omega_ref * dt;
  double ic, is;  // integrals of cos/sin of the sweeping yaw
  if (std::abs(cmd.omega_ref) < 1e-9) {
    ic = dt * std::cos(p.yaw);
    is = dt * std::sin(p.yaw);
  } else {
    ic = (std::sin(out.yaw) - std::sin(p.yaw)) / cmd.omega_ref;
    is = (std::cos(p.yaw) - std::cos(out.yaw)) / cmd.omega_ref;
  }
  out.xy = p.xy + Vec2(cmd.v_ref.x() * ic - cmd.v_ref.y() * is,
                       cmd.v_ref.x() * is + cmd.v_ref.y() * ic);
  return out;
}

}  // namespace rollplan
