#pragma once

#include <Eigen/Core>
#include <array>
#include <string_view>

namespace rollplan {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr int kNumLegs = 4;

// Leg indexing used throughout: left-front, right-front, left-hind, right-hind.
enum LegId : int { kLF = 0, kRF = 1, kLH = 2, kRH = 3 };

inline constexpr std::array<std::string_view, kNumLegs> kLegNames = {"lf", "rf", "lh", "rh"};

inline constexpr double kGravity = 9.81;

}  // namespace rollplan
