#pragma once

#include <stdexcept>
#include <vector>

#include "rollplan/types.hpp"

namespace rollplan {

// Raised when contact points do not span a plane. Callers usually keep the
// previous estimate.
struct DegenerateTerrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a rolling direction cannot be projected onto the plane.
struct DegenerateFrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Local terrain model: the plane through p0 with upward unit normal n.
struct TerrainPlane {
  Vec3 normal = Vec3::UnitZ();
  Vec3 point = Vec3::Zero();

  double height_offset(const Vec3& p) const { return normal.dot(p - point); }
  Vec3 project(const Vec3& p) const { return p - normal * height_offset(p); }
};

// Least-squares plane through at least three contact points. The normal is
// flipped to face up. Throws DegenerateTerrainError when the centered points
// have fewer than two independent directions (all near one line) or the
// best-fit plane is vertical, and std::invalid_argument on fewer than three
// points.
TerrainPlane fit_plane(const std::vector<Vec3>& contacts);

// Terrain-aligned frame of one wheel. Columns of rotation are the x, y, z
// axes expressed in world coordinates; z is the terrain normal and x the
// rolling direction.
struct WheelFrame {
  Vec3 origin = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();

  Vec3 to_world(const Vec3& local) const { return origin + rotation * local; }
  Vec3 to_local(const Vec3& world) const { return rotation.transpose() * (world - origin); }
};

// Frame with origin at the projection of the axle center onto the plane and
// x along the in-plane projection of heading. Throws DegenerateFrameError
// when heading is (nearly) parallel to the plane normal.
WheelFrame wheel_frame(const TerrainPlane& plane, const Vec3& axle_center, const Vec3& heading);

}  // namespace rollplan
