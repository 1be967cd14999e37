#include "rollplan/terrain.hpp"

#include <Eigen/Dense>

namespace rollplan {

namespace {
constexpr double kSpreadTol = 1e-8;  // singular-value floor for a usable fit
}

TerrainPlane fit_plane(const std::vector<Vec3>& contacts) {
  const int n = static_cast<int>(contacts.size());
  if (n < 3) throw std::invalid_argument("fit_plane: need at least 3 contact points");

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : contacts) centroid += p;
  centroid /= n;

  MatX centered(n, 3);
  for (int i = 0; i < n; ++i) centered.row(i) = (contacts[i] - centroid).transpose();

  Eigen::JacobiSVD<MatX> svd(centered, Eigen::ComputeFullV);
  const VecX& sigma = svd.singularValues();
  // sigma(0) >= sigma(1) >= sigma(2). Points on a line leave only one spread
  // direction, so the second value collapses and no plane is determined.
  if (sigma(1) <= kSpreadTol) {
    throw DegenerateTerrainError("fit_plane: contact points are colinear");
  }

  Vec3 normal = svd.matrixV().col(2);
  if (std::abs(normal.z()) < kSpreadTol) {
    throw DegenerateTerrainError("fit_plane: best-fit plane is vertical");
  }
  if (normal.z() < 0.0) normal = -normal;

  TerrainPlane plane;
  plane.normal = normal;
  plane.point = centroid;
  return plane;
}

WheelFrame wheel_frame(const TerrainPlane& plane, const Vec3& axle_center, const Vec3& heading) {
  const Vec3 z = plane.normal;
  Vec3 x = heading - z * z.dot(heading);
  const double in_plane = x.norm();
  if (in_plane <= kSpreadTol) {
    throw DegenerateFrameError("wheel_frame: heading is parallel to the terrain normal");
  }
  x /= in_plane;

  WheelFrame frame;
  frame.origin = plane.project(axle_center);
  frame.rotation.col(0) = x;
  frame.rotation.col(1) = z.cross(x);
  frame.rotation.col(2) = z;
  return frame;
}

}  // namespace rollplan
