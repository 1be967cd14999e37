#include "rollplan/terrain.hpp"

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"

using namespace rollplan;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

Mat3 random_rotation(std::mt19937_64& rng) {
  const Vec3 axis = random_unit(rng);
  std::uniform_real_distribution<double> u(0.0, M_PI);
  return Eigen::AngleAxisd(u(rng), axis).toRotationMatrix();
}

}  // namespace

TEST_CASE("three unit-square corners give the ground plane") {
  const TerrainPlane plane = fit_plane({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
  CHECK((plane.normal - Vec3::UnitZ()).norm() < 1e-12);
  CHECK((plane.point - Vec3(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-12);
}

TEST_CASE("points on an inclined plane recover its normal") {
  // z = 0.2 x has normal proportional to (-0.2, 0, 1).
  std::vector<Vec3> pts;
  for (double x : {0.0, 1.0, 0.3, -0.7}) {
    for (double y : {-0.5, 0.8}) pts.push_back(Vec3(x, y, 0.2 * x));
  }
  const TerrainPlane plane = fit_plane(pts);
  const Vec3 expected = Vec3(-0.2, 0, 1).normalized();
  CHECK((plane.normal - expected).norm() < 1e-10);
  for (const Vec3& p : pts) {
    CHECK(std::abs(plane.height_offset(p)) < 1e-12);
  }
}

TEST_CASE("normals always face up") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec3> pts;
    const Mat3 rot = random_rotation(rng);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 6; ++i) pts.push_back(rot * Vec3(u(rng), u(rng), 0.0) + Vec3(0, 0, 2));
    TerrainPlane plane;
    try {
      plane = fit_plane(pts);
    } catch (const DegenerateTerrainError&) {
      continue;  // the random tilt may be near vertical
    }
    CHECK(plane.normal.z() > 0.0);
    CHECK(std::abs(plane.normal.norm() - 1.0) < 1e-10);
  }
}

TEST_CASE("colinear contacts are degenerate") {
  std::vector<Vec3> pts = {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(2, 2, 0), Vec3(3, 3, 0)};
  CHECK_THROWS_AS(fit_plane(pts), DegenerateTerrainError);
  CHECK_THROWS_AS(fit_plane({Vec3(0, 0, 0), Vec3(1, 0, 0)}), std::invalid_argument);
}

TEST_CASE("fitting is equivariant under rigid transforms") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) {
      pts.push_back(Vec3(u(rng), u(rng), 0.1 * u(rng)));
    }
    const Mat3 rot = Eigen::AngleAxisd(0.3 * u(rng), random_unit(rng)).toRotationMatrix();
    const Vec3 shift(u(rng), u(rng), u(rng));

    TerrainPlane base, moved;
    try {
      base = fit_plane(pts);
      std::vector<Vec3> pts2;
      for (const Vec3& p : pts) pts2.push_back(rot * p + shift);
      moved = fit_plane(pts2);
    } catch (const DegenerateTerrainError&) {
      continue;
    }
    // Signed distances to the fitted plane must transform with the points.
    for (const Vec3& p : pts) {
      const double d1 = std::abs(base.height_offset(p));
      const double d2 = std::abs(moved.height_offset(rot * p + shift));
      CHECK(d1 == doctest::Approx(d2).epsilon(1e-8));
    }
  }
}

TEST_CASE("wheel frame projects the axle center onto the plane") {
  TerrainPlane flat;
  const WheelFrame f = wheel_frame(flat, Vec3(1, 2, 0.3), Vec3(1, 0, 0));
  CHECK((f.origin - Vec3(1, 2, 0)).norm() < 1e-12);
  CHECK((f.rotation.col(0) - Vec3::UnitX()).norm() < 1e-12);
  CHECK((f.rotation.col(1) - Vec3::UnitY()).norm() < 1e-12);
  CHECK((f.rotation.col(2) - Vec3::UnitZ()).norm() < 1e-12);
}

TEST_CASE("heading is projected into the plane before normalization") {
  TerrainPlane flat;
  const WheelFrame f = wheel_frame(flat, Vec3::Zero(), Vec3(1, 0, 0.5));
  CHECK((f.rotation.col(0) - Vec3::UnitX()).norm() < 1e-12);
}

TEST_CASE("frames on a tilted plane stay orthonormal") {
  const TerrainPlane plane = fit_plane(
      {Vec3(0, 0, 0), Vec3(1, 0, 0.2), Vec3(0, 1, 0), Vec3(1, 1, 0.2)});
  const WheelFrame f = wheel_frame(plane, Vec3(0.4, 0.2, 0.5), Vec3(1, 0, 0));
  CHECK(std::abs(f.rotation.col(0).dot(plane.normal)) < 1e-12);
  CHECK((f.rotation.transpose() * f.rotation - Mat3::Identity()).norm() < 1e-10);
  CHECK(f.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(plane.height_offset(f.origin)) < 1e-12);

  // Round trip between the frame and world coordinates.
  const Vec3 p(0.3, -0.1, 0.07);
  CHECK((f.to_local(f.to_world(p)) - p).norm() < 1e-12);
}

TEST_CASE("vertical headings cannot define a rolling direction") {
  TerrainPlane flat;
  CHECK_THROWS_AS(wheel_frame(flat, Vec3::Zero(), Vec3(0, 0, 1)), DegenerateFrameError);
}
