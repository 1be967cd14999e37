#include "rollplan/base_planner.hpp"

#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"

using namespace rollplan;

namespace {

TerrainPlane flat_ground() {
  TerrainPlane p;
  p.normal = Vec3(0, 0, 1);
  p.point = Vec3::Zero();
  return p;
}

// Robot standing at its defaults: wheels on the ground under the hips,
// everything moving at the given velocity.
RobotState nominal_state(const RobotModel& model, const Vec3& v = Vec3::Zero(),
                         double time = 0.0, double yaw_rate = 0.0) {
  RobotState s;
  s.time = time;
  s.r_com = Vec3(0, 0, model.h_ref) + v * time;
  s.v_com = v;
  s.base_rates = Vec3(yaw_rate, 0, 0);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const Vec3 hip = model.hip_world(leg, s.r_com, 0.0);
    s.wheel_pos[leg] = Vec3(hip.x(), hip.y(), 0.0);
    s.wheel_vel[leg] = v;
    s.contact[leg] = true;
  }
  return s;
}

double gait_phase(const GaitPattern& g, double t) {
  return t / g.stride_duration - std::floor(t / g.stride_duration);
}

// Owns the four wheel plans a base plan consumes; pointers are taken after
// the owner stopped moving.
struct WheelSet {
  std::array<std::optional<WheelPlan>, kNumLegs> plans;

  std::array<const WheelPlan*, kNumLegs> ptrs() const {
    std::array<const WheelPlan*, kNumLegs> out{};
    for (int leg = 0; leg < kNumLegs; ++leg) {
      out[leg] = plans[leg].has_value() ? &*plans[leg] : nullptr;
    }
    return out;
  }
};

WheelSet plan_wheels(const RobotState& state, const GaitPattern& gait, const TerrainPlane& plane,
                     const VelocityCommand& cmd) {
  WheelPlanner planner(WheelToConfig{}, RobotModel{});
  const ContactSchedule schedule =
      build_schedule(gait, state.time, gait_phase(gait, state.time));
  WheelSet out;
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const auto res = planner.replan(state, leg, schedule, plane, cmd);
    REQUIRE(res.status == QpStatus::kOptimal);
    out.plans[leg] = *res.plan;
  }
  return out;
}

}  // namespace

TEST_CASE("gravito-inertial wrench matches the hand formula") {
  const Vec3 r(0.1, -0.2, 0.5);
  const Vec3 a(1.0, 0.5, -0.3);
  const GravitoInertialWrench w = gravito_inertial_wrench(r, a, 30.0);

  const Vec3 g(0, 0, -kGravity);
  CHECK((w.f_gi - 30.0 * (g - a)).norm() < 1e-12);
  CHECK((w.m_gi - 30.0 * r.cross(g - a)).norm() < 1e-12);
  CHECK(w.mass == 30.0);

  CHECK_THROWS_AS(gravito_inertial_wrench(r, a, 0.0), std::invalid_argument);
}

TEST_CASE("static ZMP sits under the COM") {
  const Vec3 r(0.12, -0.07, 0.48);
  const GravitoInertialWrench w = gravito_inertial_wrench(r, Vec3::Zero(), 30.0);
  const Vec3 z = zmp_point(w, Vec3(0, 0, 1));
  CHECK(z.x() == doctest::Approx(0.12).epsilon(1e-12));
  CHECK(z.y() == doctest::Approx(-0.07).epsilon(1e-12));
  CHECK(std::abs(z.z()) < 1e-12);
}

TEST_CASE("forward acceleration shifts the ZMP backward") {
  const GravitoInertialWrench w =
      gravito_inertial_wrench(Vec3(0, 0, 0.5), Vec3(1, 0, 0), 30.0);
  const Vec3 z = zmp_point(w, Vec3(0, 0, 1));
  CHECK(z.x() == doctest::Approx(-0.5 / kGravity).epsilon(1e-9));
  CHECK(std::abs(z.y()) < 1e-12);
}

TEST_CASE("free fall has no ZMP") {
  const Vec3 g(0, 0, -kGravity);
  const GravitoInertialWrench w = gravito_inertial_wrench(Vec3(0, 0, 0.5), g, 30.0);
  CHECK_THROWS_AS(zmp_point(w, Vec3(0, 0, 1)), DegenerateContactError);
}

TEST_CASE("world ZMP is anchored to the terrain plane") {
  TerrainPlane plane;
  plane.normal = Vec3(0, 0, 1);
  plane.point = Vec3(5.0, -2.0, 0.1);

  const Vec3 r(5.3, -1.8, 0.6);
  const Vec3 z = zmp_world(r, Vec3::Zero(), 30.0, Vec3::Zero(), plane);
  CHECK(z.x() == doctest::Approx(5.3).epsilon(1e-12));
  CHECK(z.y() == doctest::Approx(-1.8).epsilon(1e-12));
  CHECK(z.z() == doctest::Approx(0.1).epsilon(1e-12));

  // The anchor may sit anywhere in the plane without moving the point.
  TerrainPlane shifted = plane;
  shifted.point += Vec3(3.0, 7.0, 0.0);
  const Vec3 z2 = zmp_world(r, Vec3(0.8, -0.4, 0.2), 30.0, Vec3::Zero(), plane);
  const Vec3 z3 = zmp_world(r, Vec3(0.8, -0.4, 0.2), 30.0, Vec3::Zero(), shifted);
  CHECK((z2 - z3).norm() < 1e-12);
}

TEST_CASE("four contacts give the rectangle with its known margins") {
  const std::vector<Vec3> contacts = {Vec3(0.3, 0.2, 0), Vec3(-0.3, 0.2, 0),
                                      Vec3(-0.3, -0.2, 0), Vec3(0.3, -0.2, 0)};
  const SupportPolygonEdges sp = support_polygon(0.0, contacts, flat_ground(), 0.02);

  REQUIRE(sp.hull.size() == 4);
  REQUIRE(sp.edges.size() == 4);
  CHECK(!sp.full_flight);

  double min_margin = 1e9;
  double max_margin = -1e9;
  for (const Vec3& d : sp.edges) {
    CHECK(std::hypot(d.x(), d.y()) == doctest::Approx(1.0).epsilon(1e-12));
    const double m = d.z();  // margin of the center (0, 0)
    min_margin = std::min(min_margin, m);
    max_margin = std::max(max_margin, m);
  }
  CHECK(min_margin == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(max_margin == doctest::Approx(0.3).epsilon(1e-12));

  // CCW orientation: positive cross product around the hull.
  for (size_t i = 0; i < sp.hull.size(); ++i) {
    const Vec2 a = sp.hull[i];
    const Vec2 b = sp.hull[(i + 1) % sp.hull.size()];
    const Vec2 c = sp.hull[(i + 2) % sp.hull.size()];
    CHECK((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()) > 0.0);
  }
}

TEST_CASE("two diagonal contacts give a slab around the support line") {
  const std::vector<Vec3> contacts = {Vec3(0.3, 0.2, 0), Vec3(-0.3, -0.2, 0)};
  const SupportPolygonEdges sp = support_polygon(0.0, contacts, flat_ground(), 0.02);

  REQUIRE(sp.edges.size() == 2);
  auto margin = [&](const Vec2& p) {
    double m = 1e9;
    for (const Vec3& d : sp.edges) m = std::min(m, d.x() * p.x() + d.y() * p.y() + d.z());
    return m;
  };

  CHECK(margin(Vec2(0, 0)) == doctest::Approx(0.02).epsilon(1e-9));
  CHECK(margin(Vec2(0.3, 0.2)) == doctest::Approx(0.02).epsilon(1e-9));
  // 3 cm off the line is 1 cm outside the slab.
  const Vec2 n2 = Vec2(-0.2, 0.3).normalized();
  CHECK(margin(Vec2(0, 0) + 0.03 * n2) == doctest::Approx(-0.01).epsilon(1e-9));
  CHECK(margin(Vec2(0, 0) - 0.03 * n2) == doctest::Approx(-0.01).epsilon(1e-9));
}

TEST_CASE("one contact gives a box and none the flight marker") {
  const SupportPolygonEdges box =
      support_polygon(0.0, {Vec3(0.1, -0.3, 0)}, flat_ground(), 0.02);
  REQUIRE(box.edges.size() == 4);
  double m = 1e9;
  for (const Vec3& d : box.edges) m = std::min(m, d.x() * 0.1 + d.y() * -0.3 + d.z());
  CHECK(m == doctest::Approx(0.02).epsilon(1e-12));

  const SupportPolygonEdges none = support_polygon(0.0, {}, flat_ground(), 0.02);
  CHECK(none.full_flight);
  CHECK(none.edges.empty());

  const std::vector<Vec3> collinear = {Vec3(0, 0, 0), Vec3(0.2, 0.1, 0), Vec3(0.4, 0.2, 0)};
  const SupportPolygonEdges slab = support_polygon(0.0, collinear, flat_ground(), 0.02);
  CHECK(slab.edges.size() == 2);
}

TEST_CASE("edge slack equals the point margin times the pressing force") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const TerrainPlane plane = flat_ground();

  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 r(0.5 * u(rng), 0.5 * u(rng), 0.5 + 0.2 * u(rng));
    const Vec3 a(3.0 * u(rng), 3.0 * u(rng), 3.0 * u(rng));
    const double ang = 3.141592653589793 * u(rng);
    const Vec3 d(std::cos(ang), std::sin(ang), 0.5 * u(rng));

    const double slack = zmp_edge_slack(d, r, a, 30.0, Vec3::Zero(), plane);
    const Vec3 z = zmp_world(r, a, 30.0, Vec3::Zero(), plane);
    const double point_margin = d.x() * z.x() + d.y() * z.y() + d.z();
    const double denom = 30.0 * plane.normal.dot(a - Vec3(0, 0, -kGravity));

    CHECK(slack == doctest::Approx(point_margin * denom).epsilon(1e-9));
    CHECK(zmp_edge_slack(2.0 * d, r, a, 30.0, Vec3::Zero(), plane) ==
          doctest::Approx(2.0 * slack).epsilon(1e-12));
  }
}

TEST_CASE("COM above a hull edge has zero slack at rest") {
  const std::vector<Vec3> contacts = {Vec3(0.3, 0.2, 0), Vec3(-0.3, 0.2, 0),
                                      Vec3(-0.3, -0.2, 0), Vec3(0.3, -0.2, 0)};
  const SupportPolygonEdges sp = support_polygon(0.0, contacts, flat_ground(), 0.02);

  const Vec3 r_com(0.3, 0.05, 0.5);  // above the x = 0.3 edge
  double closest = 1e9;
  for (const Vec3& d : sp.edges) {
    const double slack = zmp_edge_slack(d, r_com, Vec3::Zero(), 30.0, Vec3::Zero(), flat_ground());
    closest = std::min(closest, std::abs(slack));
  }
  CHECK(closest < 1e-8);
}

TEST_CASE("planned contacts follow the wheel plans over time") {
  const RobotModel model;
  const GaitPattern& driving = *find_gait("driving");
  const TerrainPlane plane = flat_ground();
  const RobotState state = nominal_state(model, Vec3(0.5, 0, 0));
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  const WheelSet wheels = plan_wheels(state, driving, plane, cmd);
  const auto ptrs = wheels.ptrs();

  const std::vector<Vec3> now = planned_contact_points(0.0, ptrs, state);
  const std::vector<Vec3> later = planned_contact_points(1.0, ptrs, state);
  REQUIRE(now.size() == 4);
  REQUIRE(later.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(later[i].x() - now[i].x() == doctest::Approx(0.5).epsilon(0.05));
  }

  const SupportPolygonEdges sp0 = support_polygon(0.0, now, plane, 0.02);
  const SupportPolygonEdges sp1 = support_polygon(1.0, later, plane, 0.02);
  REQUIRE(sp0.edges.size() == 4);
  REQUIRE(sp1.edges.size() == 4);
  bool moved = false;
  for (size_t i = 0; i < sp0.edges.size(); ++i) {
    if ((sp0.edges[i] - sp1.edges[i]).norm() > 1e-6) moved = true;
  }
  CHECK(moved);

  // Without plans the measured state is the fallback.
  const std::array<const WheelPlan*, kNumLegs> none{};
  const std::vector<Vec3> measured = planned_contact_points(0.3, none, state);
  REQUIRE(measured.size() == 4);
  CHECK((measured[0] - state.wheel_pos[0]).norm() < 1e-12);
}

TEST_CASE("stacking a trajectory round-trips") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VecX xi(36 * 4);
  for (int i = 0; i < xi.size(); ++i) xi(i) = u(rng);

  const BaseTrajectory traj = unstack_base(xi, 1.5, 2.0, 4);
  CHECK(traj.t0() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(traj.t_end() == doctest::Approx(3.5).epsilon(1e-12));
  CHECK((stack_base(traj) - xi).norm() < 1e-14);
}

TEST_CASE("linearized rows are exact at the iterate and first order nearby") {
  const RobotModel model;
  const BaseToConfig cfg;
  const RobotState state = nominal_state(model);
  const TerrainPlane plane = flat_ground();
  const GaitPattern& driving = *find_gait("driving");

  std::vector<ZmpSample> samples;
  const std::array<const WheelPlan*, kNumLegs> none{};
  for (int k = 1; k <= cfg.num_samples; ++k) {
    const double t = k * driving.stride_duration / cfg.num_samples;
    ZmpSample s;
    s.t = t;
    s.support = support_polygon(t, planned_contact_points(t, none, state), plane, 0.02);
    samples.push_back(std::move(s));
  }

  BaseReference ref;
  ref.height = model.h_ref;
  const BaseQp qp =
      assemble_base(state, ref, driving.stride_duration, samples, plane, cfg, model, nullptr);

  QpSolver solver;
  const QpSolution seed = solver.solve(qp.fixed);
  REQUIRE(seed.status == QpStatus::kOptimal);

  MatX D(0, 0);
  VecX f(0);
  zmp_constraint_rows(qp, seed.x, D, f);
  REQUIRE(D.rows() == 40 * 5);  // one pressing plus four edges per sample

  // Row order per sample: pressing first, then the edges. At the iterate the
  // linearized slack must match the nonlinear one exactly.
  const Vec3 g(0, 0, -kGravity);
  int row = 0;
  for (const ZmpSample& s : qp.samples) {
    const Vec3 a = unstack_base(seed.x, qp.t0, qp.t_f, qp.num_segments).com.eval(s.t).acceleration;
    const Vec3 r = unstack_base(seed.x, qp.t0, qp.t_f, qp.num_segments).com.eval(s.t).position;
    const double press = f(row) - D.row(row).dot(seed.x);
    CHECK(press == doctest::Approx(plane.normal.dot(a - g) - qp.g_min).epsilon(1e-9));
    ++row;
    for (const Vec3& d : s.support.edges) {
      const double lin = f(row) - D.row(row).dot(seed.x);
      const double nl = zmp_edge_slack(d, r, a, qp.mass, qp.l_dot, plane);
      CHECK(lin == doctest::Approx(nl).epsilon(1e-9));
      ++row;
    }
  }

  // A small step away the mismatch is second order in the step.
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VecX dx(seed.x.size());
  for (int i = 0; i < dx.size(); ++i) dx(i) = 1e-5 * u(rng);
  const VecX xi2 = seed.x + dx;
  const BaseTrajectory t2 = unstack_base(xi2, qp.t0, qp.t_f, qp.num_segments);
  row = 0;
  for (const ZmpSample& s : qp.samples) {
    ++row;  // pressing stays exact
    const Motion m = t2.com.eval(s.t);
    for (const Vec3& d : s.support.edges) {
      const double lin = f(row) - D.row(row).dot(xi2);
      const double nl =
          zmp_edge_slack(d, m.position, m.acceleration, qp.mass, qp.l_dot, plane);
      CHECK(std::abs(lin - nl) < 1e-3);
      ++row;
    }
  }
}

TEST_CASE("a resting robot keeps a stationary base plan") {
  const RobotModel model;
  BasePlanner planner(BaseToConfig{}, model);
  const RobotState state = nominal_state(model);
  const GaitPattern& driving = *find_gait("driving");
  const std::array<const WheelPlan*, kNumLegs> none{};

  ReferencePose pose;
  const auto res =
      planner.replan(state, VelocityCommand{}, pose, driving, flat_ground(), none);

  REQUIRE(res.report.status == QpStatus::kOptimal);
  REQUIRE(res.plan.has_value());
  const BaseTrajectory& plan = *res.plan;

  for (double t = 0.0; t <= driving.stride_duration; t += 0.1) {
    const Motion m = plan.com_at(t);
    CHECK(m.velocity.norm() < 1e-6);
    CHECK((m.position - Vec3(0, 0, model.h_ref)).norm() < 1e-6);
    CHECK(plan.angles_at(t).position.norm() < 1e-6);
  }
  CHECK(res.report.worst_margin > 0.2);
  CHECK(res.report.continuity_residual < 1e-6);
  CHECK(res.report.sqp_iterations <= planner.config().max_sqp_iterations);
}

TEST_CASE("the base tracks a forward command at mid-horizon") {
  const RobotModel model;
  const GaitPattern& driving = *find_gait("driving");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  const RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, driving, plane, cmd);

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  const auto res = planner.replan(state, cmd, pose, driving, plane, wheels.ptrs());

  REQUIRE(res.report.status == QpStatus::kOptimal);
  const double t_mid = 0.5 * driving.stride_duration;
  const Motion m = res.plan->com_at(t_mid);
  CHECK(m.velocity.x() == doctest::Approx(0.5).epsilon(2e-2));
  CHECK(std::abs(m.velocity.y()) < 1e-3);
  CHECK(res.report.worst_margin > -1e-6);

  // Initial state is pinned exactly.
  const Motion m0 = res.plan->com_at(0.0);
  CHECK((m0.position - state.r_com).norm() < 1e-8);
  CHECK((m0.velocity - state.v_com).norm() < 1e-8);
  CHECK((res.plan->angles_at(0.0).position - state.base_angles).norm() < 1e-8);
}

TEST_CASE("trot support slabs stay feasible while rolling") {
  const RobotModel model;
  const GaitPattern& trot = *find_gait("hybrid trot");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  const RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, trot, plane, cmd);
  const auto ptrs = wheels.ptrs();

  // Mid-way through the first half-stride only one diagonal is planned down.
  const std::vector<Vec3> mid =
      planned_contact_points(0.2 * trot.stride_duration, ptrs, state);
  CHECK(mid.size() == 2);
  const SupportPolygonEdges slab =
      support_polygon(0.2 * trot.stride_duration, mid, plane, 0.02);
  CHECK(slab.edges.size() == 2);

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  const auto res = planner.replan(state, cmd, pose, trot, plane, ptrs);

  REQUIRE(res.report.status == QpStatus::kOptimal);
  CHECK(res.report.worst_margin >= -1e-6);
  CHECK(res.report.worst_pressing >= -1e-6);
  CHECK(res.report.continuity_residual < 1e-6);
}

TEST_CASE("pace supports demand a lateral ZMP weave and stay feasible") {
  const RobotModel model;
  const GaitPattern& pace = *find_gait("hybrid pace");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  const RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, pace, plane, cmd);

  // The single-slab supports make this the hardest gait to certify from a
  // standstill of the planner; replans hand the last iterate forward, so a
  // few calls finish the job. In closed loop the planner fires every stride
  // anyway.
  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  BasePlanner::Result res;
  for (int call = 0; call < 4; ++call) {
    res = planner.replan(state, cmd, pose, pace, plane, wheels.ptrs());
    if (res.report.status == QpStatus::kOptimal) break;
  }

  REQUIRE(res.report.status == QpStatus::kOptimal);
  CHECK(res.report.worst_margin >= -1e-6);

  // The plan really does commit to lateral acceleration.
  double peak = 0.0;
  for (double t = 0.05; t < pace.stride_duration; t += 0.02) {
    peak = std::max(peak, std::abs(res.plan->com_at(t).acceleration.y()));
  }
  CHECK(peak > 1.0);
}

TEST_CASE("walk keeps the ZMP inside three-leg support polygons") {
  const RobotModel model;
  const GaitPattern& walk = *find_gait("hybrid walk");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.3, 0, 0);

  const RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, walk, plane, cmd);

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  const auto res = planner.replan(state, cmd, pose, walk, plane, wheels.ptrs());

  REQUIRE(res.report.status == QpStatus::kOptimal);
  CHECK(res.report.worst_margin >= -1e-6);
}

TEST_CASE("running trot flight samples contribute no constraint rows") {
  const RobotModel model;
  const GaitPattern& running = *find_gait("hybrid running trot");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  const RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, running, plane, cmd);
  const auto ptrs = wheels.ptrs();

  const BaseToConfig cfg;
  std::vector<ZmpSample> samples;
  int flight_count = 0;
  int expected_rows = 0;
  for (int k = 1; k <= cfg.num_samples; ++k) {
    const double t = k * running.stride_duration / cfg.num_samples;
    ZmpSample s;
    s.t = t;
    s.support = support_polygon(t, planned_contact_points(t, ptrs, state), plane,
                                cfg.eps_support);
    if (s.support.full_flight) {
      ++flight_count;
    } else {
      expected_rows += 1 + static_cast<int>(s.support.edges.size());
    }
    samples.push_back(std::move(s));
  }
  CHECK(flight_count > 0);

  BaseReference ref;
  ref.cmd = cmd;
  ref.height = model.h_ref;
  const BaseQp qp = assemble_base(state, ref, running.stride_duration, samples, plane, cfg,
                                  model, nullptr);
  QpSolver solver;
  const QpSolution seed = solver.solve(qp.fixed);
  REQUIRE(seed.status == QpStatus::kOptimal);

  MatX D(0, 0);
  VecX f(0);
  zmp_constraint_rows(qp, seed.x, D, f);
  CHECK(D.rows() == expected_rows);

  BasePlanner planner(cfg, model);
  ReferencePose pose;
  const auto res = planner.replan(state, cmd, pose, running, plane, ptrs);
  REQUIRE(res.report.status == QpStatus::kOptimal);
  CHECK(res.report.worst_margin >= -1e-6);
}

TEST_CASE("yaw rate follows the commanded turn") {
  const RobotModel model;
  const GaitPattern& driving = *find_gait("driving");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.3, 0, 0);
  cmd.omega_ref = 0.3;

  const RobotState state = nominal_state(model, cmd.v_ref, 0.0, cmd.omega_ref);
  const WheelSet wheels = plan_wheels(state, driving, plane, cmd);

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  const auto res = planner.replan(state, cmd, pose, driving, plane, wheels.ptrs());

  REQUIRE(res.report.status == QpStatus::kOptimal);
  const double yaw0 = res.plan->angles_at(0.0).position.x();
  const double yaw1 = res.plan->angles_at(driving.stride_duration).position.x();
  const double mean_rate = (yaw1 - yaw0) / driving.stride_duration;
  CHECK(mean_rate == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("merit is non-increasing while recovering from an offset") {
  const RobotModel model;
  const GaitPattern& trot = *find_gait("hybrid trot");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, trot, plane, cmd);
  state.r_com.y() += 0.05;  // disturbed sideways, reference stays put

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  BasePlanner::Result res;
  for (int call = 0; call < 2; ++call) {
    res = planner.replan(state, cmd, pose, trot, plane, wheels.ptrs());
    REQUIRE(!res.report.merit.empty());
    for (size_t i = 1; i < res.report.merit.size(); ++i) {
      CHECK(res.report.merit[i] <= res.report.merit[i - 1] + 1e-9);
    }
    if (res.report.status == QpStatus::kOptimal) break;
  }

  REQUIRE(res.report.status == QpStatus::kOptimal);
  CHECK(res.report.worst_margin >= -1e-6);
}

TEST_CASE("replanning stays close to the previous base plan") {
  const RobotModel model;
  const GaitPattern& driving = *find_gait("driving");
  const TerrainPlane plane = flat_ground();
  VelocityCommand cmd;
  cmd.v_ref = Vec3(0.5, 0, 0);

  RobotState state = nominal_state(model, cmd.v_ref);
  const WheelSet wheels = plan_wheels(state, driving, plane, cmd);

  BasePlanner planner(BaseToConfig{}, model);
  ReferencePose pose;
  const auto first = planner.replan(state, cmd, pose, driving, plane, wheels.ptrs());
  REQUIRE(first.report.status == QpStatus::kOptimal);

  // Advance 20 ms along the plan and replan from there.
  const double dt = 0.02;
  const Motion m = first.plan->com_at(dt);
  const Motion ang = first.plan->angles_at(dt);
  RobotState next = nominal_state(model, cmd.v_ref, dt);
  next.r_com = m.position;
  next.v_com = m.velocity;
  next.a_com = m.acceleration;
  next.base_angles = ang.position;
  next.base_rates = ang.velocity;
  next.base_angle_acc = ang.acceleration;

  const WheelSet wheels2 = plan_wheels(next, driving, plane, cmd);
  const ReferencePose pose2 = advance_reference(pose, cmd, dt);
  const auto second = planner.replan(next, cmd, pose2, driving, plane, wheels2.ptrs());
  REQUIRE(second.report.status == QpStatus::kOptimal);

  double worst = 0.0;
  for (double t = dt; t < driving.stride_duration; t += 0.05) {
    worst = std::max(worst,
                     (second.plan->com_at(t).position - first.plan->com_at(t).position).norm());
  }
  CHECK(worst < 5e-3);
}

TEST_CASE("config validation rejects bad settings") {
  BaseToConfig cfg;
  cfg.w_vel = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = BaseToConfig{};
  cfg.num_samples = 4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = BaseToConfig{};
  cfg.eps_support = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
