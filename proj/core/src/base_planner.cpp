#include "rollplan/base_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

#include <Eigen/Geometry>

namespace rollplan {
namespace {

constexpr double kPressTol = 1e-9;
constexpr double kHullTol = 1e-12;

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

// z of the terrain plane at a world xy point; the plane is never vertical.
double plane_z(const TerrainPlane& plane, const Vec2& xy) {
  const Vec3& n = plane.normal;
  const Vec3& p0 = plane.point;
  return p0.z() - (n.x() * (xy.x() - p0.x()) + n.y() * (xy.y() - p0.y())) / n.z();
}

// Same accumulation pattern as the wheel QP: collect w (row.xi - t)^2 cost
// rows and constraint rows, then form the dense problem.
struct QpAccumulator {
  MatX Q;
  VecX c;
  std::vector<VecX> eq_rows;
  std::vector<double> eq_vals;

  explicit QpAccumulator(int n) : Q(MatX::Zero(n, n)), c(VecX::Zero(n)) {}

  void cost_row(const VecX& row, double target, double w) {
    if (w <= 0.0) return;
    Q.noalias() += (2.0 * w) * (row * row.transpose());
    c.noalias() -= (2.0 * w * target) * row;
  }

  void eq(const VecX& row, double value) {
    eq_rows.push_back(row);
    eq_vals.push_back(value);
  }

  QpProblem finish(double rho) const {
    QpProblem p;
    const int n = static_cast<int>(c.size());
    p.Q = regularize(0.5 * (Q + Q.transpose()), rho);
    p.c = c;
    p.A.resize(static_cast<int>(eq_rows.size()), n);
    p.b.resize(static_cast<int>(eq_rows.size()));
    for (size_t i = 0; i < eq_rows.size(); ++i) {
      p.A.row(static_cast<int>(i)) = eq_rows[i].transpose();
      p.b(static_cast<int>(i)) = eq_vals[i];
    }
    p.D.resize(0, n);
    p.f.resize(0);
    return p;
  }
};

// Layout of the stacked decision vector: K air segments of 18 coefficients
// for the COM, then K more for the angles.
struct Layout {
  double t0 = 0.0;
  double dt = 0.0;
  int num_segments = 0;

  int num_vars() const { return 36 * num_segments; }
  int angle_offset() const { return 18 * num_segments; }

  // Pos/vel/acc rows of one group at absolute time t; junction times belong
  // to the later segment, the horizon end to the last one.
  MatX rows(bool angles, double t, int deriv) const {
    int j = static_cast<int>(std::floor((t - t0) / dt));
    j = std::clamp(j, 0, num_segments - 1);
    const double tau = t - t0 - j * dt;
    MatX out = MatX::Zero(3, num_vars());
    const int off = (angles ? angle_offset() : 0) + 18 * j;
    out.block(0, off, 3, 18) = air_time_matrix(tau, deriv);
    return out;
  }
};

Layout layout_of(const BaseQp& qp) {
  return Layout{qp.t0, qp.t_f / qp.num_segments, qp.num_segments};
}

// Reaction wrench about the plane anchor: f_r = m (a - g) and
// m_r = m (r - p0) x (a - g) + l_dot. Pressing contact has n.f_r > 0, which
// keeps the multiplied-through edge slack sign-aligned with the point margin.
void reaction_wrench(const Vec3& r_com, const Vec3& a_com, double mass, const Vec3& l_dot,
                     const TerrainPlane& plane, Vec3& f_r, Vec3& m_r) {
  const Vec3 g(0.0, 0.0, -kGravity);
  f_r = mass * (a_com - g);
  m_r = mass * (r_com - plane.point).cross(a_com - g) + l_dot;
}

// Edge offset re-anchored to the plane point, so the multiplied-through form
// can work with moments about that point: p x + q y + r on world xy equals
// p x' + q y' + r_shift on anchor-relative xy.
double shifted_offset(const Vec3& d, const TerrainPlane& plane) {
  return d.z() + d.x() * plane.point.x() + d.y() * plane.point.y();
}

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew monotone chain, strict turns, CCW output. Collinear inputs collapse
// to the two extreme points.
std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) { return (a - b).norm() < 1e-9; }),
            pts.end());
  const int n = static_cast<int>(pts.size());
  if (n < 3) return pts;
  std::vector<Vec2> hull(2 * n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= kHullTol) --k;
    hull[k++] = pts[i];
  }
  const int lower = k + 1;
  for (int i = n - 2; i >= 0; --i) {
    while (k >= lower && cross2(hull[k - 2], hull[k - 1], pts[i]) <= kHullTol) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

GravitoInertialWrench gravito_inertial_wrench(const Vec3& r_com, const Vec3& a_com, double mass,
                                              const Vec3& gravity, const Vec3& l_dot) {
  if (!(mass > 0.0)) throw std::invalid_argument("gravito_inertial_wrench: mass must be positive");
  GravitoInertialWrench w;
  w.mass = mass;
  w.gravity = gravity;
  w.l_dot = l_dot;
  w.f_gi = mass * (gravity - a_com);
  w.m_gi = mass * r_com.cross(gravity - a_com) - l_dot;
  return w;
}

Vec3 zmp_point(const GravitoInertialWrench& w, const Vec3& normal) {
  const double denom = normal.dot(w.f_gi);
  if (denom >= -kPressTol * std::max(1.0, w.mass * kGravity)) {
    throw DegenerateContactError("zmp_point: contact is not pressing");
  }
  return normal.cross(w.m_gi) / denom;
}

Vec3 zmp_world(const Vec3& r_com, const Vec3& a_com, double mass, const Vec3& l_dot,
               const TerrainPlane& plane) {
  const GravitoInertialWrench w =
      gravito_inertial_wrench(r_com - plane.point, a_com, mass, Vec3(0.0, 0.0, -kGravity), l_dot);
  return plane.point + zmp_point(w, plane.normal);
}

double zmp_edge_slack(const Vec3& d, const Vec3& r_com, const Vec3& a_com, double mass,
                      const Vec3& l_dot, const TerrainPlane& plane) {
  Vec3 f_r, m_r;
  reaction_wrench(r_com, a_com, mass, l_dot, plane, f_r, m_r);
  const Vec3 pq(d.x(), d.y(), 0.0);
  return pq.dot(plane.normal.cross(m_r)) + shifted_offset(d, plane) * plane.normal.dot(f_r);
}

SupportPolygonEdges support_polygon(double t, const std::vector<Vec3>& contacts_world,
                                    const TerrainPlane& plane, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("support_polygon: eps must be positive");
  SupportPolygonEdges out;
  out.time = t;
  std::vector<Vec2> pts;
  pts.reserve(contacts_world.size());
  for (const Vec3& c : contacts_world) pts.push_back(plane.project(c).head<2>());

  std::vector<Vec2> hull = convex_hull(std::move(pts));
  if (hull.empty()) {
    out.full_flight = true;
    return out;
  }
  if (hull.size() == 1) {
    const Vec2 c = hull[0];
    out.hull = {c + Vec2(-eps, -eps), c + Vec2(eps, -eps), c + Vec2(eps, eps),
                c + Vec2(-eps, eps)};
    out.edges = {Vec3(1.0, 0.0, eps - c.x()), Vec3(-1.0, 0.0, eps + c.x()),
                 Vec3(0.0, 1.0, eps - c.y()), Vec3(0.0, -1.0, eps + c.y())};
    return out;
  }
  if (hull.size() == 2) {
    const Vec2 a = hull[0];
    const Vec2 b = hull[1];
    const Vec2 u = (b - a).normalized();
    const Vec2 n2(-u.y(), u.x());
    out.hull = {a, b};
    out.edges = {Vec3(n2.x(), n2.y(), eps - n2.dot(a)),
                 Vec3(-n2.x(), -n2.y(), eps + n2.dot(a))};
    return out;
  }
  out.hull = hull;
  out.edges.reserve(hull.size());
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const Vec2 u = (b - a).normalized();
    const Vec2 n2(-u.y(), u.x());  // interior is left of a CCW edge
    out.edges.emplace_back(n2.x(), n2.y(), -n2.dot(a));
  }
  return out;
}

std::vector<Vec3> planned_contact_points(double t,
                                         const std::array<const WheelPlan*, kNumLegs>& wheels,
                                         const RobotState& state) {
  std::vector<Vec3> out;
  out.reserve(kNumLegs);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const WheelPlan* plan = wheels[leg];
    if (plan == nullptr || plan->trajectory.empty()) {
      if (state.contact[leg]) out.push_back(state.wheel_pos[leg]);
      continue;
    }
    const SegmentSequence& traj = plan->trajectory;
    const double tc = std::clamp(t, traj.t_begin(), traj.t_end());
    const bool in_contact =
        std::holds_alternative<ContactSegment>(traj[traj.segment_index(tc)]);
    if (in_contact) out.push_back(plan->eval_world(tc).position);
  }
  return out;
}

void BaseToConfig::validate() const {
  const double weights[] = {w_acc_lin, w_acc_ang, w_vel,     w_yaw_rate, w_pose_xy, w_pose_yaw,
                            w_height,  w_attitude, w_pre_pos, w_pre_vel,  w_pre_acc};
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("BaseToConfig: weights must be nonnegative");
  }
  if (num_segments < 1) throw std::invalid_argument("BaseToConfig: need at least one segment");
  if (num_samples < 2 * num_segments) {
    throw std::invalid_argument("BaseToConfig: need at least two samples per segment");
  }
  if (!(eps_support > 0.0)) throw std::invalid_argument("BaseToConfig: eps_support must be positive");
  if (max_sqp_iterations < 1) throw std::invalid_argument("BaseToConfig: need an SQP iteration");
  if (!(rho > 0.0)) throw std::invalid_argument("BaseToConfig: rho must be positive");
}

VecX stack_base(const BaseTrajectory& traj) {
  const int k = static_cast<int>(traj.com.size());
  if (k == 0 || traj.angles.size() != traj.com.size()) {
    throw std::invalid_argument("stack_base: com and angle sequences must match");
  }
  VecX xi(36 * k);
  for (int j = 0; j < k; ++j) {
    xi.segment<18>(18 * j) = std::get<AirSegment>(traj.com[j]).stacked();
    xi.segment<18>(18 * (k + j)) = std::get<AirSegment>(traj.angles[j]).stacked();
  }
  return xi;
}

BaseTrajectory unstack_base(const VecX& xi, double t0, double t_f, int num_segments) {
  if (xi.size() != 36 * num_segments) throw std::invalid_argument("unstack_base: size mismatch");
  const double dt = t_f / num_segments;
  std::vector<Segment> com, ang;
  for (int j = 0; j < num_segments; ++j) {
    const auto c = xi.segment<18>(18 * j);
    const auto a = xi.segment<18>(18 * (num_segments + j));
    com.emplace_back(AirSegment(c.segment<6>(0), c.segment<6>(6), c.segment<6>(12),
                                t0 + j * dt, dt));
    ang.emplace_back(AirSegment(a.segment<6>(0), a.segment<6>(6), a.segment<6>(12),
                                t0 + j * dt, dt));
  }
  BaseTrajectory out;
  out.com = SegmentSequence(std::move(com));
  out.angles = SegmentSequence(std::move(ang));
  return out;
}

BaseQp assemble_base(const RobotState& state, const BaseReference& ref, double t_f,
                     const std::vector<ZmpSample>& samples, const TerrainPlane& plane,
                     const BaseToConfig& cfg, const RobotModel& model,
                     const BaseTrajectory* prev) {
  cfg.validate();
  if (!(t_f > 0.0)) throw std::invalid_argument("assemble_base: horizon must be positive");

  BaseQp qp;
  qp.t0 = state.time;
  qp.t_f = t_f;
  qp.num_segments = cfg.num_segments;
  qp.mass = model.mass;
  qp.l_dot = cfg.l_dot;
  qp.g_min = cfg.g_min;
  qp.plane = plane;
  qp.samples = samples;

  const Layout lay = layout_of(qp);
  QpAccumulator acc(lay.num_vars());

  for (int j = 0; j < cfg.num_segments; ++j) {
    acc.Q.block(18 * j, 18 * j, 18, 18) +=
        accel_hessian_air(lay.dt, Vec3::Constant(cfg.w_acc_lin));
    const int off = lay.angle_offset() + 18 * j;
    acc.Q.block(off, off, 18, 18) += accel_hessian_air(lay.dt, Vec3::Constant(cfg.w_acc_ang));
  }

  const Vec3& n = plane.normal;
  for (int k = 1; k <= cfg.num_samples; ++k) {
    const double dt_k = k * t_f / cfg.num_samples;
    const double t_k = qp.t0 + dt_k;
    const ReferencePose pose = advance_reference(ref.pose, ref.cmd, dt_k);
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    const Vec2 v_world(c * ref.cmd.v_ref.x() - s * ref.cmd.v_ref.y(),
                       s * ref.cmd.v_ref.x() + c * ref.cmd.v_ref.y());

    const MatX pos = lay.rows(false, t_k, 0);
    const MatX vel = lay.rows(false, t_k, 1);
    const MatX apos = lay.rows(true, t_k, 0);
    const MatX avel = lay.rows(true, t_k, 1);

    acc.cost_row(vel.row(0).transpose(), v_world.x(), cfg.w_vel);
    acc.cost_row(vel.row(1).transpose(), v_world.y(), cfg.w_vel);
    acc.cost_row(avel.row(0).transpose(), ref.cmd.omega_ref, cfg.w_yaw_rate);
    acc.cost_row(pos.row(0).transpose(), pose.xy.x(), cfg.w_pose_xy);
    acc.cost_row(pos.row(1).transpose(), pose.xy.y(), cfg.w_pose_xy);
    acc.cost_row(apos.row(0).transpose(), pose.yaw, cfg.w_pose_yaw);
    acc.cost_row(pos.row(2).transpose(), plane_z(plane, pose.xy) + ref.height, cfg.w_height);
    const double pitch_ref = std::atan2(n.x() * c + n.y() * s, n.z());
    const double roll_ref = std::atan2(n.x() * s - n.y() * c, n.z());
    acc.cost_row(apos.row(1).transpose(), pitch_ref, cfg.w_attitude);
    acc.cost_row(apos.row(2).transpose(), roll_ref, cfg.w_attitude);
  }

  if (prev != nullptr && !prev->com.empty()) {
    const double t_pre = qp.t0 - prev->t0();
    const SampledMotion pc = shift_previous(prev->com, t_pre, cfg.num_samples);
    const SampledMotion pa = shift_previous(prev->angles, t_pre, cfg.num_samples);
    for (int i = 0; i < cfg.num_samples; ++i) {
      const double t = qp.t0 + pc.t_local[i];
      for (bool angles : {false, true}) {
        const SampledMotion& sm = angles ? pa : pc;
        const MatX pos = lay.rows(angles, t, 0);
        const MatX vel = lay.rows(angles, t, 1);
        const MatX a = lay.rows(angles, t, 2);
        for (int ax = 0; ax < 3; ++ax) {
          acc.cost_row(pos.row(ax).transpose(), sm.samples[i].position(ax), cfg.w_pre_pos);
          acc.cost_row(vel.row(ax).transpose(), sm.samples[i].velocity(ax), cfg.w_pre_vel);
          acc.cost_row(a.row(ax).transpose(), sm.samples[i].acceleration(ax), cfg.w_pre_acc);
        }
      }
    }
  }

  const MatX p0 = lay.rows(false, qp.t0, 0);
  const MatX v0 = lay.rows(false, qp.t0, 1);
  const MatX a0 = lay.rows(false, qp.t0, 2);
  const MatX ap0 = lay.rows(true, qp.t0, 0);
  const MatX av0 = lay.rows(true, qp.t0, 1);
  const MatX aa0 = lay.rows(true, qp.t0, 2);
  for (int ax = 0; ax < 3; ++ax) {
    acc.eq(p0.row(ax).transpose(), state.r_com(ax));
    acc.eq(v0.row(ax).transpose(), state.v_com(ax));
    acc.eq(a0.row(ax).transpose(), state.a_com(ax));
    acc.eq(ap0.row(ax).transpose(), state.base_angles(ax));
    acc.eq(av0.row(ax).transpose(), state.base_rates(ax));
    acc.eq(aa0.row(ax).transpose(), state.base_angle_acc(ax));
  }

  for (int j = 1; j < cfg.num_segments; ++j) {
    for (bool angles : {false, true}) {
      const int off = (angles ? lay.angle_offset() : 0);
      for (int deriv = 0; deriv < 3; ++deriv) {
        const Eigen::Matrix<double, 3, 18> left = air_time_matrix(lay.dt, deriv);
        const Eigen::Matrix<double, 3, 18> right = air_time_matrix(0.0, deriv);
        for (int ax = 0; ax < 3; ++ax) {
          VecX row = VecX::Zero(lay.num_vars());
          row.segment<18>(off + 18 * (j - 1)) = left.row(ax).transpose();
          row.segment<18>(off + 18 * j) -= right.row(ax).transpose();
          acc.eq(row, 0.0);
        }
      }
    }
  }

  qp.fixed = acc.finish(cfg.rho);
  return qp;
}

namespace {

// Shared body of the zmp_constraint_rows overloads. bar_at supplies the
// anchor COM position and acceleration of a sample; the edge slack is
// bilinear in them, so the linearized rows are exact at any anchor,
// whether it comes from a coefficient iterate or from an older trajectory.
template <typename BarAt>
void append_zmp_rows(const BaseQp& qp, const Layout& lay, BarAt&& bar_at, MatX& D, VecX& f) {
  const Vec3& n = qp.plane.normal;
  const Vec3 g(0.0, 0.0, -kGravity);

  std::vector<VecX> rows;
  std::vector<double> bounds;
  for (const ZmpSample& sample : qp.samples) {
    if (sample.support.full_flight) continue;
    const MatX pos = lay.rows(false, sample.t, 0);
    const MatX a = lay.rows(false, sample.t, 2);
    Vec3 r_bar, a_bar;
    bar_at(sample.t, pos, a, r_bar, a_bar);

    // Pressing row n . (a - g) >= g_min, exact.
    {
      VecX row = -(n.transpose() * a).transpose();
      rows.push_back(row);
      bounds.push_back(-(qp.g_min + n.dot(g)));
    }

    Vec3 f_bar, m_bar;
    reaction_wrench(r_bar, a_bar, qp.mass, qp.l_dot, qp.plane, f_bar, m_bar);
    for (const Vec3& d : sample.support.edges) {
      const Vec3 pq(d.x(), d.y(), 0.0);
      const double r_shift = shifted_offset(d, qp.plane);
      // Slack gradients in the sample's r and a: the moment part is
      // m (dr x (a - g) + r x da) pulled through pq . (n x .).
      const Eigen::RowVector3d nxpq = pq.transpose() * skew(n);
      const Eigen::RowVector3d j_r = nxpq * (-qp.mass * skew(a_bar - g));
      const Eigen::RowVector3d j_a = nxpq * (qp.mass * skew(r_bar - qp.plane.point)) +
                                     r_shift * qp.mass * n.transpose();
      const double slack_bar = pq.dot(n.cross(m_bar)) + r_shift * n.dot(f_bar);
      // slack_bar + j_r (r - r_bar) + j_a (a - a_bar) >= 0
      rows.push_back(-(j_r * pos + j_a * a).transpose());
      bounds.push_back(slack_bar - j_r.dot(r_bar) - j_a.dot(a_bar));
    }
  }

  const int base = static_cast<int>(D.rows());
  D.conservativeResize(base + static_cast<int>(rows.size()), lay.num_vars());
  f.conservativeResize(base + static_cast<int>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    D.row(base + static_cast<int>(i)) = rows[i].transpose();
    f(base + static_cast<int>(i)) = bounds[i];
  }
}

}  // namespace

void zmp_constraint_rows(const BaseQp& qp, const VecX& xi_bar, MatX& D, VecX& f) {
  const Layout lay = layout_of(qp);
  if (xi_bar.size() != lay.num_vars()) {
    throw std::invalid_argument("zmp_constraint_rows: iterate size mismatch");
  }
  append_zmp_rows(
      qp, lay,
      [&](double, const MatX& pos, const MatX& a, Vec3& r_bar, Vec3& a_bar) {
        r_bar = pos * xi_bar;
        a_bar = a * xi_bar;
      },
      D, f);
}

void zmp_constraint_rows(const BaseQp& qp, const BaseTrajectory& about, MatX& D, VecX& f) {
  const Layout lay = layout_of(qp);
  append_zmp_rows(
      qp, lay,
      [&](double t, const MatX&, const MatX&, Vec3& r_bar, Vec3& a_bar) {
        const Motion com = about.com_at(std::clamp(t, about.t0(), about.t_end()));
        r_bar = com.position;
        a_bar = com.acceleration;
      },
      D, f);
}

ZmpEvaluation evaluate_zmp(const BaseQp& qp, const VecX& xi) {
  const Layout lay = layout_of(qp);
  ZmpEvaluation out;
  out.worst_margin = std::numeric_limits<double>::infinity();
  out.worst_pressing = std::numeric_limits<double>::infinity();
  const Vec3& n = qp.plane.normal;
  const Vec3 g(0.0, 0.0, -kGravity);

  for (const ZmpSample& sample : qp.samples) {
    if (sample.support.full_flight) continue;
    const Vec3 r = lay.rows(false, sample.t, 0) * xi;
    const Vec3 a = lay.rows(false, sample.t, 2) * xi;
    const double pressing = n.dot(a - g) - qp.g_min;
    out.worst_pressing = std::min(out.worst_pressing, pressing);
    if (pressing < -kPressTol) out.violation += qp.mass * (-pressing);

    for (const Vec3& d : sample.support.edges) {
      const double slack = zmp_edge_slack(d, r, a, qp.mass, qp.l_dot, qp.plane);
      if (slack < 0.0) out.violation -= slack;
    }
    if (n.dot(a - g) <= kPressTol) {
      out.degenerate = true;
      continue;
    }
    const Vec3 z = zmp_world(r, a, qp.mass, qp.l_dot, qp.plane);
    for (const Vec3& d : sample.support.edges) {
      const double margin = d.x() * z.x() + d.y() * z.y() + d.z();
      out.worst_margin = std::min(out.worst_margin, margin);
    }
  }
  return out;
}

namespace {

// Merit of an iterate: the quadratic objective plus the penalized nonlinear
// constraint violation. The dropped constant target terms cancel between
// iterates of the same problem.
double merit(const BaseQp& qp, const VecX& xi, double penalty) {
  const double obj = 0.5 * xi.dot(qp.fixed.Q * xi) + qp.fixed.c.dot(xi);
  return obj + penalty * evaluate_zmp(qp, xi).violation;
}

}  // namespace

BaseSolve sqp_solve(const BaseQp& qp, const BaseTrajectory* init, const BaseToConfig& cfg,
                    QpSolver& solver, std::span<const int> warm) {
  BaseSolve out;
  const Layout lay = layout_of(qp);
  std::vector<int> hint(warm.begin(), warm.end());

  // First QP: ZMP rows anchored at the supplied plan when there is one,
  // none otherwise. Its solution is accepted outright as the first iterate,
  // so a replan continues the Gauss-Newton sequence of the call that
  // produced the plan instead of restarting from the unconstrained seed.
  QpProblem p = qp.fixed;
  if (init != nullptr) zmp_constraint_rows(qp, *init, p.D, p.f);
  QpSolution sol = solver.solve_warm(p, hint);
  if (sol.status != QpStatus::kOptimal && init != nullptr) {
    // Inherited rows can turn inconsistent after a jump in the measured
    // state; fall back to the unconstrained seed rather than give up.
    out.report.qp_iterations += sol.iterations;
    p.D.resize(0, lay.num_vars());
    p.f.resize(0);
    sol = solver.solve(p);
  }
  out.report.qp_iterations += sol.iterations;
  if (sol.status != QpStatus::kOptimal) {
    out.report.status = sol.status;
    return out;
  }
  hint = sol.active_set;
  out.report.active_set = sol.active_set;

  VecX xi = sol.x;
  double phi = merit(qp, xi, cfg.merit_penalty);
  out.report.merit.push_back(phi);

  for (int iter = 0; iter < cfg.max_sqp_iterations; ++iter) {
    p.D.resize(0, lay.num_vars());
    p.f.resize(0);
    zmp_constraint_rows(qp, xi, p.D, p.f);

    const QpSolution step_sol = solver.solve_warm(p, hint);
    out.report.qp_iterations += step_sol.iterations;
    if (step_sol.status != QpStatus::kOptimal) {
      out.report.status = step_sol.status;
      out.report.sqp_iterations = iter + 1;
      return out;
    }
    hint = step_sol.active_set;
    out.report.active_set = step_sol.active_set;

    const VecX dx = step_sol.x - xi;
    const double step = dx.lpNorm<Eigen::Infinity>();
    if (step < cfg.step_tol) {
      xi = step_sol.x;
      out.report.sqp_iterations = iter + 1;
      break;
    }

    bool accepted = false;
    for (double alpha = 1.0; alpha > 0.01; alpha *= 0.5) {
      const VecX trial = xi + alpha * dx;
      const double phi_trial = merit(qp, trial, cfg.merit_penalty);
      if (phi_trial <= phi + 1e-12) {
        xi = trial;
        phi = phi_trial;
        accepted = true;
        break;
      }
    }
    out.report.sqp_iterations = iter + 1;
    if (!accepted) break;
    out.report.merit.push_back(phi);
  }

  const ZmpEvaluation cert = evaluate_zmp(qp, xi);
  out.report.worst_margin = cert.worst_margin;
  out.report.worst_pressing = cert.worst_pressing;
  const bool feasible = !cert.degenerate && cert.worst_margin >= -cfg.margin_tol &&
                        cert.worst_pressing >= -cfg.margin_tol;
  out.report.status = feasible ? QpStatus::kOptimal : QpStatus::kMaxIterations;

  BaseTrajectory traj = unstack_base(xi, qp.t0, qp.t_f, qp.num_segments);
  out.report.continuity_residual =
      std::max(continuity_residual(traj.com), continuity_residual(traj.angles));
  out.trajectory = std::move(traj);
  return out;
}

BasePlanner::BasePlanner(BaseToConfig cfg, RobotModel model)
    : cfg_(std::move(cfg)), model_(std::move(model)) {
  cfg_.validate();
}

void BasePlanner::reset() {
  prev_.reset();
  warm_.clear();
}

BasePlanner::Result BasePlanner::replan(const RobotState& state, const VelocityCommand& cmd,
                                        const ReferencePose& pose, const GaitPattern& gait,
                                        const TerrainPlane& terrain,
                                        const std::array<const WheelPlan*, kNumLegs>& wheels) {
  Result out;
  const double t_f = gait.stride_duration;

  std::vector<ZmpSample> samples;
  samples.reserve(cfg_.num_samples);
  for (int k = 1; k <= cfg_.num_samples; ++k) {
    const double t_k = state.time + k * t_f / cfg_.num_samples;
    ZmpSample s;
    s.t = t_k;
    s.support = support_polygon(t_k, planned_contact_points(t_k, wheels, state), terrain,
                                cfg_.eps_support);
    samples.push_back(std::move(s));
  }

  const BaseTrajectory* prev = nullptr;
  if (prev_.has_value()) {
    const double t_pre = state.time - prev_->t0();
    if (t_pre >= 0.0 && t_pre < prev_->t_end() - prev_->t0()) prev = &*prev_;
  }

  BaseReference ref;
  ref.pose = pose;
  ref.cmd = cmd;
  ref.height = model_.h_ref;
  const BaseQp qp = assemble_base(state, ref, t_f, samples, terrain, cfg_, model_, prev);

  BaseSolve solved = sqp_solve(qp, prev, cfg_, solver_, warm_);
  out.report = std::move(solved.report);
  if (solved.trajectory.has_value()) {
    // Keep the final iterate even when it did not certify: the next call
    // linearizes about it, so repeated replans of a hard problem keep
    // refining instead of re-stalling from the seed. Whether an uncertified
    // plan may be executed is the caller's call, via report.status.
    prev_ = *solved.trajectory;
    warm_ = out.report.active_set;
  }
  out.plan = std::move(solved.trajectory);
  return out;
}

}  // namespace rollplan
