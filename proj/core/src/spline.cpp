#include "rollplan/spline.hpp"

#include <cmath>
#include <stdexcept>

namespace rollplan {
namespace {

constexpr double kBoundaryTol = 1e-9;

// Integrals int_0^tau s^k cos(w s) ds and int_0^tau s^k sin(w s) ds for
// k = 0..2. The closed forms contain 1/w^3 terms that cancel almost exactly
// for small |w*tau|, losing up to ~8 significant digits near w*tau ~ 1e-4.
// Below |w*tau| = 0.1 we therefore switch to the power series
//   int s^k cos = tau^{k+1} * sum_j (-1)^j x^{2j}   / ((2j)!  (k+1+2j))
//   int s^k sin = tau^{k+1} * sum_j (-1)^j x^{2j+1} / ((2j+1)!(k+2+2j))
// with x = w*tau. Five series terms keep the truncation error below 1e-16
// relative at the switch point, so both branches agree to full precision
// there.
struct TrigPolyIntegrals {
  double c0, c1, c2;  // s^k cos
  double s0, s1, s2;  // s^k sin
};

TrigPolyIntegrals trig_poly_integrals(double omega, double tau) {
  const double x = omega * tau;
  TrigPolyIntegrals r{};
  if (std::abs(x) < 0.1) {
    double cos_sum[3] = {0.0, 0.0, 0.0};
    double sin_sum[3] = {0.0, 0.0, 0.0};
    double fact_even = 1.0;  // (2j)!
    double fact_odd = 1.0;   // (2j+1)!
    double x_even = 1.0;     // x^{2j}
    double sign = 1.0;
    for (int j = 0; j <= 4; ++j) {
      if (j > 0) {
        fact_even *= (2 * j - 1) * (2 * j);
        fact_odd *= (2 * j) * (2 * j + 1);
        x_even *= x * x;
        sign = -sign;
      }
      const double x_odd = x_even * x;
      for (int k = 0; k <= 2; ++k) {
        cos_sum[k] += sign * x_even / (fact_even * (k + 1 + 2 * j));
        sin_sum[k] += sign * x_odd / (fact_odd * (k + 2 + 2 * j));
      }
    }
    double tau_pow = tau;
    r.c0 = tau_pow * cos_sum[0];
    r.s0 = tau_pow * sin_sum[0];
    tau_pow *= tau;
    r.c1 = tau_pow * cos_sum[1];
    r.s1 = tau_pow * sin_sum[1];
    tau_pow *= tau;
    r.c2 = tau_pow * cos_sum[2];
    r.s2 = tau_pow * sin_sum[2];
    return r;
  }
  const double w = omega;
  const double w2 = w * w;
  const double w3 = w2 * w;
  const double sx = std::sin(x);
  const double cx = std::cos(x);
  r.c0 = sx / w;
  r.c1 = (cx - 1.0) / w2 + tau * sx / w;
  r.c2 = 2.0 * tau * cx / w2 + (tau * tau / w - 2.0 / w3) * sx;
  r.s0 = (1.0 - cx) / w;
  r.s1 = sx / w2 - tau * cx / w;
  r.s2 = 2.0 * tau * sx / w2 - (tau * tau / w - 2.0 / w3) * cx - 2.0 / w3;
  return r;
}

double local_time(double t, double t_start, double duration, const char* what) {
  const double tau = t - t_start;
  if (tau < -kBoundaryTol || tau > duration + kBoundaryTol) {
    throw std::out_of_range(std::string(what) + ": eval time outside segment interval");
  }
  return std::clamp(tau, 0.0, duration);
}

}  // namespace

Eigen::Matrix<double, 6, 1> quintic_basis(double t) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  return (Eigen::Matrix<double, 6, 1>() << t5, t4, t3, t2, t, 1.0).finished();
}

Eigen::Matrix<double, 6, 1> quintic_basis_d1(double t) {
  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
  return (Eigen::Matrix<double, 6, 1>() << 5.0 * t4, 4.0 * t3, 3.0 * t2, 2.0 * t, 1.0, 0.0)
      .finished();
}

Eigen::Matrix<double, 6, 1> quintic_basis_d2(double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (Eigen::Matrix<double, 6, 1>() << 20.0 * t3, 12.0 * t2, 6.0 * t, 2.0, 0.0, 0.0)
      .finished();
}

AirSegment::AirSegment(const QuinticCoeffs& cx, const QuinticCoeffs& cy, const QuinticCoeffs& cz,
                       double t_start, double duration)
    : cx_(cx), cy_(cy), cz_(cz), t_start_(t_start), duration_(duration) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("AirSegment: duration must be positive");
  }
}

Motion AirSegment::eval(double t) const {
  const double tau = local_time(t, t_start_, duration_, "AirSegment");
  const auto b0 = quintic_basis(tau);
  const auto b1 = quintic_basis_d1(tau);
  const auto b2 = quintic_basis_d2(tau);
  Motion m;
  m.position = Vec3(cx_.dot(b0), cy_.dot(b0), cz_.dot(b0));
  m.velocity = Vec3(cx_.dot(b1), cy_.dot(b1), cz_.dot(b1));
  m.acceleration = Vec3(cx_.dot(b2), cy_.dot(b2), cz_.dot(b2));
  return m;
}

const QuinticCoeffs& AirSegment::coeffs(int axis) const {
  switch (axis) {
    case 0: return cx_;
    case 1: return cy_;
    case 2: return cz_;
    default: throw std::invalid_argument("AirSegment: axis must be 0..2");
  }
}

Eigen::Matrix<double, 18, 1> AirSegment::stacked() const {
  Eigen::Matrix<double, 18, 1> xi;
  xi << cx_, cy_, cz_;
  return xi;
}

ContactSegment::ContactSegment(double a0, double a1, double a2, double x0, double y0,
                               double omega_ref, double t_start, double duration)
    : a0_(a0), a1_(a1), a2_(a2), x0_(x0), y0_(y0), omega_ref_(omega_ref), t_start_(t_start),
      duration_(duration) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("ContactSegment: duration must be positive");
  }
}

Motion ContactSegment::eval(double t) const {
  const double tau = local_time(t, t_start_, duration_, "ContactSegment");
  const Eigen::Matrix<double, 5, 1> xi = stacked();
  Motion m;
  m.position = contact_time_matrix(omega_ref_, tau, 0) * xi;
  m.velocity = contact_time_matrix(omega_ref_, tau, 1) * xi;
  m.acceleration = contact_time_matrix(omega_ref_, tau, 2) * xi;
  return m;
}

Eigen::Matrix<double, 5, 1> ContactSegment::stacked() const {
  return (Eigen::Matrix<double, 5, 1>() << a0_, a1_, a2_, x0_, y0_).finished();
}

double segment_t_start(const Segment& s) {
  return std::visit([](const auto& seg) { return seg.t_start(); }, s);
}

double segment_duration(const Segment& s) {
  return std::visit([](const auto& seg) { return seg.duration(); }, s);
}

int segment_num_vars(const Segment& s) {
  return std::holds_alternative<ContactSegment>(s) ? ContactSegment::kNumVars
                                                   : AirSegment::kNumVars;
}

SegmentSequence::SegmentSequence(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) {
    throw std::invalid_argument("SegmentSequence: needs at least one segment");
  }
  for (std::size_t i = 1; i < segments_.size(); ++i) {
    const double prev_end = segment_t_start(segments_[i - 1]) + segment_duration(segments_[i - 1]);
    const double next_start = segment_t_start(segments_[i]);
    if (std::abs(prev_end - next_start) > kBoundaryTol) {
      throw std::invalid_argument("SegmentSequence: segments do not tile the horizon");
    }
  }
}

double SegmentSequence::t_begin() const {
  if (segments_.empty()) throw std::logic_error("SegmentSequence: empty");
  return segment_t_start(segments_.front());
}

double SegmentSequence::t_end() const {
  if (segments_.empty()) throw std::logic_error("SegmentSequence: empty");
  return segment_t_start(segments_.back()) + segment_duration(segments_.back());
}

std::size_t SegmentSequence::segment_index(double t) const {
  if (segments_.empty()) throw std::logic_error("SegmentSequence: empty");
  if (t < t_begin() - kBoundaryTol || t > t_end() + kBoundaryTol) {
    throw std::out_of_range("SegmentSequence: eval time outside horizon");
  }
  for (std::size_t i = segments_.size(); i-- > 0;) {
    if (t >= segment_t_start(segments_[i])) return i;
  }
  return 0;
}

Motion SegmentSequence::eval(double t) const {
  const std::size_t i = segment_index(t);
  return std::visit([t](const auto& seg) { return seg.eval(t); }, segments_[i]);
}

Eigen::Matrix<double, 3, 18> air_time_matrix(double tau, int deriv) {
  Eigen::Matrix<double, 6, 1> b;
  switch (deriv) {
    case 0: b = quintic_basis(tau); break;
    case 1: b = quintic_basis_d1(tau); break;
    case 2: b = quintic_basis_d2(tau); break;
    default: throw std::invalid_argument("air_time_matrix: deriv must be 0..2");
  }
  Eigen::Matrix<double, 3, 18> T = Eigen::Matrix<double, 3, 18>::Zero();
  T.block<1, 6>(0, 0) = b.transpose();
  T.block<1, 6>(1, 6) = b.transpose();
  T.block<1, 6>(2, 12) = b.transpose();
  return T;
}

Eigen::Matrix<double, 3, 5> contact_time_matrix(double omega_ref, double tau, int deriv) {
  Eigen::Matrix<double, 3, 5> T = Eigen::Matrix<double, 3, 5>::Zero();
  const double w = omega_ref;
  const double phi = w * tau;
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  switch (deriv) {
    case 0: {
      const TrigPolyIntegrals I = trig_poly_integrals(w, tau);
      T(0, 0) = I.c0; T(0, 1) = I.c1; T(0, 2) = I.c2; T(0, 3) = 1.0;
      T(1, 0) = I.s0; T(1, 1) = I.s1; T(1, 2) = I.s2; T(1, 4) = 1.0;
      break;
    }
    case 1: {
      T(0, 0) = c; T(0, 1) = tau * c; T(0, 2) = tau * tau * c;
      T(1, 0) = s; T(1, 1) = tau * s; T(1, 2) = tau * tau * s;
      break;
    }
    case 2: {
      T(0, 0) = -w * s;
      T(0, 1) = -w * tau * s + c;
      T(0, 2) = -w * tau * tau * s + 2.0 * tau * c;
      T(1, 0) = w * c;
      T(1, 1) = w * tau * c + s;
      T(1, 2) = w * tau * tau * c + 2.0 * tau * s;
      break;
    }
    default: throw std::invalid_argument("contact_time_matrix: deriv must be 0..2");
  }
  return T;
}

Eigen::Matrix<double, 18, 18> accel_hessian_air(double duration, const Vec3& weight) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("accel_hessian_air: duration must be positive");
  }
  // E(i,j) = int_0^T d2(s^{5-i}) d2(s^{5-j}) ds, nonzero for powers >= 2.
  Eigen::Matrix<double, 6, 6> E = Eigen::Matrix<double, 6, 6>::Zero();
  for (int i = 0; i < 6; ++i) {
    const int pi = 5 - i;
    if (pi < 2) continue;
    const double di = static_cast<double>(pi) * (pi - 1);
    for (int j = 0; j < 6; ++j) {
      const int pj = 5 - j;
      if (pj < 2) continue;
      const double dj = static_cast<double>(pj) * (pj - 1);
      const int pw = pi + pj - 4;
      E(i, j) = di * dj * std::pow(duration, pw + 1) / (pw + 1);
    }
  }
  Eigen::Matrix<double, 18, 18> Q = Eigen::Matrix<double, 18, 18>::Zero();
  for (int a = 0; a < 3; ++a) {
    Q.block<6, 6>(6 * a, 6 * a) = 2.0 * weight[a] * E;
  }
  return Q;
}

Eigen::Matrix<double, 5, 5> accel_hessian_contact(double duration, double omega_ref,
                                                  double weight) {
  if (!(duration > 0.0)) {
    throw std::invalid_argument("accel_hessian_contact: duration must be positive");
  }
  // |accel|^2 = vxdot^2 + w^2 vx^2 because the rotation is orthonormal, so
  // the quadratic form in (a0, a1, a2) is polynomial in the duration and the
  // initial position entries never appear.
  const double T = duration;
  const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
  Eigen::Matrix3d M;
  M << 0.0, 0.0, 0.0,
       0.0, T, T2,
       0.0, T2, 4.0 * T3 / 3.0;
  const double w2 = omega_ref * omega_ref;
  Eigen::Matrix3d Mv;
  Mv << T, T2 / 2.0, T3 / 3.0,
        T2 / 2.0, T3 / 3.0, T4 / 4.0,
        T3 / 3.0, T4 / 4.0, T5 / 5.0;
  Eigen::Matrix<double, 5, 5> Q = Eigen::Matrix<double, 5, 5>::Zero();
  Q.topLeftCorner<3, 3>() = 2.0 * weight * (M + w2 * Mv);
  return Q;
}

}  // namespace rollplan
