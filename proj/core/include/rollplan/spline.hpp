#pragma once

#include <variant>
#include <vector>

#include "rollplan/types.hpp"

namespace rollplan {

// Polynomial coefficients are stored highest power first, so a quintic with
// coefficients c evaluates as c0*t^5 + c1*t^4 + ... + c5. All segments use
// local time: t_start is metadata for sequence lookup and eval(t) works on
// tau = t - t_start in [0, duration].
using QuinticCoeffs = Eigen::Matrix<double, 6, 1>;

Eigen::Matrix<double, 6, 1> quintic_basis(double t);
Eigen::Matrix<double, 6, 1> quintic_basis_d1(double t);
Eigen::Matrix<double, 6, 1> quintic_basis_d2(double t);

struct Motion {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
};

// Free-space segment: an independent quintic per axis, 18 coefficients total.
class AirSegment {
 public:
  static constexpr int kNumVars = 18;

  AirSegment(const QuinticCoeffs& cx, const QuinticCoeffs& cy, const QuinticCoeffs& cz,
             double t_start, double duration);

  Motion eval(double t) const;

  double t_start() const { return t_start_; }
  double duration() const { return duration_; }
  double t_end() const { return t_start_ + duration_; }
  const QuinticCoeffs& coeffs(int axis) const;

  // Stacked coefficient vector [cx; cy; cz], matching the QP variable layout.
  Eigen::Matrix<double, 18, 1> stacked() const;

 private:
  QuinticCoeffs cx_, cy_, cz_;
  double t_start_;
  double duration_;
};

// Rolling-contact segment. The wheel velocity before rotation is
// [vx(tau), 0, 0] with vx(tau) = a0 + a1*tau + a2*tau^2, and the rolling
// direction turns in the ground plane at the constant reference yaw rate, so
// the world-frame (frame W) velocity is Rz(omega_ref*tau) * [vx, 0, 0]. The
// position follows from the analytic integral of that product and stays at
// z = 0. Parameters are [a0, a1, a2, x0, y0] with (x0, y0) the position at
// tau = 0.
class ContactSegment {
 public:
  static constexpr int kNumVars = 5;

  ContactSegment(double a0, double a1, double a2, double x0, double y0, double omega_ref,
                 double t_start, double duration);

  Motion eval(double t) const;

  double t_start() const { return t_start_; }
  double duration() const { return duration_; }
  double t_end() const { return t_start_ + duration_; }
  double omega_ref() const { return omega_ref_; }
  double a0() const { return a0_; }
  double a1() const { return a1_; }
  double a2() const { return a2_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }

  Eigen::Matrix<double, 5, 1> stacked() const;

 private:
  double a0_, a1_, a2_, x0_, y0_;
  double omega_ref_;
  double t_start_;
  double duration_;
};

using Segment = std::variant<ContactSegment, AirSegment>;

double segment_t_start(const Segment& s);
double segment_duration(const Segment& s);
int segment_num_vars(const Segment& s);

// A trajectory made of consecutive segments. Segments must tile
// [t_begin, t_end] without gaps (1e-9 tolerance on the junction times).
class SegmentSequence {
 public:
  SegmentSequence() = default;
  explicit SegmentSequence(std::vector<Segment> segments);

  bool empty() const { return segments_.empty(); }
  std::size_t size() const { return segments_.size(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }
  const std::vector<Segment>& segments() const { return segments_; }

  double t_begin() const;
  double t_end() const;

  // Junction times belong to the later segment, so e.g. the acceleration at a
  // touch-down instant is the contact segment's.
  Motion eval(double t) const;
  std::size_t segment_index(double t) const;

 private:
  std::vector<Segment> segments_;
};

// Linear maps from segment parameters to position (deriv = 0), velocity (1)
// or acceleration (2) at local time tau.
Eigen::Matrix<double, 3, 18> air_time_matrix(double tau, int deriv);
Eigen::Matrix<double, 3, 5> contact_time_matrix(double omega_ref, double tau, int deriv);

// Hessians of the integrated squared acceleration: xi' * Q * xi equals
// 2 * integral_0^duration of accel' * W * accel. Air segments take a
// per-axis diagonal weight; contact segments take one scalar weight for the
// ground plane (the integrand is isotropic in xy, so the closed form is
// exact and trig-free).
Eigen::Matrix<double, 18, 18> accel_hessian_air(double duration, const Vec3& weight);
Eigen::Matrix<double, 5, 5> accel_hessian_contact(double duration, double omega_ref,
                                                  double weight);

}  // namespace rollplan
