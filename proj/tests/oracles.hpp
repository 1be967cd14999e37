#pragma once

// Independent numerical references for the tests. Everything here is written
// against the mathematical definitions, not against the library's closed
// forms, so agreement is meaningful.

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace testutil {

struct Quadrature {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Gauss-Legendre nodes and weights via Newton iteration on P_n.
inline Quadrature gauss_legendre(int n) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dpdx = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      dpdx = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dpdx;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dpdx * dpdx);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  return q;
}

inline double integrate_gl(const std::function<double(double)>& f, double a, double b,
                           int n = 64) {
  const Quadrature q = gauss_legendre(n);
  const double hw = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += q.weights[i] * f(mid + hw * q.nodes[i]);
  return hw * s;
}

inline Eigen::Vector3d integrate_gl_vec(const std::function<Eigen::Vector3d(double)>& f, double a,
                                        double b, int n = 64) {
  const Quadrature q = gauss_legendre(n);
  const double hw = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) s += q.weights[i] * f(mid + hw * q.nodes[i]);
  return hw * s;
}

inline double integrate_trapezoid(const std::function<double(double)>& f, double a, double b,
                                  int n) {
  const double h = (b - a) / n;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n; ++i) s += f(a + i * h);
  return s * h;
}

struct EnumeratedQp {
  bool feasible = false;
  Eigen::VectorXd x;
  double objective = 0.0;
  std::vector<int> active;  // inequality rows tight at the optimum
};

// Exhaustive reference for min ½xᵀQx + cᵀx s.t. Ax = b, Dx ≤ f. Every subset
// of inequalities is treated as equalities, the resulting KKT system solved,
// and candidates kept when primal feasible with nonnegative subset
// multipliers. Exponential in the row count, usable only at toy sizes.
inline EnumeratedQp enumerate_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                                 const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                 const Eigen::MatrixXd& D, const Eigen::VectorXd& f) {
  const int n = static_cast<int>(Q.rows());
  const int me = static_cast<int>(A.rows());
  const int mi = static_cast<int>(D.rows());
  EnumeratedQp best;

  for (unsigned mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> subset;
    for (int j = 0; j < mi; ++j) {
      if (mask & (1u << j)) subset.push_back(j);
    }
    const int ns = static_cast<int>(subset.size());
    if (me + ns > n) continue;

    const int dim = n + me + ns;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs(dim);
    K.topLeftCorner(n, n) = Q;
    if (me > 0) {
      K.block(n, 0, me, n) = A;
      K.block(0, n, n, me) = A.transpose();
    }
    for (int k = 0; k < ns; ++k) {
      K.block(n + me + k, 0, 1, n) = D.row(subset[k]);
      K.block(0, n + me + k, n, 1) = D.row(subset[k]).transpose();
    }
    rhs.head(n) = -c;
    if (me > 0) rhs.segment(n, me) = b;
    for (int k = 0; k < ns; ++k) rhs(n + me + k) = f(subset[k]);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd mu = sol.tail(ns);

    if (ns > 0 && mu.minCoeff() < -1e-9) continue;
    if (mi > 0 && (D * x - f).maxCoeff() > 1e-9) continue;
    if (me > 0 && (A * x - b).cwiseAbs().maxCoeff() > 1e-9) continue;

    const double obj = 0.5 * x.dot(Q * x) + c.dot(x);
    if (!best.feasible || obj < best.objective) {
      best.feasible = true;
      best.x = x;
      best.objective = obj;
      best.active = subset;
    }
  }
  return best;
}

}  // namespace testutil
