#include "rollplan/qp_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rollplan {
namespace {

constexpr double kViolationTol = 1e-9;   // violation needed to pull a constraint in
constexpr double kDependenceTol = 1e-12; // relative threshold for dependent normals

double primal_objective(const QpProblem& p, const VecX& x) {
  return 0.5 * x.dot(p.Q * x) + p.c.dot(x);
}

}  // namespace

void QpProblem::validate() const {
  const int n = num_vars();
  if (Q.cols() != n) throw std::invalid_argument("QpProblem: Q must be square");
  if (c.size() != n) throw std::invalid_argument("QpProblem: c size mismatch");
  if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n)) {
    throw std::invalid_argument("QpProblem: equality dimensions mismatch");
  }
  if (D.rows() != f.size() || (D.rows() > 0 && D.cols() != n)) {
    throw std::invalid_argument("QpProblem: inequality dimensions mismatch");
  }
  if (n > 0) {
    const double asym = (Q - Q.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) throw std::invalid_argument("QpProblem: Q is not symmetric");
  }
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max_iterations";
    case QpStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

MatX regularize(const MatX& Q, double rho) {
  MatX out = Q;
  out.diagonal().array() += rho;
  return out;
}

bool QpSolver::add_constraint() {
  const int n = n_;
  // Rotate the tail of d into entry q_ so the new normal extends the
  // triangular factor by one column; the same rotations keep J consistent.
  for (int j = n - 1; j > q_; --j) {
    const double a = d_(j - 1);
    const double b = d_(j);
    const double h = std::hypot(a, b);
    if (h == 0.0) continue;
    const double cc = a / h;
    const double ss = b / h;
    d_(j - 1) = h;
    d_(j) = 0.0;
    const VecX cj = J_.col(j - 1);
    J_.col(j - 1) = cc * cj + ss * J_.col(j);
    J_.col(j) = -ss * cj + cc * J_.col(j);
  }
  R_.col(q_).setZero();
  R_.col(q_).head(q_ + 1) = d_.head(q_ + 1);
  q_ += 1;

  double r_norm = 1.0;
  for (int k = 0; k < q_; ++k) r_norm = std::max(r_norm, std::abs(R_(k, k)));
  return std::abs(d_(q_ - 1)) > kDependenceTol * r_norm;
}

void QpSolver::delete_constraint(int pos) {
  for (int i = pos; i < q_ - 1; ++i) {
    u_(i) = u_(i + 1);
    active_[i] = active_[i + 1];
    R_.col(i) = R_.col(i + 1);
  }
  active_.pop_back();
  q_ -= 1;
  R_.col(q_).setZero();
  u_(q_) = 0.0;

  // Removing a column leaves one subdiagonal entry per affected column;
  // Givens rotations restore the triangle and are mirrored onto J.
  for (int j = pos; j < q_; ++j) {
    const double a = R_(j, j);
    const double b = R_(j + 1, j);
    const double h = std::hypot(a, b);
    if (h == 0.0) continue;
    const double cc = a / h;
    const double ss = b / h;
    R_(j, j) = h;
    R_(j + 1, j) = 0.0;
    for (int k = j + 1; k < q_; ++k) {
      const double t1 = R_(j, k);
      const double t2 = R_(j + 1, k);
      R_(j, k) = cc * t1 + ss * t2;
      R_(j + 1, k) = -ss * t1 + cc * t2;
    }
    const VecX cj = J_.col(j);
    J_.col(j) = cc * cj + ss * J_.col(j + 1);
    J_.col(j + 1) = -ss * cj + cc * J_.col(j + 1);
  }
}

QpSolution QpSolver::solve(const QpProblem& p, QpTrace* trace) {
  p.validate();
  const int n = p.num_vars();
  const int me = p.num_eq();
  const int mi = p.num_ineq();
  const double inf = std::numeric_limits<double>::infinity();

  QpSolution sol;
  sol.lambda = VecX::Zero(me);
  sol.mu = VecX::Zero(mi);

  Eigen::LLT<MatX> llt(p.Q);
  if (llt.info() != Eigen::Success) {
    sol.status = QpStatus::kNumericalFailure;
    return sol;
  }

  n_ = n;
  q_ = 0;
  active_.clear();
  J_ = llt.matrixU().solve(MatX::Identity(n, n));  // J = L^{-T}
  R_.setZero(n, n);
  u_ = VecX::Zero(n);
  d_.resize(n);

  VecX x = -llt.solve(p.c);
  double f_val = 0.5 * p.c.dot(x);
  if (trace) trace->dual_objective.push_back(f_val);

  VecX z(n), r;

  // Equalities first; they stay active for good and their multipliers may
  // take either sign.
  for (int i = 0; i < me; ++i) {
    const VecX np = p.A.row(i).transpose();
    d_.noalias() = J_.transpose() * np;
    const int free = n - q_;
    const double z2 = free > 0 ? d_.tail(free).squaredNorm() : 0.0;
    const double resid = np.dot(x) - p.b(i);
    const bool z_nonzero =
        z2 > std::numeric_limits<double>::epsilon() * std::max(1.0, np.squaredNorm());
    if (!z_nonzero) {
      if (std::abs(resid) < 1e-10) {
        sol.status = QpStatus::kNumericalFailure;  // dependent equality rows
      } else {
        sol.status = QpStatus::kInfeasible;  // inconsistent equality rows
      }
      sol.x = x;
      sol.objective = primal_objective(p, x);
      return sol;
    }
    z.noalias() = J_.rightCols(free) * d_.tail(free);
    if (q_ > 0) {
      r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d_.head(q_));
    }
    const double t2 = -resid / z2;
    x += t2 * z;
    if (q_ > 0) u_.head(q_) -= t2 * r;
    u_(q_) = t2;
    f_val += 0.5 * t2 * t2 * z2;
    active_.push_back(i);
    if (!add_constraint()) {
      sol.status = QpStatus::kNumericalFailure;
      sol.x = x;
      sol.objective = primal_objective(p, x);
      return sol;
    }
    if (trace) trace->dual_objective.push_back(f_val);
  }
  const int n_eq_active = q_;

  const int max_iter = 10 * (n + mi);
  int iter = 0;

  for (;;) {
    // Most violated inequality, if any.
    double worst = -kViolationTol;
    int ip = -1;
    for (int j = 0; j < mi; ++j) {
      const double s = p.f(j) - p.D.row(j).dot(x);
      if (s < worst) {
        worst = s;
        ip = j;
      }
    }
    if (ip < 0) break;  // dual and primal feasible: done

    const VecX np = -p.D.row(ip).transpose();
    double s_ip = worst;
    double u_plus = 0.0;

    for (;;) {
      if (++iter > max_iter) {
        sol.status = QpStatus::kMaxIterations;
        sol.x = x;
        sol.objective = primal_objective(p, x);
        sol.iterations = iter;
        return sol;
      }
      d_.noalias() = J_.transpose() * np;
      const int free = n - q_;
      const double z2 = free > 0 ? d_.tail(free).squaredNorm() : 0.0;
      const bool z_nonzero =
          z2 > std::numeric_limits<double>::epsilon() * std::max(1.0, np.squaredNorm());
      if (q_ > 0) {
        r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d_.head(q_));
      }

      double t1 = inf;
      int drop = -1;
      for (int k = n_eq_active; k < q_; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u_(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      const double t2 = z_nonzero ? -s_ip / z2 : inf;
      const double t = std::min(t1, t2);

      if (t >= inf) {
        // The dual is unbounded along this constraint: no primal point
        // satisfies it together with the current active set.
        sol.status = QpStatus::kInfeasible;
        sol.x = x;
        sol.objective = primal_objective(p, x);
        sol.iterations = iter;
        return sol;
      }

      if (!z_nonzero) {
        // Step in the dual only, dropping the blocking constraint.
        if (q_ > 0) u_.head(q_) -= t * r;
        u_plus += t;
        delete_constraint(drop);
        continue;
      }

      z.noalias() = J_.rightCols(free) * d_.tail(free);
      x += t * z;
      f_val += t * z2 * (0.5 * t + u_plus);
      if (q_ > 0) u_.head(q_) -= t * r;
      u_plus += t;
      if (trace) trace->dual_objective.push_back(f_val);

      if (t2 <= t1) {
        u_(q_) = u_plus;
        active_.push_back(me + ip);
        if (!add_constraint()) {
          sol.status = QpStatus::kNumericalFailure;
          sol.x = x;
          sol.objective = primal_objective(p, x);
          sol.iterations = iter;
          return sol;
        }
        break;
      }

      delete_constraint(drop);
      s_ip = p.f(ip) - p.D.row(ip).dot(x);
    }
  }

  sol.x = x;
  sol.objective = primal_objective(p, x);
  sol.status = QpStatus::kOptimal;
  sol.iterations = iter;
  for (int k = 0; k < q_; ++k) {
    const int idx = active_[k];
    if (idx < me) {
      sol.lambda(idx) = -u_(k);
    } else {
      sol.mu(idx - me) = u_(k);
      sol.active_set.push_back(idx - me);
    }
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

QpSolution QpSolver::solve_warm(const QpProblem& p, std::span<const int> hint, QpTrace* trace) {
  p.validate();
  const int n = p.num_vars();
  const int me = p.num_eq();
  const int mi = p.num_ineq();

  std::vector<int> work;
  work.reserve(hint.size());
  for (int idx : hint) {
    if (idx >= 0 && idx < mi && std::find(work.begin(), work.end(), idx) == work.end()) {
      work.push_back(idx);
    }
  }

  // Try the hinted set as equalities; peel off hints with negative
  // multipliers a few times before giving up and solving cold.
  for (int attempt = 0; attempt <= 8; ++attempt) {
    const int nh = static_cast<int>(work.size());
    if (me + nh > n) break;
    const int dim = n + me + nh;
    MatX K = MatX::Zero(dim, dim);
    VecX rhs(dim);
    K.topLeftCorner(n, n) = p.Q;
    if (me > 0) {
      K.block(n, 0, me, n) = p.A;
      K.block(0, n, n, me) = p.A.transpose();
    }
    for (int k = 0; k < nh; ++k) {
      K.block(n + me + k, 0, 1, n) = p.D.row(work[k]);
      K.block(0, n + me + k, n, 1) = p.D.row(work[k]).transpose();
    }
    rhs.head(n) = -p.c;
    rhs.segment(n, me) = p.b;
    for (int k = 0; k < nh; ++k) rhs(n + me + k) = p.f(work[k]);

    Eigen::FullPivLU<MatX> lu(K);
    if (!lu.isInvertible()) break;
    const VecX sol_vec = lu.solve(rhs);
    const VecX x = sol_vec.head(n);
    const VecX mu_h = sol_vec.tail(nh);

    if (nh > 0 && mu_h.minCoeff() < -1e-8) {
      int worst = 0;
      mu_h.minCoeff(&worst);
      work.erase(work.begin() + worst);
      continue;
    }
    bool feasible = true;
    if (mi > 0) {
      feasible = ((p.D * x - p.f).maxCoeff() <= 1e-8);
    }
    if (!feasible) break;

    QpSolution sol;
    sol.x = x;
    sol.objective = primal_objective(p, x);
    sol.status = QpStatus::kOptimal;
    sol.iterations = attempt;
    sol.lambda = sol_vec.segment(n, me);
    sol.mu = VecX::Zero(mi);
    for (int k = 0; k < nh; ++k) {
      sol.mu(work[k]) = mu_h(k);
      sol.active_set.push_back(work[k]);
    }
    std::sort(sol.active_set.begin(), sol.active_set.end());
    if (trace) trace->dual_objective.push_back(sol.objective);
    return sol;
  }

  return solve(p, trace);
}

}  // namespace rollplan
