#pragma once

#include <span>
#include <vector>

#include "rollplan/types.hpp"

namespace rollplan {

// Dense convex QP in the form
//   min 0.5 x'Qx + c'x   s.t.   A x = b,   D x <= f.
// Q must be symmetric and, after regularization, positive definite. A is
// expected to have full row rank.
struct QpProblem {
  MatX Q;
  VecX c;
  MatX A;
  VecX b;
  MatX D;
  VecX f;

  int num_vars() const { return static_cast<int>(Q.rows()); }
  int num_eq() const { return static_cast<int>(A.rows()); }
  int num_ineq() const { return static_cast<int>(D.rows()); }
  void validate() const;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations, kNumericalFailure };

const char* to_string(QpStatus s);

struct QpSolution {
  VecX x;
  double objective = 0.0;          // 0.5 x'Qx + c'x at the returned point
  QpStatus status = QpStatus::kNumericalFailure;
  std::vector<int> active_set;     // indices of active inequality rows
  VecX lambda;                     // equality multipliers, sized num_eq
  VecX mu;                         // inequality multipliers, sized num_ineq
  int iterations = 0;
};

// Optional per-iteration record. The dual objective is non-decreasing over a
// successful solve, which the tests assert.
struct QpTrace {
  std::vector<double> dual_objective;
};

// Returns Q + rho * I.
MatX regularize(const MatX& Q, double rho = 1e-8);

// Goldfarb-Idnani dual active-set solver. Starts from the unconstrained
// minimum, adds the equalities, then pulls in violated inequalities one at a
// time while keeping the dual feasible. The factorization state is a Cholesky
// factor of Q plus a QR of the active-constraint normals that is updated with
// Givens rotations on every active-set change.
class QpSolver {
 public:
  QpSolution solve(const QpProblem& p, QpTrace* trace = nullptr);

  // Tries the hinted active inequalities as an equality-constrained KKT
  // system first; on any feasibility or sign failure falls back to a cold
  // solve. `iterations` stays 0 when the hint verifies.
  QpSolution solve_warm(const QpProblem& p, std::span<const int> hint,
                        QpTrace* trace = nullptr);

 private:
  bool add_constraint();
  void delete_constraint(int pos);

  // workspace, sized per solve
  MatX J_;           // L^{-T} * orthogonal factor
  MatX R_;           // triangular factor of the active normals
  VecX d_;           // J' * np scratch
  VecX u_;           // multipliers of the active set
  std::vector<int> active_;  // active rows: equalities first, then me + ineq index
  int n_ = 0;
  int q_ = 0;        // active count
};

}  // namespace rollplan
