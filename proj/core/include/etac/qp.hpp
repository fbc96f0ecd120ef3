#pragma once

#include <Eigen/Cholesky>
#include <limits>
#include <optional>

#include "etac/observables.hpp"

namespace etac {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Convex QP with two-sided linear constraints:
///   minimize 0.5 x^T H x + g^T x   s.t.  lower <= A x <= upper.
/// Bound entries may be +-infinity.
struct QpProblem {
  Mat H;      // n x n symmetric PSD
  Vec g;      // n
  Mat A;      // m_c x n
  Vec lower;  // m_c
  Vec upper;  // m_c

  int n() const { return static_cast<int>(H.rows()); }
  int m_c() const { return static_cast<int>(A.rows()); }
  void validate() const;
};

struct QpSettings {
  double rho = 0.1;        // base ADMM penalty; equality rows are scaled up
  double sigma_reg = 1e-6; // primal regularization in the KKT solve
  int max_iter = 4000;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
};

enum class QpStatus { solved, max_iter, primal_infeasible };

struct QpSolution {
  Vec x;  // primal
  Vec y;  // dual of the two-sided constraints
  QpStatus status = QpStatus::max_iter;
  double primal_residual = kInfinity;  // ||A x - z||_inf of the iterate
  double dual_residual = kInfinity;    // ||H x + g + A^T y||_inf
  int iterations = 0;

  double objective(const QpProblem& p) const {
    return 0.5 * x.dot(p.H * x) + p.g.dot(x);
  }
};

struct WarmStart {
  Vec x;
  Vec y;
};

/// Operator-splitting (ADMM) QP solver. The regularized KKT system
/// (H + sigma I + A^T diag(rho) A) is factorized once per setup and the
/// factorization survives cost/bound updates, so repeated MPC solves with
/// an unchanged model only pay for iterations.
class AdmmSolver {
 public:
  AdmmSolver() = default;
  AdmmSolver(const QpProblem& problem, const QpSettings& settings = {});

  void setup(const QpProblem& problem, const QpSettings& settings = {});
  void update_linear_cost(const Vec& g);
  void update_bounds(const Vec& lower, const Vec& upper);

  QpSolution solve(const std::optional<WarmStart>& warm = std::nullopt) const;

  const QpProblem& problem() const { return problem_; }
  const QpSettings& settings() const { return settings_; }

 private:
  QpProblem problem_;
  QpSettings settings_;
  Vec rho_;      // per-constraint penalty
  Eigen::LDLT<Mat> kkt_;
};

/// One-shot convenience wrapper around AdmmSolver.
QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings = {},
                    const std::optional<WarmStart>& warm = std::nullopt);

/// Shifts a block-structured primal sequence left by `shift` stages of
/// width stage_dim, repeating the final stage; the dual is carried over
/// unchanged. Used to seed the next receding-horizon solve.
WarmStart warm_start_shift(const QpSolution& previous, int stage_dim,
                           int shift = 1);

}  // namespace etac
