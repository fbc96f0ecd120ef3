#pragma once

#include <stdexcept>

#include "etac/model.hpp"
#include "etac/qp.hpp"

namespace etac {

/// Receding-horizon tracking configuration. Weights are matrices over the
/// output (n) and input (m) dimensions; for this plant both are scalar.
struct MpcConfig {
  int horizon = 20;                      // b
  Mat P = Mat::Constant(1, 1, 100.0);    // stage output weight
  Mat P_b = Mat::Constant(1, 1, 200.0);  // terminal output weight
  Mat R = Mat::Constant(1, 1, 1.0);      // input weight
  double x_min = -2.0;
  double x_max = 0.5;
  double u_min = -3.0;
  double u_max = 3.0;
  double x_ref = -0.3;

  void validate() const;
};

/// The adapted model blew up: powers of A_hat are no longer finite.
struct ModelDivergedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The stage (1-based prediction step) at which bounds conflict.
struct MpcInfeasibleError : std::runtime_error {
  int stage;
  explicit MpcInfeasibleError(int stage_, const std::string& what)
      : std::runtime_error(what), stage(stage_) {}
};

/// Condensed QP over the input sequence U = (u_0 ... u_{b-1}): states are
/// eliminated through z_k = A_hat^k z0 + sum_j A_hat^{k-1-j} B_hat u_j with
/// the current adapted model frozen over the horizon. Cost penalizes
/// output tracking error at stages 1..b-1 (weight P), the terminal stage
/// (P_b) and inputs (R); constraints stack output bounds for k = 1..b and
/// input bounds for k = 0..b-1.
QpProblem build_qp(const KoopmanModel& model, const Vec& z0,
                   const MpcConfig& config);

/// Solves the condensed QP and returns the optimal input sequence
/// (length b*m). Infeasibility is reported with the offending stage.
Vec solve_mpc(const KoopmanModel& model, const Vec& z0, const MpcConfig& config,
              const std::optional<WarmStart>& warm = std::nullopt,
              const QpSettings& settings = {});

/// Stateful wrapper that caches the condensed matrices and the KKT
/// factorization while the adapted model is unchanged; successive solves
/// then only update the linear cost and the output-bound offsets.
class MpcController {
 public:
  MpcController(const MpcConfig& config, const QpSettings& settings = {});

  Vec solve(const KoopmanModel& model, const Vec& z0,
            const std::optional<WarmStart>& warm = std::nullopt);

  const QpSolution& last_solution() const { return last_; }
  /// Realized optimal cost including the constant terms dropped from the
  /// condensed QP objective.
  double last_cost() const { return last_cost_; }
  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  QpSettings settings_;
  AdmmSolver solver_;
  long cached_version_ = -1;
  bool has_setup_ = false;
  QpSolution last_;
  double last_cost_ = 0.0;
};

}  // namespace etac
