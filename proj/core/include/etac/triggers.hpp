#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "etac/model.hpp"

namespace etac {

/// Thresholds and weights for the adaptation and control triggers.
/// b doubles as the MPC horizon and the bound on consecutive steps
/// served from a stored input sequence.
struct TriggerParams {
  double sigma = 5e-8;  // adaptation threshold
  double beta = 0.09;   // adaptation Lyapunov decay rate
  double gamma = 1e-4;  // control threshold
  double alpha = 0.09;  // control Lyapunov decay rate
  Mat Q;                // q x q symmetric positive definite
  int b = 20;

  void validate() const;
};

/// Per-step record of both trigger decisions.
struct EventRecord {
  int k = 0;
  double V_a = 0.0;
  bool adaptation_triggered = false;
  double epsilon = 0.0;
  bool control_triggered = false;
  int steps_since_control = 0;
};

struct EventLog {
  std::vector<EventRecord> records;

  void to_csv(const std::string& path) const;
};

/// Adaptation trigger: fires when the prediction-error Lyapunov function
/// V_a = e^2 stops decaying fast enough, i.e.
///   (V_a(e_k) - V_a(e_prev)) + beta V_a(e_prev) > sigma.
/// Between events this enforces V_k <= (1 - beta) V_{k-1} + sigma, the
/// recursion behind the sqrt(sigma/beta) ultimate bound.
bool adaptation_trigger(double e_k, double e_prev, const TriggerParams& params);

/// Predicted one-step change of the tracking Lyapunov function
/// V_c = e~^T Q e~ under the candidate input, plus alpha V_c: equals
/// V_c(e~+) - V_c(e~) + alpha V_c(e~) with e~+ = A_hat z + B_hat u - z_ref,
/// expanded in the quadratic form q(k)^T M_k q(k) plus reference-offset
/// terms.
double control_epsilon(const KoopmanModel& model, const Vec& e_tilde,
                       const Vec& u_candidate, const Vec& z_ref,
                       const TriggerParams& params);

/// Control trigger: epsilon_k > gamma or i > b.
bool control_trigger(double epsilon_k, int i, const TriggerParams& params);

struct TheoreticBounds {
  double prediction_bound = 0.0;  // sqrt(sigma / beta)
  double tracking_bound = 0.0;    // + sqrt(gamma / (alpha lambda_min(Q)))
  double zeno_steps = 0.0;        // gamma / (L_v Mbar (2 + alpha))
};

/// Ultimate bounds and the minimum inter-event step count guaranteed by
/// the convergence analysis, evaluated for the current adapted model and
/// the configured state/input boxes.
TheoreticBounds theoretic_bounds(const TriggerParams& params,
                                 const KoopmanModel& model,
                                 std::pair<double, double> x_bounds,
                                 std::pair<double, double> u_bounds);

}  // namespace etac
