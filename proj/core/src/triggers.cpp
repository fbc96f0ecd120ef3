#include "etac/triggers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace etac {

void TriggerParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0,1)");
  if (b < 1) throw std::invalid_argument("b must be >= 1");
  if (Q.rows() != Q.cols() || Q.rows() == 0)
    throw std::invalid_argument("Q must be square");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("Q must be symmetric");
  Eigen::LLT<Mat> llt(Q);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("Q must be positive definite");
}

void EventLog::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write event log: " + path);
  out << "k,V_a,adaptation_triggered,epsilon,control_triggered,i\n";
  char line[160];
  for (const auto& r : records) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%d,%.9g,%d,%d\n", r.k, r.V_a,
                  r.adaptation_triggered ? 1 : 0, r.epsilon,
                  r.control_triggered ? 1 : 0, r.steps_since_control);
    out << line;
  }
}

bool adaptation_trigger(double e_k, double e_prev, const TriggerParams& params) {
  if (!std::isfinite(e_k) || !std::isfinite(e_prev))
    throw std::invalid_argument("adaptation_trigger: non-finite error");
  const double v_k = e_k * e_k;
  const double v_prev = e_prev * e_prev;
  return (v_k - v_prev) + params.beta * v_prev > params.sigma;
}

double control_epsilon(const KoopmanModel& model, const Vec& e_tilde,
                       const Vec& u_candidate, const Vec& z_ref,
                       const TriggerParams& params) {
  const int q = model.q();
  const int m = model.m();
  if (e_tilde.size() != q || z_ref.size() != q || u_candidate.size() != m)
    throw std::invalid_argument("control_epsilon: dimension mismatch");
  if (params.Q.rows() != q) throw std::invalid_argument("control_epsilon: Q dim");

  const Mat& Q = params.Q;
  const Mat& Ah = model.A_hat;
  const Mat& Bh = model.B_hat;

  Mat M(q + m, q + m);
  M.topLeftCorner(q, q) = Ah.transpose() * Q * Ah - Q;
  M.topRightCorner(q, m) = Ah.transpose() * Q * Bh;
  M.bottomLeftCorner(m, q) = Bh.transpose() * Q * Ah;
  M.bottomRightCorner(m, m) = Bh.transpose() * Q * Bh;

  Vec qk(q + m);
  qk << e_tilde, u_candidate;
  const Vec r = Ah * z_ref - z_ref;

  double eps = qk.dot(M * qk);
  eps += params.alpha * e_tilde.dot(Q * e_tilde);
  eps += 2.0 * e_tilde.dot(Ah.transpose() * (Q * r));
  eps += 2.0 * u_candidate.dot(Bh.transpose() * (Q * r));
  eps += r.dot(Q * r);
  return eps;
}

bool control_trigger(double epsilon_k, int i, const TriggerParams& params) {
  if (i < 0) throw std::invalid_argument("control_trigger: i must be >= 0");
  return epsilon_k > params.gamma || i > params.b;
}

TheoreticBounds theoretic_bounds(const TriggerParams& params,
                                 const KoopmanModel& model,
                                 std::pair<double, double> x_bounds,
                                 std::pair<double, double> u_bounds) {
  params.validate();
  Eigen::SelfAdjointEigenSolver<Mat> eig(params.Q);
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();
  if (lambda_min <= 0.0) throw std::invalid_argument("Q is singular");

  TheoreticBounds out;
  out.prediction_bound = std::sqrt(params.sigma / params.beta);
  out.tracking_bound =
      out.prediction_bound + std::sqrt(params.gamma / (params.alpha * lambda_min));

  const double L1 = std::max(std::abs(x_bounds.first), std::abs(x_bounds.second));
  const double L2 = std::max(std::abs(u_bounds.first), std::abs(u_bounds.second));
  const double z_max = std::sqrt(L1 * L1 + std::pow(L1, 4));
  const double L_v = 4.0 * lambda_max * z_max;
  const double M_A = (model.A_hat - Mat::Identity(model.q(), model.q()))
                         .jacobiSvd()
                         .singularValues()(0);
  const double M_B = model.B_hat.jacobiSvd().singularValues()(0);
  const double M_bar = M_A * z_max + M_B * L2;
  const double denom = L_v * M_bar * (2.0 + params.alpha);
  // denom == 0 means the predicted state cannot move, so no further
  // event is ever forced.
  out.zeno_steps = denom > 0.0
                       ? params.gamma / denom
                       : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace etac
