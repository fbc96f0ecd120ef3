#include "etac/mpc.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

namespace etac {

namespace {

void require_psd(const Mat& M, const char* name) {
  if (M.rows() != M.cols() || M.rows() == 0)
    throw std::invalid_argument(std::string("mpc: ") + name + " must be square");
  if ((M - M.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * (1.0 + M.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string("mpc: ") + name + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(M);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument(std::string("mpc: ") + name +
                                " must be positive semidefinite");
}

// Condensed prediction pieces: outputs stacked for k = 1..b are
// y = E U + f, W holds the stage/terminal output weights.
struct Condensed {
  Mat E;     // (b n) x (b m)
  Vec f;     // b n
  Mat W;     // (b n) x (b n) block diagonal
  Mat Rbar;  // (b m) x (b m) block diagonal
  Vec ref;   // b n, stacked x_ref
};

Condensed condense(const KoopmanModel& model, const Vec& z0,
                   const MpcConfig& cfg) {
  const int q = model.q();
  const int n = model.n();
  const int m = model.m();
  const int b = cfg.horizon;
  if (z0.size() != q) throw std::invalid_argument("mpc: z0 dimension mismatch");
  if (!z0.allFinite()) throw std::invalid_argument("mpc: non-finite z0");

  // Powers of the adapted A, checked for blow-up as we go.
  std::vector<Mat> Apow(b + 1);
  Apow[0] = Mat::Identity(q, q);
  for (int k = 1; k <= b; ++k) {
    Apow[k] = model.A_hat * Apow[k - 1];
    if (!Apow[k].allFinite())
      throw ModelDivergedError("mpc: powers of A_hat are non-finite");
  }

  // impulse[d] = C A^d B, the output response d+1 steps after an input.
  std::vector<Mat> impulse(b);
  for (int d = 0; d < b; ++d) impulse[d] = model.C * Apow[d] * model.B_hat;

  Condensed c;
  c.E = Mat::Zero(b * n, b * m);
  c.f = Vec(b * n);
  c.W = Mat::Zero(b * n, b * n);
  c.Rbar = Mat::Zero(b * m, b * m);
  c.ref = Vec(b * n);
  const Vec xref = Vec::Constant(n, cfg.x_ref);
  for (int k = 1; k <= b; ++k) {
    const int row = (k - 1) * n;
    for (int j = 0; j < k; ++j)
      c.E.block(row, j * m, n, m) = impulse[k - 1 - j];
    c.f.segment(row, n) = model.C * (Apow[k] * z0);
    c.W.block(row, row, n, n) = (k == b) ? cfg.P_b : cfg.P;
    c.ref.segment(row, n) = xref;
  }
  for (int k = 0; k < b; ++k) c.Rbar.block(k * m, k * m, m, m) = cfg.R;
  return c;
}

QpProblem assemble(const Condensed& c, const MpcConfig& cfg, int n, int m) {
  const int b = cfg.horizon;
  QpProblem qp;
  qp.H = 2.0 * (c.E.transpose() * c.W * c.E + c.Rbar);
  qp.H = 0.5 * (qp.H + qp.H.transpose().eval());  // symmetrize roundoff
  qp.g = 2.0 * c.E.transpose() * (c.W * (c.f - c.ref));
  qp.A = Mat::Zero(b * n + b * m, b * m);
  qp.A.topRows(b * n) = c.E;
  qp.A.bottomRows(b * m) = Mat::Identity(b * m, b * m);
  qp.lower = Vec(b * n + b * m);
  qp.upper = Vec(b * n + b * m);
  qp.lower.head(b * n) = Vec::Constant(b * n, cfg.x_min) - c.f;
  qp.upper.head(b * n) = Vec::Constant(b * n, cfg.x_max) - c.f;
  qp.lower.tail(b * m).setConstant(cfg.u_min);
  qp.upper.tail(b * m).setConstant(cfg.u_max);
  return qp;
}

// Maps the worst row of an infeasibility certificate to its prediction
// step: output rows cover k = 1..b, input rows k = 0..b-1.
int certificate_stage(const Vec& dy, int b, int n, int m) {
  int worst = 0;
  dy.cwiseAbs().maxCoeff(&worst);
  if (worst < b * n) return worst / n + 1;
  return (worst - b * n) / m;
}

double realized_cost(const Condensed& c, const MpcConfig& cfg,
                     const KoopmanModel& model, const Vec& z0, const Vec& u) {
  const Vec y = c.E * u + c.f;
  const Vec err = y - c.ref;
  double cost = err.dot(c.W * err) + u.dot(c.Rbar * u);
  const Vec e0 = model.C * z0 - Vec::Constant(model.n(), cfg.x_ref);
  cost += e0.dot(cfg.P * e0);
  return cost;
}

}  // namespace

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  require_psd(P, "P");
  require_psd(P_b, "P_b");
  require_psd(R, "R");
  if (!(x_min < x_max)) throw std::invalid_argument("mpc: x_min must be < x_max");
  // u_min == u_max is allowed: it pins the input, which the QP treats as
  // an equality row.
  if (!(u_min <= u_max)) throw std::invalid_argument("mpc: u_min must be <= u_max");
  if (x_ref < x_min || x_ref > x_max)
    throw std::invalid_argument("mpc: x_ref must lie within [x_min, x_max]");
}

QpProblem build_qp(const KoopmanModel& model, const Vec& z0,
                   const MpcConfig& config) {
  config.validate();
  const Condensed c = condense(model, z0, config);
  return assemble(c, config, model.n(), model.m());
}

Vec solve_mpc(const KoopmanModel& model, const Vec& z0, const MpcConfig& config,
              const std::optional<WarmStart>& warm, const QpSettings& settings) {
  config.validate();
  const Condensed c = condense(model, z0, config);
  QpProblem qp = assemble(c, config, model.n(), model.m());
  const QpSolution sol = solve_qp(qp, settings, warm);
  if (sol.status == QpStatus::primal_infeasible) {
    const int stage =
        certificate_stage(sol.y, config.horizon, model.n(), model.m());
    throw MpcInfeasibleError(stage, "mpc: output/input bounds conflict at stage " +
                                        std::to_string(stage));
  }
  return sol.x.cwiseMax(config.u_min).cwiseMin(config.u_max);
}

MpcController::MpcController(const MpcConfig& config, const QpSettings& settings)
    : cfg_(config), settings_(settings) {
  cfg_.validate();
}

Vec MpcController::solve(const KoopmanModel& model, const Vec& z0,
                         const std::optional<WarmStart>& warm) {
  const Condensed c = condense(model, z0, cfg_);
  if (!has_setup_ || model.version != cached_version_) {
    solver_.setup(assemble(c, cfg_, model.n(), model.m()), settings_);
    cached_version_ = model.version;
    has_setup_ = true;
  } else {
    const int bn = cfg_.horizon * model.n();
    const int bm = cfg_.horizon * model.m();
    Vec lower(bn + bm), upper(bn + bm);
    lower.head(bn) = Vec::Constant(bn, cfg_.x_min) - c.f;
    upper.head(bn) = Vec::Constant(bn, cfg_.x_max) - c.f;
    lower.tail(bm).setConstant(cfg_.u_min);
    upper.tail(bm).setConstant(cfg_.u_max);
    solver_.update_linear_cost(2.0 * c.E.transpose() * (c.W * (c.f - c.ref)));
    solver_.update_bounds(lower, upper);
  }

  last_ = solver_.solve(warm);
  if (last_.status == QpStatus::primal_infeasible) {
    const int stage =
        certificate_stage(last_.y, cfg_.horizon, model.n(), model.m());
    throw MpcInfeasibleError(stage, "mpc: output/input bounds conflict at stage " +
                                        std::to_string(stage));
  }
  Vec u = last_.x.cwiseMax(cfg_.u_min).cwiseMin(cfg_.u_max);
  last_cost_ = realized_cost(c, cfg_, model, z0, u);
  return u;
}

}  // namespace etac
