#include "etac/qp.hpp"

#include <cmath>
#include <stdexcept>

namespace etac {

namespace {

double inf_norm(const Vec& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

Vec clamp(const Vec& v, const Vec& lo, const Vec& hi) {
  return v.cwiseMax(lo).cwiseMin(hi);
}

// Refines an iterate by solving the equality-constrained KKT system on
// the active set the duals indicate; accepted only if it does not make
// either residual worse.
void polish(const QpProblem& p, QpSolution& s) {
  const int nv = p.n();
  const int mc = p.m_c();

  std::vector<int> active;
  std::vector<double> bound;
  const double ytol = 1e-9 * std::max(1.0, inf_norm(s.y));
  for (int i = 0; i < mc; ++i) {
    if (p.upper(i) - p.lower(i) < 1e-12) {
      active.push_back(i);
      bound.push_back(p.lower(i));
    } else if (s.y(i) < -ytol && std::isfinite(p.lower(i))) {
      active.push_back(i);
      bound.push_back(p.lower(i));
    } else if (s.y(i) > ytol && std::isfinite(p.upper(i))) {
      active.push_back(i);
      bound.push_back(p.upper(i));
    }
  }

  const int na = static_cast<int>(active.size());
  Mat K = Mat::Zero(nv + na, nv + na);
  Vec rhs(nv + na);
  K.topLeftCorner(nv, nv) = p.H;
  rhs.head(nv) = -p.g;
  for (int a = 0; a < na; ++a) {
    K.block(nv + a, 0, 1, nv) = p.A.row(active[a]);
    K.block(0, nv + a, nv, 1) = p.A.row(active[a]).transpose();
    rhs(nv + a) = bound[a];
  }
  Eigen::FullPivLU<Mat> lu(K);
  if (!lu.isInvertible()) return;
  const Vec sol = lu.solve(rhs);

  Vec x = sol.head(nv);
  Vec y = Vec::Zero(mc);
  for (int a = 0; a < na; ++a) y(active[a]) = sol(nv + a);
  if (!x.allFinite() || !y.allFinite()) return;

  double r_prim = 0.0;
  if (mc > 0) {
    const Vec Ax = p.A * x;
    r_prim = inf_norm(Ax - clamp(Ax, p.lower, p.upper));
  }
  const double r_dual = inf_norm(p.H * x + p.g +
                                 (mc > 0 ? Vec(p.A.transpose() * y) : Vec::Zero(nv)));
  if (r_prim <= s.primal_residual && r_dual <= s.dual_residual) {
    s.x = std::move(x);
    s.y = std::move(y);
    s.primal_residual = r_prim;
    s.dual_residual = r_dual;
  }
}

}  // namespace

void QpProblem::validate() const {
  const int nv = n();
  if (H.rows() != nv || H.cols() != nv) throw std::invalid_argument("qp: bad H dims");
  if (g.size() != nv) throw std::invalid_argument("qp: bad g size");
  if (A.cols() != nv && m_c() > 0) throw std::invalid_argument("qp: bad A dims");
  if (lower.size() != m_c() || upper.size() != m_c())
    throw std::invalid_argument("qp: bad bound sizes");
  if (!H.allFinite() || !g.allFinite() || !A.allFinite())
    throw std::invalid_argument("qp: non-finite data");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + H.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("qp: H must be symmetric");
  for (int i = 0; i < m_c(); ++i) {
    if (std::isnan(lower(i)) || std::isnan(upper(i)))
      throw std::invalid_argument("qp: NaN bound");
    if (lower(i) > upper(i)) throw std::invalid_argument("qp: lower > upper");
  }
}

AdmmSolver::AdmmSolver(const QpProblem& problem, const QpSettings& settings) {
  setup(problem, settings);
}

void AdmmSolver::setup(const QpProblem& problem, const QpSettings& settings) {
  problem.validate();
  if (settings.rho <= 0.0 || settings.sigma_reg <= 0.0 || settings.max_iter < 1 ||
      settings.eps_abs < 0.0 || settings.eps_rel < 0.0)
    throw std::invalid_argument("qp: bad settings");
  problem_ = problem;
  settings_ = settings;

  const int mc = problem_.m_c();
  rho_ = Vec::Constant(mc, settings.rho);
  for (int i = 0; i < mc; ++i) {
    // Equality rows get a much stiffer penalty, loose rows a softer one.
    if (problem_.upper(i) - problem_.lower(i) < 1e-12)
      rho_(i) = 1e3 * settings.rho;
    else if (!std::isfinite(problem_.lower(i)) && !std::isfinite(problem_.upper(i)))
      rho_(i) = 1e-6 * settings.rho;
  }

  Mat K = problem_.H +
          settings.sigma_reg * Mat::Identity(problem_.n(), problem_.n());
  if (mc > 0) K += problem_.A.transpose() * rho_.asDiagonal() * problem_.A;
  kkt_.compute(K);
  if (kkt_.info() != Eigen::Success)
    throw std::runtime_error("qp: KKT factorization failed");
}

void AdmmSolver::update_linear_cost(const Vec& g) {
  if (g.size() != problem_.n()) throw std::invalid_argument("qp: bad g size");
  if (!g.allFinite()) throw std::invalid_argument("qp: non-finite g");
  problem_.g = g;
}

void AdmmSolver::update_bounds(const Vec& lower, const Vec& upper) {
  if (lower.size() != problem_.m_c() || upper.size() != problem_.m_c())
    throw std::invalid_argument("qp: bad bound sizes");
  for (int i = 0; i < problem_.m_c(); ++i)
    if (std::isnan(lower(i)) || std::isnan(upper(i)) || lower(i) > upper(i))
      throw std::invalid_argument("qp: bad bounds");
  problem_.lower = lower;
  problem_.upper = upper;
}

QpSolution AdmmSolver::solve(const std::optional<WarmStart>& warm) const {
  const int nv = problem_.n();
  const int mc = problem_.m_c();
  const Mat& H = problem_.H;
  const Mat& A = problem_.A;
  const Vec& g = problem_.g;

  Vec x = Vec::Zero(nv);
  Vec y = Vec::Zero(mc);
  if (warm) {
    if (warm->x.size() == nv) x = warm->x;
    if (warm->y.size() == mc) y = warm->y;
  }
  Vec z = mc > 0 ? clamp(A * x, problem_.lower, problem_.upper) : Vec();

  QpSolution best;
  best.x = x;
  best.y = y;
  double best_score = kInfinity;

  const double eps_abs = settings_.eps_abs;
  const double eps_rel = settings_.eps_rel;

  // rho adapts on a fixed schedule; the shared factorization is replaced
  // by a local one the first time that happens.
  double base_rho = settings_.rho;
  Vec rho = rho_;
  Eigen::LDLT<Mat> local_kkt;
  const Eigen::LDLT<Mat>* kkt = &kkt_;

  // An infeasibility certificate must persist for a few iterations before
  // the problem is declared infeasible; transient dual steps on feasible
  // problems can momentarily look like rays.
  const double eps_pinf = 1e-4;
  int certificate_streak = 0;

  for (int iter = 1; iter <= settings_.max_iter; ++iter) {
    // x-step: regularized KKT solve.
    Vec rhs = settings_.sigma_reg * x - g;
    if (mc > 0)
      rhs += A.transpose() * (rho.asDiagonal() * z - y);
    x = kkt->solve(rhs);

    Vec Ax;
    double r_prim = 0.0, eps_prim = eps_abs;
    double prim_scale = 0.0;
    Vec y_prev = y;
    if (mc > 0) {
      Ax = A * x;
      // z-step: projection; y-step: scaled dual ascent.
      z = clamp(Ax + y.cwiseQuotient(rho), problem_.lower, problem_.upper);
      y += rho.asDiagonal() * (Ax - z);
      r_prim = inf_norm(Ax - z);
      prim_scale = std::max(inf_norm(Ax), inf_norm(z));
      eps_prim += eps_rel * prim_scale;
    }

    Vec dual_grad = H * x + g;
    if (mc > 0) dual_grad += A.transpose() * y;
    const double r_dual = inf_norm(dual_grad);
    double dual_scale = std::max(inf_norm(H * x), inf_norm(g));
    if (mc > 0) dual_scale = std::max(dual_scale, inf_norm(A.transpose() * y));
    const double eps_dual = eps_abs + eps_rel * dual_scale;

    if (!x.allFinite() || (mc > 0 && !y.allFinite()))
      throw std::runtime_error("qp: numerical failure (non-finite iterate)");

    const double score = std::max(r_prim / std::max(eps_prim, 1e-300),
                                  r_dual / std::max(eps_dual, 1e-300));
    if (score < best_score) {
      best_score = score;
      best.x = x;
      best.y = y;
      best.primal_residual = r_prim;
      best.dual_residual = r_dual;
      best.iterations = iter;
    }

    if (r_prim <= eps_prim && r_dual <= eps_dual) {
      best.x = x;
      best.y = y;
      best.primal_residual = r_prim;
      best.dual_residual = r_dual;
      best.iterations = iter;
      best.status = QpStatus::solved;
      polish(problem_, best);
      return best;
    }

    // Primal infeasibility certificate on the dual step direction.
    if (mc > 0) {
      const Vec dy = y - y_prev;
      const double dy_norm = inf_norm(dy);
      bool is_certificate = false;
      if (dy_norm > eps_abs &&
          inf_norm(A.transpose() * dy) <= eps_pinf * dy_norm) {
        double support = 0.0;
        bool valid = true;
        for (int i = 0; i < mc && valid; ++i) {
          const double pos = std::max(dy(i), 0.0);
          const double neg = std::min(dy(i), 0.0);
          if (pos > eps_pinf * dy_norm && !std::isfinite(problem_.upper(i)))
            valid = false;
          else if (neg < -eps_pinf * dy_norm && !std::isfinite(problem_.lower(i)))
            valid = false;
          else {
            if (pos > 0.0 && std::isfinite(problem_.upper(i)))
              support += problem_.upper(i) * pos;
            if (neg < 0.0 && std::isfinite(problem_.lower(i)))
              support += problem_.lower(i) * neg;
          }
        }
        is_certificate = valid && support < -eps_pinf * dy_norm;
      }
      certificate_streak = is_certificate ? certificate_streak + 1 : 0;
      if (certificate_streak >= 3) {
        best.x = x;
        best.y = (y - y_prev) / dy_norm;
        best.iterations = iter;
        best.status = QpStatus::primal_infeasible;
        return best;
      }
    }

    // rho adaptation by the ratio of the scaled residuals.
    if (mc > 0 && iter % 50 == 0) {
      const double rel_p = r_prim / std::max(prim_scale, 1e-12);
      const double rel_d = r_dual / std::max(dual_scale, 1e-12);
      const double ratio = std::sqrt(std::max(rel_p, 1e-16) /
                                     std::max(rel_d, 1e-16));
      if (ratio > 5.0 || ratio < 0.2) {
        base_rho = std::clamp(base_rho * ratio, 1e-6, 1e6);
        for (int i = 0; i < mc; ++i) {
          if (problem_.upper(i) - problem_.lower(i) < 1e-12)
            rho(i) = 1e3 * base_rho;
          else if (!std::isfinite(problem_.lower(i)) &&
                   !std::isfinite(problem_.upper(i)))
            rho(i) = 1e-6 * base_rho;
          else
            rho(i) = base_rho;
        }
        Mat K = H + settings_.sigma_reg * Mat::Identity(nv, nv) +
                A.transpose() * rho.asDiagonal() * A;
        local_kkt.compute(K);
        if (local_kkt.info() == Eigen::Success) kkt = &local_kkt;
      }
    }
  }

  best.status = QpStatus::max_iter;
  polish(problem_, best);
  return best;
}

QpSolution solve_qp(const QpProblem& problem, const QpSettings& settings,
                    const std::optional<WarmStart>& warm) {
  AdmmSolver solver(problem, settings);
  return solver.solve(warm);
}

WarmStart warm_start_shift(const QpSolution& previous, int stage_dim, int shift) {
  if (stage_dim < 1) throw std::invalid_argument("warm_start_shift: bad stage_dim");
  if (shift < 0) throw std::invalid_argument("warm_start_shift: bad shift");
  const Eigen::Index n = previous.x.size();
  if (n % stage_dim != 0)
    throw std::invalid_argument("warm_start_shift: primal not stage aligned");
  const Eigen::Index stages = n / stage_dim;

  WarmStart ws;
  ws.x = previous.x;
  ws.y = previous.y;
  if (stages == 0 || shift == 0) return ws;
  for (Eigen::Index s = 0; s < stages; ++s) {
    const Eigen::Index src = std::min<Eigen::Index>(s + shift, stages - 1);
    ws.x.segment(s * stage_dim, stage_dim) =
        previous.x.segment(src * stage_dim, stage_dim);
  }
  return ws;
}

}  // namespace etac
