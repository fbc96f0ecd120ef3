#include "etac/adaptation.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace etac {

AdaptationWindow::AdaptationWindow(int capacity, double forgetting)
    : capacity_(capacity), forgetting_(forgetting) {
  if (capacity < 1) throw std::invalid_argument("window capacity must be >= 1");
  if (!(forgetting > 0.0 && forgetting <= 1.0))
    throw std::invalid_argument("forgetting factor must be in (0, 1]");
}

void AdaptationWindow::push(Vec z_prev, Vec u_prev, Vec dz) {
  if (!entries_.empty()) {
    const auto& head = entries_.front();
    if (z_prev.size() != head.z_prev.size() || u_prev.size() != head.u_prev.size() ||
        dz.size() != head.dz.size())
      throw std::invalid_argument("window entry dimension mismatch");
  }
  if (size() == capacity_) entries_.pop_front();
  entries_.push_back({std::move(z_prev), std::move(u_prev), std::move(dz)});
}

Vec prediction_error(const KoopmanModel& model, const Vec& z_prev,
                     const Vec& u_prev, const Vec& z_obs) {
  if (z_prev.size() != model.q() || u_prev.size() != model.m() ||
      z_obs.size() != model.q())
    throw std::invalid_argument("prediction_error: dimension mismatch");
  return z_obs - (model.A_hat * z_prev + model.B_hat * u_prev);
}

Mat pseudo_inverse(const Mat& M, double tol) {
  if (!M.allFinite()) throw std::invalid_argument("pseudo_inverse: non-finite input");
  Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues().size() == 0 || svd.singularValues()(0) == 0.0)
    return Mat::Zero(M.cols(), M.rows());
  const double cutoff = tol * svd.singularValues()(0);
  Vec inv_sv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv_sv.size(); ++i)
    inv_sv(i) = inv_sv(i) > cutoff ? 1.0 / inv_sv(i) : 0.0;
  return ((svd.matrixV() * inv_sv.asDiagonal()) * svd.matrixU().transpose());
}

namespace {

ModelUpdate split_update(const Mat& G, int q, int m) {
  return {G.leftCols(q), G.rightCols(m)};
}

}  // namespace

ModelUpdate compute_update_single(const Vec& z_prev, const Vec& u_prev,
                                  const Vec& dz) {
  const int q = static_cast<int>(z_prev.size());
  const int m = static_cast<int>(u_prev.size());
  if (dz.size() != q) throw std::invalid_argument("update: dz dimension mismatch");

  Vec s(q + m);
  s << z_prev, u_prev;
  const double norm2 = s.squaredNorm();
  if (norm2 == 0.0) return {Mat::Zero(q, q), Mat::Zero(q, m)};
  // pinv of a single column is s^T / ||s||^2, so the update is rank one.
  Mat G = dz * (s.transpose() / norm2);
  return split_update(G, q, m);
}

ModelUpdate compute_update_windowed(const AdaptationWindow& window,
                                    double svd_cutoff) {
  if (window.empty())
    throw std::invalid_argument("windowed update: empty window");

  const int w = window.size();
  const int q = static_cast<int>(window.entry(0).dz.size());
  const int m = static_cast<int>(window.entry(0).u_prev.size());
  const double nu = window.forgetting();

  Mat dZ(q, w);
  Mat S(q + m, w);
  for (int j = 0; j < w; ++j) {
    const auto& e = window.entry(j);  // oldest first
    const int age = w - 1 - j;
    dZ.col(j) = std::pow(nu, age) * e.dz;
    S.col(j).head(q) = e.z_prev;
    S.col(j).tail(m) = e.u_prev;
  }
  Mat G = dZ * pseudo_inverse(S, svd_cutoff);
  return split_update(G, q, m);
}

void apply_update(KoopmanModel& model, const ModelUpdate& update) {
  if (update.dA.rows() != model.q() || update.dA.cols() != model.q() ||
      update.dB.rows() != model.q() || update.dB.cols() != model.m())
    throw std::invalid_argument("apply_update: dimension mismatch");
  Mat next_A = model.A_hat + update.dA;
  Mat next_B = model.B_hat + update.dB;
  if (!next_A.allFinite() || !next_B.allFinite())
    throw std::runtime_error("apply_update: update would produce non-finite model");
  model.A_hat = std::move(next_A);
  model.B_hat = std::move(next_B);
  ++model.version;
}

}  // namespace etac
