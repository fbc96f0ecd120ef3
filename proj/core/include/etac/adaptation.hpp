#pragma once

#include <deque>

#include "etac/model.hpp"

namespace etac {

/// Additive correction to the adapted model parameters.
struct ModelUpdate {
  Mat dA;  // q x q
  Mat dB;  // q x m
};

/// Sliding history of (previous lifted state, input, lifted prediction
/// error) used by the windowed update. The prediction error of an entry
/// is whatever it was when the entry was pushed; it is not recomputed
/// under later models. The forgetting weight of the entry at age a
/// (newest a = 0) is nu^a.
class AdaptationWindow {
 public:
  struct Entry {
    Vec z_prev;
    Vec u_prev;
    Vec dz;
  };

  AdaptationWindow(int capacity, double forgetting);

  void push(Vec z_prev, Vec u_prev, Vec dz);
  void clear() { entries_.clear(); }

  int capacity() const { return capacity_; }
  double forgetting() const { return forgetting_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  /// Oldest-first access, index 0 = oldest entry.
  const Entry& entry(int idx) const { return entries_.at(idx); }

 private:
  int capacity_;
  double forgetting_;
  std::deque<Entry> entries_;
};

/// One-step lifted prediction error against the current adapted model:
/// dz = z_obs - (A_hat z_prev + B_hat u_prev).
Vec prediction_error(const KoopmanModel& model, const Vec& z_prev,
                     const Vec& u_prev, const Vec& z_obs);

/// Moore-Penrose pseudo-inverse via SVD; singular values below
/// tol * sigma_max are treated as zero. A zero matrix maps to zero.
Mat pseudo_inverse(const Mat& M, double tol = 1e-10);

/// Rank-one update [dA dB] = dz * pinv([z_prev; u_prev]) driving the
/// one-step residual to zero. A zero regressor yields a zero update.
ModelUpdate compute_update_single(const Vec& z_prev, const Vec& u_prev,
                                  const Vec& dz);

/// Windowed update [dA dB] = DZ * pinv([Z; U]) where the columns of DZ
/// carry the forgetting weights (newest unweighted) and [Z; U] stacks the
/// raw regressors. Minimum-Frobenius-residual solution, minimum-norm when
/// underdetermined. svd_cutoff is the relative singular-value threshold of
/// the pseudo-inverse; raising it discards weakly observed regressor
/// directions instead of amplifying them.
ModelUpdate compute_update_windowed(const AdaptationWindow& window,
                                    double svd_cutoff = 1e-10);

/// A_hat += dA, B_hat += dB. Rejects (throws, model untouched) if the
/// result would be non-finite.
void apply_update(KoopmanModel& model, const ModelUpdate& update);

}  // namespace etac
