#pragma once

#include <string>

#include "etac/observables.hpp"

namespace etac {

/// Lifted-space linear model z' = A z + B u, x = C z, together with the
/// online-adapted estimates (A_hat, B_hat). C is fixed to [I 0] so the
/// first n lifted components are the state itself.
struct KoopmanModel {
  Mat A;       // q x q nominal
  Mat B;       // q x m nominal
  Mat C;       // n x q, [I 0]
  Mat A_hat;   // q x q adapted estimate
  Mat B_hat;   // q x m adapted estimate
  long version = 0;  // bumped by apply_update; lets MPC reuse factorizations

  int q() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int n() const { return static_cast<int>(C.rows()); }

  /// Builds a model from nominal (A, B) with C = [I 0] and the adapted
  /// estimates initialized to the nominal matrices.
  static KoopmanModel from_nominal(const Mat& A, const Mat& B, int n = 1);

  /// Dimension consistency, C structure and finiteness checks.
  void validate() const;
};

/// JSON serialization: {q, m, A, B, C}, matrices flattened row-major.
void save_model(const KoopmanModel& model, const std::string& path);
KoopmanModel load_model(const std::string& path);

}  // namespace etac
