#pragma once

#include <Eigen/Dense>

namespace etac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Monomial lifting dictionary: phi(x) = [x, x^2, ..., x^degree].
/// The first component of the lifted state is x itself, so the
/// projection back to optic flow is just the first entry.
struct ObservableDictionary {
  int degree = 2;

  int lifted_dim() const { return degree; }

  Vec lift(double x) const;
  double project(const Vec& z) const;
};

}  // namespace etac
