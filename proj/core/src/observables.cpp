#include "etac/observables.hpp"

#include <cmath>
#include <stdexcept>

namespace etac {

Vec ObservableDictionary::lift(double x) const {
  if (degree < 1) throw std::invalid_argument("dictionary degree must be >= 1");
  if (!std::isfinite(x)) throw std::invalid_argument("lift: non-finite optic flow");
  Vec z(degree);
  double p = 1.0;
  for (int i = 0; i < degree; ++i) {
    p *= x;
    z(i) = p;
  }
  return z;
}

double ObservableDictionary::project(const Vec& z) const {
  if (z.size() != degree)
    throw std::invalid_argument("project: lifted state has wrong dimension");
  return z(0);
}

}  // namespace etac
