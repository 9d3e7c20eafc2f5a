#pragma once

#include <functional>
#include <vector>

#include "attnclust/attnclust.hpp"

namespace testing_support {

using attnclust::Vec;

inline Vec random_vector(int d, attnclust::Engine& eng, double scale = 1.0) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * attnclust::standard_normal(eng);
  return v;
}

// Relative error with a floor so that tiny gradients compare absolutely.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double central_difference(const std::function<double(double)>& f, double h = 1e-5) {
  return (f(h) - f(-h)) / (2 * h);
}

}  // namespace testing_support
