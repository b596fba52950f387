#pragma once

#include <complex>
#include <random>

#include <Eigen/Dense>

namespace testutil {

using cplx = std::complex<double>;

// Relative closeness with an absolute floor of 1, so tiny expected values
// don't demand absurd precision.
inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool rel_close(const cplx& a, const cplx& b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline bool vec_close(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      double tol) {
  return (a - b).norm() <= tol * std::max(1.0, std::max(a.norm(), b.norm()));
}

// One shared engine type; each test case seeds its own instance so ordering
// between cases never changes results.
using Rng = std::mt19937_64;

inline cplx random_coeff(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {u(rng), u(rng)};
}

}  // namespace testutil
