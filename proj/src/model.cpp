#include "langford/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace langford {

Eigen::Vector3d eval_field(const Eigen::Vector3d& v, const ModelParams& p) {
  const double x = v[0], y = v[1], z = v[2];
  Eigen::Vector3d f;
  f[0] = (z - p.beta) * x - p.delta * y;
  f[1] = p.delta * x + (z - p.beta) * y;
  f[2] = p.tau + p.alpha * z - z * z * z / 3.0 -
         (x * x + y * y) * (1.0 + p.eps * z) + p.zeta * z * x * x * x;
  return f;
}

Eigen::Matrix3d eval_jacobian(const Eigen::Vector3d& v, const ModelParams& p) {
  const double x = v[0], y = v[1], z = v[2];
  Eigen::Matrix3d J;
  J(0, 0) = z - p.beta;
  J(0, 1) = -p.delta;
  J(0, 2) = x;
  J(1, 0) = p.delta;
  J(1, 1) = z - p.beta;
  J(1, 2) = y;
  J(2, 0) = -2.0 * x * (1.0 + p.eps * z) + 3.0 * p.zeta * z * x * x;
  J(2, 1) = -2.0 * y * (1.0 + p.eps * z);
  J(2, 2) = p.alpha - z * z - p.eps * (x * x + y * y) + p.zeta * x * x * x;
  return J;
}

double axis_g(double z, const ModelParams& p) {
  return p.tau + p.alpha * z - z * z * z / 3.0;
}

double axis_g_prime(double z, const ModelParams& p) {
  return p.alpha - z * z;
}

double saddle_node_alpha(double tau) {
  return std::pow(1.5 * tau, 2.0 / 3.0);
}

namespace {

// Real roots of z^3 - 3 alpha z - 3 tau = 0 (that is g = 0), descending.
std::vector<double> axis_roots(const ModelParams& p) {
  const double alpha = p.alpha, tau = p.tau;
  // Discriminant sign of the depressed cubic decides one vs three roots;
  // near the fold this is the tie-breaker the caller relies on.
  const double disc = 108.0 * alpha * alpha * alpha - 243.0 * tau * tau;
  std::vector<double> roots;
  if (disc > 0.0) {
    // Three distinct real roots (trig form; alpha > 0 here).
    const double arg = 1.5 * tau * std::pow(alpha, -1.5);
    const double phi = std::acos(std::min(1.0, std::max(-1.0, arg))) / 3.0;
    const double rad = 2.0 * std::sqrt(alpha);
    for (int k = 0; k < 3; ++k)
      roots.push_back(rad * std::cos(phi - 2.0 * M_PI * k / 3.0));
  } else if (disc < 0.0) {
    // One real root via Cardano.
    const double q = -3.0 * tau;     // z^3 + p z + q with p = -3 alpha
    const double pp = -3.0 * alpha;
    const double s = std::sqrt(q * q / 4.0 + pp * pp * pp / 27.0);
    roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s));
  } else {
    // Exactly at the fold: the double root is reported once, so the list
    // has two entries (simple root 2 sqrt(alpha), double root -sqrt(alpha)).
    roots.push_back(2.0 * std::sqrt(alpha));
    roots.push_back(-std::sqrt(alpha));
  }

  // One Newton step per root unless the root is (near-)degenerate; then a
  // few more polish iterations would divide by g' ~ 0, so leave it be.
  for (double& z : roots) {
    for (int it = 0; it < 8; ++it) {
      const double g = axis_g(z, p);
      const double gp = axis_g_prime(z, p);
      if (std::abs(g) < 1e-14 || std::abs(gp) < 1e-8) break;
      z -= g / gp;
    }
  }
  std::sort(roots.begin(), roots.end(), std::greater<double>());
  return roots;
}

}  // namespace

Eigen::Vector3cd pair_eigenvector() {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::Vector3cd xi;
  xi << std::complex<double>(inv_sqrt2, 0.0),
      std::complex<double>(0.0, -inv_sqrt2), std::complex<double>(0.0, 0.0);
  return xi;
}

std::vector<Equilibrium> axis_equilibria(const ModelParams& p) {
  std::vector<Equilibrium> out;
  for (double z : axis_roots(p)) {
    Equilibrium e;
    e.z_star = z;
    e.point = Eigen::Vector3d(0.0, 0.0, z);
    e.lambda_pair = std::complex<double>(z - p.beta, p.delta);
    e.lambda_real = p.alpha - z * z;
    const bool pair_unstable = e.lambda_pair.real() > 0.0;
    const bool axis_unstable = e.lambda_real > 0.0;
    if (pair_unstable && !axis_unstable)
      e.tag = StabilityTag::saddle_focus_2u1s;
    else if (!pair_unstable && axis_unstable)
      e.tag = StabilityTag::saddle_focus_2s1u;
    else if (!pair_unstable && !axis_unstable)
      e.tag = StabilityTag::sink;
    else
      throw std::runtime_error("axis_equilibria: fully repelling equilibrium");
    out.push_back(e);
  }
  return out;
}

const char* to_string(StabilityTag t) {
  switch (t) {
    case StabilityTag::saddle_focus_2u1s: return "saddle_focus_2u1s";
    case StabilityTag::saddle_focus_2s1u: return "saddle_focus_2s1u";
    case StabilityTag::sink: return "sink";
  }
  return "?";
}

}  // namespace langford
