#pragma once

// The cusp-Hopf vector field on R^3
//
//   x' = (z - beta) x - delta y
//   y' = delta x + (z - beta) y
//   z' = tau + alpha z - z^3/3 - (x^2 + y^2)(1 + eps z) + zeta z x^3
//
// The z-axis is invariant; its equilibria (0,0,z*) solve
// tau + alpha z - z^3/3 = 0 and carry the eigenvalues
// (z* - beta) +- i delta (rotation plane) and alpha - z*^2 (axis).

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace langford {

struct ModelParams {
  double alpha = 0.0;
  double eps = 0.25;
  double tau = 0.6;
  double delta = 3.5;
  double beta = 0.7;
  double zeta = 0.1;
};

enum class StabilityTag {
  saddle_focus_2u1s,  // unstable rotation plane, stable axis
  saddle_focus_2s1u,  // stable rotation plane, unstable axis
  sink,               // everything stable (axis fold degeneracy counts here)
};

struct Equilibrium {
  double z_star = 0.0;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  std::complex<double> lambda_pair;  // the +i delta member of the pair
  double lambda_real = 0.0;
  StabilityTag tag = StabilityTag::sink;
};

Eigen::Vector3d eval_field(const Eigen::Vector3d& x, const ModelParams& p);
Eigen::Matrix3d eval_jacobian(const Eigen::Vector3d& x, const ModelParams& p);

// Axis restriction z' = g(z) and its derivative.
double axis_g(double z, const ModelParams& p);
double axis_g_prime(double z, const ModelParams& p);

// Fold of the axis equilibria in alpha (two of the three roots collide).
double saddle_node_alpha(double tau);

// All axis equilibria, Newton-polished to |g(z*)| < 1e-12, sorted by
// descending z*.  Within 1e-9 of the fold the root count is decided by the
// sign of the cubic discriminant and the colliding double root is tagged
// sink.
std::vector<Equilibrium> axis_equilibria(const ModelParams& p);

// Unit eigenvector of the rotation-plane eigenvalue lambda_pair
// ((z*-beta) + i delta): (1, -i, 0)/sqrt(2).
Eigen::Vector3cd pair_eigenvector();

const char* to_string(StabilityTag t);

}  // namespace langford
