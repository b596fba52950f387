#pragma once

// Polynomial charts for the two-dimensional invariant manifolds attached to
// the rotation-plane eigenvalue pair of an axis equilibrium.  A chart is the
// truncated expansion P(theta1, theta2) solving
//
//   DP(theta) . diag(lambda, conj(lambda)) theta = f(P(theta)),
//   P(0) = p_hat,  P_(1,0) = s xi,  P_(0,1) = s conj(xi),
//
// built order by order from 3x3 linear solves.  Real points come from the
// conjugate locus theta = (s1 + i s2, s1 - i s2).

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <iosfwd>

#include "langford/model.hpp"
#include "langford/series2.hpp"

namespace langford {

enum class ManifoldStability { stable, unstable };

struct Chart {
  Equilibrium base;
  ModelParams params;
  std::complex<double> lambda;  // pair member with positive imaginary part
  ManifoldStability stability = ManifoldStability::unstable;
  int order = 1;
  std::array<TaylorPoly2, 3> components{TaylorPoly2(1), TaylorPoly2(1),
                                        TaylorPoly2(1)};
  ScalingRecord scaling;
};

// The coefficient matrix Df(p_hat) - (m lambda + n conj(lambda)) I became
// numerically singular at the named order.
struct IllConditionedOrder : std::runtime_error {
  IllConditionedOrder(int m_, int n_)
      : std::runtime_error("homological solve ill-conditioned at order (" +
                           std::to_string(m_) + "," + std::to_string(n_) + ")"),
        m(m_),
        n(n_) {}
  int m, n;
};

// A nominally real evaluation produced a non-negligible imaginary part: the
// coefficient table has lost conjugate symmetry.
struct SymmetryViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The coefficient tail is already at round-off; a decay fit would be noise.
struct UnderflowFit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solve the homological equations up to total degree N with the first-order
// coefficients scaled by `scale`.  `stab` must match the sign of
// Re(lambda_pair) of eq.
Chart solve_homological(const Equilibrium& eq, const ModelParams& p,
                        ManifoldStability stab, int N, double scale);

// Right-hand side s_mn of the order-(m,n) homological equation, assembled
// from corner-stripped products of the current coefficient tables.
Eigen::Vector3cd homological_rhs(const std::array<TaylorPoly2, 3>& P,
                                 const ModelParams& p, int m, int n);

// || [Df(p_hat) - (m l1 + n l2) I] p_mn - s_mn ||, recomputed from scratch.
double homological_residual(const Chart& c, int m, int n);

// Least-squares fit of log max_{m+n=k} |p_mn| against k (k = 2..N), read as
// |p_mn| ~ C R^-(m+n).  Requires order >= 8.
ScalingRecord decay_fit(const Chart& c);

// Scale multiplier s making the fitted envelope hit eps0 at total degree N:
// C (s/R)^N = eps0.  Re-solving the chart from scratch at this scale is the
// intended use.
double choose_scale(const Chart& c, double eps0);

// Flow-conjugacy indicator: max over K+1 boundary angles of
// || phi(P(theta_j), T) - P(e^(Lambda T) theta_j) ||.  T must point in the
// contracting direction of the chart (T > 0 stable, T < 0 unstable); K >= 8.
double error_conj(const Chart& c, double T, int K, double tol_int);

// P at the real locus (s1 + i s2, s1 - i s2); imaginary residue >= 1e-10
// throws SymmetryViolation, below that it is discarded.
Eigen::Vector3d eval_real(const Chart& c, double s1, double s2);

// Chart file: `key=value` header lines followed by the three coefficient
// tables in the series2 CSV format.  Written with %.17g, so a load/save
// cycle reproduces the file byte for byte.
void save_chart(std::ostream& os, const Chart& c);
Chart load_chart(std::istream& is);

// Path wrappers.  Loading a missing or malformed file throws
// std::invalid_argument naming the path.
void save_chart_file(const std::string& path, const Chart& c);
Chart load_chart_file(const std::string& path);

const char* to_string(ManifoldStability s);

}  // namespace langford
