#include "langford/model.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using langford::axis_equilibria;
using langford::eval_field;
using langford::eval_jacobian;
using langford::Equilibrium;
using langford::ModelParams;
using langford::StabilityTag;
using testutil::rel_close;
using testutil::Rng;

namespace {

ModelParams params(double alpha) {
  ModelParams p;
  p.alpha = alpha;
  return p;
}

// Central finite-difference Jacobian, the oracle for eval_jacobian.
Eigen::Matrix3d fd_jacobian(const Eigen::Vector3d& x, const ModelParams& p,
                            double h) {
  Eigen::Matrix3d J;
  for (int j = 0; j < 3; ++j) {
    Eigen::Vector3d e = Eigen::Vector3d::Zero();
    e(j) = h;
    J.col(j) = (eval_field(x + e, p) - eval_field(x - e, p)) / (2.0 * h);
  }
  return J;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("field at the origin is (0, 0, tau)") {
  ModelParams p = params(0.37);
  Eigen::Vector3d f = eval_field(Eigen::Vector3d::Zero(), p);
  CHECK(f(0) == 0.0);
  CHECK(f(1) == 0.0);
  CHECK(f(2) == p.tau);
}

TEST_CASE("field at (1, 0, beta)") {
  ModelParams p = params(0.95);
  Eigen::Vector3d f = eval_field(Eigen::Vector3d(1.0, 0.0, p.beta), p);
  // x' = (beta-beta)*1 - delta*0, y' = delta*1.
  CHECK(f(0) == 0.0);
  CHECK(f(1) == p.delta);
  double zdot = p.tau + p.alpha * p.beta - std::pow(p.beta, 3) / 3.0 -
                (1.0 + p.eps * p.beta) + p.zeta * p.beta;
  CHECK(f(2) == doctest::Approx(zdot).epsilon(1e-15));
  CHECK(rel_close(f(2), 0.045666666666666667, 1e-12));
}

TEST_CASE("the z-axis is exactly invariant") {
  Rng rng(320);
  std::uniform_real_distribution<double> uz(-3.0, 3.0), ua(-1.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    ModelParams p = params(ua(rng));
    double z = uz(rng);
    Eigen::Vector3d f = eval_field(Eigen::Vector3d(0.0, 0.0, z), p);
    CHECK(f(0) == 0.0);
    CHECK(f(1) == 0.0);
    CHECK(f(2) == langford::axis_g(z, p));
  }
}

TEST_CASE("jacobian matches central finite differences") {
  Rng rng(321);
  std::uniform_real_distribution<double> u(-1.5, 1.5), ua(0.0, 1.2);
  for (int i = 0; i < 100; ++i) {
    ModelParams p = params(ua(rng));
    Eigen::Vector3d x(u(rng), u(rng), u(rng));
    Eigen::Matrix3d J = eval_jacobian(x, p);
    Eigen::Matrix3d Jfd = fd_jacobian(x, p, 1e-6);
    CHECK((J - Jfd).norm() <= 1e-6 * std::max(1.0, J.norm()));
  }
}

TEST_CASE("jacobian z-row picks up the cubic-in-x term") {
  ModelParams p = params(1.0);
  Eigen::Matrix3d J = eval_jacobian(Eigen::Vector3d(1.0, 1.0, 1.0), p);
  // d(z')/dx = -2x(1 + eps z) + 3 zeta z x^2 = -2.5 + 0.3.
  CHECK(rel_close(J(2, 0), -2.2, 1e-14));
  // d(z')/dz = alpha - z^2 - eps(x^2+y^2) + zeta x^3 = 1 - 1 - 0.5 + 0.1.
  CHECK(rel_close(J(2, 2), -0.4, 1e-14));
  CHECK(J(0, 0) == J(1, 1));
  CHECK(J(0, 1) == -p.delta);
  CHECK(J(1, 0) == p.delta);
}

TEST_CASE("axis g and g' are consistent") {
  ModelParams p = params(0.8);
  Rng rng(17);
  std::uniform_real_distribution<double> uz(-2.5, 2.5);
  for (int i = 0; i < 50; ++i) {
    double z = uz(rng);
    double h = 1e-6;
    double fd =
        (langford::axis_g(z + h, p) - langford::axis_g(z - h, p)) / (2 * h);
    CHECK(rel_close(langford::axis_g_prime(z, p), fd, 1e-8));
  }
}

TEST_CASE("single equilibrium below the fold (alpha = 0)") {
  std::vector<Equilibrium> eq = axis_equilibria(params(0.0));
  REQUIRE(eq.size() == 1);
  const Equilibrium& e = eq[0];
  // z' = tau - z^3/3 = 0  =>  z* = (3 tau)^(1/3).
  double zstar = std::cbrt(3.0 * 0.6);
  CHECK(rel_close(e.z_star, zstar, 1e-13));
  CHECK(rel_close(e.z_star, 1.2164403991146798, 1e-12));
  CHECK(std::abs(langford::axis_g(e.z_star, params(0.0))) < 1e-12);
  CHECK(e.point(0) == 0.0);
  CHECK(e.point(1) == 0.0);
  CHECK(rel_close(e.lambda_pair.real(), zstar - 0.7, 1e-12));
  CHECK(e.lambda_pair.imag() == 3.5);
  CHECK(rel_close(e.lambda_real, -zstar * zstar, 1e-12));
  CHECK(e.tag == StabilityTag::saddle_focus_2u1s);
}

TEST_CASE("three equilibria above the fold (alpha = 0.95)") {
  ModelParams p = params(0.95);
  std::vector<Equilibrium> eq = axis_equilibria(p);
  REQUIRE(eq.size() == 3);
  CHECK(eq[0].z_star > eq[1].z_star);
  CHECK(eq[1].z_star > eq[2].z_star);
  for (const Equilibrium& e : eq) {
    CHECK(std::abs(langford::axis_g(e.z_star, p)) < 1e-12);
    // Spectrum cross-check against a generic eigensolver on the Jacobian.
    Eigen::EigenSolver<Eigen::Matrix3d> es(eval_jacobian(e.point, p));
    bool pair_found = false, real_found = false;
    for (int i = 0; i < 3; ++i) {
      std::complex<double> ev = es.eigenvalues()(i);
      if (ev.imag() > 1.0)
        pair_found = rel_close(ev, e.lambda_pair, 1e-9);
      else if (std::abs(ev.imag()) < 1e-9)
        real_found = rel_close(ev.real(), e.lambda_real, 1e-9);
    }
    CHECK(pair_found);
    CHECK(real_found);
  }
  CHECK(eq[0].tag == StabilityTag::saddle_focus_2u1s);
  CHECK(eq[1].tag == StabilityTag::saddle_focus_2s1u);
  CHECK(eq[2].tag == StabilityTag::sink);
  CHECK(rel_close(eq[0].z_star, 1.9432643761741540, 1e-11));
  CHECK(rel_close(eq[1].z_star, -0.8382430085433180, 1e-11));
  CHECK(rel_close(eq[2].z_star, -1.1050213676308360, 1e-11));
}

TEST_CASE("fold location in alpha") {
  CHECK(rel_close(langford::saddle_node_alpha(0.6), 0.9321697517861, 1e-12));
  // tau = 2/3 gives (3 tau / 2)^(2/3) = 1 exactly.
  CHECK(langford::saddle_node_alpha(2.0 / 3.0) == 1.0);
}

TEST_CASE("root count flips across the fold") {
  double a4 = langford::saddle_node_alpha(0.6);
  CHECK(axis_equilibria(params(a4 - 1e-6)).size() == 1);
  std::vector<Equilibrium> above = axis_equilibria(params(a4 + 1e-6));
  REQUIRE(above.size() == 3);
  // The two colliding roots straddle -sqrt(alpha4).
  double zc = -std::sqrt(a4);
  CHECK(std::abs(above[1].z_star - zc) < 2e-2);
  CHECK(std::abs(above[2].z_star - zc) < 2e-2);
  CHECK(above[1].z_star > zc);
  CHECK(above[2].z_star < zc);
}

TEST_CASE("exact fold: double root reported once and tagged sink") {
  // tau = 2/3 makes the fold alpha exactly 1 and the discriminant exactly
  // zero in floating point, exercising the degenerate branch.
  ModelParams p;
  p.tau = 2.0 / 3.0;
  p.alpha = 1.0;
  std::vector<Equilibrium> eq = axis_equilibria(p);
  REQUIRE(eq.size() == 2);
  CHECK(rel_close(eq[0].z_star, 2.0, 1e-12));
  CHECK(rel_close(eq[1].z_star, -1.0, 1e-12));
  CHECK(eq[1].lambda_real == 0.0);
  CHECK(eq[1].tag == StabilityTag::sink);
}

TEST_CASE("double root satisfies g = g' = 0 at the fold") {
  ModelParams p;
  double a4 = langford::saddle_node_alpha(p.tau);
  p.alpha = a4;
  double zc = -std::sqrt(a4);
  CHECK(std::abs(langford::axis_g(zc, p)) < 1e-12);
  CHECK(std::abs(langford::axis_g_prime(zc, p)) < 1e-12);
}

TEST_CASE("pair eigenvector is (1, -i, 0)/sqrt(2)") {
  Eigen::Vector3cd xi = langford::pair_eigenvector();
  double s = 1.0 / std::sqrt(2.0);
  CHECK(xi(0) == std::complex<double>(s, 0.0));
  CHECK(xi(1) == std::complex<double>(0.0, -s));
  CHECK(xi(2) == std::complex<double>(0.0, 0.0));
  // Eigenvector property at an actual equilibrium.
  ModelParams p = params(0.95);
  Equilibrium e = axis_equilibria(p)[0];
  Eigen::Vector3cd lhs = eval_jacobian(e.point, p).cast<std::complex<double>>() * xi;
  Eigen::Vector3cd rhs = e.lambda_pair * xi;
  CHECK((lhs - rhs).norm() < 1e-12);
}

TEST_CASE("stability tag names") {
  CHECK(std::string(to_string(StabilityTag::saddle_focus_2u1s)) ==
        "saddle_focus_2u1s");
  CHECK(std::string(to_string(StabilityTag::sink)) == "sink");
}

}  // TEST_SUITE
