#include "langford/flow.hpp"

#include <cmath>

#include "doctest.h"
#include "test_util.hpp"

using langford::integrate;
using langford::integrate_variational;
using langford::ModelParams;
using langford::next_crossing_variational;
using langford::next_section_crossing;
using langford::SectionCrossing;
using langford::TimeDirection;
using langford::Trajectory;
using langford::VariationalState;

namespace {

ModelParams params(double alpha) {
  ModelParams p;
  p.alpha = alpha;
  return p;
}

Eigen::Vector3d flow_to(const Eigen::Vector3d& x0, double t,
                        const ModelParams& p, double tol) {
  return integrate(x0, t, p, tol).states.back();
}

}  // namespace

TEST_SUITE("flow") {

TEST_CASE("tolerance range is enforced") {
  ModelParams p = params(0.8);
  Eigen::Vector3d x0(0.5, 0.0, 1.0);
  CHECK_THROWS_AS(integrate(x0, 1.0, p, 1e-15), std::invalid_argument);
  CHECK_THROWS_AS(integrate(x0, 1.0, p, 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(integrate_variational(x0, 1.0, p, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(next_section_crossing(x0, p, 1e-15), std::invalid_argument);
}

TEST_CASE("zero-time integration returns the initial state only") {
  ModelParams p = params(0.8);
  Eigen::Vector3d x0(0.5, -0.2, 1.0);
  Trajectory tr = integrate(x0, 0.0, p, 1e-10);
  REQUIRE(tr.times.size() == 1);
  CHECK(tr.times[0] == 0.0);
  CHECK(tr.states[0] == x0);

  VariationalState v = integrate_variational(x0, 0.0, p, 1e-10);
  CHECK(v.x == x0);
  CHECK(v.M == Eigen::Matrix3d::Identity());
  CHECK(v.trace_integral == 0.0);
}

TEST_CASE("trajectory bookkeeping: monotone nodes, exact endpoints") {
  ModelParams p = params(0.95);
  Eigen::Vector3d x0(0.4, 0.1, 1.2);
  Trajectory tr = integrate(x0, 3.0, p, 1e-9);
  REQUIRE(tr.times.size() >= 3);
  CHECK(tr.times.front() == 0.0);
  CHECK(tr.times.back() == 3.0);
  CHECK(tr.states.front() == x0);
  for (size_t i = 1; i < tr.times.size(); ++i)
    CHECK(tr.times[i] > tr.times[i - 1]);
  CHECK(tr.accepted_steps == long(tr.times.size()) - 1);
  CHECK(tr.rejected_steps >= 0);

  Trajectory bw = integrate(x0, -2.0, p, 1e-9);
  CHECK(bw.times.back() == -2.0);
  for (size_t i = 1; i < bw.times.size(); ++i)
    CHECK(bw.times[i] < bw.times[i - 1]);
}

TEST_CASE("the z-axis stays exactly invariant under the discrete flow") {
  ModelParams p = params(0.95);
  Trajectory tr = integrate(Eigen::Vector3d(0.0, 0.0, 2.0), 3.0, p, 1e-10);
  for (const Eigen::Vector3d& s : tr.states) {
    CHECK(s(0) == 0.0);
    CHECK(s(1) == 0.0);
  }
  // On the axis z relaxes toward the top equilibrium.
  double zstar = langford::axis_equilibria(p)[0].z_star;
  CHECK(std::abs(tr.states.back()(2) - zstar) < 1e-4);
  CHECK(std::abs(tr.states.back()(2) - zstar) < std::abs(2.0 - zstar));
}

TEST_CASE("an axis equilibrium is a fixed point of the flow") {
  ModelParams p = params(0.0);
  Eigen::Vector3d phat = langford::axis_equilibria(p)[0].point;
  Eigen::Vector3d xT = flow_to(phat, 5.0, p, 1e-10);
  CHECK((xT - phat).norm() < 1e-10);
}

TEST_CASE("forward-backward round trip") {
  ModelParams p = params(0.95);
  Eigen::Vector3d x0(0.5, 0.3, 0.9);
  double tol = 1e-10;
  Eigen::Vector3d xT = flow_to(x0, 2.0, p, tol);
  Eigen::Vector3d back = flow_to(xT, -2.0, p, tol);
  CHECK((back - x0).norm() <= 100 * tol);
}

TEST_CASE("integration is bitwise deterministic") {
  ModelParams p = params(0.8);
  Eigen::Vector3d x0(0.4, 0.0, 1.0);
  Trajectory a = integrate(x0, 7.0, p, 1e-9);
  Trajectory b = integrate(x0, 7.0, p, 1e-9);
  REQUIRE(a.times.size() == b.times.size());
  for (size_t i = 0; i < a.times.size(); ++i) {
    CHECK(a.times[i] == b.times[i]);
    CHECK(a.states[i] == b.states[i]);
  }
}

TEST_CASE("global error scales down with the tolerance") {
  ModelParams p = params(0.8);
  Eigen::Vector3d x0(0.4, 0.0, 1.0);
  const double T = 10.0;
  Eigen::Vector3d ref = flow_to(x0, T, p, 1e-13);
  double prev_err = -1.0;
  for (double tol : {1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 1e-11}) {
    double err = (flow_to(x0, T, p, tol) - ref).norm();
    if (prev_err >= 0.0) CHECK(err <= prev_err / 2.0);
    prev_err = err;
  }
  CHECK(prev_err < 1e-9);
}

TEST_CASE("step-size underflow on an overflowing state reports blow-up") {
  ModelParams p = params(0.8);
  CHECK_THROWS_AS(integrate(Eigen::Vector3d(0.0, 0.0, 1e155), 5.0, p, 1e-10),
                  langford::BlowUpError);
}

TEST_CASE("first variation against directional finite differences") {
  ModelParams p = params(0.8);
  Eigen::Vector3d x0(0.5, 0.3, 0.9);
  const double T = 2.0, tol = 1e-12, h = 1e-6;
  VariationalState v = integrate_variational(x0, T, p, tol);
  testutil::Rng rng(55);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    Eigen::Vector3d dir(u(rng), u(rng), u(rng));
    dir.normalize();
    Eigen::Vector3d fd =
        (flow_to(x0 + h * dir, T, p, tol) - flow_to(x0 - h * dir, T, p, tol)) /
        (2.0 * h);
    CHECK((v.M * dir - fd).norm() <= 1e-5 * std::max(1.0, (v.M * dir).norm()));
  }
}

TEST_CASE("variational transport at an axis equilibrium is the matrix exponential") {
  ModelParams p = params(0.0);
  langford::Equilibrium e = langford::axis_equilibria(p)[0];
  const double T = 0.8;
  VariationalState v = integrate_variational(e.point, T, p, 1e-12);
  double a = e.lambda_pair.real(), d = e.lambda_pair.imag();
  double ea = std::exp(a * T);
  Eigen::Matrix3d want = Eigen::Matrix3d::Zero();
  want(0, 0) = ea * std::cos(d * T);
  want(0, 1) = -ea * std::sin(d * T);
  want(1, 0) = ea * std::sin(d * T);
  want(1, 1) = ea * std::cos(d * T);
  want(2, 2) = std::exp(e.lambda_real * T);
  CHECK((v.M - want).norm() < 1e-9);
  CHECK((v.x - e.point).norm() < 1e-10);
}

TEST_CASE("determinant of the variation matches the trace integral") {
  ModelParams p = params(0.95);
  VariationalState v =
      integrate_variational(Eigen::Vector3d(0.5, 0.3, 0.9), 3.0, p, 1e-10);
  double det = v.M.determinant();
  double liouville = std::exp(v.trace_integral);
  CHECK(std::abs(det - liouville) <= 1e-6 * std::max(1.0, std::abs(liouville)));
}

TEST_CASE("first crossing from just off the section") {
  ModelParams p = params(0.65);
  Eigen::Vector3d x0(0.01, 0.9, 0.7);
  SectionCrossing c = next_section_crossing(x0, p, 1e-10);
  CHECK(std::abs(c.point(0)) < 1e-12);
  CHECK(c.point(1) > 0.0);
  CHECK(c.time > 1e-3);
  CHECK(c.time < 0.05);

  SectionCrossing c2 = next_section_crossing(x0, p, 1e-10);
  CHECK(c.point == c2.point);
  CHECK(c.time == c2.time);
}

TEST_CASE("crossings with y < 0 are skipped") {
  ModelParams p = params(0.65);
  Eigen::Vector3d x0(-0.01, -0.9, 0.7);
  // The orbit pierces {x = 0} with y < 0 almost immediately; the first
  // admissible crossing is half a rotation later.
  SectionCrossing c = next_section_crossing(x0, p, 1e-10);
  CHECK(c.point(1) > 0.0);
  CHECK(c.time > 0.4);
  CHECK(c.time < 1.5);

  CHECK_THROWS_AS(next_section_crossing(x0, p, 1e-10, TimeDirection::forward,
                                        /*budget=*/0.3),
                  langford::NoCrossingError);
}

TEST_CASE("a start on the z-axis cannot reach the section") {
  ModelParams p = params(0.65);
  CHECK_THROWS_AS(next_section_crossing(Eigen::Vector3d(0.0, 0.0, 2.0), p, 1e-10),
                  langford::NoCrossingError);
  CHECK_THROWS_AS(next_crossing_variational(Eigen::Vector3d(0.0, 0.0, 2.0), p,
                                            1e-10),
                  langford::NoCrossingError);
}

TEST_CASE("backward crossing inverts the forward one") {
  ModelParams p = params(0.65);
  double tol = 1e-11;
  SectionCrossing q1 =
      next_section_crossing(Eigen::Vector3d(0.01, 0.9, 0.7), p, tol);
  SectionCrossing q2 = next_section_crossing(q1.point, p, tol);
  CHECK(q2.time > 1.0);  // a full rotation, not the startup guard
  SectionCrossing back =
      next_section_crossing(q2.point, p, tol, TimeDirection::backward);
  CHECK(back.time < 0.0);
  CHECK((back.point - q1.point).norm() < 1e-6);
  CHECK(std::abs(-back.time - q2.time) < 1e-6);
}

TEST_CASE("variational crossing agrees with the plain one") {
  ModelParams p = params(0.65);
  Eigen::Vector3d x0(0.01, 0.9, 0.7);
  double tol = 1e-11;
  SectionCrossing plain = next_section_crossing(x0, p, tol);
  langford::CrossingVariational vc = next_crossing_variational(x0, p, tol);
  CHECK(std::abs(vc.time - plain.time) < 1e-8);
  CHECK((vc.point - plain.point).norm() < 1e-8);
  CHECK(std::abs(vc.point(0)) < 1e-12);

  // The transported variation is the fixed-time flow derivative at the
  // crossing time: check against central differences of the time-T map.
  double T = vc.time;
  double h = 1e-6;
  testutil::Rng rng(56);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Vector3d dir(u(rng), u(rng), u(rng));
  dir.normalize();
  Eigen::Vector3d fd =
      (flow_to(x0 + h * dir, T, p, tol) - flow_to(x0 - h * dir, T, p, tol)) /
      (2.0 * h);
  CHECK((vc.M * dir - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));

  double det = vc.M.determinant();
  CHECK(std::abs(det - std::exp(vc.trace_integral)) <=
        1e-8 * std::max(1.0, det));
}

}  // TEST_SUITE
