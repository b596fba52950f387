#include "langford/series2.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <utility>

#include "doctest.h"
#include "test_util.hpp"

using langford::cplx;
using langford::TaylorPoly2;
using testutil::rel_close;
using testutil::Rng;

namespace {

// Independent reference implementation used as the oracle: coefficients live
// in a map, products are the direct double sum over all exponent splits.
// Deliberately shares no code with TaylorPoly2.
using CoeffMap = std::map<std::pair<int, int>, cplx>;

CoeffMap to_map(const TaylorPoly2& p) {
  CoeffMap m;
  for (int d = 0; d <= p.order(); ++d)
    for (int i = 0; i <= d; ++i) m[{i, d - i}] = p(i, d - i);
  return m;
}

CoeffMap map_product(const CoeffMap& a, const CoeffMap& b, int order) {
  CoeffMap r;
  for (const auto& [ka, va] : a)
    for (const auto& [kb, vb] : b) {
      int m = ka.first + kb.first;
      int n = ka.second + kb.second;
      if (m + n > order) continue;
      r[{m, n}] += va * vb;
    }
  return r;
}

TaylorPoly2 random_poly(int order, Rng& rng) {
  TaylorPoly2 p(order);
  for (int d = 0; d <= order; ++d)
    for (int i = 0; i <= d; ++i) p.at(i, d - i) = testutil::random_coeff(rng);
  return p;
}

cplx map_eval(const CoeffMap& m, cplx t1, cplx t2) {
  cplx acc = 0.0;
  for (const auto& [k, v] : m)
    acc += v * std::pow(t1, k.first) * std::pow(t2, k.second);
  return acc;
}

}  // namespace

TEST_SUITE("series2") {

TEST_CASE("hand-worked product of two affine series") {
  TaylorPoly2 a(2), b(2);
  a.at(0, 0) = 2.0;
  a.at(1, 0) = 3.0;
  b.at(0, 0) = 5.0;
  b.at(0, 1) = 7.0;
  TaylorPoly2 c = langford::product(a, b);
  CHECK(c(0, 0) == cplx(10.0));
  CHECK(c(1, 0) == cplx(15.0));
  CHECK(c(0, 1) == cplx(14.0));
  CHECK(c(1, 1) == cplx(21.0));
  CHECK(c(2, 0) == cplx(0.0));
  CHECK(c(0, 2) == cplx(0.0));
}

TEST_CASE("monomial exponents add, truncation drops overflow") {
  TaylorPoly2 a(3), b(3);
  a.at(2, 0) = cplx(0.0, 1.0);
  b.at(0, 2) = 4.0;
  b.at(1, 1) = 1.0;
  TaylorPoly2 c = langford::product(a, b);
  // (2,0)*(0,2) lands on the order-3 boundary?  2+0+0+2 = 4 > 3: dropped.
  for (int d = 0; d <= 3; ++d)
    for (int i = 0; i <= d; ++i) CHECK(c(i, d - i) == cplx(0.0));

  TaylorPoly2 a5(5), b5(5);
  a5.at(2, 0) = cplx(0.0, 1.0);
  b5.at(0, 2) = 4.0;
  b5.at(1, 1) = 1.0;
  TaylorPoly2 c5 = langford::product(a5, b5);
  CHECK(c5(2, 2) == cplx(0.0, 4.0));
  CHECK(c5(3, 1) == cplx(0.0, 1.0));
}

TEST_CASE("product matches map-based oracle on random data") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    int order = 1 + static_cast<int>(rng() % 7);
    TaylorPoly2 a = random_poly(order, rng);
    TaylorPoly2 b = random_poly(order, rng);
    TaylorPoly2 c = langford::product(a, b);
    CoeffMap ref = map_product(to_map(a), to_map(b), order);
    for (int d = 0; d <= order; ++d)
      for (int i = 0; i <= d; ++i) {
        cplx want = ref.count({i, d - i}) ? ref[{i, d - i}] : cplx(0.0);
        CHECK(rel_close(c(i, d - i), want, 1e-13));
      }
  }
}

TEST_CASE("product is commutative and distributes over addition") {
  Rng rng(77);
  int order = 6;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  TaylorPoly2 c = random_poly(order, rng);

  TaylorPoly2 ab = langford::product(a, b);
  TaylorPoly2 ba = langford::product(b, a);
  for (int d = 0; d <= order; ++d)
    for (int i = 0; i <= d; ++i)
      CHECK(rel_close(ab(i, d - i), ba(i, d - i), 1e-13));

  // a*(b+c) == a*b + a*c, coefficientwise to roundoff.
  TaylorPoly2 bc(order);
  for (int d = 0; d <= order; ++d)
    for (int i = 0; i <= d; ++i) bc.at(i, d - i) = b(i, d - i) + c(i, d - i);
  TaylorPoly2 lhs = langford::product(a, bc);
  TaylorPoly2 ac = langford::product(a, c);
  for (int d = 0; d <= order; ++d)
    for (int i = 0; i <= d; ++i)
      CHECK(rel_close(lhs(i, d - i), ab(i, d - i) + ac(i, d - i), 1e-13));
}

TEST_CASE("product is associative") {
  Rng rng(78);
  int order = 5;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  TaylorPoly2 c = random_poly(order, rng);
  TaylorPoly2 l = langford::product(langford::product(a, b), c);
  TaylorPoly2 r = langford::product(a, langford::product(b, c));
  for (int d = 0; d <= order; ++d)
    for (int i = 0; i <= d; ++i)
      CHECK(rel_close(l(i, d - i), r(i, d - i), 1e-13));
}

TEST_CASE("order mismatch and bad chain arity throw") {
  TaylorPoly2 a(3), b(4);
  CHECK_THROWS_AS(langford::product(a, b), std::invalid_argument);
  TaylorPoly2 c(3);
  CHECK_THROWS_AS(langford::product_chain({&a}), std::invalid_argument);
  CHECK_THROWS_AS(langford::product_chain({&a, &c, &a, &c, &a}),
                  std::invalid_argument);
  CHECK_THROWS_AS(a.at(2, 2), std::out_of_range);
  CHECK_THROWS_AS(a.at(-1, 0), std::out_of_range);
}

TEST_CASE("product_chain folds like repeated product") {
  Rng rng(99);
  int order = 5;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  TaylorPoly2 c = random_poly(order, rng);
  TaylorPoly2 d = random_poly(order, rng);

  TaylorPoly2 abc = langford::product_chain({&a, &b, &c});
  TaylorPoly2 ref3 = langford::product(langford::product(a, b), c);
  TaylorPoly2 abcd = langford::product_chain({&a, &b, &c, &d});
  TaylorPoly2 ref4 = langford::product(ref3, d);
  for (int dd = 0; dd <= order; ++dd)
    for (int i = 0; i <= dd; ++i) {
      CHECK(abc(i, dd - i) == ref3(i, dd - i));
      CHECK(abcd(i, dd - i) == ref4(i, dd - i));
    }
}

TEST_CASE("corner-stripped coefficient: defining identity, two factors") {
  Rng rng(4242);
  int order = 6;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  TaylorPoly2 full = langford::product(a, b);
  for (int d = 1; d <= order; ++d)
    for (int i = 0; i <= d; ++i) {
      int m = i, n = d - i;
      cplx got = langford::corner_stripped_coeff({&a, &b}, m, n);
      cplx want = full(m, n) - a(m, n) * b(0, 0) - a(0, 0) * b(m, n);
      CHECK(rel_close(got, want, 1e-13));
    }
}

TEST_CASE("corner-stripped coefficient vanishes at total degree one") {
  Rng rng(11);
  TaylorPoly2 a = random_poly(4, rng);
  TaylorPoly2 b = random_poly(4, rng);
  TaylorPoly2 c = random_poly(4, rng);
  CHECK(langford::corner_stripped_coeff({&a, &b}, 1, 0) == cplx(0.0));
  CHECK(langford::corner_stripped_coeff({&a, &b}, 0, 1) == cplx(0.0));
  CHECK(langford::corner_stripped_coeff({&a, &b, &c}, 1, 0) == cplx(0.0));
}

TEST_CASE("corner-stripped coefficient: three and four factors") {
  Rng rng(5150);
  int order = 5;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  TaylorPoly2 c = random_poly(order, rng);
  TaylorPoly2 d = random_poly(order, rng);

  TaylorPoly2 abc = langford::product_chain({&a, &b, &c});
  TaylorPoly2 abcd = langford::product_chain({&a, &b, &c, &d});
  for (int deg = 2; deg <= order; ++deg)
    for (int i = 0; i <= deg; ++i) {
      int m = i, n = deg - i;
      cplx want3 = abc(m, n) - a(m, n) * b(0, 0) * c(0, 0) -
                   b(m, n) * a(0, 0) * c(0, 0) - c(m, n) * a(0, 0) * b(0, 0);
      CHECK(rel_close(langford::corner_stripped_coeff({&a, &b, &c}, m, n),
                      want3, 1e-12));
      cplx want4 = abcd(m, n) - a(m, n) * b(0, 0) * c(0, 0) * d(0, 0) -
                   b(m, n) * a(0, 0) * c(0, 0) * d(0, 0) -
                   c(m, n) * a(0, 0) * b(0, 0) * d(0, 0) -
                   d(m, n) * a(0, 0) * b(0, 0) * c(0, 0);
      CHECK(rel_close(langford::corner_stripped_coeff({&a, &b, &c, &d}, m, n),
                      want4, 1e-12));
    }
}

TEST_CASE("corner-stripped coefficient ignores entries of degree >= m+n") {
  // The recursive solve relies on exactly this: garbage above the working
  // degree (other than the subtracted corners themselves) must not leak in.
  Rng rng(31337);
  int order = 6;
  TaylorPoly2 a = random_poly(order, rng);
  TaylorPoly2 b = random_poly(order, rng);
  int m = 2, n = 2;
  cplx base = langford::corner_stripped_coeff({&a, &b}, m, n);

  TaylorPoly2 a2 = a;
  TaylorPoly2 b2 = b;
  for (int d = m + n; d <= order; ++d)
    for (int i = 0; i <= d; ++i) {
      a2.at(i, d - i) = testutil::random_coeff(rng);
      b2.at(i, d - i) = testutil::random_coeff(rng);
    }
  CHECK(langford::corner_stripped_coeff({&a2, &b2}, m, n) == base);
}

TEST_CASE("evaluate matches map-based oracle and factors over products") {
  Rng rng(8);
  int order = 8;
  TaylorPoly2 p = random_poly(order, rng);
  CoeffMap pm = to_map(p);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  for (int trial = 0; trial < 20; ++trial) {
    cplx t1(u(rng), u(rng)), t2(u(rng), u(rng));
    CHECK(rel_close(langford::evaluate(p, t1, t2), map_eval(pm, t1, t2),
                    1e-12));
  }

  // With both factors supported on degree <= order/2 the truncated product
  // is exact, so evaluation is multiplicative.
  TaylorPoly2 a(order), b(order);
  for (int d = 0; d <= order / 2; ++d)
    for (int i = 0; i <= d; ++i) {
      a.at(i, d - i) = testutil::random_coeff(rng);
      b.at(i, d - i) = testutil::random_coeff(rng);
    }
  TaylorPoly2 ab = langford::product(a, b);
  for (int trial = 0; trial < 10; ++trial) {
    cplx t1(u(rng), u(rng)), t2(u(rng), u(rng));
    cplx lhs = langford::evaluate(ab, t1, t2);
    cplx rhs = langford::evaluate(a, t1, t2) * langford::evaluate(b, t1, t2);
    CHECK(rel_close(lhs, rhs, 1e-12));
  }
}

TEST_CASE("evaluate is bitwise deterministic") {
  Rng rng(600);
  TaylorPoly2 p = random_poly(10, rng);
  cplx t1(0.3123456, -0.71), t2(-0.25, 0.55);
  cplx v1 = langford::evaluate(p, t1, t2);
  cplx v2 = langford::evaluate(p, t1, t2);
  CHECK(v1.real() == v2.real());
  CHECK(v1.imag() == v2.imag());
}

TEST_CASE("partial derivatives on monomials and against finite differences") {
  TaylorPoly2 p(4);
  p.at(3, 1) = 2.0;
  TaylorPoly2 d1 = langford::partial_theta1(p);
  TaylorPoly2 d2 = langford::partial_theta2(p);
  CHECK(d1.order() == 3);
  CHECK(d1(2, 1) == cplx(6.0));
  CHECK(d2(3, 0) == cplx(2.0));

  Rng rng(9);
  TaylorPoly2 q = random_poly(6, rng);
  TaylorPoly2 q1 = langford::partial_theta1(q);
  cplx t1(0.21, 0.05), t2(-0.3, 0.11);
  double h = 1e-6;
  cplx fd = (langford::evaluate(q, t1 + h, t2) -
             langford::evaluate(q, t1 - h, t2)) /
            (2.0 * h);
  CHECK(rel_close(langford::evaluate(q1, t1, t2), fd, 1e-8));
}

TEST_CASE("rescale applies s1^m s2^n and composes multiplicatively") {
  Rng rng(13);
  TaylorPoly2 p = random_poly(7, rng);
  cplx s1(0.5, 0.1), s2(1.25, -0.2);
  TaylorPoly2 q = langford::rescale(p, s1, s2);
  for (int d = 0; d <= 7; ++d)
    for (int i = 0; i <= d; ++i) {
      cplx want = p(i, d - i) * std::pow(s1, i) * std::pow(s2, d - i);
      CHECK(rel_close(q(i, d - i), want, 1e-13));
    }

  TaylorPoly2 qq = langford::rescale(langford::rescale(p, 0.5, 0.5), 2.0, 2.0);
  for (int d = 0; d <= 7; ++d)
    for (int i = 0; i <= d; ++i)
      CHECK(rel_close(qq(i, d - i), p(i, d - i), 1e-13));

  CHECK_THROWS_AS(langford::rescale(p, 0.0, 1.0), std::invalid_argument);

  // Evaluation identity: rescaled series at theta equals original at
  // (s1*theta1, s2*theta2).
  cplx t1(0.4, -0.2), t2(0.1, 0.3);
  CHECK(rel_close(langford::evaluate(q, t1, t2),
                  langford::evaluate(p, s1 * t1, s2 * t2), 1e-12));
}

TEST_CASE("unit and monomial special cases") {
  Rng rng(3);
  TaylorPoly2 unit(4);
  unit.at(0, 0) = 1.0;
  TaylorPoly2 b = random_poly(4, rng);
  TaylorPoly2 ub = langford::product(unit, b);
  for (int d = 0; d <= 4; ++d)
    for (int i = 0; i <= d; ++i) CHECK(ub(i, d - i) == b(i, d - i));

  TaylorPoly2 t1(4);
  t1.at(1, 0) = 1.0;
  TaylorPoly2 sq = langford::product(t1, t1);
  CHECK(sq(2, 0) == cplx(1.0));
  TaylorPoly2 cu = langford::product_chain({&t1, &t1, &t1});
  CHECK(cu(3, 0) == cplx(1.0));
  for (int d = 0; d <= 4; ++d)
    for (int i = 0; i <= d; ++i)
      if (!(i == 3 && d == 3)) CHECK(cu(i, d - i) == cplx(0.0));

  TaylorPoly2 lin(2);
  lin.at(1, 0) = 1.0;
  lin.at(0, 1) = 1.0;
  CHECK(langford::evaluate(lin, cplx(2.0, 0.0), cplx(0.0, 3.0)) ==
        cplx(2.0, 3.0));

  TaylorPoly2 q(3);
  q.at(2, 0) = 8.0;
  CHECK(langford::rescale(q, 0.5, 0.5)(2, 0) == cplx(2.0));
}

TEST_CASE("rescale composes with distinct per-variable scales") {
  Rng rng(14);
  TaylorPoly2 p = random_poly(5, rng);
  TaylorPoly2 lhs =
      langford::rescale(langford::rescale(p, 0.5, 0.3), 2.0, -1.5);
  TaylorPoly2 rhs = langford::rescale(p, 1.0, -0.45);
  for (int d = 0; d <= 5; ++d)
    for (int i = 0; i <= d; ++i)
      CHECK(rel_close(lhs(i, d - i), rhs(i, d - i), 1e-13));
}

TEST_CASE("csv round trip is byte-identical") {
  Rng rng(21);
  TaylorPoly2 p = random_poly(5, rng);
  std::ostringstream first;
  langford::write_csv(first, p);
  std::istringstream in(first.str());
  TaylorPoly2 q = langford::read_csv(in);
  REQUIRE(q.order() == 5);
  std::ostringstream second;
  langford::write_csv(second, q);
  CHECK(first.str() == second.str());
  for (int d = 0; d <= 5; ++d)
    for (int i = 0; i <= d; ++i) CHECK(p(i, d - i) == q(i, d - i));
}

TEST_CASE("csv reader rejects a ragged triangle") {
  std::istringstream in("0,0,1.0,0.0\n1,0,2.0,0.0\n");
  CHECK_THROWS_AS(langford::read_csv(in), std::invalid_argument);
}

}  // TEST_SUITE
