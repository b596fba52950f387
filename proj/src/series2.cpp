#include "langford/series2.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace langford {

namespace {

inline int tri(int d) { return d * (d + 1) / 2; }

inline int idx(int m, int n) { return tri(m + n) + m; }

}  // namespace

TaylorPoly2::TaylorPoly2(int order) : order_(order) {
  if (order < 1) throw std::invalid_argument("TaylorPoly2: order must be >= 1");
  c_.assign(triangle_size(order), cplx(0.0, 0.0));
}

cplx& TaylorPoly2::at(int m, int n) {
  if (m < 0 || n < 0 || m + n > order_)
    throw std::out_of_range("TaylorPoly2: index outside triangle");
  return c_[idx(m, n)];
}

const cplx& TaylorPoly2::at(int m, int n) const {
  if (m < 0 || n < 0 || m + n > order_)
    throw std::out_of_range("TaylorPoly2: index outside triangle");
  return c_[idx(m, n)];
}

TaylorPoly2 product(const TaylorPoly2& a, const TaylorPoly2& b) {
  if (a.order() != b.order())
    throw std::invalid_argument("product: factor orders differ");
  const int N = a.order();
  TaylorPoly2 r(N);
  // Convolution truncated to the triangle; accumulate into the target in a
  // fixed (j,k) order for determinism.
  for (int d = 0; d <= N; ++d) {
    for (int m = 0; m <= d; ++m) {
      const int n = d - m;
      cplx acc(0.0, 0.0);
      for (int j = 0; j <= m; ++j)
        for (int k = 0; k <= n; ++k) acc += a(j, k) * b(m - j, n - k);
      r.at(m, n) = acc;
    }
  }
  return r;
}

TaylorPoly2 product_chain(const std::vector<const TaylorPoly2*>& factors) {
  if (factors.size() < 2 || factors.size() > 4)
    throw std::invalid_argument("product_chain: need 2 to 4 factors");
  TaylorPoly2 r = product(*factors[0], *factors[1]);
  for (std::size_t i = 2; i < factors.size(); ++i) r = product(r, *factors[i]);
  return r;
}

namespace {

// Corner-stripped coefficient over factors[i..]: the (m,n) product
// coefficient with every tuple that puts one factor at (m,n) and the rest at
// (0,0) omitted.  tails[i] holds the plain product of factors[i+1..].
// Splitting off the leading factor: its (m,n) slot pairs only with the
// all-(0,0) tail (a corner, dropped entirely), its (0,0) slot passes the
// stripping down the tail, everything in between is kept verbatim.  No
// subtraction, so the exclusions are exact and no entry of total degree
// >= m+n is ever touched.
cplx corner_stripped_rec(const std::vector<const TaylorPoly2*>& factors,
                         std::size_t i, const std::vector<TaylorPoly2>& tails,
                         int m, int n) {
  if (i + 1 == factors.size()) return cplx(0.0, 0.0);
  const TaylorPoly2& F = *factors[i];
  cplx acc(0.0, 0.0);
  for (int j = 0; j <= m; ++j)
    for (int k = 0; k <= n; ++k) {
      if (j + k == 0 || j + k == m + n) continue;
      acc += F(j, k) * tails[i](m - j, n - k);
    }
  acc += F(0, 0) * corner_stripped_rec(factors, i + 1, tails, m, n);
  return acc;
}

}  // namespace

cplx corner_stripped_coeff(const std::vector<const TaylorPoly2*>& factors,
                           int m, int n) {
  if (factors.size() < 2 || factors.size() > 4)
    throw std::invalid_argument("corner_stripped_coeff: need 2 to 4 factors");
  for (const TaylorPoly2* f : factors)
    if (m < 0 || n < 0 || m + n > f->order())
      throw std::out_of_range("corner_stripped_coeff: (m,n) outside factor order");

  std::vector<TaylorPoly2> tails(factors.size() - 1, TaylorPoly2(1));
  tails.back() = *factors.back();
  for (std::size_t i = factors.size() - 2; i-- > 0;)
    tails[i] = product(*factors[i + 1], tails[i + 1]);
  return corner_stripped_rec(factors, 0, tails, m, n);
}

cplx evaluate(const TaylorPoly2& p, cplx theta1, cplx theta2) {
  const int N = p.order();
  // Power tables keep the summand order independent of evaluation point.
  std::vector<cplx> pw1(N + 1), pw2(N + 1);
  pw1[0] = pw2[0] = cplx(1.0, 0.0);
  for (int i = 1; i <= N; ++i) {
    pw1[i] = pw1[i - 1] * theta1;
    pw2[i] = pw2[i - 1] * theta2;
  }
  cplx acc(0.0, 0.0);
  for (int d = 0; d <= N; ++d)
    for (int m = 0; m <= d; ++m) acc += p(m, d - m) * pw1[m] * pw2[d - m];
  return acc;
}

TaylorPoly2 partial_theta1(const TaylorPoly2& p) {
  const int N = p.order();
  TaylorPoly2 r(std::max(1, N - 1));
  for (int d = 1; d <= N; ++d)
    for (int m = 1; m <= d; ++m)
      r.at(m - 1, d - m) = double(m) * p(m, d - m);
  return r;
}

TaylorPoly2 partial_theta2(const TaylorPoly2& p) {
  const int N = p.order();
  TaylorPoly2 r(std::max(1, N - 1));
  for (int d = 1; d <= N; ++d)
    for (int m = 0; m < d; ++m)
      r.at(m, d - m - 1) = double(d - m) * p(m, d - m);
  return r;
}

TaylorPoly2 rescale(const TaylorPoly2& p, cplx s1, cplx s2) {
  if (s1 == cplx(0.0, 0.0) || s2 == cplx(0.0, 0.0))
    throw std::invalid_argument("rescale: zero scale is degenerate");
  const int N = p.order();
  TaylorPoly2 r(N);
  std::vector<cplx> pw1(N + 1), pw2(N + 1);
  pw1[0] = pw2[0] = cplx(1.0, 0.0);
  for (int i = 1; i <= N; ++i) {
    pw1[i] = pw1[i - 1] * s1;
    pw2[i] = pw2[i - 1] * s2;
  }
  for (int d = 0; d <= N; ++d)
    for (int m = 0; m <= d; ++m) r.at(m, d - m) = p(m, d - m) * pw1[m] * pw2[d - m];
  return r;
}

void write_csv(std::ostream& os, const TaylorPoly2& p) {
  char buf[96];
  for (int d = 0; d <= p.order(); ++d)
    for (int m = 0; m <= d; ++m) {
      const cplx c = p(m, d - m);
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g\n", m, d - m, c.real(),
                    c.imag());
      os << buf;
    }
}

TaylorPoly2 read_csv(std::istream& is) {
  struct Row {
    int m, n;
    cplx c;
  };
  std::vector<Row> rows;
  std::string line;
  int max_deg = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    int m, n;
    double re, im;
    if (std::sscanf(line.c_str(), "%d,%d,%lg,%lg", &m, &n, &re, &im) != 4)
      throw std::invalid_argument("series csv: bad row '" + line + "'");
    rows.push_back({m, n, cplx(re, im)});
    max_deg = std::max(max_deg, m + n);
  }
  TaylorPoly2 p(std::max(1, max_deg));
  if (static_cast<int>(rows.size()) != TaylorPoly2::triangle_size(p.order()))
    throw std::invalid_argument("series csv: row count is not a full triangle");
  for (const Row& r : rows) p.at(r.m, r.n) = r.c;
  return p;
}

}  // namespace langford
