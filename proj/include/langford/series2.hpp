#pragma once

// Truncated complex Taylor series in two variables, stored densely on the
// triangle m + n <= order.  These carry the coefficients of invariant-manifold
// expansions, so the operations that matter are truncated Cauchy products,
// "corner-stripped" product coefficients (all terms linear in the top-degree
// coefficient removed, which is what a recursive coefficient solve needs),
// evaluation, and diagonal rescaling of the two variables.

#include <complex>
#include <iosfwd>
#include <vector>

namespace langford {

using cplx = std::complex<double>;

class TaylorPoly2 {
 public:
  explicit TaylorPoly2(int order);

  int order() const { return order_; }

  // Coefficient of theta1^m * theta2^n.  Throws std::out_of_range outside
  // the storage triangle.
  cplx& at(int m, int n);
  const cplx& at(int m, int n) const;

  cplx operator()(int m, int n) const { return at(m, n); }

  // Raw coefficient block, row-major by (total degree, then m).
  const std::vector<cplx>& coeffs() const { return c_; }
  std::vector<cplx>& coeffs() { return c_; }

  static int triangle_size(int order) { return (order + 1) * (order + 2) / 2; }

 private:
  int order_;
  std::vector<cplx> c_;
};

// Truncated product; both factors must have the same order (the result keeps
// it).  Mismatched orders throw std::invalid_argument.
TaylorPoly2 product(const TaylorPoly2& a, const TaylorPoly2& b);

// Left-fold product of 2..4 factors; any other count throws
// std::invalid_argument.
TaylorPoly2 product_chain(const std::vector<const TaylorPoly2*>& factors);

// (m,n) coefficient of the product of 2..4 factors with every term that is
// linear in some factor's own (m,n) coefficient (all other factors at (0,0))
// removed.  For two factors this is the convolution with the (0,0)/(m,n)
// corner pairings dropped.  Only coefficients of total degree < m+n and the
// explicitly subtracted (m,n) entries participate.
cplx corner_stripped_coeff(const std::vector<const TaylorPoly2*>& factors,
                           int m, int n);

// Partial sums in ascending total degree, then ascending m: a fixed
// summation order so reruns are bit-identical.
cplx evaluate(const TaylorPoly2& p, cplx theta1, cplx theta2);

// Partial derivatives as series of order-1 lower degree.
TaylorPoly2 partial_theta1(const TaylorPoly2& p);
TaylorPoly2 partial_theta2(const TaylorPoly2& p);

// Variable substitution theta_j -> s_j * theta_j, i.e. coefficient (m,n)
// picks up s1^m s2^n.  Zero scales throw std::invalid_argument.
TaylorPoly2 rescale(const TaylorPoly2& p, cplx s1, cplx s2);

// CSV rows "m,n,re,im", ascending (total degree, m); read expects exactly the
// full triangle of some order.
void write_csv(std::ostream& os, const TaylorPoly2& p);
TaylorPoly2 read_csv(std::istream& is);

// Decay model |p_mn| <= C / (R1^m R2^n) together with the variable scaling
// s1, s2 currently baked into the coefficients.
struct ScalingRecord {
  double s1 = 1.0;
  double s2 = 1.0;
  double C = 0.0;
  double R1 = 0.0;
  double R2 = 0.0;
};

}  // namespace langford
