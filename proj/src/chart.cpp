#include "langford/chart.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "langford/flow.hpp"

namespace langford {

namespace {

using Eigen::Matrix3cd;
using Eigen::Vector3cd;
using Eigen::Vector3d;

Matrix3cd coefficient_matrix(const Eigen::Matrix3d& Df, cplx l1, cplx l2,
                             int m, int n) {
  const cplx mu = double(m) * l1 + double(n) * l2;
  Matrix3cd A = Df.cast<cplx>();
  A.diagonal().array() -= mu;
  return A;
}

Vector3cd coeff_vector(const std::array<TaylorPoly2, 3>& P, int m, int n) {
  return Vector3cd(P[0](m, n), P[1](m, n), P[2](m, n));
}

// Complex evaluation of all three components at theta = (w, conj w); the
// imaginary residue is returned for the caller's symmetry policy.
Vector3d eval_pair(const Chart& c, cplx w, double* imag_residue) {
  const cplx wbar = std::conj(w);
  Vector3d out;
  double res = 0.0;
  for (int i = 0; i < 3; ++i) {
    const cplx v = evaluate(c.components[i], w, wbar);
    out[i] = v.real();
    res = std::max(res, std::abs(v.imag()));
  }
  if (imag_residue) *imag_residue = res;
  return out;
}

}  // namespace

Vector3cd homological_rhs(const std::array<TaylorPoly2, 3>& P,
                          const ModelParams& p, int m, int n) {
  const TaylorPoly2 *P1 = &P[0], *P2 = &P[1], *P3 = &P[2];
  const cplx c31 = corner_stripped_coeff({P3, P1}, m, n);
  const cplx c32 = corner_stripped_coeff({P3, P2}, m, n);
  const cplx c333 = corner_stripped_coeff({P3, P3, P3}, m, n);
  const cplx c11 = corner_stripped_coeff({P1, P1}, m, n);
  const cplx c22 = corner_stripped_coeff({P2, P2}, m, n);
  const cplx c113 = corner_stripped_coeff({P1, P1, P3}, m, n);
  const cplx c223 = corner_stripped_coeff({P2, P2, P3}, m, n);
  const cplx c1113 = corner_stripped_coeff({P1, P1, P1, P3}, m, n);
  Vector3cd s;
  s[0] = -c31;
  s[1] = -c32;
  s[2] = c333 / 3.0 + c11 + c22 + p.eps * (c113 + c223) - p.zeta * c1113;
  return s;
}

Chart solve_homological(const Equilibrium& eq, const ModelParams& p,
                        ManifoldStability stab, int N, double scale) {
  if (N < 1) throw std::invalid_argument("solve_homological: order must be >= 1");
  if (!(scale > 0.0))
    throw std::invalid_argument("solve_homological: scale must be positive");
  const double re = eq.lambda_pair.real();
  if ((stab == ManifoldStability::unstable && re <= 0.0) ||
      (stab == ManifoldStability::stable && re >= 0.0))
    throw std::invalid_argument(
        "solve_homological: requested stability does not match the pair");

  Chart c;
  c.base = eq;
  c.params = p;
  c.lambda = eq.lambda_pair;
  c.stability = stab;
  c.order = N;
  c.components = {TaylorPoly2(N), TaylorPoly2(N), TaylorPoly2(N)};
  c.scaling.s1 = c.scaling.s2 = scale;

  const cplx l1 = c.lambda;
  const cplx l2 = std::conj(l1);
  // Amplitude convention: the degree-1 coefficients carry scale/2.  With the
  // conjugate locus doubling the linear term, the real slice then spans a
  // phase-space radius of scale/sqrt(2), and the coefficient-magnitude
  // benchmarks ("unit scale", "half scale") are expressed in this unit.
  const Vector3cd xi = pair_eigenvector() * (0.5 * scale);
  for (int i = 0; i < 3; ++i) {
    c.components[i].at(0, 0) = cplx(eq.point[i], 0.0);
    c.components[i].at(1, 0) = xi[i];
    c.components[i].at(0, 1) = std::conj(xi[i]);
  }

  const Eigen::Matrix3d Df = eval_jacobian(eq.point, p);
  for (int d = 2; d <= N; ++d) {
    for (int m = d; 2 * m >= d; --m) {
      const int n = d - m;
      // The pair and the axis eigenvalue have opposite stability for the
      // charts we build, which rules out m l1 + n l2 landing on the
      // spectrum; guard it anyway.
      const cplx mu = double(m) * l1 + double(n) * l2;
      if (std::abs(mu - cplx(eq.lambda_real, 0.0)) < 1e-10 ||
          std::abs(mu - l1) < 1e-10 || std::abs(mu - l2) < 1e-10)
        throw IllConditionedOrder(m, n);

      const Matrix3cd A = coefficient_matrix(Df, l1, l2, m, n);
      const Eigen::PartialPivLU<Matrix3cd> lu = A.partialPivLu();
      if (lu.inverse().norm() > 1e12) throw IllConditionedOrder(m, n);
      const Vector3cd s = homological_rhs(c.components, p, m, n);
      Vector3cd pc = lu.solve(s);
      if (m == n) pc = pc.real().cast<cplx>();  // diagonal terms are real
      for (int i = 0; i < 3; ++i) {
        c.components[i].at(m, n) = pc[i];
        c.components[i].at(n, m) = std::conj(pc[i]);
      }
    }
  }
  return c;
}

double homological_residual(const Chart& c, int m, int n) {
  const Matrix3cd A =
      coefficient_matrix(eval_jacobian(c.base.point, c.params), c.lambda,
                         std::conj(c.lambda), m, n);
  const Vector3cd s = homological_rhs(c.components, c.params, m, n);
  return (A * coeff_vector(c.components, m, n) - s).norm();
}

ScalingRecord decay_fit(const Chart& c) {
  const int N = c.order;
  if (N < 8) throw std::invalid_argument("decay_fit: chart order must be >= 8");

  std::vector<double> deg_max(N + 1, 0.0);
  for (int d = 2; d <= N; ++d)
    for (int m = 0; m <= d; ++m)
      for (int i = 0; i < 3; ++i)
        deg_max[d] = std::max(deg_max[d], std::abs(c.components[i](m, d - m)));

  if (std::max(deg_max[N], deg_max[N - 1]) < 1e-15)
    throw UnderflowFit("decay_fit: trailing coefficients are below 1e-15");

  // Plain least squares of log(deg max) against degree.
  double sk = 0.0, sk2 = 0.0, sl = 0.0, skl = 0.0;
  int cnt = 0;
  for (int d = 2; d <= N; ++d) {
    if (deg_max[d] <= 0.0) continue;
    const double l = std::log(deg_max[d]);
    sk += d;
    sk2 += double(d) * d;
    sl += l;
    skl += d * l;
    ++cnt;
  }
  if (cnt < 3) throw UnderflowFit("decay_fit: too few usable degrees");
  const double det = cnt * sk2 - sk * sk;
  const double slope = (cnt * skl - sk * sl) / det;
  const double intercept = (sl * sk2 - sk * skl) / det;

  ScalingRecord r;
  r.s1 = c.scaling.s1;
  r.s2 = c.scaling.s2;
  r.C = std::exp(intercept);
  r.R1 = r.R2 = std::exp(-slope);
  return r;
}

double choose_scale(const Chart& c, double eps0) {
  if (!(eps0 > 0.0)) throw std::invalid_argument("choose_scale: eps0 <= 0");
  const ScalingRecord fit = decay_fit(c);
  // Equality case of C (s/R)^N = eps0: the fitted envelope of the top
  // retained degree is pushed down to eps0.
  return fit.R1 * std::pow(eps0 / fit.C, 1.0 / double(c.order));
}

double error_conj(const Chart& c, double T, int K, double tol_int) {
  if (K < 8) throw std::invalid_argument("error_conj: K must be >= 8");
  // T must run in the chart's contracting direction; T = 0 is allowed and
  // compares the chart with itself (exactly zero).
  if (c.stability == ManifoldStability::stable && T < 0.0)
    throw std::invalid_argument("error_conj: stable chart needs T >= 0");
  if (c.stability == ManifoldStability::unstable && T > 0.0)
    throw std::invalid_argument("error_conj: unstable chart needs T <= 0");

  const cplx growth = std::exp(c.lambda * T);
  double worst = 0.0;
  for (int j = 0; j <= K; ++j) {
    const double a = 2.0 * M_PI * j / double(K + 1);
    const cplx w(std::cos(a), std::sin(a));
    const Vector3d x = eval_pair(c, w, nullptr);
    const Trajectory tr = integrate(x, T, c.params, tol_int);
    const Vector3d flowed = tr.states.back();
    const Vector3d mapped = eval_pair(c, growth * w, nullptr);
    worst = std::max(worst, (flowed - mapped).norm());
  }
  return worst;
}

Eigen::Vector3d eval_real(const Chart& c, double s1, double s2) {
  double res = 0.0;
  const Vector3d v = eval_pair(c, cplx(s1, s2), &res);
  if (res >= 1e-10)
    throw SymmetryViolation("eval_real: imaginary residue " +
                            std::to_string(res));
  return v;
}

const char* to_string(ManifoldStability s) {
  return s == ManifoldStability::stable ? "stable" : "unstable";
}

void save_chart(std::ostream& os, const Chart& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "base=%.17g,%.17g,%.17g\n", c.base.point[0],
                c.base.point[1], c.base.point[2]);
  os << "# cusp-hopf manifold chart\n" << buf;
  std::snprintf(buf, sizeof buf,
                "alpha=%.17g\neps=%.17g\ntau=%.17g\ndelta=%.17g\nbeta=%.17g\n"
                "zeta=%.17g\n",
                c.params.alpha, c.params.eps, c.params.tau, c.params.delta,
                c.params.beta, c.params.zeta);
  os << buf;
  std::snprintf(buf, sizeof buf, "lambda=%.17g,%.17g\nlambda_real=%.17g\n",
                c.lambda.real(), c.lambda.imag(), c.base.lambda_real);
  os << buf;
  os << "tag=" << to_string(c.base.tag) << "\n";
  os << "stability=" << to_string(c.stability) << "\n";
  os << "order=" << c.order << "\n";
  std::snprintf(buf, sizeof buf, "scale=%.17g\nfitC=%.17g\nfitR=%.17g\n",
                c.scaling.s1, c.scaling.C, c.scaling.R1);
  os << buf;
  for (int i = 0; i < 3; ++i) {
    os << "component=" << (i + 1) << "\n";
    write_csv(os, c.components[i]);
  }
}

Chart load_chart(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> tables(3);
  std::string line;
  int comp = -1;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq != std::string::npos &&
        line.compare(0, eq, "component") == 0) {
      comp = std::stoi(line.substr(eq + 1)) - 1;
      if (comp < 0 || comp > 2)
        throw std::invalid_argument("chart file: bad component index");
      continue;
    }
    if (comp >= 0) {
      tables[comp] += line;
      tables[comp] += '\n';
    } else if (eq != std::string::npos) {
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto need = [&kv](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end())
      throw std::invalid_argument("chart file: missing key " + k);
    return it->second;
  };

  Chart c;
  {
    double x, y, z;
    if (std::sscanf(need("base").c_str(), "%lg,%lg,%lg", &x, &y, &z) != 3)
      throw std::invalid_argument("chart file: bad base");
    c.base.point = Vector3d(x, y, z);
    c.base.z_star = z;
  }
  c.params.alpha = std::stod(need("alpha"));
  c.params.eps = std::stod(need("eps"));
  c.params.tau = std::stod(need("tau"));
  c.params.delta = std::stod(need("delta"));
  c.params.beta = std::stod(need("beta"));
  c.params.zeta = std::stod(need("zeta"));
  {
    double re, im;
    if (std::sscanf(need("lambda").c_str(), "%lg,%lg", &re, &im) != 2)
      throw std::invalid_argument("chart file: bad lambda");
    c.lambda = cplx(re, im);
    c.base.lambda_pair = c.lambda;
  }
  c.base.lambda_real = std::stod(need("lambda_real"));
  {
    const std::string t = need("tag");
    if (t == "saddle_focus_2u1s")
      c.base.tag = StabilityTag::saddle_focus_2u1s;
    else if (t == "saddle_focus_2s1u")
      c.base.tag = StabilityTag::saddle_focus_2s1u;
    else
      c.base.tag = StabilityTag::sink;
  }
  c.stability = need("stability") == "stable" ? ManifoldStability::stable
                                              : ManifoldStability::unstable;
  c.order = std::stoi(need("order"));
  c.scaling.s1 = c.scaling.s2 = std::stod(need("scale"));
  c.scaling.C = std::stod(need("fitC"));
  c.scaling.R1 = c.scaling.R2 = std::stod(need("fitR"));
  for (int i = 0; i < 3; ++i) {
    std::istringstream ts(tables[i]);
    c.components[i] = read_csv(ts);
    if (c.components[i].order() != c.order)
      throw std::invalid_argument("chart file: component order mismatch");
  }
  return c;
}

void save_chart_file(const std::string& path, const Chart& c) {
  std::ofstream os(path);
  if (!os)
    throw std::invalid_argument("cannot write chart file '" + path + "'");
  save_chart(os, c);
  if (!os.good())
    throw std::invalid_argument("write to chart file '" + path + "' failed");
}

Chart load_chart_file(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::invalid_argument("cannot open chart file '" + path + "'");
  try {
    return load_chart(is);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string(e.what()) + " in '" + path + "'");
  }
}

}  // namespace langford
