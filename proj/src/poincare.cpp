#include "langford/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <utility>

namespace langford {

namespace {

constexpr double kGrazingFloor = 1e-8;
constexpr double kCycleResidual = 1e-10;
constexpr double kCollapseRadius = 1e-8;

void require_on_section(const SectionPoint& q) {
  if (!(q(0) > 0.0))
    throw std::invalid_argument("section points need y > 0");
}

// One crossing, restarted from the exactly-lifted section point so that
// composed maps are bitwise equal to chained single maps.
SectionCrossing lifted_crossing(const SectionPoint& q, const ModelParams& p,
                                double tol, TimeDirection dir) {
  return next_section_crossing(section_lift(q), p, tol, dir);
}

// Projection along the flow direction onto the section tangent plane.  Any
// tangent vector v of the time-T flow map turns into a section tangent
// (zero first component) via P v.
Eigen::Matrix3d section_projector(const Eigen::Vector3d& x,
                                  const ModelParams& p) {
  const Eigen::Vector3d fx = eval_field(x, p);
  const double fn = fx(0);
  if (std::abs(fn) < kGrazingFloor)
    throw GrazingError("section crossing is near-tangential");
  Eigen::Matrix3d P = Eigen::Matrix3d::Identity();
  P.noalias() -= (fx / fn) * Eigen::RowVector3d(1.0, 0.0, 0.0);
  return P;
}

struct Chain {
  std::vector<SectionPoint> points;  // images 1..k
  double time = 0.0;
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
};

Chain chain_variational(const SectionPoint& q, const ModelParams& p, int k,
                        double tol, TimeDirection dir) {
  Chain out;
  Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
  SectionPoint cur = q;
  for (int i = 0; i < k; ++i) {
    const CrossingVariational c =
        next_crossing_variational(section_lift(cur), p, tol, dir);
    A = (section_projector(c.point, p) * c.M * A).eval();
    cur = section_project(c.point);
    out.points.push_back(cur);
    out.time += c.time;
  }
  out.D = A.block<2, 2>(1, 1);
  return out;
}

Eigen::Vector2cd eigenpair_2x2(const Eigen::Matrix2d& D) {
  const double tr = D.trace();
  const double det = D.determinant();
  const double disc = tr * tr - 4.0 * det;
  Eigen::Vector2cd mu;
  if (disc >= 0.0) {
    const double s = std::sqrt(disc);
    mu(0) = std::complex<double>(0.5 * (tr + s), 0.0);
    mu(1) = std::complex<double>(0.5 * (tr - s), 0.0);
  } else {
    const double s = std::sqrt(-disc);
    mu(0) = std::complex<double>(0.5 * tr, 0.5 * s);
    mu(1) = std::complex<double>(0.5 * tr, -0.5 * s);
  }
  if (std::abs(mu(0)) < std::abs(mu(1))) std::swap(mu(0), mu(1));
  return mu;
}

CycleTag classify(const Eigen::Vector2cd& mu) {
  if (mu(0).imag() != 0.0)
    return std::abs(mu(0)) < 1.0 ? CycleTag::attracting_focus
                                 : CycleTag::repelling_focus;
  const double a1 = std::abs(mu(0));
  const double a2 = std::abs(mu(1));
  if (a1 > 1.0 && a2 < 1.0) return CycleTag::saddle;
  return a1 < 1.0 ? CycleTag::attracting_node : CycleTag::repelling_node;
}

// Real eigenvector of a 2x2 matrix for a real eigenvalue, canonical sign.
Eigen::Vector2d real_eigenvector(const Eigen::Matrix2d& D, double mu) {
  const Eigen::Vector2d r1(D(0, 1), mu - D(0, 0));
  const Eigen::Vector2d r2(mu - D(1, 1), D(1, 0));
  Eigen::Vector2d v = (r1.norm() >= r2.norm()) ? r1 : r2;
  if (v.norm() == 0.0)
    throw std::runtime_error("degenerate eigenvector of return derivative");
  v.normalize();
  if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
  return v;
}

// 0 = disjoint, 1 = proper crossing (point filled in), 2 = degenerate
// contact (endpoint touch or collinear overlap).
int segment_hits(const SectionPoint& a1, const SectionPoint& a2,
                 const SectionPoint& b1, const SectionPoint& b2,
                 SectionPoint* out) {
  const auto orient = [](const SectionPoint& p, const SectionPoint& q,
                         const SectionPoint& r) {
    return (q(0) - p(0)) * (r(1) - p(1)) - (q(1) - p(1)) * (r(0) - p(0));
  };
  const double d1 = orient(b1, b2, a1);
  const double d2 = orient(b1, b2, a2);
  const double d3 = orient(a1, a2, b1);
  const double d4 = orient(a1, a2, b2);
  if (((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) &&
      ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))) {
    const double s = d1 / (d1 - d2);
    *out = a1 + s * (a2 - a1);
    return 1;
  }
  const auto on_segment = [](const SectionPoint& p, const SectionPoint& q,
                             const SectionPoint& r) {
    return std::min(p(0), q(0)) <= r(0) && r(0) <= std::max(p(0), q(0)) &&
           std::min(p(1), q(1)) <= r(1) && r(1) <= std::max(p(1), q(1));
  };
  if ((d1 == 0.0 && on_segment(b1, b2, a1)) ||
      (d2 == 0.0 && on_segment(b1, b2, a2)) ||
      (d3 == 0.0 && on_segment(a1, a2, b1)) ||
      (d4 == 0.0 && on_segment(a1, a2, b2)))
    return 2;
  return 0;
}

std::vector<std::pair<int, int>> polyline_segments(const Polyline& pl) {
  std::vector<std::pair<int, int>> segs;
  const int n = int(pl.pts.size());
  for (int i = 0; i + 1 < n; ++i) segs.emplace_back(i, i + 1);
  if (pl.closed && n > 2) segs.emplace_back(n - 1, 0);
  return segs;
}

struct SegmentGrid {
  double cell = 1.0;
  std::map<std::pair<long, long>, std::vector<int>> buckets;

  void insert(int idx, const SectionPoint& p, const SectionPoint& q) {
    for_cells(p, q, [&](long i, long j) { buckets[{i, j}].push_back(idx); });
  }

  template <class F>
  void for_cells(const SectionPoint& p, const SectionPoint& q, F f) const {
    const long i0 = long(std::floor(std::min(p(0), q(0)) / cell));
    const long i1 = long(std::floor(std::max(p(0), q(0)) / cell));
    const long j0 = long(std::floor(std::min(p(1), q(1)) / cell));
    const long j1 = long(std::floor(std::max(p(1), q(1)) / cell));
    for (long i = i0; i <= i1; ++i)
      for (long j = j0; j <= j1; ++j) f(i, j);
  }

  std::vector<int> candidates(const SectionPoint& p,
                              const SectionPoint& q) const {
    std::vector<int> cand;
    for_cells(p, q, [&](long i, long j) {
      const auto it = buckets.find({i, j});
      if (it != buckets.end())
        cand.insert(cand.end(), it->second.begin(), it->second.end());
    });
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    return cand;
  }
};

double max_segment_length(const Polyline& pl,
                          const std::vector<std::pair<int, int>>& segs) {
  double m = 0.0;
  for (const auto& s : segs)
    m = std::max(m, (pl.pts[s.second] - pl.pts[s.first]).norm());
  return m;
}

// Shared core: intersections between two segment sets, optionally skipping
// index-adjacent pairs (for self-intersection tests on one polyline).
CrossingReport crossings_core(const Polyline& a, const Polyline& b,
                              bool same_polyline) {
  CrossingReport rep;
  const auto sa = polyline_segments(a);
  const auto sb = polyline_segments(b);
  if (sa.empty() || sb.empty()) return rep;

  SegmentGrid grid;
  grid.cell = std::max({1e-9, max_segment_length(a, sa),
                        max_segment_length(b, sb)});
  for (int i = 0; i < int(sb.size()); ++i)
    grid.insert(i, b.pts[sb[i].first], b.pts[sb[i].second]);

  const int nb = int(b.pts.size());
  for (int i = 0; i < int(sa.size()); ++i) {
    const SectionPoint& p = a.pts[sa[i].first];
    const SectionPoint& q = a.pts[sa[i].second];
    for (int j : grid.candidates(p, q)) {
      if (same_polyline) {
        if (j <= i) continue;  // each unordered pair once
        const bool share =
            sa[i].first == sb[j].first || sa[i].first == sb[j].second ||
            sa[i].second == sb[j].first || sa[i].second == sb[j].second;
        (void)nb;
        if (share) continue;
      }
      SectionPoint x;
      const int hit = segment_hits(p, q, b.pts[sb[j].first],
                                   b.pts[sb[j].second], &x);
      if (hit == 1)
        rep.points.push_back(x);
      else if (hit == 2)
        ++rep.degenerate;
    }
  }
  return rep;
}

double polyline_length(const std::vector<SectionPoint>& pts, bool closed) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    s += (pts[i + 1] - pts[i]).norm();
  if (closed && pts.size() > 2) s += (pts.front() - pts.back()).norm();
  return s;
}

}  // namespace

const char* to_string(CycleTag t) {
  switch (t) {
    case CycleTag::attracting_node: return "attracting_node";
    case CycleTag::attracting_focus: return "attracting_focus";
    case CycleTag::saddle: return "saddle";
    case CycleTag::repelling_node: return "repelling_node";
    case CycleTag::repelling_focus: return "repelling_focus";
  }
  return "?";
}

ReturnResult return_map(const SectionPoint& q, const ModelParams& p, int k,
                        double tol, TimeDirection dir) {
  if (k < 1) throw std::invalid_argument("return_map needs k >= 1");
  require_on_section(q);
  ReturnResult out;
  SectionPoint cur = q;
  for (int i = 0; i < k; ++i) {
    const SectionCrossing c = lifted_crossing(cur, p, tol, dir);
    cur = section_project(c.point);
    out.time += c.time;
    if (i + 1 < k) out.intermediate.push_back(cur);
  }
  out.point = cur;
  return out;
}

ReturnDerivative return_derivative(const SectionPoint& q, const ModelParams& p,
                                   int k, double tol, TimeDirection dir) {
  if (k < 1) throw std::invalid_argument("return_derivative needs k >= 1");
  require_on_section(q);
  const Chain ch = chain_variational(q, p, k, tol, dir);
  ReturnDerivative out;
  out.point = ch.points.back();
  out.time = ch.time;
  out.D = ch.D;
  return out;
}

Cycle newton_cycle(const SectionPoint& guess, const ModelParams& p, int k,
                   double tol, int max_iter) {
  if (k < 1) throw std::invalid_argument("newton_cycle needs k >= 1");
  if (max_iter < 1) throw std::invalid_argument("newton_cycle needs max_iter >= 1");
  require_on_section(guess);

  SectionPoint q = guess;
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    const ReturnDerivative rd = return_derivative(q, p, k, tol);
    const Eigen::Vector2d F = rd.point - q;
    res = F.norm();
    if (res < kCycleResidual) break;

    const Eigen::Matrix2d J = rd.D - Eigen::Matrix2d::Identity();
    const Eigen::Vector2d dq = J.partialPivLu().solve(-F);
    if (!dq.allFinite())
      throw NoConvergence("newton_cycle: singular correction", res);

    // Damping: halve the step while it fails to reduce the residual.
    double lam = 1.0;
    SectionPoint best = q + dq;
    double best_res = std::numeric_limits<double>::infinity();
    for (int half = 0; half < 8; ++half) {
      const SectionPoint trial = q + lam * dq;
      if (trial(0) > 0.0) {
        const double r = (return_map(trial, p, k, tol).point - trial).norm();
        if (r < best_res) {
          best_res = r;
          best = trial;
        }
        if (r < res) break;
      }
      lam *= 0.5;
    }
    q = best;
  }

  const ReturnDerivative rd = return_derivative(q, p, k, tol);
  res = (rd.point - q).norm();
  if (!(res < kCycleResidual))
    throw NoConvergence("newton_cycle: residual floor not reached", res);

  const Chain ch = chain_variational(q, p, k, tol, TimeDirection::forward);
  Cycle c;
  c.k = k;
  c.points.push_back(q);
  for (int i = 0; i + 1 < k; ++i) c.points.push_back(ch.points[i]);
  c.period = ch.time;
  c.D = ch.D;
  c.multipliers = eigenpair_2x2(c.D);
  c.tag = classify(c.multipliers);
  c.residual = res;
  c.params = p;
  c.minimal_k = k;
  for (int d = 1; d < k; ++d) {
    if (k % d != 0) continue;
    if ((c.points[d] - c.points[0]).norm() < kCollapseRadius) {
      c.minimal_k = d;
      break;
    }
  }
  return c;
}

Cycle continue_cycle(const Cycle& c, double alpha_target, int n_steps,
                     double tol) {
  if (n_steps < 1) throw std::invalid_argument("continue_cycle needs n_steps >= 1");
  Cycle cur = c;
  const double a0 = c.params.alpha;
  for (int i = 1; i <= n_steps; ++i) {
    ModelParams pi = cur.params;
    pi.alpha = a0 + (alpha_target - a0) * double(i) / double(n_steps);
    cur = newton_cycle(cur.points[0], pi, c.k, tol);
  }
  return cur;
}

TorusBirth locate_neimark_sacker(const SectionPoint& seed, double alpha0,
                                 const ModelParams& p, double tol, int k,
                                 int max_iter) {
  require_on_section(seed);
  const double h_q = 1e-6;      // position step for the det row
  const double h_a = 1e-7;      // parameter step for the alpha column

  const auto eval = [&](const SectionPoint& q, double a) {
    ModelParams pa = p;
    pa.alpha = a;
    const ReturnDerivative rd = return_derivative(q, pa, k, tol);
    Eigen::Vector3d G;
    G.head<2>() = rd.point - q;
    G(2) = rd.D.determinant() - 1.0;
    return std::make_pair(G, rd.D);
  };

  SectionPoint q = seed;
  double a = alpha0;
  auto [G, D] = eval(q, a);
  double res = G.norm();

  for (int it = 0; it < max_iter; ++it) {
    if (G.head<2>().norm() < kCycleResidual && std::abs(G(2)) < kCycleResidual)
      break;

    Eigen::Matrix3d J;
    J.block<2, 2>(0, 0) = D - Eigen::Matrix2d::Identity();
    for (int j = 0; j < 2; ++j) {
      SectionPoint qp = q, qm = q;
      qp(j) += h_q;
      qm(j) -= h_q;
      J(2, j) = (eval(qp, a).first(2) - eval(qm, a).first(2)) / (2.0 * h_q);
    }
    const Eigen::Vector3d Gp = eval(q, a + h_a).first;
    const Eigen::Vector3d Gm = eval(q, a - h_a).first;
    J.col(2).head<2>() = (Gp.head<2>() - Gm.head<2>()) / (2.0 * h_a);
    J(2, 2) = (Gp(2) - Gm(2)) / (2.0 * h_a);

    const Eigen::Vector3d du = J.partialPivLu().solve(-G);
    if (!du.allFinite())
      throw NoConvergence("locate_neimark_sacker: singular correction", res);

    double lam = 1.0;
    SectionPoint q_best = q;
    double a_best = a;
    Eigen::Vector3d G_best = G;
    Eigen::Matrix2d D_best = D;
    double best_res = std::numeric_limits<double>::infinity();
    for (int half = 0; half < 8; ++half) {
      const SectionPoint qt = q + lam * du.head<2>();
      const double at = a + lam * du(2);
      if (qt(0) > 0.0) {
        const auto [Gt, Dt] = eval(qt, at);
        const double rt = Gt.norm();
        if (rt < best_res) {
          best_res = rt;
          q_best = qt;
          a_best = at;
          G_best = Gt;
          D_best = Dt;
        }
        if (rt < res) break;
      }
      lam *= 0.5;
    }
    q = q_best;
    a = a_best;
    G = G_best;
    D = D_best;
    res = G.norm();
  }

  if (!(G.head<2>().norm() < kCycleResidual &&
        std::abs(G(2)) < kCycleResidual))
    throw NoConvergence("locate_neimark_sacker: residual floor not reached",
                        res);
  if (std::abs(D.trace()) >= 2.0)
    throw RealMultipliersError(
        "unit-determinant point has real multipliers (|trace| >= 2)");

  TorusBirth out;
  out.point = q;
  out.alpha = a;
  ModelParams pa = p;
  pa.alpha = a;
  out.cycle = newton_cycle(q, pa, k, tol);
  return out;
}

CircleSample sample_invariant_circle(double alpha, const ModelParams& p,
                                     int n_transient, int n_keep, double tol) {
  if (n_transient < 0 || n_keep < 1)
    throw std::invalid_argument(
        "sample_invariant_circle needs n_transient >= 0, n_keep >= 1");
  ModelParams pa = p;
  pa.alpha = alpha;

  SectionPoint q(0.9, 0.7);  // inside the attractor basin for this family
  for (int i = 0; i < n_transient; ++i) q = return_map(q, pa, 1, tol).point;

  std::vector<SectionPoint> kept;
  kept.reserve(std::size_t(n_keep));
  for (int i = 0; i < n_keep; ++i) {
    q = return_map(q, pa, 1, tol).point;
    kept.push_back(q);
  }

  // Greedy clustering: phase-locked iterates accumulate on finitely many
  // points instead of filling a curve.
  constexpr double kClusterRadius = 1e-4;
  constexpr int kClusterCap = 24;
  std::vector<SectionPoint> centers;
  std::vector<int> weight;
  bool overflow = false;
  for (const SectionPoint& pt : kept) {
    bool placed = false;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if ((pt - centers[c]).norm() < kClusterRadius) {
        centers[c] = (centers[c] * weight[c] + pt) / double(weight[c] + 1);
        ++weight[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      if (int(centers.size()) == kClusterCap) {
        overflow = true;
        break;
      }
      centers.push_back(pt);
      weight.push_back(1);
    }
  }

  CircleSample out;

  // Interior fixed point (repelling once the circle exists); used as the
  // angular origin.  Fall back to the centroid if Newton fails.
  SectionPoint centroid = SectionPoint::Zero();
  for (const SectionPoint& pt : kept) centroid += pt;
  centroid /= double(kept.size());
  try {
    out.center = newton_cycle(centroid, pa, 1, tol).points[0];
  } catch (const std::exception&) {
    out.center = centroid;
  }

  if (!overflow) {
    out.resonant = true;
    out.clusters = int(centers.size());
    std::sort(centers.begin(), centers.end(),
              [&](const SectionPoint& u, const SectionPoint& v) {
                return std::atan2(u(1) - out.center(1), u(0) - out.center(0)) <
                       std::atan2(v(1) - out.center(1), v(0) - out.center(0));
              });
    out.curve.pts = centers;
    out.curve.closed = false;
    out.curve.source = "phase-locked iterates at alpha=" + std::to_string(alpha);
    out.curve.arclength = polyline_length(out.curve.pts, false);
    return out;
  }

  std::vector<SectionPoint> sorted = kept;
  std::sort(sorted.begin(), sorted.end(),
            [&](const SectionPoint& u, const SectionPoint& v) {
              return std::atan2(u(1) - out.center(1), u(0) - out.center(0)) <
                     std::atan2(v(1) - out.center(1), v(0) - out.center(0));
            });

  Polyline candidate;
  candidate.pts = sorted;
  candidate.closed = true;
  const CrossingReport self = crossings_core(candidate, candidate, true);
  if (self.points.empty()) {
    out.curve = std::move(candidate);
    out.curve.star_shaped = true;
  } else {
    // The angular sort would fold the curve onto itself; hand back the raw
    // iterate order instead.
    out.curve.pts = kept;
    out.curve.closed = false;
    out.curve.star_shaped = false;
  }
  out.curve.source = "invariant circle sample at alpha=" + std::to_string(alpha);
  out.curve.arclength = polyline_length(out.curve.pts, out.curve.closed);
  return out;
}

Polyline grow_cycle_manifold_1d(const Cycle& cycle, ManifoldStability kind,
                                BranchSide branch,
                                const Manifold1DOptions& opt,
                                const ModelParams& p) {
  if (cycle.tag != CycleTag::saddle)
    throw std::invalid_argument("1d invariant curves require a saddle cycle");
  if (!(opt.h > 0.0) || !(opt.delta_max > 0.0) || !(opt.arclength_max > 0.0))
    throw std::invalid_argument("manifold options must be positive");

  const double mu_u = cycle.multipliers(0).real();
  const double mu_s = cycle.multipliers(1).real();
  const bool unstable = (kind == ManifoldStability::unstable);
  const double mu_sel = unstable ? mu_u : mu_s;
  const TimeDirection dir =
      unstable ? TimeDirection::forward : TimeDirection::backward;

  // Expansion rate of the iterated map along the selected direction; the
  // stable branch is grown with the backward return map, whose rate is the
  // reciprocal multiplier.
  double rate = unstable ? std::abs(mu_u) : 1.0 / std::abs(mu_s);
  int steps_per_gen = cycle.k;
  if (mu_sel < 0.0) {
    // Orientation-reversing along the branch: iterate the squared map so
    // images stay on one side.
    steps_per_gen *= 2;
    rate *= rate;
  }

  Eigen::Vector2d v = real_eigenvector(cycle.D, mu_sel);
  if (branch == BranchSide::minus) v = -v;

  struct Node {
    double sigma;
    SectionPoint val;
  };
  const SectionPoint q0 = cycle.points[0];
  const auto seed_point = [&](double sigma) -> SectionPoint {
    return q0 + sigma * v;
  };
  const auto advance_once = [&](const SectionPoint& s) {
    return return_map(s, p, steps_per_gen, opt.tol, dir).point;
  };
  const auto from_seed = [&](double sigma, int gen) {
    SectionPoint x = seed_point(sigma);
    for (int g = 0; g < gen; ++g) x = advance_once(x);
    return x;
  };

  Polyline out;
  out.source = std::string(unstable ? "unstable" : "stable") +
               " manifold branch " +
               (branch == BranchSide::plus ? "plus" : "minus") + " of " +
               std::to_string(cycle.k) + "-cycle";
  out.closed = false;

  // Fundamental segment [h, rate*h]: one iterate of its inner endpoint lands
  // (to first order) on its outer endpoint, so iterated images tile the
  // branch without gaps.
  constexpr int kSeedCount = 8;
  std::vector<Node> nodes;
  for (int i = 0; i < kSeedCount; ++i) {
    const double sigma =
        opt.h * (1.0 + (rate - 1.0) * double(i) / double(kSeedCount - 1));
    nodes.push_back({sigma, seed_point(sigma)});
  }
  for (const Node& n : nodes) out.pts.push_back(n.val);
  out.arclength = polyline_length(out.pts, false);

  out.stop_reason = "generations";
  try {
    for (int gen = 1; gen <= opt.max_generations; ++gen) {
      for (Node& n : nodes) n.val = advance_once(n.val);

      // Spacing control: insert seed-parameter midpoints, each integrated
      // from its own seed, until consecutive images sit closer than the
      // bound.
      std::size_t i = 0;
      while (i + 1 < nodes.size()) {
        if ((nodes[i + 1].val - nodes[i].val).norm() > opt.delta_max) {
          if (out.pts.size() + nodes.size() >= opt.max_points)
            throw ResolutionExhausted(
                "1d manifold growth exceeded the point budget");
          const double sm = 0.5 * (nodes[i].sigma + nodes[i + 1].sigma);
          if (nodes[i + 1].sigma - nodes[i].sigma <
              1e-15 * std::abs(nodes[i].sigma))
            break;  // seed parameters exhausted double precision
          nodes.insert(nodes.begin() + long(i) + 1, {sm, from_seed(sm, gen)});
        } else {
          ++i;
        }
      }

      double increment = (nodes.front().val - out.pts.back()).norm();
      for (std::size_t j = 0; j + 1 < nodes.size(); ++j)
        increment += (nodes[j + 1].val - nodes[j].val).norm();
      for (const Node& n : nodes) out.pts.push_back(n.val);
      out.arclength += increment;

      if (increment < opt.min_increment) {
        out.stop_reason = "captured";  // images contracted onto an attractor
        break;
      }
      if (out.arclength >= opt.arclength_max) {
        out.truncated = true;
        out.stop_reason = "arclength";
        break;
      }
      if (gen == opt.max_generations) out.truncated = true;
    }
  } catch (const FlowError& e) {
    // The branch left the crossing regime (blow-up or no further section
    // returns); keep what was grown.
    out.truncated = true;
    out.stop_reason = std::string("flow: ") + e.what();
  }
  return out;
}

CrossingReport detect_crossings(const Polyline& a, const Polyline& b) {
  return crossings_core(a, b, false);
}

std::vector<SectionPoint> scan_cycle_seeds(const ModelParams& p, double tol,
                                           const SectionPoint& lo,
                                           const SectionPoint& hi, int n_y,
                                           int n_z, int n_iter,
                                           double cluster_radius) {
  if (n_y < 1 || n_z < 1 || n_iter < 1)
    throw std::invalid_argument("scan_cycle_seeds needs positive grid/iters");
  std::vector<SectionPoint> finals;
  for (int iy = 0; iy < n_y; ++iy) {
    for (int iz = 0; iz < n_z; ++iz) {
      SectionPoint q(
          lo(0) + (hi(0) - lo(0)) * (n_y == 1 ? 0.5 : double(iy) / (n_y - 1)),
          lo(1) + (hi(1) - lo(1)) * (n_z == 1 ? 0.5 : double(iz) / (n_z - 1)));
      if (!(q(0) > 0.0)) continue;
      bool ok = true;
      try {
        for (int it = 0; it < n_iter; ++it) q = return_map(q, p, 1, tol).point;
      } catch (const FlowError&) {
        ok = false;  // start escaped the crossing regime
      }
      if (ok) finals.push_back(q);
    }
  }
  std::vector<SectionPoint> centers;
  std::vector<int> weight;
  for (const SectionPoint& pt : finals) {
    bool placed = false;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if ((pt - centers[c]).norm() < cluster_radius) {
        centers[c] = (centers[c] * weight[c] + pt) / double(weight[c] + 1);
        ++weight[c];
        placed = true;
        break;
      }
    }
    if (!placed) {
      centers.push_back(pt);
      weight.push_back(1);
    }
  }
  return centers;
}

Cycle saddle_companion(const Cycle& attracting, const SectionPoint& center,
                       double tol) {
  if (attracting.k < 2)
    throw std::invalid_argument("saddle_companion needs a k >= 2 cycle");

  struct Polar {
    double phi, r;
  };
  std::vector<Polar> ring;
  for (const SectionPoint& pt : attracting.points) {
    const SectionPoint d = pt - center;
    ring.push_back({std::atan2(d(1), d(0)), d.norm()});
  }
  std::sort(ring.begin(), ring.end(),
            [](const Polar& u, const Polar& v) { return u.phi < v.phi; });

  double last_res = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Polar& a = ring[i];
    const Polar& b = ring[(i + 1) % ring.size()];
    double gap = b.phi - a.phi;
    if (gap <= 0.0) gap += 2.0 * M_PI;
    const double phi = a.phi + 0.5 * gap;
    const double r_mid = 0.5 * (a.r + b.r);
    for (double scale : {1.0, 0.9, 1.1}) {
      const SectionPoint seed =
          center + scale * r_mid * SectionPoint(std::cos(phi), std::sin(phi));
      if (!(seed(0) > 0.0)) continue;
      try {
        Cycle c = newton_cycle(seed, attracting.params, attracting.k, tol);
        double dist = std::numeric_limits<double>::infinity();
        for (const SectionPoint& pt : attracting.points)
          dist = std::min(dist, (c.points[0] - pt).norm());
        if (c.tag == CycleTag::saddle && dist > 1e-6) return c;
      } catch (const NoConvergence& e) {
        last_res = e.residual;
      }
    }
  }
  throw NoConvergence("saddle_companion: no saddle located between the "
                      "attracting points",
                      last_res);
}

void write_polyline_csv(std::ostream& os, const Polyline& pl) {
  char buf[128];
  os << "# source " << pl.source << "\n";
  os << "# points " << pl.pts.size() << "\n";
  std::snprintf(buf, sizeof buf, "# arclength %.17g\n", pl.arclength);
  os << buf;
  os << "# closed " << (pl.closed ? 1 : 0) << "\n";
  os << "# star_shaped " << (pl.star_shaped ? 1 : 0) << "\n";
  os << "# truncated " << (pl.truncated ? 1 : 0) << "\n";
  os << "y,z\n";
  for (const SectionPoint& q : pl.pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", q(0), q(1));
    os << buf;
  }
}

void write_cycle_csv(std::ostream& os, const Cycle& c) {
  char buf[192];
  os << "# k " << c.k << "\n";
  os << "# minimal_k " << c.minimal_k << "\n";
  os << "# tag " << to_string(c.tag) << "\n";
  std::snprintf(buf, sizeof buf, "# alpha %.17g\n", c.params.alpha);
  os << buf;
  std::snprintf(buf, sizeof buf, "# period %.17g\n", c.period);
  os << buf;
  std::snprintf(buf, sizeof buf, "# residual %.17g\n", c.residual);
  os << buf;
  std::snprintf(buf, sizeof buf, "# multiplier_1 %.17g %.17g\n",
                c.multipliers(0).real(), c.multipliers(0).imag());
  os << buf;
  std::snprintf(buf, sizeof buf, "# multiplier_2 %.17g %.17g\n",
                c.multipliers(1).real(), c.multipliers(1).imag());
  os << buf;
  os << "y,z\n";
  for (const SectionPoint& q : c.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", q(0), q(1));
    os << buf;
  }
}

}  // namespace langford
