#include "langford/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <utility>

namespace langford {

namespace {

constexpr std::size_t kVertexBudget = 5000000;

using Edge = std::pair<int, int>;

Edge canonical(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// --- triangle-triangle intersection ---------------------------------------

// Moller-Trumbore segment/triangle piercing with strict interior hits;
// grazing contacts count as misses (they are refined away in practice).
bool segment_hits_triangle(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& t0, const Eigen::Vector3d& t1,
                           const Eigen::Vector3d& t2, Eigen::Vector3d* hit) {
  const Eigen::Vector3d dir = b - a;
  const Eigen::Vector3d e1 = t1 - t0;
  const Eigen::Vector3d e2 = t2 - t0;
  const Eigen::Vector3d pv = dir.cross(e2);
  const double det = e1.dot(pv);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Eigen::Vector3d tv = a - t0;
  const double u = tv.dot(pv) * inv;
  if (u <= 0.0 || u >= 1.0) return false;
  const Eigen::Vector3d qv = tv.cross(e1);
  const double v = dir.dot(qv) * inv;
  if (v <= 0.0 || u + v >= 1.0) return false;
  const double t = e2.dot(qv) * inv;
  if (t <= 0.0 || t >= 1.0) return false;
  *hit = a + t * dir;
  return true;
}

bool triangles_intersect(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                         const Eigen::Vector3d& p2, const Eigen::Vector3d& q0,
                         const Eigen::Vector3d& q1, const Eigen::Vector3d& q2,
                         Eigen::Vector3d* where) {
  Eigen::Vector3d hits[2];
  int n = 0;
  const Eigen::Vector3d pe[3][2] = {{p0, p1}, {p1, p2}, {p2, p0}};
  for (const auto& e : pe) {
    if (n < 2 && segment_hits_triangle(e[0], e[1], q0, q1, q2, &hits[n])) ++n;
  }
  const Eigen::Vector3d qe[3][2] = {{q0, q1}, {q1, q2}, {q2, q0}};
  for (const auto& e : qe) {
    if (n < 2 && segment_hits_triangle(e[0], e[1], p0, p1, p2, &hits[n])) ++n;
  }
  if (n == 0) return false;
  *where = n == 1 ? hits[0] : Eigen::Vector3d(0.5 * (hits[0] + hits[1]));
  return true;
}

// --- uniform grid over triangle bounding boxes ----------------------------

struct TriGrid {
  double cell = 1.0;
  std::map<std::array<long, 3>, std::vector<int>> buckets;

  static std::array<long, 3> key(const Eigen::Vector3d& x, double cell) {
    return {long(std::floor(x(0) / cell)), long(std::floor(x(1) / cell)),
            long(std::floor(x(2) / cell))};
  }

  template <typename F>
  void for_cells(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                 F&& f) const {
    const auto klo = key(lo, cell);
    const auto khi = key(hi, cell);
    for (long i = klo[0]; i <= khi[0]; ++i)
      for (long j = klo[1]; j <= khi[1]; ++j)
        for (long k = klo[2]; k <= khi[2]; ++k) f(std::array<long, 3>{i, j, k});
  }

  void insert(int idx, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    for_cells(lo, hi,
              [&](const std::array<long, 3>& c) { buckets[c].push_back(idx); });
  }

  std::vector<int> candidates(const Eigen::Vector3d& lo,
                              const Eigen::Vector3d& hi) const {
    std::vector<int> out;
    for_cells(lo, hi, [&](const std::array<long, 3>& c) {
      auto it = buckets.find(c);
      if (it != buckets.end())
        out.insert(out.end(), it->second.begin(), it->second.end());
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

void triangle_bounds(const SeededMesh& m, const std::array<int, 3>& t,
                     Eigen::Vector3d* lo, Eigen::Vector3d* hi) {
  *lo = m.vertices[t[0]].position.cwiseMin(m.vertices[t[1]].position)
            .cwiseMin(m.vertices[t[2]].position);
  *hi = m.vertices[t[0]].position.cwiseMax(m.vertices[t[1]].position)
            .cwiseMax(m.vertices[t[2]].position);
}

double longest_edge(const SeededMesh& m) {
  double e = 0.0;
  for (const auto& t : m.triangles)
    for (int k = 0; k < 3; ++k)
      e = std::max(e, (m.vertices[t[k]].position -
                       m.vertices[t[(k + 1) % 3]].position)
                          .norm());
  return e;
}

Eigen::Vector3d integrate_from_seed(const Chart& chart,
                                    const Eigen::Vector2d& seed, double t,
                                    const ModelParams& p, double tol) {
  Eigen::Vector3d x0 = eval_real(chart, seed(0), seed(1));
  if (t == 0.0) return x0;
  return integrate(x0, t, p, tol).states.back();
}

}  // namespace

ParamMesh mesh_disk(int n_r, int n_theta) {
  if (n_r < 2 || n_theta < 8)
    throw std::invalid_argument("mesh_disk needs n_r >= 2 and n_theta >= 8");
  ParamMesh m;
  m.vertices.reserve(std::size_t(n_r) * n_theta + 1);
  for (int i = 1; i <= n_r; ++i) {
    const double r = double(i) / n_r;
    for (int j = 0; j < n_theta; ++j) {
      const double phi = 2.0 * M_PI * j / n_theta;
      m.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
  }
  const int center = n_r * n_theta;
  m.vertices.emplace_back(0.0, 0.0);
  const auto ring = [n_theta](int i, int j) {
    return (i - 1) * n_theta + (j % n_theta);
  };
  for (int j = 0; j < n_theta; ++j)
    m.triangles.push_back({center, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i < n_r; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const int a = ring(i, j), b = ring(i + 1, j), c = ring(i + 1, j + 1),
                d = ring(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }
  m.n_boundary = n_theta;
  return m;
}

ParamMesh mesh_annulus(double r_in, int n_r, int n_theta) {
  if (!(r_in > 0.0 && r_in < 1.0))
    throw std::invalid_argument("mesh_annulus needs 0 < r_in < 1");
  if (n_r < 1 || n_theta < 8)
    throw std::invalid_argument("mesh_annulus needs n_r >= 1, n_theta >= 8");
  ParamMesh m;
  m.vertices.reserve(std::size_t(n_r + 1) * n_theta);
  for (int i = 0; i <= n_r; ++i) {
    const double r = r_in + (1.0 - r_in) * double(i) / n_r;
    for (int j = 0; j < n_theta; ++j) {
      const double phi = 2.0 * M_PI * j / n_theta;
      m.vertices.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
  }
  const auto ring = [n_theta](int i, int j) {
    return i * n_theta + (j % n_theta);
  };
  for (int i = 0; i < n_r; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      const int a = ring(i, j), b = ring(i + 1, j), c = ring(i + 1, j + 1),
                d = ring(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }
  m.n_boundary = n_theta;
  return m;
}

int euler_characteristic(std::size_t n_vertices,
                         const std::vector<std::array<int, 3>>& triangles) {
  std::set<Edge> edges;
  for (const auto& t : triangles) {
    edges.insert(canonical(t[0], t[1]));
    edges.insert(canonical(t[1], t[2]));
    edges.insert(canonical(t[2], t[0]));
  }
  return int(n_vertices) - int(edges.size()) + int(triangles.size());
}

double fundamental_inner_radius(const Chart& c, double tau) {
  if (!(tau > 0.0))
    throw std::invalid_argument("fundamental_inner_radius needs tau > 0");
  return std::exp(-std::abs(c.lambda.real()) * tau);
}

SeededMesh lift_mesh(const Chart& chart, const ParamMesh& mesh, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("lift_mesh needs tau > 0");
  SeededMesh out;
  out.chart = chart;
  out.tau = chart.stability == ManifoldStability::stable ? -tau : tau;
  out.triangles = mesh.triangles;
  out.vertices.reserve(mesh.vertices.size());
  for (const auto& s : mesh.vertices) {
    SeededVertex v;
    v.seed = s;
    v.position = eval_real(chart, s(0), s(1));
    v.generation = 0;
    out.vertices.push_back(v);
  }
  return out;
}

std::vector<SeededMesh> advect(const SeededMesh& mesh, int n_gen,
                               double edge_max, const ModelParams& p,
                               double tol) {
  if (n_gen < 1) throw std::invalid_argument("advect needs n_gen >= 1");
  if (!(edge_max > 0.0)) throw std::invalid_argument("advect needs edge_max > 0");
  if (mesh.vertices.empty() || mesh.triangles.empty())
    throw std::invalid_argument("advect needs a non-empty mesh");
  if (mesh.tau == 0.0) throw std::invalid_argument("advect needs tau != 0");
  for (const auto& v : mesh.vertices)
    if (v.generation != 0)
      throw std::invalid_argument("advect starts from a generation-0 mesh");

  std::vector<SeededMesh> out;
  out.reserve(n_gen);

  // Working copy whose seeds and topology persist across generations.
  SeededMesh cur = mesh;
  bool exhausted = false;

  for (int g = 1; g <= n_gen && !exhausted; ++g) {
    const double elapsed = g * cur.tau;

    const auto from_seed = [&](const Eigen::Vector2d& seed) {
      try {
        return integrate_from_seed(cur.chart, seed, elapsed, p, tol);
      } catch (const BlowUpError&) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "mesh advection blew up from seed (%.17g, %.17g) at "
                      "generation %d",
                      seed(0), seed(1), g);
        throw FlowError(buf);
      }
    };

    for (auto& v : cur.vertices) {
      v.position = from_seed(v.seed);
      v.generation = g;
    }

    // Split long edges at seed midpoints until the mesh complies or the
    // vertex budget runs out.
    for (int round = 0; round < 64; ++round) {
      std::map<Edge, int> midpoint;
      for (const auto& t : cur.triangles) {
        for (int k = 0; k < 3; ++k) {
          const int a = t[k], b = t[(k + 1) % 3];
          const Edge e = canonical(a, b);
          if (midpoint.count(e)) continue;
          const double len =
              (cur.vertices[a].position - cur.vertices[b].position).norm();
          if (len > edge_max) midpoint.emplace(e, -1);
        }
      }
      if (midpoint.empty()) break;
      if (cur.vertices.size() + midpoint.size() > kVertexBudget) {
        exhausted = true;
        break;
      }
      for (auto& [e, idx] : midpoint) {
        SeededVertex v;
        v.seed = 0.5 * (cur.vertices[e.first].seed + cur.vertices[e.second].seed);
        v.position = from_seed(v.seed);
        v.generation = g;
        idx = int(cur.vertices.size());
        cur.vertices.push_back(v);
      }
      const auto split_of = [&](int a, int b) {
        auto it = midpoint.find(canonical(a, b));
        return it == midpoint.end() ? -1 : it->second;
      };
      std::vector<std::array<int, 3>> next;
      next.reserve(cur.triangles.size() * 2);
      for (const auto& t : cur.triangles) {
        const int m01 = split_of(t[0], t[1]);
        const int m12 = split_of(t[1], t[2]);
        const int m20 = split_of(t[2], t[0]);
        const int n_split =
            int(m01 >= 0) + int(m12 >= 0) + int(m20 >= 0);
        if (n_split == 0) {
          next.push_back(t);
          continue;
        }
        if (n_split == 3) {
          next.push_back({t[0], m01, m20});
          next.push_back({m01, t[1], m12});
          next.push_back({m20, m12, t[2]});
          next.push_back({m01, m12, m20});
          continue;
        }
        // Rotate so the first edge (v0, v1) is split.
        int v0 = t[0], v1 = t[1], v2 = t[2], ma = m01, mb = m12, mc = m20;
        while (ma < 0) {
          const int tv = v0;
          v0 = v1; v1 = v2; v2 = tv;
          const int tm = ma;
          ma = mb; mb = mc; mc = tm;
        }
        if (n_split == 1) {
          next.push_back({v0, ma, v2});
          next.push_back({ma, v1, v2});
        } else {  // two split edges; rotate so both (v0,v1) and (v1,v2) are
          if (mb < 0) {
            const int tv = v0;
            v0 = v2; v2 = v1; v1 = tv;
            const int tm = ma;
            ma = mc; mc = mb; mb = tm;
          }
          next.push_back({ma, v1, mb});
          next.push_back({v0, ma, mb});
          next.push_back({v0, mb, v2});
        }
      }
      cur.triangles = std::move(next);
    }

    SeededMesh snap = cur;
    snap.exhausted = exhausted;
    out.push_back(std::move(snap));
  }
  return out;
}

ConnectingOrbit hetero_connect(const Chart& chart_u, const Chart& chart_s,
                               double theta_u, const Eigen::Vector2d& sigma_s0,
                               double T0, const ModelParams& p, double tol,
                               int max_iter) {
  if (chart_u.stability != ManifoldStability::unstable ||
      chart_s.stability != ManifoldStability::stable)
    throw std::invalid_argument(
        "hetero_connect needs an unstable source chart and a stable target "
        "chart");
  if (!(T0 > 0.0)) throw std::invalid_argument("hetero_connect needs T0 > 0");

  if (sigma_s0.norm() >= 1.0)
    throw ChartExitError(
        "hetero_connect: seed parameter outside the stable chart",
        sigma_s0.norm());

  const auto exit_point = [&](double theta) {
    return eval_real(chart_u, std::cos(theta), std::sin(theta));
  };
  const auto match = [&](double theta, const Eigen::Vector2d& sig, double t) {
    return integrate(exit_point(theta), t, p, tol).states.back() -
           eval_real(chart_s, sig(0), sig(1));
  };

  double theta = theta_u;
  Eigen::Vector2d sigma = sigma_s0;
  double T = T0;

  Eigen::Vector3d G = match(theta, sigma, T);
  double res = G.norm();
  bool exit_blocked = false;

  for (int iter = 0; iter < max_iter; ++iter) {
    if (res < tol) break;

    // One variational run supplies both the flow endpoint sensitivity to the
    // exit angle (column 0) and the field there (column 3).
    const VariationalState vs =
        integrate_variational(exit_point(theta), T, p, tol);
    const double h = 1e-7;
    Eigen::Vector3d exit_dot = (exit_point(theta + h) - exit_point(theta - h)) /
                               (2.0 * h);
    Eigen::MatrixXd J(3, 4);
    J.col(0) = vs.M * exit_dot;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d sp = sigma, sm = sigma;
      sp(j) += h;
      sm(j) -= h;
      J.col(1 + j) = -(eval_real(chart_s, sp(0), sp(1)) -
                       eval_real(chart_s, sm(0), sm(1))) /
                     (2.0 * h);
    }
    J.col(3) = eval_field(vs.x, p);

    // Minimum-norm Gauss-Newton step: the solution set is one-dimensional,
    // so the step must not wander along the family tangent.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Vector4d step = svd.solve(-G);

    double damp = 1.0;
    bool moved = false;
    exit_blocked = false;
    for (int half = 0; half < 12; ++half, damp *= 0.5) {
      const double theta_try = theta + damp * step(0);
      Eigen::Vector2d sig_try = sigma + damp * step.segment<2>(1);
      const double T_try = T + damp * step(3);
      if (!(T_try > 0.0)) continue;
      if (sig_try.norm() >= 1.0) {
        exit_blocked = true;
        continue;
      }
      Eigen::Vector3d G_try = match(theta_try, sig_try, T_try);
      if (G_try.norm() < res) {
        theta = theta_try;
        sigma = sig_try;
        T = T_try;
        G = G_try;
        res = G.norm();
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (!(res < tol)) {
    if (exit_blocked)
      throw ChartExitError(
          "hetero_connect: Newton pressed against the stable chart boundary",
          sigma.norm());
    throw NoConvergence("hetero_connect: Newton stalled", res);
  }

  ConnectingOrbit orbit;
  orbit.theta_u = theta;
  orbit.sigma_s = sigma;
  orbit.T = T;
  orbit.samples = integrate(exit_point(theta), T, p, tol);
  orbit.residual =
      (orbit.samples.states.back() - eval_real(chart_s, sigma(0), sigma(1)))
          .norm();
  return orbit;
}

std::vector<HeteroSeed> scan_hetero_seeds(
    const std::vector<SeededMesh>& atlas_u,
    const std::vector<SeededMesh>& atlas_s) {
  // One flattened grid over every stable-side triangle of every generation.
  struct FlatTri {
    const SeededMesh* mesh;
    const std::array<int, 3>* tri;
  };
  std::vector<FlatTri> flat;
  double cell = 1e-6;
  for (const SeededMesh& ms : atlas_s) {
    for (const auto& t : ms.triangles) flat.push_back({&ms, &t});
    cell = std::max(cell, longest_edge(ms));
  }
  TriGrid grid;
  grid.cell = cell;
  for (int i = 0; i < int(flat.size()); ++i) {
    Eigen::Vector3d lo, hi;
    triangle_bounds(*flat[i].mesh, *flat[i].tri, &lo, &hi);
    grid.insert(i, lo, hi);
  }

  std::vector<HeteroSeed> seeds;
  for (const SeededMesh& mu : atlas_u) {
    for (const auto& tu : mu.triangles) {
      Eigen::Vector3d lo, hi;
      triangle_bounds(mu, tu, &lo, &hi);
      for (int i : grid.candidates(lo, hi)) {
        const SeededMesh& ms = *flat[i].mesh;
        const auto& ts = *flat[i].tri;
        Eigen::Vector3d where;
        if (!triangles_intersect(
                mu.vertices[tu[0]].position, mu.vertices[tu[1]].position,
                mu.vertices[tu[2]].position, ms.vertices[ts[0]].position,
                ms.vertices[ts[1]].position, ms.vertices[ts[2]].position,
                &where))
          continue;

        // Convert the unstable-side seed to boundary-exit coordinates:
        // inside the chart the time-t map scales the complex parameter by
        // e^{lambda t}, so the ray through sigma exits the unit circle
        // after s_exit = -ln|sigma| / Re(lambda), rotating by
        // Im(lambda) s_exit on the way out.
        const Eigen::Vector2d su =
            (mu.vertices[tu[0]].seed + mu.vertices[tu[1]].seed +
             mu.vertices[tu[2]].seed) /
            3.0;
        const double m = su.norm();
        const double s_exit =
            -std::log(std::max(m, 1e-12)) / mu.chart.lambda.real();
        const double theta =
            std::atan2(su(1), su(0)) + mu.chart.lambda.imag() * s_exit;

        HeteroSeed hs;
        hs.theta_u = theta;
        hs.sigma_s = (ms.vertices[ts[0]].seed + ms.vertices[ts[1]].seed +
                      ms.vertices[ts[2]].seed) /
                     3.0;
        hs.T = mu.vertices[tu[0]].generation * mu.tau - s_exit +
               ms.vertices[ts[0]].generation * std::abs(ms.tau);
        hs.point = where;
        seeds.push_back(hs);
      }
    }
  }
  return seeds;
}

HeteroSeed deepen_seed(const HeteroSeed& seed, const Chart& chart_s,
                       double tau, int n) {
  if (chart_s.stability != ManifoldStability::stable)
    throw std::invalid_argument("deepen_seed needs the stable chart");
  if (!(tau > 0.0) || n < 0)
    throw std::invalid_argument("deepen_seed needs tau > 0 and n >= 0");
  HeteroSeed out = seed;
  const std::complex<double> factor =
      std::exp(chart_s.lambda * (double(n) * tau));
  const std::complex<double> sigma(seed.sigma_s(0), seed.sigma_s(1));
  const std::complex<double> pushed = factor * sigma;
  out.sigma_s = Eigen::Vector2d(pushed.real(), pushed.imag());
  out.T = seed.T + double(n) * tau;
  return out;
}

void write_obj(std::ostream& os, const SeededMesh& mesh) {
  char buf[160];
  const int g = mesh.vertices.empty() ? 0 : mesh.vertices.front().generation;
  os << "# generation " << g << "\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.position(0),
                  v.position(1), v.position(2));
    os << buf;
  }
  for (const auto& t : mesh.triangles)
    os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

void write_obj(std::ostream& os, const std::vector<SeededMesh>& meshes) {
  char buf[160];
  int offset = 0;
  for (const SeededMesh& mesh : meshes) {
    const int g = mesh.vertices.empty() ? 0 : mesh.vertices.front().generation;
    os << "# generation " << g << "\n";
    for (const auto& v : mesh.vertices) {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.position(0),
                    v.position(1), v.position(2));
      os << buf;
    }
    for (const auto& t : mesh.triangles)
      os << "f " << t[0] + 1 + offset << " " << t[1] + 1 + offset << " "
         << t[2] + 1 + offset << "\n";
    offset += int(mesh.vertices.size());
  }
}

void write_vertices_csv(std::ostream& os, const SeededMesh& mesh) {
  char buf[256];
  os << "# vertices " << mesh.vertices.size() << "\n";
  os << "# triangles " << mesh.triangles.size() << "\n";
  std::snprintf(buf, sizeof buf, "# tau %.17g\n", mesh.tau);
  os << buf;
  os << "# exhausted " << (mesh.exhausted ? 1 : 0) << "\n";
  os << "x,y,z,seed1,seed2,generation\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  v.position(0), v.position(1), v.position(2), v.seed(0),
                  v.seed(1), v.generation);
    os << buf;
  }
}

void write_orbit_csv(std::ostream& os, const ConnectingOrbit& orbit) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "# theta_u %.17g\n", orbit.theta_u);
  os << buf;
  std::snprintf(buf, sizeof buf, "# sigma_s %.17g %.17g\n", orbit.sigma_s(0),
                orbit.sigma_s(1));
  os << buf;
  std::snprintf(buf, sizeof buf, "# T %.17g\n", orbit.T);
  os << buf;
  std::snprintf(buf, sizeof buf, "# residual %.17g\n", orbit.residual);
  os << buf;
  os << "t,x,y,z\n";
  for (std::size_t i = 0; i < orbit.samples.times.size(); ++i) {
    const auto& x = orbit.samples.states[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n",
                  orbit.samples.times[i], x(0), x(1), x(2));
    os << buf;
  }
}

}  // namespace langford
