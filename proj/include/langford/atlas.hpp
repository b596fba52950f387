#pragma once

// Two-dimensional manifold atlases: triangulate the chart's parameter disk
// or fundamental-domain annulus, push the mesh into phase space through the
// polynomial chart, and advance it generation by generation with the
// time-tau flow map.  Every vertex remembers the parameter-space seed it was
// integrated from, so refinement inserts seed midpoints and integrates them
// for the full elapsed time instead of interpolating in phase space.  The
// heteroclinic boundary value problem between an unstable and a stable chart
// lives here too, seeded by a triangle-intersection scan between atlases.

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <vector>

#include "langford/chart.hpp"
#include "langford/flow.hpp"
#include "langford/model.hpp"
#include "langford/poincare.hpp"  // NoConvergence

namespace langford {

struct ParamMesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  int n_boundary = 0;  // vertices on the outer unit circle
};

// Structured polar triangulation of the closed unit disk: n_r radial by
// n_theta angular subdivisions, quad cells split along one diagonal, a
// triangle fan around the center vertex (which comes last).
ParamMesh mesh_disk(int n_r, int n_theta);

// Structured triangulation of the annulus r_in <= |sigma| <= 1 with n_r
// radial subdivisions; the hole is preserved (no center fan).
ParamMesh mesh_annulus(double r_in, int n_r, int n_theta);

// V - E + F with E counted over unique undirected edges.
int euler_characteristic(std::size_t n_vertices,
                         const std::vector<std::array<int, 3>>& triangles);

// Inner radius of the fundamental annulus of the time-tau map on the chart:
// the image of the unit circle under one contraction step toward the base
// point, exp(-|Re lambda| tau).
double fundamental_inner_radius(const Chart& c, double tau);

struct SeededVertex {
  Eigen::Vector3d position;
  Eigen::Vector2d seed;  // parameter-space point the position integrates from
  int generation = 0;
};

struct SeededMesh {
  std::vector<SeededVertex> vertices;
  std::vector<std::array<int, 3>> triangles;
  double tau = 0.25;  // signed per-generation advection time
  Chart chart;        // lift provenance: position_0 = eval_real(chart, seed)
  bool exhausted = false;  // vertex budget hit; later generations are partial
};

// Push a parameter mesh into phase space through the chart (generation 0).
// tau is stored for later advection, negated for stable charts so the mesh
// advances with the backward-time flow.
SeededMesh lift_mesh(const Chart& chart, const ParamMesh& mesh,
                     double tau = 0.25);

// Advance the lifted mesh n_gen times by the time-tau map, re-integrating
// every vertex from its chart lift for the full elapsed time g*tau.  After
// each advance, any triangle edge longer than edge_max in phase space is
// split at its seed-space midpoint (the midpoint integrated for the full
// g*tau as well) until all edges comply or the vertex budget is hit; past
// 5e6 vertices the sequence is returned as computed so far with the last
// mesh's `exhausted` flag set.  Returns generations 1..n_gen.
std::vector<SeededMesh> advect(const SeededMesh& mesh, int n_gen,
                               double edge_max, const ModelParams& p,
                               double tol);

struct ConnectingOrbit {
  double theta_u = 0.0;        // exit angle on the unstable chart boundary
  Eigen::Vector2d sigma_s;     // landing parameter on the stable chart
  double T = 0.0;              // transit time, > 0
  Trajectory samples;          // the connecting segment, exit to landing
  double residual = 0.0;       // |phi(exit, T) - eval_real(chart_s, sigma_s)|
};

// Newton's landing parameter left the stable chart's unit disk; re-seed the
// solve with a larger transit time so the endpoint sits deeper inside.
struct ChartExitError : std::runtime_error {
  ChartExitError(const std::string& what, double r)
      : std::runtime_error(what), sigma_norm(r) {}
  double sigma_norm;
};

// Solve G(theta_u, sigma_s, T) = phi(exit(theta_u), T) - eval_real(chart_s,
// sigma_s) = 0, where exit(theta) is the unstable-chart boundary point at
// radius 1 (the radius pin is the phase condition).  Three equations in the
// four unknowns (theta_u, sigma_s, T): connections come in one-parameter
// families, so the damped Gauss-Newton iteration takes minimum-norm steps
// and converges to the family point nearest the guess.
ConnectingOrbit hetero_connect(const Chart& chart_u, const Chart& chart_s,
                               double theta_u, const Eigen::Vector2d& sigma_s0,
                               double T0, const ModelParams& p,
                               double tol = 1e-10, int max_iter = 40);

struct HeteroSeed {
  double theta_u = 0.0;
  Eigen::Vector2d sigma_s;
  double T = 0.0;
  Eigen::Vector3d point;  // where the triangles pierce each other
};

// Intersect every triangle of the unstable atlas with every triangle of the
// stable atlas (broad phase: uniform grid over bounding boxes) and convert
// each crossing triangle pair into a Newton seed for hetero_connect.  Empty
// result means the manifolds stay apart at this parameter.
std::vector<HeteroSeed> scan_hetero_seeds(
    const std::vector<SeededMesh>& atlas_u,
    const std::vector<SeededMesh>& atlas_s);

// The chart-exit remedy: move a seed's landing parameter n backward-map
// steps deeper into the stable chart (sigma_s -> e^{lambda n tau} sigma_s)
// and lengthen the transit time to T + n tau to compensate.
HeteroSeed deepen_seed(const HeteroSeed& seed, const Chart& chart_s,
                       double tau, int n);

// Wavefront OBJ: `v x y z` / `f i j k` (1-based), with `# generation g`
// comments; the combined overload concatenates generations with offset
// face indices.
void write_obj(std::ostream& os, const SeededMesh& mesh);
void write_obj(std::ostream& os, const std::vector<SeededMesh>& meshes);

// CSV vertex dump: "x,y,z,seed1,seed2,generation" rows after "# key value"
// metadata.
void write_vertices_csv(std::ostream& os, const SeededMesh& mesh);

// CSV trajectory of a connecting orbit: "t,x,y,z" rows after metadata.
void write_orbit_csv(std::ostream& os, const ConnectingOrbit& orbit);

}  // namespace langford
