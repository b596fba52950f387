#pragma once

// Return-map machinery on the half-plane section {x = 0, y > 0}: iterated
// crossings, the projected 2x2 derivative, Newton solvers for k-cycles, an
// augmented Newton locating the torus-birth parameter, invariant-circle
// sampling, one-dimensional invariant curves of saddle cycles, and
// polyline-intersection counting.

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "langford/chart.hpp"  // ManifoldStability
#include "langford/flow.hpp"
#include "langford/model.hpp"

namespace langford {

// Section coordinates are (y, z); the ambient point is (0, y, z).
using SectionPoint = Eigen::Vector2d;

inline Eigen::Vector3d section_lift(const SectionPoint& q) {
  return Eigen::Vector3d(0.0, q(0), q(1));
}
inline SectionPoint section_project(const Eigen::Vector3d& x) {
  return SectionPoint(x(1), x(2));
}

// The orbit met the section almost tangentially (|x'| < 1e-8 at a crossing),
// so the return-map derivative projection is singular there.
struct GrazingError : FlowError {
  using FlowError::FlowError;
};

// An iterative solve ran out of iterations; carries the last residual.
struct NoConvergence : std::runtime_error {
  NoConvergence(const std::string& what, double r)
      : std::runtime_error(what), residual(r) {}
  double residual;
};

// The located parameter point does not carry a complex multiplier pair.
struct RealMultipliersError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Spacing control would need more points than the budget allows.
struct ResolutionExhausted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReturnResult {
  SectionPoint point;
  double time = 0.0;  // accumulated signed flow time over the k crossings
  std::vector<SectionPoint> intermediate;  // crossings 1..k-1
};

// R^k(q) by chaining section crossings; backward runs apply the inverse map.
ReturnResult return_map(const SectionPoint& q, const ModelParams& p, int k,
                        double tol,
                        TimeDirection dir = TimeDirection::forward);

struct ReturnDerivative {
  SectionPoint point;
  double time = 0.0;
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();  // d R^k / d q
};

// Variational transport projected onto the section at every crossing.
ReturnDerivative return_derivative(const SectionPoint& q, const ModelParams& p,
                                   int k, double tol,
                                   TimeDirection dir = TimeDirection::forward);

enum class CycleTag {
  attracting_node,
  attracting_focus,
  saddle,
  repelling_node,
  repelling_focus,
};

const char* to_string(CycleTag t);

struct Cycle {
  int k = 1;
  std::vector<SectionPoint> points;  // R-orbit order; points[0] is the solve
  double period = 0.0;               // flow time around the full cycle
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();  // DR^k at points[0]
  Eigen::Vector2cd multipliers;      // spectrum of D, |mu_1| >= |mu_2|
  CycleTag tag = CycleTag::attracting_focus;
  double residual = 0.0;             // |R^k(q) - q| accepted by Newton
  int minimal_k = 1;                 // < k when the orbit closes early
  ModelParams params;
};

// Damped Newton on R^k(q) - q = 0.  Residual must fall below 1e-10 within
// max_iter iterations; a solution whose orbit already closes after a proper
// divisor d of k is returned with minimal_k = d.
Cycle newton_cycle(const SectionPoint& guess, const ModelParams& p, int k,
                   double tol, int max_iter = 50);

// Re-solve an existing cycle while stepping alpha to alpha_target in n_steps
// equal increments (seed-chaining continuation).
Cycle continue_cycle(const Cycle& c, double alpha_target, int n_steps,
                     double tol);

struct TorusBirth {
  SectionPoint point;
  double alpha = 0.0;
  Cycle cycle;  // re-solved at the located alpha, diagnostics included
};

// Augmented Newton for the parameter where the k-cycle's multiplier pair
// crosses the unit circle: F(q, alpha) = (R^k(q) - q, det DR^k(q) - 1) = 0.
// det - 1 pins |mu|^2 = 1 for a complex pair; |trace| < 2 is asserted at the
// solution so the pair is genuinely complex.
TorusBirth locate_neimark_sacker(const SectionPoint& seed, double alpha0,
                                 const ModelParams& p, double tol, int k = 1,
                                 int max_iter = 50);

struct Polyline {
  std::vector<SectionPoint> pts;
  std::string source;        // human-readable provenance of the curve
  double arclength = 0.0;
  bool closed = false;
  bool star_shaped = true;   // angle-sort produced a simple closed curve
  bool truncated = false;    // stopped by a budget, not by convergence
  std::string stop_reason;   // why growth ended (growers fill this in)
};

struct CircleSample {
  Polyline curve;
  bool resonant = false;  // iterates collapsed onto finitely many clusters
  int clusters = 0;       // cluster count when resonant
  SectionPoint center = SectionPoint::Zero();  // interior fixed point
};

// Iterate R at the given alpha (params otherwise from p), discard
// n_transient returns, keep n_keep, and sort them by angle about the
// interior fixed point.  Collapse onto <= 24 clusters reports a resonant
// sample instead of a curve.
CircleSample sample_invariant_circle(double alpha, const ModelParams& p,
                                     int n_transient, int n_keep, double tol);

enum class BranchSide { plus, minus };

struct Manifold1DOptions {
  double h = 1e-5;             // inner offset of the fundamental segment
  double delta_max = 5e-3;     // spacing bound in section coordinates
  double arclength_max = 10.0;
  int max_generations = 80;
  double min_increment = 1e-6;  // generation gain below this => captured
  std::size_t max_points = 1000000;
  double tol = 1e-10;
};

// Grow one branch of the 1D stable/unstable set of a saddle cycle: seed a
// fundamental segment [h, |mu| h] along the eigenvector of DR^k, iterate the
// (forward or backward) k-fold return map, and refine by inserting
// seed-parameter midpoints whenever consecutive images drift apart.  Every
// emitted point is an exact iterate of a seed on the segment, so refinement
// never interpolates in phase space.
Polyline grow_cycle_manifold_1d(const Cycle& cycle, ManifoldStability kind,
                                BranchSide branch,
                                const Manifold1DOptions& opt,
                                const ModelParams& p);

struct CrossingReport {
  std::vector<SectionPoint> points;  // transversal intersections
  int degenerate = 0;                // collinear-overlap segment pairs
};

// All transversal segment-segment intersections between two polylines
// (orientation predicates; intersection points by linear interpolation).
CrossingReport detect_crossings(const Polyline& a, const Polyline& b);

// Plumbing: iterate a grid of section starts n_iter returns each and cluster
// the surviving endpoints; the cluster centers seed newton_cycle.
std::vector<SectionPoint> scan_cycle_seeds(const ModelParams& p, double tol,
                                           const SectionPoint& lo,
                                           const SectionPoint& hi, int n_y,
                                           int n_z, int n_iter = 200,
                                           double cluster_radius = 1e-3);

// On a phase-locked invariant circle, locate the saddle companion of an
// attracting k-cycle by seeding Newton between consecutive attracting points
// (angularly, about the interior fixed point).
Cycle saddle_companion(const Cycle& attracting, const SectionPoint& center,
                       double tol);

// CSV export: "y,z" rows preceded by "# key value" metadata comments.
void write_polyline_csv(std::ostream& os, const Polyline& pl);
void write_cycle_csv(std::ostream& os, const Cycle& c);

}  // namespace langford
