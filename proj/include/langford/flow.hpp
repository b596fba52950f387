#pragma once

// Adaptive Dormand-Prince 5(4) integration for the cusp-Hopf field, with
// dense output, PI step-size control, first-variation transport, and
// root-located crossings of the half-plane section {x = 0, y > 0}.
//
// Everything is deterministic: fixed summation orders, no randomness, so a
// rerun with identical inputs is bit-identical.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "langford/model.hpp"

namespace langford {

struct FlowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Step size collapsed below 1e-13: the orbit is blowing up (or the problem
// became effectively singular).  Carries the last good state.
struct BlowUpError : FlowError {
  BlowUpError(const Eigen::Vector3d& x, double t)
      : FlowError("integration step size underflow"), last_state(x), t_last(t) {}
  Eigen::Vector3d last_state;
  double t_last;
};

// No section crossing inside the time budget; the orbit has left the
// crossing regime (axis attractor, sink basin, ...).
struct NoCrossingError : FlowError {
  NoCrossingError(const Eigen::Vector3d& x, double t)
      : FlowError("no section crossing within time budget"),
        last_state(x),
        t_elapsed(t) {}
  Eigen::Vector3d last_state;
  double t_elapsed;
};

struct Trajectory {
  std::vector<double> times;                // strictly monotone (dir of run)
  std::vector<Eigen::Vector3d> states;
  long accepted_steps = 0;
  long rejected_steps = 0;
};

struct VariationalState {
  Eigen::Vector3d x;
  Eigen::Matrix3d M;            // d phi_t / d x0
  double trace_integral = 0.0;  // int_0^t trace Df, so det M = exp(this)
};

enum class TimeDirection { forward, backward };

struct SectionCrossing {
  Eigen::Vector3d point;  // |x component| < 1e-12
  double time;            // signed (negative for backward runs)
};

struct CrossingVariational {
  Eigen::Vector3d point;
  double time;
  Eigen::Matrix3d M;
  double trace_integral = 0.0;
};

namespace detail {

inline constexpr double kMinStep = 1e-13;

// One adaptive DP5(4) driver over Eigen fixed-size states.  RHS is any
// callable Vec(const Vec&).
template <int N, class RHS>
class Dopri5 {
 public:
  using Vec = Eigen::Matrix<double, N, 1>;

  Dopri5(RHS rhs, double tol, double h_max)
      : rhs_(rhs), tol_(tol), h_max_(h_max) {}

  void start(const Vec& y0, double t0, double dir) {
    y_ = y0;
    t_ = t0;
    dir_ = dir;
    k1_ = rhs_(y_);
    h_ = dir_ * initial_step();
    err_old_ = 1e-4;
    last_rejected_ = false;
  }

  // Advance by one accepted step, clipped so t never passes t_stop.
  // Returns false on step-size underflow (y()/t() hold the last state).
  bool advance(double t_stop) {
    for (;;) {
      if (std::abs(h_) > h_max_) h_ = dir_ * h_max_;
      if ((t_ + h_ - t_stop) * dir_ > 0.0) h_ = t_stop - t_;
      if (std::abs(h_) < kMinStep) return false;

      const double h = h_;
      const Vec k2 = rhs_(y_ + h * (a21 * k1_));
      const Vec k3 = rhs_(y_ + h * (a31 * k1_ + a32 * k2));
      const Vec k4 = rhs_(y_ + h * (a41 * k1_ + a42 * k2 + a43 * k3));
      const Vec k5 = rhs_(y_ + h * (a51 * k1_ + a52 * k2 + a53 * k3 + a54 * k4));
      const Vec k6 =
          rhs_(y_ + h * (a61 * k1_ + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vec y1 = y_ + h * (b1 * k1_ + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vec k7 = rhs_(y1);

      const Vec errv =
          h * (e1 * k1_ + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double err2 = 0.0;
      for (int i = 0; i < N; ++i) {
        const double sc =
            tol_ + tol_ * std::max(std::abs(y_[i]), std::abs(y1[i]));
        const double q = errv[i] / sc;
        err2 += q * q;
      }
      const double err = std::sqrt(err2 / N);

      const double expo1 = 0.2 - kBeta * 0.75;
      const double fac11 = std::pow(std::max(err, 1e-30), expo1);

      if (err <= 1.0) {
        // Accept: build the dense-output polynomial, slide state forward.
        const Vec ydiff = y1 - y_;
        rcont_[0] = y_;
        rcont_[1] = ydiff;
        rcont_[2] = h * k1_ - ydiff;
        rcont_[3] = ydiff - h * k7 - rcont_[2];
        rcont_[4] =
            h * (d1 * k1_ + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        t_step_ = t_;
        h_step_ = h;
        t_ += h;
        y_ = y1;
        k1_ = k7;  // FSAL
        ++accepted;

        double fac = fac11 / std::pow(err_old_, kBeta);
        fac = std::max(kFacc2, std::min(kFacc1, fac / kSafe));
        double h_new = h / fac;
        if (last_rejected_) h_new = dir_ * std::min(std::abs(h_new), std::abs(h));
        h_ = h_new;
        err_old_ = std::max(err, 1e-4);
        last_rejected_ = false;
        return true;
      }
      h_ /= std::min(kFacc1, fac11 / kSafe);
      last_rejected_ = true;
      ++rejected;
    }
  }

  // Dense evaluation over the last accepted step, theta in [0,1].
  Vec dense(double theta) const {
    const double th1 = 1.0 - theta;
    return rcont_[0] +
           theta * (rcont_[1] +
                    th1 * (rcont_[2] + theta * (rcont_[3] + th1 * rcont_[4])));
  }

  double t() const { return t_; }
  double t_step_start() const { return t_step_; }
  double h_last() const { return h_step_; }
  const Vec& y() const { return y_; }

  long accepted = 0;
  long rejected = 0;

 private:
  double initial_step() const {
    // Curvature-probing guess in the spirit of Hairer's hinit.
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double sc = tol_ + tol_ * std::abs(y_[i]);
      d0 += (y_[i] / sc) * (y_[i] / sc);
      d1 += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, h_max_);
    const Vec y1 = y_ + (dir_ * h0) * k1_;
    const Vec f1 = rhs_(y1);
    double d2 = 0.0;
    for (int i = 0; i < N; ++i) {
      const double sc = tol_ + tol_ * std::abs(y_[i]);
      const double q = (f1[i] - k1_[i]) / sc;
      d2 += q * q;
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double dm = std::max(d1, d2);
    const double h1 =
        (dm <= 1e-15) ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, h_max_});
  }

  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0,
                          a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                          a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0,
                          b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                          b6 = 11.0 / 84.0;
  static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0,
                          e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                          e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
  static constexpr double d1 = -12715105075.0 / 11282082432.0,
                          d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0,
                          d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0,
                          d7 = 69997945.0 / 29380423.0;
  static constexpr double kSafe = 0.9, kBeta = 0.04;
  static constexpr double kFacc1 = 5.0;   // max shrink factor per step
  static constexpr double kFacc2 = 0.1;   // max growth factor is 1/this

  RHS rhs_;
  double tol_;
  double h_max_;
  Vec y_, k1_;
  double t_ = 0.0, dir_ = 1.0, h_ = 0.0;
  double t_step_ = 0.0, h_step_ = 0.0;
  double err_old_ = 1e-4;
  bool last_rejected_ = false;
  std::array<Vec, 5> rcont_{};
};

// Scans one accepted step's dense output for a sign change of component 0
// with component 1 positive, refines it (Newton on the dense polynomial with
// bisection safeguard), and reports theta of the earliest admissible event.
// `slope(state)` must return d(state[0])/d(integration time).
template <int N, class Stepper, class Slope>
bool locate_event(const Stepper& stp, Slope slope, double t_min_abs,
                  double* theta_out) {
  using Vec = typename Stepper::Vec;
  constexpr int kScan = 8;
  double th_prev = 0.0;
  Vec y_prev = stp.dense(0.0);
  for (int s = 1; s <= kScan; ++s) {
    const double th = double(s) / kScan;
    const Vec y = stp.dense(th);
    if ((y_prev[0] < 0.0) != (y[0] < 0.0)) {
      double lo = th_prev, hi = th;
      double flo = y_prev[0];
      double root = 0.5 * (lo + hi);
      for (int it = 0; it < 80; ++it) {
        const Vec yr = stp.dense(root);
        const double fx = yr[0];
        if (std::abs(fx) < 1e-12) break;
        if ((fx < 0.0) == (flo < 0.0))
          lo = root;
        else
          hi = root;
        const double dfdth = slope(yr) * stp.h_last();
        double nxt = (dfdth != 0.0) ? root - fx / dfdth : 0.5 * (lo + hi);
        if (!(nxt > lo && nxt < hi)) nxt = 0.5 * (lo + hi);
        root = nxt;
      }
      const Vec yr = stp.dense(root);
      const double t_ev = stp.t_step_start() + root * stp.h_last();
      if (yr[1] > 0.0 && std::abs(t_ev) >= t_min_abs) {
        *theta_out = root;
        return true;
      }
      // Inadmissible event (wrong half-plane or inside the startup guard):
      // keep scanning the rest of the step.
    }
    th_prev = th;
    y_prev = y;
  }
  return false;
}

}  // namespace detail

// Integrate from x0 for time t_final (negative runs backwards).  Nodes are
// the accepted steps.  tol must lie in [1e-14, 1e-3]; both the absolute and
// relative error weights use it.
Trajectory integrate(const Eigen::Vector3d& x0, double t_final,
                     const ModelParams& p, double tol);

// Flow plus first variation M' = Df(x) M, M(0) = I, plus the running
// integral of trace Df (a Liouville handle: det M should equal its exp).
VariationalState integrate_variational(const Eigen::Vector3d& x0,
                                       double t_final, const ModelParams& p,
                                       double tol);

// Next transversal crossing of {x = 0, y > 0}.  On this half-plane the field
// has x' = -delta y < 0, so every admissible crossing has the same
// orientation; backward runs see the sign flipped.  Crossings earlier than
// t_min (default 1e-3) are ignored so a start on the section is not
// re-detected.  Throws NoCrossingError after `budget` time units.
SectionCrossing next_section_crossing(const Eigen::Vector3d& x0,
                                      const ModelParams& p, double tol,
                                      TimeDirection dir = TimeDirection::forward,
                                      double budget = 200.0,
                                      double t_min = 1e-3);

// Same event search carrying the first variation along.
CrossingVariational next_crossing_variational(
    const Eigen::Vector3d& x0, const ModelParams& p, double tol,
    TimeDirection dir = TimeDirection::forward, double budget = 200.0,
    double t_min = 1e-3);

}  // namespace langford
