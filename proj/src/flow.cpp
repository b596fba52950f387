#include "langford/flow.hpp"

namespace langford {

namespace {

void check_tol(double tol) {
  if (!(tol >= 1e-14 && tol <= 1e-3))
    throw std::invalid_argument("integrator tol must lie in [1e-14, 1e-3]");
}

using Vec13 = Eigen::Matrix<double, 13, 1>;

// Variational state layout: x (3), M (9, column-major), trace integral (1).
Vec13 variational_rhs(const Vec13& s, const ModelParams& p) {
  const Eigen::Vector3d x = s.template head<3>();
  const Eigen::Map<const Eigen::Matrix3d> M(s.data() + 3);
  const Eigen::Matrix3d J = eval_jacobian(x, p);
  Vec13 ds;
  ds.template head<3>() = eval_field(x, p);
  Eigen::Map<Eigen::Matrix3d>(ds.data() + 3) = J * M;
  ds[12] = J.trace();
  return ds;
}

Vec13 pack_variational(const Eigen::Vector3d& x) {
  Vec13 s = Vec13::Zero();
  s.template head<3>() = x;
  Eigen::Map<Eigen::Matrix3d>(s.data() + 3) = Eigen::Matrix3d::Identity();
  return s;
}

}  // namespace

Trajectory integrate(const Eigen::Vector3d& x0, double t_final,
                     const ModelParams& p, double tol) {
  check_tol(tol);
  Trajectory tr;
  tr.times.push_back(0.0);
  tr.states.push_back(x0);
  if (t_final == 0.0) return tr;

  const double dir = (t_final > 0.0) ? 1.0 : -1.0;
  auto rhs = [&p](const Eigen::Vector3d& y) { return eval_field(y, p); };
  detail::Dopri5<3, decltype(rhs)> stp(rhs, tol, std::abs(t_final));
  stp.start(x0, 0.0, dir);
  while ((stp.t() - t_final) * dir < 0.0) {
    if (!stp.advance(t_final)) throw BlowUpError(stp.y(), stp.t());
    tr.times.push_back(stp.t());
    tr.states.push_back(stp.y());
  }
  tr.accepted_steps = stp.accepted;
  tr.rejected_steps = stp.rejected;
  return tr;
}

VariationalState integrate_variational(const Eigen::Vector3d& x0,
                                       double t_final, const ModelParams& p,
                                       double tol) {
  check_tol(tol);
  VariationalState vs;
  vs.x = x0;
  vs.M = Eigen::Matrix3d::Identity();
  vs.trace_integral = 0.0;
  if (t_final == 0.0) return vs;

  const double dir = (t_final > 0.0) ? 1.0 : -1.0;
  auto rhs = [&p](const Vec13& s) { return variational_rhs(s, p); };
  detail::Dopri5<13, decltype(rhs)> stp(rhs, tol, std::abs(t_final));
  stp.start(pack_variational(x0), 0.0, dir);
  while ((stp.t() - t_final) * dir < 0.0) {
    if (!stp.advance(t_final))
      throw BlowUpError(stp.y().template head<3>(), stp.t());
  }
  const Vec13& s = stp.y();
  vs.x = s.template head<3>();
  vs.M = Eigen::Map<const Eigen::Matrix3d>(s.data() + 3);
  vs.trace_integral = s[12];
  return vs;
}

SectionCrossing next_section_crossing(const Eigen::Vector3d& x0,
                                      const ModelParams& p, double tol,
                                      TimeDirection dir, double budget,
                                      double t_min) {
  check_tol(tol);
  if (x0.template head<2>().norm() == 0.0)
    throw NoCrossingError(x0, 0.0);  // axis orbits never reach the section
  const double d = (dir == TimeDirection::forward) ? 1.0 : -1.0;
  const double t_stop = d * budget;
  auto rhs = [&p](const Eigen::Vector3d& y) { return eval_field(y, p); };
  // Cap steps at a fraction of the rotation half-period so a step cannot
  // straddle two section passages.
  detail::Dopri5<3, decltype(rhs)> stp(rhs, tol, 0.4);
  stp.start(x0, 0.0, d);
  auto slope = [&p](const Eigen::Vector3d& y) { return eval_field(y, p)[0]; };
  while ((stp.t() - t_stop) * d < 0.0) {
    if (!stp.advance(t_stop)) throw BlowUpError(stp.y(), stp.t());
    double theta;
    if (detail::locate_event<3>(stp, slope, t_min, &theta)) {
      SectionCrossing c;
      c.point = stp.dense(theta);
      c.time = stp.t_step_start() + theta * stp.h_last();
      return c;
    }
  }
  throw NoCrossingError(stp.y(), stp.t());
}

CrossingVariational next_crossing_variational(const Eigen::Vector3d& x0,
                                              const ModelParams& p, double tol,
                                              TimeDirection dir, double budget,
                                              double t_min) {
  check_tol(tol);
  if (x0.template head<2>().norm() == 0.0)
    throw NoCrossingError(x0, 0.0);  // axis orbits never reach the section
  const double d = (dir == TimeDirection::forward) ? 1.0 : -1.0;
  const double t_stop = d * budget;
  auto rhs = [&p](const Vec13& s) { return variational_rhs(s, p); };
  detail::Dopri5<13, decltype(rhs)> stp(rhs, tol, 0.4);
  stp.start(pack_variational(x0), 0.0, d);
  auto slope = [&p](const Vec13& s) {
    return eval_field(s.template head<3>(), p)[0];
  };
  while ((stp.t() - t_stop) * d < 0.0) {
    if (!stp.advance(t_stop))
      throw BlowUpError(stp.y().template head<3>(), stp.t());
    double theta;
    if (detail::locate_event<13>(stp, slope, t_min, &theta)) {
      const Vec13 s = stp.dense(theta);
      CrossingVariational c;
      c.point = s.template head<3>();
      c.time = stp.t_step_start() + theta * stp.h_last();
      c.M = Eigen::Map<const Eigen::Matrix3d>(s.data() + 3);
      c.trace_integral = s[12];
      return c;
    }
  }
  throw NoCrossingError(stp.y().template head<3>(), stp.t());
}

}  // namespace langford
