// Command line driver for the cusp-Hopf toolkit: every experiment is a
// subcommand writing CSV/OBJ outputs plus a manifest.json into a run
// directory.  Exit codes: 0 success, 2 configuration or usage error,
// 3 numerical failure, 4 negative result (empty scan, verification
// mismatch).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "langford/atlas.hpp"
#include "langford/chart.hpp"
#include "langford/config.hpp"
#include "langford/flow.hpp"
#include "langford/model.hpp"
#include "langford/poincare.hpp"

using namespace langford;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNegative = 4;
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

int worker_count() {
  const char* env = std::getenv("LANGFORD_WORKERS");
  if (!env) return 1;
  long n = std::strtol(env, nullptr, 10);
  return int(std::clamp(n, 1l, 64l));
}

// Run fn(i) for i in [0, n) on the worker pool; any exception is rethrown
// after all workers join.  Results must be written into pre-sized slots so
// the outcome is identical for every worker count.
void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Per-run state: configuration, output directory, and the manifest that is
// written as the run's final act.
struct Ctx {
  ExperimentConfig cfg;
  std::string out_dir;
  RunManifest man;
  std::chrono::steady_clock::time_point t0 =
      std::chrono::steady_clock::now();
};

std::ofstream open_output(Ctx& ctx, const std::string& name) {
  fs::create_directories(ctx.out_dir);
  std::ofstream out(ctx.out_dir + "/" + name);
  if (!out)
    throw ConfigError("cannot write output file '" + ctx.out_dir + "/" +
                      name + "'");
  return out;
}

void record(Ctx& ctx, const std::string& name) {
  record_output(ctx.man, ctx.out_dir, name);
}

int finish(Ctx& ctx, int code, const std::string& status) {
  ctx.man.version = kVersion;
  ctx.man.status = status;
  ctx.man.config = ctx.cfg.entries();
  ctx.man.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - ctx.t0)
          .count();
  fs::create_directories(ctx.out_dir);
  write_manifest(ctx.out_dir + "/manifest.json", ctx.man);
  return code;
}

// ---------------------------------------------------------------------------
// equilibria

struct EqRow {
  double alpha;
  std::vector<Equilibrium> eqs;
};

void write_eq_rows(std::ostream& os, const std::vector<EqRow>& rows) {
  os << "alpha,z,x,y,pair_re,pair_im,axis,tag\n";
  for (const auto& r : rows)
    for (const auto& e : r.eqs)
      os << fmt(r.alpha) << ',' << fmt(e.z_star) << ',' << fmt(e.point.x())
         << ',' << fmt(e.point.y()) << ',' << fmt(e.lambda_pair.real()) << ','
         << fmt(e.lambda_pair.imag()) << ',' << fmt(e.lambda_real) << ','
         << to_string(e.tag) << '\n';
}

// Bisect the alpha where the axis root count changes inside [lo, hi].
double bisect_fold(double lo, double hi, const ModelParams& base) {
  auto count = [&](double a) {
    ModelParams p = base;
    p.alpha = a;
    return axis_equilibria(p).size();
  };
  std::size_t c_lo = count(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    double mid = 0.5 * (lo + hi);
    if (count(mid) == c_lo)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

int cmd_equilibria(Ctx& ctx, double alpha, const std::string& sweep) {
  ModelParams base = ctx.cfg.model_params();
  std::vector<EqRow> rows;
  if (sweep.empty()) {
    ModelParams p = base;
    p.alpha = alpha;
    rows.push_back({alpha, axis_equilibria(p)});
    ctx.man.results["n_equilibria"] = double(rows[0].eqs.size());
  } else {
    double lo, hi, step;
    if (std::sscanf(sweep.c_str(), "%lg:%lg:%lg", &lo, &hi, &step) != 3 ||
        step <= 0 || hi < lo)
      throw ConfigError("--sweep wants lo:hi:step with step > 0, got '" +
                        sweep + "'");
    int n = int(std::floor((hi - lo) / step + 1e-12)) + 1;
    rows.resize(n);
    parallel_for(n, [&](int i) {
      double a = lo + i * step;
      ModelParams p = base;
      p.alpha = a;
      rows[i] = {a, axis_equilibria(p)};
    });
    ctx.man.results["n_grid"] = n;
    for (int i = 0; i + 1 < n; ++i)
      if (rows[i].eqs.size() != rows[i + 1].eqs.size()) {
        double located = bisect_fold(rows[i].alpha, rows[i + 1].alpha, base);
        ctx.man.results["saddle_node_alpha"] = located;
        ctx.man.results["saddle_node_closed_form"] =
            saddle_node_alpha(base.tau);
        break;
      }
  }
  auto out = open_output(ctx, "equilibria.csv");
  write_eq_rows(out, rows);
  out.close();
  record(ctx, "equilibria.csv");
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// chart

Equilibrium pick_equilibrium(const ModelParams& p, const std::string& id) {
  auto eqs = axis_equilibria(p);
  int idx = -1;
  if (id == "p0") idx = 0;
  if (id == "p1") idx = 1;
  if (id == "p2") idx = 2;
  if (idx < 0) throw ConfigError("--point wants p0, p1, or p2, got '" + id +
                                 "'");
  if (idx >= int(eqs.size())) {
    std::ostringstream os;
    os << "equilibrium " << id << " does not exist at alpha=" << p.alpha
       << " (" << eqs.size() << " axis equilibria)";
    throw std::invalid_argument(os.str());
  }
  return eqs[idx];
}

int cmd_chart(Ctx& ctx, const std::string& point, const std::string& stab_s,
              double alpha, int N, double eps0, double scale) {
  ModelParams p = ctx.cfg.model_params();
  p.alpha = alpha;
  ManifoldStability stab;
  if (stab_s == "stable")
    stab = ManifoldStability::stable;
  else if (stab_s == "unstable")
    stab = ManifoldStability::unstable;
  else
    throw ConfigError("--stability wants stable or unstable, got '" + stab_s +
                      "'");
  Equilibrium eq = pick_equilibrium(p, point);

  Chart chart;
  if (scale > 0.0) {
    chart = solve_homological(eq, p, stab, N, scale);
  } else if (N >= 8) {
    Chart probe = solve_homological(eq, p, stab, N, 1.0);
    chart = solve_homological(eq, p, stab, N, choose_scale(probe, eps0));
    ScalingRecord fit = decay_fit(chart);
    ctx.man.results["decay_C"] = fit.C;
    ctx.man.results["decay_R1"] = fit.R1;
    ctx.man.results["decay_R2"] = fit.R2;
  } else {
    chart = solve_homological(eq, p, stab, N, 1.0);
  }
  double T = (stab == ManifoldStability::stable) ? 0.25 : -0.25;
  double err = error_conj(chart, T, 32, ctx.cfg.get_double("flow.tol"));

  auto out = open_output(ctx, "chart.txt");
  save_chart(out, chart);
  out.close();
  record(ctx, "chart.txt");
  ctx.man.results["error_conj"] = err;
  ctx.man.results["scale_s1"] = chart.scaling.s1;
  ctx.man.results["lambda_re"] = chart.lambda.real();
  ctx.man.results["lambda_im"] = chart.lambda.imag();
  ctx.man.results["base_z"] = eq.z_star;
  ctx.man.results["order"] = N;
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// poincare family

void cycle_results(Ctx& ctx, const Cycle& c, const std::string& prefix) {
  ctx.man.results[prefix + "k"] = c.k;
  ctx.man.results[prefix + "minimal_k"] = c.minimal_k;
  ctx.man.results[prefix + "period"] = c.period;
  ctx.man.results[prefix + "residual"] = c.residual;
  ctx.man.results[prefix + "y"] = c.points[0].x();
  ctx.man.results[prefix + "z"] = c.points[0].y();
  ctx.man.results[prefix + "mult_modulus"] = std::abs(c.multipliers(0));
}

int cmd_cycle(Ctx& ctx, double alpha, double y, double z, int k) {
  ModelParams p = ctx.cfg.model_params();
  p.alpha = alpha;
  Cycle c = newton_cycle(SectionPoint(y, z), p, k,
                         ctx.cfg.get_double("poincare.tol"));
  auto out = open_output(ctx, "cycle.csv");
  write_cycle_csv(out, c);
  out.close();
  record(ctx, "cycle.csv");
  cycle_results(ctx, c, "");
  return finish(ctx, kExitOk, "ok");
}

int cmd_ns_locate(Ctx& ctx, double alpha0, double y, double z) {
  ModelParams p = ctx.cfg.model_params();
  TorusBirth tb = locate_neimark_sacker(SectionPoint(y, z), alpha0, p,
                                        ctx.cfg.get_double("poincare.tol"));
  auto out = open_output(ctx, "ns_cycle.csv");
  write_cycle_csv(out, tb.cycle);
  out.close();
  record(ctx, "ns_cycle.csv");
  ctx.man.results["alpha1"] = tb.alpha;
  cycle_results(ctx, tb.cycle, "cycle_");
  return finish(ctx, kExitOk, "ok");
}

int cmd_circle(Ctx& ctx, double alpha, const std::string& torus_obj) {
  ModelParams p = ctx.cfg.model_params();
  CircleSample cs = sample_invariant_circle(
      alpha, p, ctx.cfg.get_int("poincare.circle_transient"),
      ctx.cfg.get_int("poincare.circle_keep"),
      ctx.cfg.get_double("flow.tol"));
  auto out = open_output(ctx, "circle.csv");
  write_polyline_csv(out, cs.curve);
  out.close();
  record(ctx, "circle.csv");
  ctx.man.results["resonant"] = cs.resonant ? 1.0 : 0.0;
  ctx.man.results["clusters"] = cs.clusters;
  ctx.man.results["arclength"] = cs.curve.arclength;
  ctx.man.results["n_points"] = double(cs.curve.pts.size());
  ctx.man.results["center_y"] = cs.center.x();
  ctx.man.results["center_z"] = cs.center.y();

  if (!torus_obj.empty() && !cs.resonant) {
    // Sweep each section point through one full revolution; the rings stack
    // into a tube whose last ring lands back on the section curve (at the
    // rotated position), closing the torus geometrically.
    const int rings = 64;
    const double tol = ctx.cfg.get_double("flow.tol");
    const double t_ret = kTwoPi / p.delta;
    ModelParams pa = p;
    pa.alpha = alpha;
    const int n = int(cs.curve.pts.size());
    std::vector<std::vector<Eigen::Vector3d>> grid(n);
    parallel_for(n, [&](int i) {
      Eigen::Vector3d x(0.0, cs.curve.pts[i].x(), cs.curve.pts[i].y());
      grid[i].push_back(x);
      for (int j = 1; j <= rings; ++j) {
        x = integrate(x, t_ret / rings, pa, tol).states.back();
        grid[i].push_back(x);
      }
    });
    auto obj = open_output(ctx, torus_obj);
    obj << "# torus sweep, " << n << " x " << (rings + 1) << " vertices\n";
    for (const auto& ring : grid)
      for (const auto& v : ring) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x(), v.y(),
                      v.z());
        obj << buf;
      }
    auto vid = [&](int i, int j) { return i * (rings + 1) + j + 1; };
    for (int i = 0; i < n; ++i) {
      int i2 = (i + 1) % n;
      for (int j = 0; j < rings; ++j) {
        obj << "f " << vid(i, j) << ' ' << vid(i2, j) << ' ' << vid(i2, j + 1)
            << '\n';
        obj << "f " << vid(i, j) << ' ' << vid(i2, j + 1) << ' '
            << vid(i, j + 1) << '\n';
      }
    }
    obj.close();
    record(ctx, torus_obj);
  }
  return finish(ctx, kExitOk, "ok");
}

Manifold1DOptions manifold_options(const ExperimentConfig& cfg) {
  Manifold1DOptions opt;
  opt.h = cfg.get_double("manifold1d.h");
  opt.delta_max = cfg.get_double("manifold1d.delta_max");
  opt.arclength_max = cfg.get_double("manifold1d.arclength_max");
  opt.max_generations = cfg.get_int("manifold1d.max_generations");
  opt.min_increment = cfg.get_double("manifold1d.min_increment");
  opt.max_points = std::size_t(cfg.get_int("manifold1d.max_points"));
  opt.tol = cfg.get_double("manifold1d.tol");
  return opt;
}

int cmd_manifold1d(Ctx& ctx, double alpha, double y, double z, int k,
                   const std::string& kind_s, const std::string& branch_s) {
  ModelParams p = ctx.cfg.model_params();
  p.alpha = alpha;
  ManifoldStability kind;
  if (kind_s == "stable")
    kind = ManifoldStability::stable;
  else if (kind_s == "unstable")
    kind = ManifoldStability::unstable;
  else
    throw ConfigError("--kind wants stable or unstable, got '" + kind_s +
                      "'");
  std::vector<BranchSide> sides;
  if (branch_s == "plus" || branch_s == "both") sides.push_back(BranchSide::plus);
  if (branch_s == "minus" || branch_s == "both")
    sides.push_back(BranchSide::minus);
  if (sides.empty())
    throw ConfigError("--branch wants plus, minus, or both, got '" + branch_s +
                      "'");

  Cycle saddle = newton_cycle(SectionPoint(y, z), p, k,
                              ctx.cfg.get_double("poincare.tol"));
  Manifold1DOptions opt = manifold_options(ctx.cfg);
  cycle_results(ctx, saddle, "saddle_");
  for (BranchSide side : sides) {
    Polyline pl = grow_cycle_manifold_1d(saddle, kind, side, opt, p);
    std::string tag = side == BranchSide::plus ? "plus" : "minus";
    std::string name = "manifold_" + kind_s + "_" + tag + ".csv";
    auto out = open_output(ctx, name);
    write_polyline_csv(out, pl);
    out.close();
    record(ctx, name);
    ctx.man.results["arclength_" + tag] = pl.arclength;
    ctx.man.results["points_" + tag] = double(pl.pts.size());
    ctx.man.results["captured_" + tag] =
        pl.stop_reason == "captured" ? 1.0 : 0.0;
  }
  return finish(ctx, kExitOk, "ok");
}

// The crossing-count experiment: resolve the period-3 saddle at 0.82 from
// its companion construction, continue it to each target alpha, trace its
// stable curve both ways and the chosen unstable branches to fixed
// arclength budgets, and count transversal crossings.
struct BracketRow {
  double alpha = 0.0;
  int u_plus = -1;   // -1 = branch not traced
  int u_minus = -1;
  int total = 0;
};

std::vector<BracketRow> run_bracket(const Ctx& ctx,
                                    const std::vector<double>& alphas,
                                    bool trace_plus, bool trace_minus,
                                    const SectionPoint& q1_seed,
                                    const SectionPoint& fp_seed) {
  const double tol = ctx.cfg.get_double("poincare.tol");
  ModelParams p = ctx.cfg.model_params();
  p.alpha = 0.82;
  Cycle q1 = newton_cycle(q1_seed, p, 3, tol);
  Cycle fp = newton_cycle(fp_seed, p, 1, tol);
  Cycle q2 = saddle_companion(q1, fp.points[0], tol);

  Manifold1DOptions sopt;
  sopt.arclength_max = ctx.cfg.get_double("bracket.arclength_s");
  sopt.max_generations = ctx.cfg.get_int("bracket.max_generations");
  sopt.min_increment = ctx.cfg.get_double("bracket.min_increment");
  sopt.max_points = std::size_t(ctx.cfg.get_int("bracket.max_points"));
  sopt.tol = ctx.cfg.get_double("manifold1d.tol");
  Manifold1DOptions uopt = sopt;
  uopt.arclength_max = ctx.cfg.get_double("bracket.arclength_u");

  std::vector<BracketRow> rows(alphas.size());
  parallel_for(int(alphas.size()), [&](int i) {
    double alpha = alphas[i];
    ModelParams pa = p;
    pa.alpha = alpha;
    int n_steps = std::max(1, int(std::ceil(std::abs(alpha - 0.82) / 0.01)));
    Cycle sad = continue_cycle(q2, alpha, n_steps, tol);

    Polyline sm = grow_cycle_manifold_1d(sad, ManifoldStability::stable,
                                         BranchSide::minus, sopt, pa);
    Polyline sp = grow_cycle_manifold_1d(sad, ManifoldStability::stable,
                                         BranchSide::plus, sopt, pa);
    BracketRow row;
    row.alpha = alpha;
    auto count = [&](BranchSide side) {
      Polyline u = grow_cycle_manifold_1d(sad, ManifoldStability::unstable,
                                          side, uopt, pa);
      return int(detect_crossings(u, sm).points.size()) +
             int(detect_crossings(u, sp).points.size());
    };
    if (trace_plus) row.u_plus = count(BranchSide::plus);
    if (trace_minus) row.u_minus = count(BranchSide::minus);
    row.total = std::max(row.u_plus, 0) + std::max(row.u_minus, 0);
    rows[i] = row;
  });
  return rows;
}

int cmd_bracket(Ctx& ctx, const std::string& alphas_s,
                const std::string& branches, double q1y, double q1z,
                double fpy, double fpz) {
  std::vector<double> alphas;
  std::istringstream in(alphas_s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    char* end = nullptr;
    double a = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw ConfigError("--alphas wants a comma list of numbers, got '" +
                        alphas_s + "'");
    alphas.push_back(a);
  }
  if (alphas.empty()) throw ConfigError("--alphas list is empty");
  bool plus = branches == "plus" || branches == "both";
  bool minus = branches == "minus" || branches == "both";
  if (!plus && !minus)
    throw ConfigError("--branches wants plus, minus, or both, got '" +
                      branches + "'");

  auto rows = run_bracket(ctx, alphas, plus, minus, SectionPoint(q1y, q1z),
                          SectionPoint(fpy, fpz));

  auto out = open_output(ctx, "bracket.csv");
  out << "alpha,u_plus,u_minus,total\n";
  for (const auto& r : rows)
    out << fmt(r.alpha) << ',' << r.u_plus << ',' << r.u_minus << ','
        << r.total << '\n';
  out.close();
  record(ctx, "bracket.csv");

  for (const auto& r : rows)
    ctx.man.results["crossings@" + fmt_short(r.alpha)] = r.total;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i].total == 0 && rows[i + 1].total > 0) {
      ctx.man.results["bracket_lo"] = rows[i].alpha;
      ctx.man.results["bracket_hi"] = rows[i + 1].alpha;
      break;
    }
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// atlas

int cmd_atlas(Ctx& ctx, const std::string& chart_file, int n_gen,
              double edge_max, double tau, const std::string& mesh_kind) {
  if (!fs::exists(chart_file))
    throw ConfigError("chart file '" + chart_file + "' does not exist");
  Chart chart = load_chart_file(chart_file);
  ParamMesh pm;
  if (mesh_kind == "annulus")
    pm = mesh_annulus(fundamental_inner_radius(chart, tau),
                      ctx.cfg.get_int("mesh.n_r"),
                      ctx.cfg.get_int("mesh.n_theta"));
  else if (mesh_kind == "disk")
    pm = mesh_disk(ctx.cfg.get_int("mesh.n_r"),
                   ctx.cfg.get_int("mesh.n_theta"));
  else
    throw ConfigError("--mesh wants annulus or disk, got '" + mesh_kind +
                      "'");

  SeededMesh lifted = lift_mesh(chart, pm, tau);
  {
    auto out = open_output(ctx, "gen_000.obj");
    write_obj(out, lifted);
    out.close();
    record(ctx, "gen_000.obj");
  }
  bool exhausted = false;
  std::size_t final_vertices = lifted.vertices.size();
  int produced = 0;
  if (n_gen > 0) {
    auto gens = advect(lifted, n_gen, edge_max, chart.params,
                       ctx.cfg.get_double("flow.tol"));
    produced = int(gens.size());
    for (int g = 0; g < produced; ++g) {
      char name[32];
      std::snprintf(name, sizeof name, "gen_%03d.obj", g + 1);
      auto out = open_output(ctx, name);
      write_obj(out, gens[g]);
      out.close();
      record(ctx, name);
    }
    {
      auto out = open_output(ctx, "combined.obj");
      write_obj(out, gens);
      out.close();
      record(ctx, "combined.obj");
    }
    {
      auto out = open_output(ctx, "vertices.csv");
      write_vertices_csv(out, gens.back());
      out.close();
      record(ctx, "vertices.csv");
    }
    exhausted = gens.back().exhausted;
    final_vertices = gens.back().vertices.size();
  }
  ctx.man.results["generations"] = produced;
  ctx.man.results["final_vertices"] = double(final_vertices);
  ctx.man.results["exhausted"] = exhausted ? 1.0 : 0.0;
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// hetero

struct HeteroPipeline {
  ModelParams p;
  Chart cu, cs;
  std::vector<SeededMesh> atlas_u, atlas_s;
  std::vector<HeteroSeed> seeds;
};

HeteroPipeline build_hetero(const Ctx& ctx, double alpha) {
  HeteroPipeline hp;
  hp.p = ctx.cfg.model_params();
  hp.p.alpha = alpha;
  auto eqs = axis_equilibria(hp.p);
  const Equilibrium* up = nullptr;
  const Equilibrium* lo = nullptr;
  for (const auto& e : eqs) {
    if (!up && e.tag == StabilityTag::saddle_focus_2u1s) up = &e;
    if (!lo && e.tag == StabilityTag::saddle_focus_2s1u) lo = &e;
  }
  if (!up || !lo) {
    std::ostringstream os;
    os << "alpha=" << alpha
       << " does not have both saddle foci (need one with an unstable and "
          "one with a stable rotation plane)";
    throw std::invalid_argument(os.str());
  }
  const int N = ctx.cfg.get_int("hetero.chart_order");
  const double eps0 = ctx.cfg.get_double("chart.eps0");
  auto make = [&](const Equilibrium& eq, ManifoldStability stab) {
    Chart probe = solve_homological(eq, hp.p, stab, N, 1.0);
    return solve_homological(eq, hp.p, stab, N, choose_scale(probe, eps0));
  };
  hp.cu = make(*up, ManifoldStability::unstable);
  hp.cs = make(*lo, ManifoldStability::stable);

  const double tau = ctx.cfg.get_double("atlas.tau");
  const double edge = ctx.cfg.get_double("hetero.edge_max");
  const double tol = ctx.cfg.get_double("flow.tol");
  const int n_r = ctx.cfg.get_int("hetero.mesh_n_r");
  const int n_t = ctx.cfg.get_int("hetero.mesh_n_theta");
  SeededMesh mu0 = lift_mesh(
      hp.cu, mesh_annulus(fundamental_inner_radius(hp.cu, tau), n_r, n_t),
      tau);
  SeededMesh ms0 = lift_mesh(
      hp.cs, mesh_annulus(fundamental_inner_radius(hp.cs, tau), n_r, n_t),
      tau);
  // Backward-time growth can genuinely escape to infinity at some
  // parameters; shrink the generation budget until the atlas fits.  The
  // decrement loop is deterministic, so re-runs reproduce the same cap.
  auto grow = [&](const SeededMesh& m0, int want, const char* label) {
    for (int g = want; g > 0; --g) {
      try {
        return advect(m0, g, edge, hp.p, tol);
      } catch (const FlowError&) {
        if (g == 1) throw;
        std::cout << "hetero: " << label << " atlas blew up at " << g
                  << " generations, retrying with " << g - 1 << "\n";
      }
    }
    return std::vector<SeededMesh>{};
  };
  hp.atlas_u = grow(mu0, ctx.cfg.get_int("hetero.gen_u"), "unstable");
  hp.atlas_s = grow(ms0, ctx.cfg.get_int("hetero.gen_s"), "stable");
  hp.seeds = scan_hetero_seeds(hp.atlas_u, hp.atlas_s);
  std::stable_sort(hp.seeds.begin(), hp.seeds.end(),
                   [](const HeteroSeed& a, const HeteroSeed& b) {
                     return a.theta_u < b.theta_u;
                   });
  return hp;
}

void write_seeds_csv(std::ostream& os, const std::vector<HeteroSeed>& seeds) {
  os << "theta_u,sigma1,sigma2,T,x,y,z\n";
  for (const auto& s : seeds)
    os << fmt(s.theta_u) << ',' << fmt(s.sigma_s.x()) << ','
       << fmt(s.sigma_s.y()) << ',' << fmt(s.T) << ',' << fmt(s.point.x())
       << ',' << fmt(s.point.y()) << ',' << fmt(s.point.z()) << '\n';
}

int cmd_hetero(Ctx& ctx, double alpha, bool solve, int max_solves) {
  HeteroPipeline hp = build_hetero(ctx, alpha);
  {
    auto out = open_output(ctx, "seeds.csv");
    write_seeds_csv(out, hp.seeds);
    out.close();
    record(ctx, "seeds.csv");
  }
  ctx.man.results["n_seeds"] = double(hp.seeds.size());
  if (hp.seeds.empty()) {
    std::cout << "hetero: no surface intersections at alpha=" << alpha
              << " (manifolds stay apart)\n";
    return finish(ctx, kExitNegative, "negative");
  }
  if (!solve) return finish(ctx, kExitOk, "ok");

  const double ntol = ctx.cfg.get_double("hetero.newton_tol");
  const int max_deepen = ctx.cfg.get_int("hetero.max_deepen");
  const double tau = ctx.cfg.get_double("atlas.tau");
  std::map<long, ConnectingOrbit> found;  // keyed by rounded exit angle
  const std::size_t stride =
      std::max<std::size_t>(1, hp.seeds.size() / std::size_t(max_solves));
  int attempts = 0;
  for (std::size_t i = 0; i < hp.seeds.size() && attempts < max_solves;
       i += stride) {
    ++attempts;
    const HeteroSeed& base = hp.seeds[i];
    for (int push = 0; push <= max_deepen; ++push) {
      try {
        HeteroSeed s = deepen_seed(base, hp.cs, tau, push);
        ConnectingOrbit orbit = hetero_connect(hp.cu, hp.cs, s.theta_u,
                                               s.sigma_s, s.T, hp.p, ntol);
        double wrapped = std::fmod(orbit.theta_u, kTwoPi);
        if (wrapped < 0) wrapped += kTwoPi;
        found.emplace(std::lround(wrapped * 1e4), std::move(orbit));
        break;
      } catch (const ChartExitError&) {
        continue;  // re-seed deeper in the stable chart and retry
      } catch (const NoConvergence&) {
        continue;
      }
    }
  }
  ctx.man.results["n_connections"] = double(found.size());
  int idx = 0;
  for (const auto& [key, orbit] : found) {
    char name[32];
    std::snprintf(name, sizeof name, "orbit_%02d.csv", idx);
    auto out = open_output(ctx, name);
    write_orbit_csv(out, orbit);
    out.close();
    record(ctx, name);
    std::string suffix = "_" + std::to_string(idx);
    ctx.man.results["theta_u" + suffix] = orbit.theta_u;
    ctx.man.results["T" + suffix] = orbit.T;
    ctx.man.results["residual" + suffix] = orbit.residual;
    ++idx;
  }
  if (found.empty()) {
    std::cout << "hetero: no seed converged (" << attempts << " tried)\n";
    return finish(ctx, kExitNumerical, "failed");
  }
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// repro: the bifurcation pipeline in one run

int cmd_repro(Ctx& ctx) {
  std::vector<std::array<std::string, 3>> summary;
  ModelParams base = ctx.cfg.model_params();

  {  // Fold of the axis equilibria: closed form plus sweep bisection.
    double closed = saddle_node_alpha(base.tau);
    double located = bisect_fold(0.9, 0.96, base);
    ctx.man.results["saddle_node_closed_form"] = closed;
    ctx.man.results["saddle_node_alpha"] = located;
    summary.push_back({"saddle_node_alpha", fmt(located),
                       "axis fold; closed form " + fmt(closed)});
  }
  {  // Torus birth of the primary fixed point.
    TorusBirth tb = locate_neimark_sacker(SectionPoint(0.9, 0.7), 0.69, base,
                                          ctx.cfg.get_double("poincare.tol"));
    ctx.man.results["ns_alpha"] = tb.alpha;
    summary.push_back({"ns_alpha", fmt(tb.alpha),
                       "fixed-point multiplier pair on the unit circle"});
  }
  {  // Crossing brackets: circle breakdown and the chaotic window edge.
    auto rows1 = run_bracket(ctx, {0.8224, 0.8225}, true, false,
                             SectionPoint(0.551099029409, -0.054437241125),
                             SectionPoint(0.95, 0.71));
    auto rows2 = run_bracket(ctx, {0.92, 0.93}, true, true,
                             SectionPoint(0.551099029409, -0.054437241125),
                             SectionPoint(0.95, 0.71));
    for (const auto& r : rows1) {
      ctx.man.results["crossings@" + fmt_short(r.alpha)] = r.total;
      summary.push_back({"crossings@" + fmt_short(r.alpha),
                         std::to_string(r.total),
                         "period-3 saddle curve crossings (u+)"});
    }
    for (const auto& r : rows2) {
      ctx.man.results["crossings@" + fmt_short(r.alpha)] = r.total;
      summary.push_back({"crossings@" + fmt_short(r.alpha),
                         std::to_string(r.total),
                         "period-3 saddle curve crossings (u+ and u-)"});
    }
  }
  {  // Connecting orbits: apart at 0.95, present at 1.1022.
    Ctx sub = ctx;  // reuse config; outputs stay in the repro directory
    sub.cfg.set("hetero.gen_s", "9");
    HeteroPipeline apart = build_hetero(sub, 0.95);
    ctx.man.results["seeds@0.95"] = double(apart.seeds.size());
    summary.push_back({"seeds@0.95", std::to_string(apart.seeds.size()),
                       "surface-intersection seeds (expected 0)"});

    HeteroPipeline close = build_hetero(ctx, 1.1022);
    ctx.man.results["seeds@1.1022"] = double(close.seeds.size());
    std::string detail = "no seed converged";
    if (!close.seeds.empty()) {
      const HeteroSeed& s0 = close.seeds.front();
      ConnectingOrbit orbit =
          hetero_connect(close.cu, close.cs, s0.theta_u, s0.sigma_s, s0.T,
                         close.p, ctx.cfg.get_double("hetero.newton_tol"));
      ctx.man.results["connection_theta_u"] = orbit.theta_u;
      ctx.man.results["connection_T"] = orbit.T;
      ctx.man.results["connection_residual"] = orbit.residual;
      auto out = open_output(ctx, "connection.csv");
      write_orbit_csv(out, orbit);
      out.close();
      record(ctx, "connection.csv");
      detail = "residual " + fmt_short(orbit.residual);
    }
    summary.push_back({"seeds@1.1022", std::to_string(close.seeds.size()),
                       "connecting orbit: " + detail});
  }

  auto out = open_output(ctx, "summary.csv");
  out << "quantity,value,note\n";
  for (const auto& row : summary)
    out << row[0] << ',' << row[1] << ',' << row[2] << '\n';
  out.close();
  record(ctx, "summary.csv");
  return finish(ctx, kExitOk, "ok");
}

// ---------------------------------------------------------------------------
// verify

int run_cli(std::vector<std::string> args);  // forward

int cmd_verify(const std::string& manifest_path, bool rerun) {
  RunManifest m = read_manifest(manifest_path);
  std::string dir = fs::path(manifest_path).parent_path().string();
  int bad = 0;
  for (const auto& o : m.outputs) {
    std::string full = dir.empty() ? o.path : dir + "/" + o.path;
    std::string now;
    try {
      now = file_digest_hex(full);
    } catch (const ConfigError&) {
      std::cout << "verify: MISSING " << o.path << "\n";
      ++bad;
      continue;
    }
    if (now != o.digest) {
      std::cout << "verify: DIGEST MISMATCH " << o.path << " recorded "
                << o.digest << " actual " << now << "\n";
      ++bad;
    }
  }
  if (!rerun) {
    if (bad) return kExitNegative;
    std::cout << "verify: " << m.outputs.size() << " outputs match\n";
    return kExitOk;
  }

  // Re-run the recorded command into a scratch directory and require the
  // same bytes and the same scalars.
  if (m.argv.size() < 2) {
    std::cout << "verify: manifest has no recorded command\n";
    return kExitNegative;
  }
  std::string scratch =
      (fs::temp_directory_path() / ("langford-verify-" +
                                    std::to_string(::getpid())))
          .string();
  std::vector<std::string> args;
  args.push_back(m.argv[0]);
  for (std::size_t i = 1; i < m.argv.size(); ++i) {
    if (m.argv[i] == "--out-dir") {
      ++i;  // drop the recorded directory
      continue;
    }
    args.push_back(m.argv[i]);
  }
  args.push_back("--out-dir");
  args.push_back(scratch);

  int rc = run_cli(args);
  int expected_rc = kExitOk;
  if (m.status == "negative") expected_rc = kExitNegative;
  if (m.status == "failed") expected_rc = kExitNumerical;
  if (rc != expected_rc) {
    std::cout << "verify: re-run exited " << rc << ", expected "
              << expected_rc << "\n";
    fs::remove_all(scratch);
    return kExitNegative;
  }
  RunManifest m2 = read_manifest(scratch + "/manifest.json");
  std::map<std::string, std::string> fresh;
  for (const auto& o : m2.outputs) fresh[o.path] = o.digest;
  for (const auto& o : m.outputs) {
    auto it = fresh.find(o.path);
    if (it == fresh.end()) {
      std::cout << "verify: re-run did not produce " << o.path << "\n";
      ++bad;
    } else if (it->second != o.digest) {
      std::cout << "verify: re-run digest differs for " << o.path << "\n";
      ++bad;
    }
  }
  for (const auto& [key, value] : m.results) {
    auto it = m2.results.find(key);
    if (it == m2.results.end()) {
      std::cout << "verify: re-run missing result '" << key << "'\n";
      ++bad;
    } else if (it->second != value) {
      std::cout << "verify: result '" << key << "' was " << fmt(value)
                << ", re-run got " << fmt(it->second) << "\n";
      ++bad;
    }
  }
  fs::remove_all(scratch);
  if (bad) return kExitNegative;
  std::cout << "verify: re-run reproduced " << m.outputs.size()
            << " outputs and " << m.results.size() << " scalars\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int run_cli(std::vector<std::string> args) {
  CLI::App app{"cusp-Hopf bifurcation toolkit"};
  app.require_subcommand(1);

  Ctx ctx;
  ctx.man.argv = args;

  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
  std::string out_dir;
  app.add_option("--config", config_files, "layered config file(s)")
      ->expected(-1);
  app.add_option("--set", overrides, "config override key=value")
      ->expected(-1);
  app.add_option("--out-dir", out_dir, "run output directory");

  std::function<int()> runner;

  // equilibria ---------------------------------------------------------
  auto* eq = app.add_subcommand("equilibria", "axis equilibria and spectra");
  eq->fallthrough();
  {
    auto alpha = std::make_shared<double>(0.0);
    auto sweep = std::make_shared<std::string>();
    eq->add_option("--alpha", *alpha, "single parameter value");
    eq->add_option("--sweep", *sweep, "grid lo:hi:step");
    eq->callback([&, alpha, sweep] {
      if (out_dir.empty()) out_dir = "out/equilibria";
      runner = [&, alpha, sweep] {
        return cmd_equilibria(ctx, *alpha, *sweep);
      };
    });
  }

  // chart ----------------------------------------------------------------
  auto* ch = app.add_subcommand("chart", "solve a manifold chart");
  ch->fallthrough();
  {
    auto point = std::make_shared<std::string>("p0");
    auto stab = std::make_shared<std::string>("unstable");
    auto alpha = std::make_shared<double>(0.0);
    auto N = std::make_shared<int>(-1);
    auto eps0 = std::make_shared<double>(-1.0);
    auto scale = std::make_shared<double>(-1.0);
    ch->add_option("--point", *point, "equilibrium id: p0, p1, p2");
    ch->add_option("--stability", *stab, "stable or unstable");
    ch->add_option("--alpha", *alpha, "parameter value");
    ch->add_option("--N", *N, "polynomial order");
    ch->add_option("--eps0", *eps0, "target boundary coefficient size");
    ch->add_option("--scale", *scale,
                   "explicit eigenvector scale (skips auto-rescale)");
    ch->callback([&, point, stab, alpha, N, eps0, scale] {
      if (out_dir.empty()) out_dir = "out/chart";
      runner = [&, point, stab, alpha, N, eps0, scale] {
        int n = *N > 0 ? *N : ctx.cfg.get_int("chart.order");
        double e0 = *eps0 > 0 ? *eps0 : ctx.cfg.get_double("chart.eps0");
        return cmd_chart(ctx, *point, *stab, *alpha, n, e0, *scale);
      };
    });
  }

  // poincare ---------------------------------------------------------------
  auto* po = app.add_subcommand("poincare", "return-map experiments");
  po->require_subcommand(1);
  po->fallthrough();
  {
    auto* fp = po->add_subcommand("fixed-point", "solve a section fixed point");
    fp->fallthrough();
    auto a1 = std::make_shared<double>(0.65);
    auto y1 = std::make_shared<double>(0.9);
    auto z1 = std::make_shared<double>(0.7);
    fp->add_option("--alpha", *a1, "parameter value");
    fp->add_option("--y", *y1, "seed y");
    fp->add_option("--z", *z1, "seed z");
    fp->callback([&, a1, y1, z1] {
      if (out_dir.empty()) out_dir = "out/poincare-fixed-point";
      runner = [&, a1, y1, z1] { return cmd_cycle(ctx, *a1, *y1, *z1, 1); };
    });

    auto* cy = po->add_subcommand("cycle", "solve a k-cycle of the return map");
    cy->fallthrough();
    auto a2 = std::make_shared<double>(0.82);
    auto y2 = std::make_shared<double>(0.55);
    auto z2 = std::make_shared<double>(-0.05);
    auto k2 = std::make_shared<int>(3);
    cy->add_option("--alpha", *a2, "parameter value");
    cy->add_option("--y", *y2, "seed y");
    cy->add_option("--z", *z2, "seed z");
    cy->add_option("--k", *k2, "cycle length");
    cy->callback([&, a2, y2, z2, k2] {
      if (out_dir.empty()) out_dir = "out/poincare-cycle";
      runner = [&, a2, y2, z2, k2] {
        return cmd_cycle(ctx, *a2, *y2, *z2, *k2);
      };
    });

    auto* ns = po->add_subcommand("ns-locate",
                                  "parameter where the multiplier pair "
                                  "crosses the unit circle");
    ns->fallthrough();
    auto a3 = std::make_shared<double>(0.69);
    auto y3 = std::make_shared<double>(0.9);
    auto z3 = std::make_shared<double>(0.7);
    ns->add_option("--alpha0", *a3, "starting parameter");
    ns->add_option("--y", *y3, "seed y");
    ns->add_option("--z", *z3, "seed z");
    ns->callback([&, a3, y3, z3] {
      if (out_dir.empty()) out_dir = "out/poincare-ns";
      runner = [&, a3, y3, z3] {
        return cmd_ns_locate(ctx, *a3, *y3, *z3);
      };
    });

    auto* ci = po->add_subcommand("circle", "sample the invariant circle");
    ci->fallthrough();
    auto a4 = std::make_shared<double>(0.75);
    auto torus = std::make_shared<std::string>();
    ci->add_option("--alpha", *a4, "parameter value");
    ci->add_option("--torus-obj", *torus,
                   "also sweep the circle into a 3D tube mesh (OBJ name)");
    ci->callback([&, a4, torus] {
      if (out_dir.empty()) out_dir = "out/poincare-circle";
      runner = [&, a4, torus] { return cmd_circle(ctx, *a4, *torus); };
    });

    auto* m1 = po->add_subcommand("manifold1d",
                                  "grow 1D saddle-cycle manifold branches");
    m1->fallthrough();
    auto a5 = std::make_shared<double>(0.8224);
    auto y5 = std::make_shared<double>(0.0);
    auto z5 = std::make_shared<double>(0.0);
    auto k5 = std::make_shared<int>(3);
    auto kind = std::make_shared<std::string>("unstable");
    auto branch = std::make_shared<std::string>("both");
    m1->add_option("--alpha", *a5, "parameter value");
    m1->add_option("--y", *y5, "saddle seed y")->required();
    m1->add_option("--z", *z5, "saddle seed z")->required();
    m1->add_option("--k", *k5, "cycle length");
    m1->add_option("--kind", *kind, "stable or unstable");
    m1->add_option("--branch", *branch, "plus, minus, or both");
    m1->callback([&, a5, y5, z5, k5, kind, branch] {
      if (out_dir.empty()) out_dir = "out/poincare-manifold1d";
      runner = [&, a5, y5, z5, k5, kind, branch] {
        return cmd_manifold1d(ctx, *a5, *y5, *z5, *k5, *kind, *branch);
      };
    });

    auto* br = po->add_subcommand(
        "bracket", "crossing counts of the period-3 saddle curves");
    br->fallthrough();
    auto alphas = std::make_shared<std::string>("0.8224,0.8225");
    auto branches = std::make_shared<std::string>("plus");
    auto q1y = std::make_shared<double>(0.551099029409);
    auto q1z = std::make_shared<double>(-0.054437241125);
    auto fpy = std::make_shared<double>(0.95);
    auto fpz = std::make_shared<double>(0.71);
    br->add_option("--alphas", *alphas, "comma list of parameters");
    br->add_option("--branches", *branches,
                   "unstable branches to trace: plus, minus, both");
    br->add_option("--q1-y", *q1y, "period-3 attractor seed y (at 0.82)");
    br->add_option("--q1-z", *q1z, "period-3 attractor seed z (at 0.82)");
    br->add_option("--fp-y", *fpy, "interior fixed point seed y (at 0.82)");
    br->add_option("--fp-z", *fpz, "interior fixed point seed z (at 0.82)");
    br->callback([&, alphas, branches, q1y, q1z, fpy, fpz] {
      if (out_dir.empty()) out_dir = "out/poincare-bracket";
      runner = [&, alphas, branches, q1y, q1z, fpy, fpz] {
        return cmd_bracket(ctx, *alphas, *branches, *q1y, *q1z, *fpy, *fpz);
      };
    });
  }

  // atlas --------------------------------------------------------------
  auto* at = app.add_subcommand("atlas", "grow a 2D manifold atlas");
  at->fallthrough();
  {
    auto chart_file = std::make_shared<std::string>();
    auto n_gen = std::make_shared<int>(-1);
    auto edge = std::make_shared<double>(-1.0);
    auto tau = std::make_shared<double>(-1.0);
    auto mesh = std::make_shared<std::string>("annulus");
    at->add_option("--chart-file", *chart_file, "chart written by `chart`")
        ->required();
    at->add_option("--n-gen", *n_gen, "generations to advect (0 = lift only)");
    at->add_option("--edge-max", *edge, "refinement edge cap");
    at->add_option("--tau", *tau, "per-generation advection time");
    at->add_option("--mesh", *mesh, "annulus or disk");
    at->callback([&, chart_file, n_gen, edge, tau, mesh] {
      if (out_dir.empty()) out_dir = "out/atlas";
      runner = [&, chart_file, n_gen, edge, tau, mesh] {
        int n = *n_gen >= 0 ? *n_gen : ctx.cfg.get_int("atlas.n_gen");
        double e = *edge > 0 ? *edge : ctx.cfg.get_double("atlas.edge_max");
        double t = *tau > 0 ? *tau : ctx.cfg.get_double("atlas.tau");
        return cmd_atlas(ctx, *chart_file, n, e, t, *mesh);
      };
    });
  }

  // hetero ---------------------------------------------------------------
  auto* he = app.add_subcommand("hetero", "connecting-orbit experiments");
  he->require_subcommand(1);
  he->fallthrough();
  {
    auto* sc = he->add_subcommand("scan",
                                  "intersect the two manifold atlases");
    sc->fallthrough();
    auto a1 = std::make_shared<double>(1.1022);
    sc->add_option("--alpha", *a1, "parameter value");
    sc->callback([&, a1] {
      if (out_dir.empty()) out_dir = "out/hetero-scan";
      runner = [&, a1] { return cmd_hetero(ctx, *a1, false, 0); };
    });

    auto* so = he->add_subcommand("solve",
                                  "polish scan seeds into connecting orbits");
    so->fallthrough();
    auto a2 = std::make_shared<double>(1.1022);
    auto max_solves = std::make_shared<int>(40);
    so->add_option("--alpha", *a2, "parameter value");
    so->add_option("--max-solves", *max_solves, "seed attempts budget");
    so->callback([&, a2, max_solves] {
      if (out_dir.empty()) out_dir = "out/hetero-solve";
      runner = [&, a2, max_solves] {
        return cmd_hetero(ctx, *a2, true, *max_solves);
      };
    });
  }

  // repro ----------------------------------------------------------------
  auto* re = app.add_subcommand("repro", "run the bifurcation pipeline");
  re->fallthrough();
  re->callback([&] {
    if (out_dir.empty()) out_dir = "out/repro";
    runner = [&] { return cmd_repro(ctx); };
  });

  // verify ---------------------------------------------------------------
  auto* ve = app.add_subcommand("verify", "check a run's manifest");
  ve->fallthrough();
  {
    auto manifest = std::make_shared<std::string>();
    auto rerun = std::make_shared<bool>(false);
    ve->add_option("--manifest", *manifest, "manifest.json to verify")
        ->required();
    ve->add_flag("--rerun", *rerun,
                 "re-run the recorded command and compare outputs");
    ve->callback([&, manifest, rerun] {
      runner = [&, manifest, rerun] { return cmd_verify(*manifest, *rerun); };
    });
  }

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;  // help/version exit cleanly
  }

  try {
    for (const auto& f : config_files) ctx.cfg.load_file(f);
    for (const auto& o : overrides) ctx.cfg.set(o);
    ctx.out_dir = out_dir;
    return runner();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(std::move(args));
}
