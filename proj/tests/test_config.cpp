// Configuration parsing/validation, digests, run manifests, and chart
// persistence.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "langford/chart.hpp"
#include "langford/config.hpp"
#include "langford/model.hpp"

using namespace langford;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "langford-config-tests";
  fs::create_directories(dir);
  return dir / name;
}

Chart sample_chart() {
  ModelParams p;  // alpha = 0
  auto eqs = axis_equilibria(p);
  REQUIRE(!eqs.empty());
  Chart probe =
      solve_homological(eqs[0], p, ManifoldStability::unstable, 10, 1.0);
  return solve_homological(eqs[0], p, ManifoldStability::unstable, 10,
                           choose_scale(probe, 1e-12));
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("defaults mirror the model struct") {
  ExperimentConfig cfg;
  ModelParams def;
  ModelParams got = cfg.model_params();
  CHECK(got.alpha == def.alpha);
  CHECK(got.eps == def.eps);
  CHECK(got.tau == def.tau);
  CHECK(got.delta == def.delta);
  CHECK(got.beta == def.beta);
  CHECK(got.zeta == def.zeta);
  CHECK(cfg.get_double("flow.tol") == 1e-10);
  CHECK(cfg.get_int("atlas.n_gen") == 15);
  CHECK(cfg.get_int("chart.order") == 20);
  CHECK(cfg.get_double("hetero.newton_tol") == 1e-10);
  CHECK(cfg.has("mesh.n_theta"));
  CHECK(!cfg.has("mesh.bogus"));
}

TEST_CASE("ini text layers over defaults") {
  ExperimentConfig cfg;
  cfg.load_text("# comment line\n"
                "[model]\n"
                "alpha = 0.95   # inline comment\n"
                "\n"
                "[atlas]\n"
                "n_gen = 7\n",
                "inline.ini");
  CHECK(cfg.model_params().alpha == 0.95);
  CHECK(cfg.get_int("atlas.n_gen") == 7);
  // untouched keys keep their defaults
  CHECK(cfg.get_double("model.tau") == 0.6);

  // a later layer wins
  cfg.load_text("[model]\nalpha = 1.1022\n", "second.ini");
  CHECK(cfg.model_params().alpha == 1.1022);

  // and a direct override wins over both
  cfg.set("model.alpha=0.5");
  CHECK(cfg.model_params().alpha == 0.5);
}

TEST_CASE("file loading round-trips through disk") {
  fs::path ini = scratch_file("layer.ini");
  {
    std::ofstream out(ini);
    out << "[poincare]\ntol = 1e-13\ncircle_keep = 123\n";
  }
  ExperimentConfig cfg;
  cfg.load_file(ini.string());
  CHECK(cfg.get_double("poincare.tol") == 1e-13);
  CHECK(cfg.get_int("poincare.circle_keep") == 123);
  CHECK_THROWS_AS(cfg.load_file((ini.parent_path() / "missing.ini").string()),
                  ConfigError);
}

TEST_CASE("rejects unknown keys, bad numbers, bad ranges") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(cfg.set("model.gamma=1"), ConfigError);
  CHECK_THROWS_AS(cfg.set("no_equals_sign"), ConfigError);
  CHECK_THROWS_AS(cfg.set("model.alpha=banana"), ConfigError);
  CHECK_THROWS_AS(cfg.set("model.alpha=1.5extra"), ConfigError);
  CHECK_THROWS_AS(cfg.set("atlas.n_gen=2.5"), ConfigError);   // integer key
  CHECK_THROWS_AS(cfg.set("chart.order=0"), ConfigError);     // below range
  CHECK_THROWS_AS(cfg.set("chart.order=65"), ConfigError);    // above range
  CHECK_THROWS_AS(cfg.set("flow.tol=1"), ConfigError);        // above range
  CHECK_THROWS_AS(cfg.get_double("nope.nothing"), ConfigError);
  // a failed set leaves the old value in place
  CHECK(cfg.get_int("chart.order") == 20);
}

TEST_CASE("parse errors carry the origin and line number") {
  ExperimentConfig cfg;
  try {
    cfg.load_text("[model]\nalpha = 0.1\nwhat is this\n", "bad.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("bad.ini:3") != std::string::npos);
  }
  try {
    cfg.load_text("[nosuchsection]\nkey = 1\n", "sec.ini");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("sec.ini:2") != std::string::npos);
  }
}

TEST_CASE("entries snapshot reflects overrides and covers every key") {
  ExperimentConfig cfg;
  auto before = cfg.entries();
  cfg.set("mesh.n_r", "12");
  auto after = cfg.entries();
  CHECK(after.size() == before.size());  // no key invented
  CHECK(after.at("mesh.n_r") == "12");
  CHECK(before.at("mesh.n_r") != "12");
  // every entry is itself loadable (snapshot is a valid layer)
  ExperimentConfig copy;
  for (const auto& [k, v] : after) copy.set(k, v);
  CHECK(copy.get_int("mesh.n_r") == 12);
}

TEST_CASE("fnv1a64 matches the reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(fnv1a64("alpha,z\n0.5,1.25\n") == 0x77f7ccfdee09afc6ull);
  const char bytes[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  CHECK(fnv1a64(bytes, sizeof bytes) == 0x85944171f73967e8ull);
}

TEST_CASE("file digest hex") {
  fs::path f = scratch_file("digest.bin");
  {
    std::ofstream out(f, std::ios::binary);
    out << "foobar";
  }
  CHECK(file_digest_hex(f.string()) == "85944171f73967e8");
  CHECK_THROWS_AS(file_digest_hex((f.parent_path() / "nope.bin").string()),
                  ConfigError);
}

TEST_CASE("record_output digests relative to the run directory") {
  fs::path dir = scratch_file("run1");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "data.csv", std::ios::binary);
    out << "alpha,z\n0.5,1.25\n";
  }
  RunManifest m;
  record_output(m, dir.string(), "data.csv");
  REQUIRE(m.outputs.size() == 1);
  CHECK(m.outputs[0].path == "data.csv");
  CHECK(m.outputs[0].digest == "77f7ccfdee09afc6");
  CHECK(m.outputs[0].bytes == 17);
  CHECK_THROWS_AS(record_output(m, dir.string(), "missing.csv"), ConfigError);
}

TEST_CASE("manifest json round-trip is exact") {
  RunManifest m;
  m.argv = {"langford", "equilibria", "--alpha", "0.95"};
  m.version = "1.0.0";
  m.status = "negative";
  m.wall_seconds = 1.25;
  m.config["model.alpha"] = "0.95";
  m.config["flow.tol"] = "1e-10";
  m.outputs.push_back({"equilibria.csv", "85944171f73967e8", 42});
  m.results["saddle_node_alpha"] = 0.9321697517861689;
  m.results["tiny"] = 3.5039146978029803e-15;
  m.results["negative_value"] = -2.614268294480978;

  fs::path f = scratch_file("manifest.json");
  write_manifest(f.string(), m);
  RunManifest r = read_manifest(f.string());
  CHECK(r.argv == m.argv);
  CHECK(r.version == m.version);
  CHECK(r.status == m.status);
  CHECK(r.wall_seconds == m.wall_seconds);
  CHECK(r.config == m.config);
  REQUIRE(r.outputs.size() == 1);
  CHECK(r.outputs[0].path == m.outputs[0].path);
  CHECK(r.outputs[0].digest == m.outputs[0].digest);
  CHECK(r.outputs[0].bytes == m.outputs[0].bytes);
  REQUIRE(r.results.size() == 3);
  // bit-exact double round-trip through the JSON text
  CHECK(r.results.at("saddle_node_alpha") == m.results.at("saddle_node_alpha"));
  CHECK(r.results.at("tiny") == m.results.at("tiny"));
  CHECK(r.results.at("negative_value") == m.results.at("negative_value"));

  CHECK_THROWS_AS(read_manifest((f.parent_path() / "nope.json").string()),
                  ConfigError);
  fs::path bad = scratch_file("bad.json");
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  CHECK_THROWS_AS(read_manifest(bad.string()), ConfigError);
}

}  // TEST_SUITE(config)

TEST_SUITE("chart_io") {

TEST_CASE("file round-trip is bitwise exact") {
  Chart c = sample_chart();
  fs::path f = scratch_file("chart.txt");
  save_chart_file(f.string(), c);
  Chart r = load_chart_file(f.string());

  CHECK(r.order == c.order);
  CHECK(r.stability == c.stability);
  CHECK(r.base.point.x() == c.base.point.x());
  CHECK(r.base.point.y() == c.base.point.y());
  CHECK(r.base.point.z() == c.base.point.z());
  CHECK(r.base.lambda_pair == c.base.lambda_pair);
  CHECK(r.base.lambda_real == c.base.lambda_real);
  CHECK(r.base.tag == c.base.tag);
  CHECK(r.params.alpha == c.params.alpha);
  CHECK(r.params.eps == c.params.eps);
  CHECK(r.params.tau == c.params.tau);
  CHECK(r.params.delta == c.params.delta);
  CHECK(r.params.beta == c.params.beta);
  CHECK(r.params.zeta == c.params.zeta);
  CHECK(r.lambda == c.lambda);
  CHECK(r.scaling.s1 == c.scaling.s1);
  CHECK(r.scaling.C == c.scaling.C);
  CHECK(r.scaling.R1 == c.scaling.R1);
  for (int comp = 0; comp < 3; ++comp)
    for (int m = 0; m <= c.order; ++m)
      for (int n = 0; m + n <= c.order; ++n) {
        CAPTURE(comp);
        CAPTURE(m);
        CAPTURE(n);
        CHECK(r.components[comp].at(m, n) == c.components[comp].at(m, n));
      }

  // a second save of the loaded chart reproduces the file byte for byte
  std::ostringstream again;
  save_chart(again, r);
  std::ifstream orig(f);
  std::ostringstream first;
  first << orig.rdbuf();
  CHECK(again.str() == first.str());
}

TEST_CASE("round-trip preserves evaluation exactly") {
  Chart c = sample_chart();
  fs::path f = scratch_file("chart_eval.txt");
  save_chart_file(f.string(), c);
  Chart r = load_chart_file(f.string());
  for (double th = 0.0; th < 6.0; th += 0.7) {
    Eigen::Vector3d a = eval_real(c, 0.8 * std::cos(th), 0.8 * std::sin(th));
    Eigen::Vector3d b = eval_real(r, 0.8 * std::cos(th), 0.8 * std::sin(th));
    CHECK(a.x() == b.x());
    CHECK(a.y() == b.y());
    CHECK(a.z() == b.z());
  }
}

TEST_CASE("rejects malformed input") {
  Chart c = sample_chart();
  std::ostringstream os;
  save_chart(os, c);
  const std::string good = os.str();

  {
    // drop one header key
    std::string cut = good;
    auto pos = cut.find("order=");
    REQUIRE(pos != std::string::npos);
    cut.erase(pos, cut.find('\n', pos) - pos + 1);
    std::istringstream is(cut);
    CHECK_THROWS_AS(load_chart(is), std::invalid_argument);
  }
  {
    // truncate the final coefficient table
    std::string cut = good.substr(0, good.rfind('\n', good.size() - 2) + 1);
    std::istringstream is(cut);
    CHECK_THROWS_AS(load_chart(is), std::invalid_argument);
  }
  {
    std::string bad = good;
    auto pos = bad.find("base=");
    REQUIRE(pos != std::string::npos);
    bad.replace(pos, 5, "base=oops,");
    std::istringstream is(bad);
    CHECK_THROWS_AS(load_chart(is), std::invalid_argument);
  }
  CHECK_THROWS_AS(load_chart_file("/nonexistent/chart.txt"),
                  std::invalid_argument);
}

}  // TEST_SUITE(chart_io)
