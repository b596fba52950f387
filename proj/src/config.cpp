#include "langford/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace langford {

namespace {

enum class KeyKind { real, integer };

struct KeySpec {
  const char* key;
  const char* def;
  KeyKind kind;
  double lo;
  double hi;
};

// The registry: every configurable knob, its default, and its legal range.
// model.* defaults are the reference parameter set; the others are the
// working tolerances and resolutions used throughout the experiments.
constexpr KeySpec kRegistry[] = {
    {"model.alpha", "0.0", KeyKind::real, -10.0, 10.0},
    {"model.eps", "0.25", KeyKind::real, -10.0, 10.0},
    {"model.tau", "0.6", KeyKind::real, -10.0, 10.0},
    {"model.delta", "3.5", KeyKind::real, -100.0, 100.0},
    {"model.beta", "0.7", KeyKind::real, -10.0, 10.0},
    {"model.zeta", "0.1", KeyKind::real, -10.0, 10.0},

    {"flow.tol", "1e-10", KeyKind::real, 1e-14, 1e-3},

    {"chart.order", "20", KeyKind::integer, 1, 64},
    {"chart.eps0", "1e-12", KeyKind::real, 1e-16, 1e-1},

    {"mesh.n_r", "10", KeyKind::integer, 1, 10000},
    {"mesh.n_theta", "50", KeyKind::integer, 8, 100000},

    {"atlas.n_gen", "15", KeyKind::integer, 0, 500},
    {"atlas.edge_max", "0.05", KeyKind::real, 1e-6, 10.0},
    {"atlas.tau", "0.25", KeyKind::real, 1e-6, 10.0},

    {"poincare.tol", "1e-12", KeyKind::real, 1e-14, 1e-6},
    {"poincare.circle_transient", "400", KeyKind::integer, 0, 1000000},
    {"poincare.circle_keep", "400", KeyKind::integer, 10, 1000000},

    {"manifold1d.h", "1e-5", KeyKind::real, 1e-10, 1e-1},
    {"manifold1d.delta_max", "5e-3", KeyKind::real, 1e-8, 1.0},
    {"manifold1d.arclength_max", "10.0", KeyKind::real, 1e-3, 1e4},
    {"manifold1d.max_generations", "80", KeyKind::integer, 1, 100000},
    {"manifold1d.min_increment", "1e-6", KeyKind::real, 0.0, 1.0},
    {"manifold1d.max_points", "1000000", KeyKind::integer, 100, 100000000},
    {"manifold1d.tol", "1e-10", KeyKind::real, 1e-14, 1e-3},

    // The crossing-count experiment pins tighter growth budgets: the saddle
    // curves are traced to fixed arclengths so counts are comparable across
    // alpha.
    {"bracket.arclength_u", "70.0", KeyKind::real, 1e-3, 1e4},
    {"bracket.arclength_s", "30.0", KeyKind::real, 1e-3, 1e4},
    {"bracket.max_generations", "400", KeyKind::integer, 1, 100000},
    {"bracket.min_increment", "1e-7", KeyKind::real, 0.0, 1.0},
    {"bracket.max_points", "500000", KeyKind::integer, 100, 100000000},

    {"hetero.gen_u", "14", KeyKind::integer, 1, 500},
    {"hetero.gen_s", "13", KeyKind::integer, 1, 500},
    {"hetero.edge_max", "0.08", KeyKind::real, 1e-6, 10.0},
    {"hetero.mesh_n_r", "6", KeyKind::integer, 1, 10000},
    {"hetero.mesh_n_theta", "40", KeyKind::integer, 8, 100000},
    {"hetero.chart_order", "12", KeyKind::integer, 4, 64},
    {"hetero.newton_tol", "1e-10", KeyKind::real, 1e-14, 1e-3},
    {"hetero.max_deepen", "6", KeyKind::integer, 0, 64},
};

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : kRegistry)
    if (key == s.key) return &s;
  return nullptr;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

double parse_number(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE)
    throw ConfigError("config value for '" + key + "' is not a number: '" +
                      value + "'");
  return v;
}

void validate(const std::string& key, const std::string& value,
              const std::string& origin) {
  const KeySpec* spec = find_spec(key);
  if (!spec)
    throw ConfigError("unknown config key '" + key + "' (" + origin + ")");
  double v = parse_number(key, value);
  if (spec->kind == KeyKind::integer) {
    double r = std::floor(v);
    if (r != v)
      throw ConfigError("config key '" + key + "' needs an integer, got '" +
                        value + "' (" + origin + ")");
  }
  if (v < spec->lo || v > spec->hi) {
    std::ostringstream os;
    os << "config key '" << key << "' = " << value << " outside ["
       << spec->lo << ", " << spec->hi << "] (" << origin << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (const auto& s : kRegistry) values_[s.key] = s.def;
}

void ExperimentConfig::load_text(std::string_view text,
                                 const std::string& origin) {
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("unterminated section header (" + where + ")");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("empty section name (" + where + ")");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value (" + where + ")");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("empty key or value (" + where + ")");
    if (!section.empty()) key = section + "." + key;
    validate(key, value, where);
    values_[key] = value;
  }
}

void ExperimentConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream body;
  body << in.rdbuf();
  load_text(body.str(), path);
}

void ExperimentConfig::set(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like section.key=value, got '" +
                      assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void ExperimentConfig::set(const std::string& dotted_key,
                           const std::string& value) {
  validate(dotted_key, value, "command line");
  values_[dotted_key] = value;
}

double ExperimentConfig::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("config key '" + key + "' is not registered");
  return parse_number(key, it->second);
}

int ExperimentConfig::get_int(const std::string& key) const {
  return static_cast<int>(get_double(key));
}

bool ExperimentConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

ModelParams ExperimentConfig::model_params() const {
  ModelParams p;
  p.alpha = get_double("model.alpha");
  p.eps = get_double("model.eps");
  p.tau = get_double("model.tau");
  p.delta = get_double("model.delta");
  p.beta = get_double("model.beta");
  p.zeta = get_double("model.zeta");
  return p;
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

namespace {

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

}  // namespace

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file for digest: '" + path + "'");
  std::ostringstream body;
  body << in.rdbuf();
  return hex16(fnv1a64(body.str()));
}

void record_output(RunManifest& m, const std::string& run_dir,
                   const std::string& rel_path) {
  std::string full = run_dir.empty() ? rel_path : run_dir + "/" + rel_path;
  std::ifstream in(full, std::ios::binary);
  if (!in) throw ConfigError("missing output file: '" + full + "'");
  std::ostringstream body;
  body << in.rdbuf();
  OutputRecord rec;
  rec.path = rel_path;
  rec.digest = hex16(fnv1a64(body.str()));
  rec.bytes = body.str().size();
  m.outputs.push_back(std::move(rec));
}

void write_manifest(const std::string& path, const RunManifest& m) {
  nlohmann::json j;
  j["argv"] = m.argv;
  j["version"] = m.version;
  j["status"] = m.status;
  j["wall_seconds"] = m.wall_seconds;
  j["config"] = m.config;
  j["outputs"] = nlohmann::json::array();
  for (const auto& o : m.outputs)
    j["outputs"].push_back(
        {{"path", o.path}, {"fnv1a64", o.digest}, {"bytes", o.bytes}});
  j["results"] = m.results;

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest '" + path + "'");
  out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed manifest '" + path + "': " + e.what());
  }
  RunManifest m;
  try {
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.version = j.at("version").get<std::string>();
    m.status = j.at("status").get<std::string>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    m.config =
        j.at("config").get<std::map<std::string, std::string>>();
    for (const auto& o : j.at("outputs")) {
      OutputRecord rec;
      rec.path = o.at("path").get<std::string>();
      rec.digest = o.at("fnv1a64").get<std::string>();
      rec.bytes = o.at("bytes").get<std::uint64_t>();
      m.outputs.push_back(std::move(rec));
    }
    m.results = j.at("results").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + path + "' missing fields: " + e.what());
  }
  return m;
}

}  // namespace langford
