#pragma once

// Run configuration and run manifests.
//
// Configuration is a single INI-flavoured text file ("[section]" headers,
// "key = value" lines, '#' comments) flattened to dotted keys, layered in
// order: built-in defaults, then any loaded files, then individual command
// line overrides.  Every key is declared in a registry with a documented
// range; unknown keys and out-of-range values are rejected at load time so a
// typo cannot silently fall back to a default.
//
// A manifest records what a command run produced: the argument vector, the
// effective configuration, wall time, every output file with a content
// digest, and the run's key scalar results.  Manifests are written after all
// other outputs; a run directory without one is a failed run.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "langford/model.hpp"

namespace langford {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ExperimentConfig {
 public:
  ExperimentConfig();  // every registered key at its default

  // Layer a file (or raw text; origin names it in errors) on top of the
  // current values.  Unknown keys, malformed lines, and range violations
  // throw ConfigError.
  void load_file(const std::string& path);
  void load_text(std::string_view text, const std::string& origin);

  // One override, "section.key=value" or separate key/value.  Same
  // validation as files.
  void set(const std::string& assignment);
  void set(const std::string& dotted_key, const std::string& value);

  double get_double(const std::string& key) const;
  int get_int(const std::string& key) const;

  bool has(const std::string& key) const;

  // Model parameters assembled from the model.* keys.
  ModelParams model_params() const;

  // Full snapshot (dotted key -> value as text) for manifests.
  const std::map<std::string, std::string>& entries() const {
    return values_;
  }

 private:
  std::map<std::string, std::string> values_;
};

// 64-bit FNV-1a over a byte range; the manifest's file digest.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64(std::string_view s);

// Hex form ("0123456789abcdef"-alphabet, 16 digits) of a file's digest.
// Throws ConfigError when the file cannot be read.
std::string file_digest_hex(const std::string& path);

struct OutputRecord {
  std::string path;    // as written, relative to the run directory
  std::string digest;  // fnv1a64 hex of the file bytes
  std::uint64_t bytes = 0;
};

struct RunManifest {
  std::vector<std::string> argv;  // the command line as invoked
  std::string version;
  // "ok", "negative" (valid empty result, e.g. an intersection scan that
  // finds nothing), or "failed" (run completed but its solver did not).
  std::string status = "ok";
  double wall_seconds = 0.0;
  std::map<std::string, std::string> config;  // effective snapshot
  std::vector<OutputRecord> outputs;
  std::map<std::string, double> results;  // named scalar findings
};

// Digest the named file (resolved against run_dir) and append its record.
void record_output(RunManifest& m, const std::string& run_dir,
                   const std::string& rel_path);

// Serialize / parse the manifest JSON.  write_manifest is the last thing a
// run does.  read_manifest throws ConfigError on malformed input.
void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace langford
