#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coalflow/errors.hpp"

namespace coalflow {

// SHA-256 digest, lowercase hex.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

// Structured key-value config text: `key = value` lines, '#' comments.
// Every file must declare `schema = 1`; unknown keys are rejected against the
// schema the caller supplies (typo tolerance is how reproducibility dies).
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_text(const std::string& text,
                                   const std::string& origin = "<string>");

  // Throws ConfigError naming the offending line for any key outside
  // `allowed` (schema is always allowed).
  void require_keys(const std::vector<std::string>& allowed) const;

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  // comma-separated numbers
  std::vector<double> get_list(const std::string& key,
                               const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> kv_;
  std::map<std::string, int> lines_;
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const;
};

// Provenance record for a CLI run.  Replaying the manifest must reproduce
// every listed output digest bit-for-bit.
struct RunManifest {
  std::string artifact_version;
  std::string command;
  std::map<std::string, std::string> parameters;  // fully resolved config
  std::uint64_t master_seed = 0;
  std::string stream_rule;
  std::string timestamp;  // informational; not part of replay comparison
  std::vector<std::pair<std::string, std::string>> outputs;  // (file, sha256)

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);

  void add_output(const std::string& out_dir, const std::string& filename);
  void write(const std::string& out_dir) const;  // manifest.json
  static RunManifest load(const std::string& path);
};

inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr const char* kStreamRule =
    "stream_id = mix64(mix64(master ^ fnv1a64(tag)) + replica)";

// Writes a file atomically enough for our purposes and returns its digest.
std::string write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace coalflow
