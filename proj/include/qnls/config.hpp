#pragma once

// Flat "key = value" experiment configuration with dotted section names
// (system.*, grid.*, noise.bump_k.*, run.*, init.*, ground_state.*, ensemble.*).

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qnls/dynamics.hpp"
#include "qnls/ground_state.hpp"

namespace qnls {

class KeyValues {
 public:
  static KeyValues parse(std::istream& in, const std::string& source = "<config>");
  static KeyValues parse_string(const std::string& text);
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  /// Keys never read through a getter; used to reject misspelled keys.
  std::set<std::string> unused_keys() const;
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> used_;
};

/// Format a double so that it reads back bit-identically.
std::string format_double(double v);

SimulationConfig simulation_config(const KeyValues& kv);
/// Canonical resolved form: every key, defaults included.
KeyValues to_key_values(const SimulationConfig& config);

struct GroundStateJob {
  int dim = 4;
  int points = 32;
  double length = 12.0;
  GroundStateMethod method = GroundStateMethod::flow;
  double tol = 1e-9;
  GroundStateOptions options;
};

GroundStateJob ground_state_job(const KeyValues& kv);
KeyValues to_key_values(const GroundStateJob& job);

/// Throw UsageError naming any key that no parser consumed.
void reject_unused(const KeyValues& kv);
/// Throw UsageError naming any key outside the documented key set. Keys under
/// "result." (written into metadata sidecars) are ignored, so a sidecar can be
/// fed back as a config.
void reject_unknown(const KeyValues& kv);

/// Bumps used when a noisy system is configured without any noise.bump_k keys.
std::vector<BumpSpec> default_bumps(int dim);

}  // namespace qnls
