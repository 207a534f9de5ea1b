#include "qnls/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace qnls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw UsageError("config key '" + key + "': cannot parse '" + value + "' as " + what);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

KeyValues KeyValues::parse(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw UsageError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.entries_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  return parse(in, path);
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  used_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) bad_value(key, *v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, *v, "a number");
  }
}

int KeyValues::get_int(const std::string& key, int fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  int out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "an integer");
  return out;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || p != v->data() + v->size()) bad_value(key, *v, "an unsigned 64-bit integer");
  return out;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad_value(key, *v, "a boolean");
}

std::set<std::string> KeyValues::unused_keys() const {
  std::set<std::string> out;
  for (const auto& [k, v] : entries_)
    if (!used_.count(k)) out.insert(k);
  return out;
}

void KeyValues::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << " = " << v << "\n";
}

void reject_unused(const KeyValues& kv) {
  auto unused = kv.unused_keys();
  if (unused.empty()) return;
  std::string msg = "unknown config key(s):";
  for (const auto& k : unused) msg += " " + k;
  throw UsageError(msg);
}

void reject_unknown(const KeyValues& kv) {
  static const std::set<std::string> known = {
      "system.kind", "system.nonlinear", "grid.dim", "grid.points", "grid.length",
      "noise.path_dt", "noise.dump_paths",
      "run.T", "run.dt", "run.seed", "run.blowup_factor", "run.record_every", "run.dealias", "run.scheme",
      "run.rk4_cfl",
      "init.kind", "init.width", "init.v_ratio", "init.amplitude", "init.scale", "init.mass_fraction",
      "init.u_file", "init.v_file",
      "ground_state.file", "ground_state.method", "ground_state.tol", "ground_state.max_iterations",
      "ground_state.mixing", "ground_state.shoot_radius", "ground_state.radial_step",
      "ensemble.size", "ensemble.jobs"};
  std::string bad;
  for (const auto& [k, v] : kv.entries()) {
    if (known.count(k) || k.rfind("result.", 0) == 0) continue;
    if (k.rfind("noise.bump_", 0) == 0) {
      const auto dot = k.find('.', 11);
      const std::string idx = k.substr(11, dot == std::string::npos ? std::string::npos : dot - 11);
      const std::string field = dot == std::string::npos ? "" : k.substr(dot + 1);
      int n = 0;
      auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), n);
      if (ec == std::errc() && p == idx.data() + idx.size() && n >= 1 && n <= 16 &&
          (field == "amplitude" || field == "width" || field == "center"))
        continue;
    }
    bad += " " + k;
  }
  if (!bad.empty()) throw UsageError("unknown config key(s):" + bad);
}

std::vector<BumpSpec> default_bumps(int dim) {
  // Two offset Gaussians that pass the flatness check on the default 20-wide box.
  std::vector<BumpSpec> out(2);
  out[0].amplitude = 1.0;
  out[0].width = 1.4;
  out[0].center[0] = 1.0;
  out[1].amplitude = 0.8;
  out[1].width = 1.4;
  out[1].center[0] = -1.0;
  if (dim > 1) out[1].center[1] = 0.5;
  return out;
}

SimulationConfig simulation_config(const KeyValues& kv) {
  SimulationConfig c;
  c.system = parse_system_kind(kv.get_string("system.kind", to_string(c.system)));
  c.step.nonlinear = kv.get_bool("system.nonlinear", c.step.nonlinear);
  c.dim = kv.get_int("grid.dim", c.dim);
  c.points = kv.get_int("grid.points", c.points);
  c.length = kv.get_double("grid.length", c.length);

  for (int k = 1; k <= 16; ++k) {
    const std::string prefix = "noise.bump_" + std::to_string(k) + ".";
    if (!kv.has(prefix + "amplitude") && !kv.has(prefix + "width") && !kv.has(prefix + "center")) continue;
    BumpSpec b;
    b.amplitude = kv.get_double(prefix + "amplitude", 1.0);
    b.width = kv.get_double(prefix + "width", 1.0);
    if (auto centre = kv.get(prefix + "center")) {
      std::string item;
      std::istringstream parts(*centre);
      int j = 0;
      while (std::getline(parts, item, ',')) {
        if (j >= Grid::kMaxDim) throw UsageError(prefix + "center has too many components");
        try {
          b.center[j++] = std::stod(trim(item));
        } catch (const std::logic_error&) {
          bad_value(prefix + "center", *centre, "a comma-separated list of numbers");
        }
      }
      if (j != c.dim) throw UsageError(prefix + "center must have grid.dim components");
    }
    c.bumps.push_back(b);
  }
  if (c.bumps.empty() && c.system != SystemKind::deterministic) c.bumps = default_bumps(c.dim);
  c.path_dt = kv.get_double("noise.path_dt", c.path_dt);

  c.T = kv.get_double("run.T", c.T);
  c.dt = kv.get_double("run.dt", c.dt);
  c.seed = kv.get_u64("run.seed", c.seed);
  c.blowup_factor = kv.get_double("run.blowup_factor", c.blowup_factor);
  c.record_every = kv.get_int("run.record_every", c.record_every);
  c.step.dealias = kv.get_bool("run.dealias", c.step.dealias);
  c.step.scheme = parse_rescaled_scheme(kv.get_string("run.scheme", to_string(c.step.scheme)));
  c.rk4_cfl = kv.get_double("run.rk4_cfl", c.rk4_cfl);

  c.init.kind = parse_init_kind(kv.get_string("init.kind", to_string(c.init.kind)));
  c.init.width = kv.get_double("init.width", c.init.width);
  c.init.v_ratio = kv.get_double("init.v_ratio", c.init.v_ratio);
  c.init.amplitude = kv.get_double("init.amplitude", c.init.amplitude);
  c.init.scale = kv.get_double("init.scale", c.init.scale);
  if (auto mf = kv.get("init.mass_fraction"); mf && *mf != "none")
    c.init.mass_fraction = kv.get_double("init.mass_fraction", 0.0);
  c.init.u_file = kv.get_string("init.u_file", "");
  c.init.v_file = kv.get_string("init.v_file", "");
  c.ground_state_file = kv.get_string("ground_state.file", "");
  return c;
}

KeyValues to_key_values(const SimulationConfig& c) {
  KeyValues kv;
  kv.set("system.kind", to_string(c.system));
  kv.set("system.nonlinear", c.step.nonlinear ? "true" : "false");
  kv.set("grid.dim", std::to_string(c.dim));
  kv.set("grid.points", std::to_string(c.points));
  kv.set("grid.length", format_double(c.length));
  for (std::size_t k = 0; k < c.bumps.size(); ++k) {
    const std::string prefix = "noise.bump_" + std::to_string(k + 1) + ".";
    const auto& b = c.bumps[k];
    kv.set(prefix + "amplitude", format_double(b.amplitude));
    kv.set(prefix + "width", format_double(b.width));
    std::string centre;
    for (int j = 0; j < c.dim; ++j) centre += (j ? "," : "") + format_double(b.center[j]);
    kv.set(prefix + "center", centre);
  }
  kv.set("noise.path_dt", format_double(c.path_dt));
  kv.set("run.T", format_double(c.T));
  kv.set("run.dt", format_double(c.dt));
  kv.set("run.seed", std::to_string(c.seed));
  kv.set("run.blowup_factor", format_double(c.blowup_factor));
  kv.set("run.record_every", std::to_string(c.record_every));
  kv.set("run.dealias", c.step.dealias ? "true" : "false");
  kv.set("run.scheme", to_string(c.step.scheme));
  kv.set("run.rk4_cfl", format_double(c.rk4_cfl));
  kv.set("init.kind", to_string(c.init.kind));
  kv.set("init.width", format_double(c.init.width));
  kv.set("init.v_ratio", format_double(c.init.v_ratio));
  kv.set("init.amplitude", format_double(c.init.amplitude));
  kv.set("init.scale", format_double(c.init.scale));
  kv.set("init.mass_fraction", c.init.mass_fraction ? format_double(*c.init.mass_fraction) : "none");
  kv.set("init.u_file", c.init.u_file);
  kv.set("init.v_file", c.init.v_file);
  kv.set("ground_state.file", c.ground_state_file);
  return kv;
}

GroundStateJob ground_state_job(const KeyValues& kv) {
  GroundStateJob job;
  job.dim = kv.get_int("grid.dim", job.dim);
  job.points = kv.get_int("grid.points", job.points);
  job.length = kv.get_double("grid.length", job.length);
  job.method = parse_ground_state_method(kv.get_string("ground_state.method", to_string(job.method)));
  job.tol = kv.get_double("ground_state.tol", job.tol);
  job.options.max_iterations = kv.get_int("ground_state.max_iterations", job.options.max_iterations);
  job.options.mixing = kv.get_double("ground_state.mixing", job.options.mixing);
  job.options.shoot_radius = kv.get_double("ground_state.shoot_radius", job.options.shoot_radius);
  job.options.radial_step = kv.get_double("ground_state.radial_step", job.options.radial_step);
  if (!(job.tol > 0.0)) throw UsageError("ground_state.tol must be positive");
  if (job.options.max_iterations < 1) throw UsageError("ground_state.max_iterations must be >= 1");
  if (!(job.options.mixing > 0.0 && job.options.mixing <= 1.0))
    throw UsageError("ground_state.mixing must lie in (0, 1]");
  if (!(job.options.radial_step > 0.0) || !(job.options.shoot_radius > 4.0 * job.options.radial_step))
    throw UsageError("ground_state.radial_step / shoot_radius out of range");
  (void)Grid(job.dim, job.points, job.length);
  return job;
}

KeyValues to_key_values(const GroundStateJob& job) {
  KeyValues kv;
  kv.set("grid.dim", std::to_string(job.dim));
  kv.set("grid.points", std::to_string(job.points));
  kv.set("grid.length", format_double(job.length));
  kv.set("ground_state.method", to_string(job.method));
  kv.set("ground_state.tol", format_double(job.tol));
  kv.set("ground_state.max_iterations", std::to_string(job.options.max_iterations));
  kv.set("ground_state.mixing", format_double(job.options.mixing));
  kv.set("ground_state.shoot_radius", format_double(job.options.shoot_radius));
  kv.set("ground_state.radial_step", format_double(job.options.radial_step));
  return kv;
}

}  // namespace qnls
