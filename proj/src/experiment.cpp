#include "qnls/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "qnls/errors.hpp"
#include "qnls/ground_state.hpp"
#include "qnls/noise.hpp"
#include "qnls/observables.hpp"
#include "qnls/verify.hpp"

namespace qnls {

namespace fs = std::filesystem;

std::string to_string(Command c) {
  switch (c) {
    case Command::ground_state: return "ground-state";
    case Command::simulate: return "simulate";
    case Command::ensemble: return "ensemble";
    case Command::verify: return "verify";
  }
  return "?";
}

namespace {

std::string output_dir(const ExperimentSpec& spec) { return spec.out_dir.empty() ? "." : spec.out_dir; }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir);
  const fs::path probe = fs::path(dir) / ".qnls-write-test";
  {
    std::ofstream out(probe);
    if (!out) throw UsageError("output directory is not writable: " + dir);
  }
  fs::remove(probe, ec);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

std::string fmt(double v) { return format_double(v); }

std::string flag_word(bool applicable, bool ok) { return !applicable ? "not_evaluated" : ok ? "pass" : "fail"; }

// Config lines as "key = value" strings, for embedding in CSV comments.
std::vector<std::string> config_lines(const KeyValues& kv) {
  std::vector<std::string> out;
  for (const auto& [k, v] : kv.entries()) out.push_back(k + " = " + v);
  return out;
}

double max_mass_drift(const ObservableSeries& s) {
  if (s.records.empty()) return 0.0;
  const double m0 = s.records.front().M;
  double worst = 0.0;
  for (const auto& r : s.records) worst = std::max(worst, m0 > 0.0 ? std::abs(r.M - m0) / m0 : std::abs(r.M));
  return worst;
}

double max_kinetic(const ObservableSeries& s) {
  double k = 0.0;
  for (const auto& r : s.records) k = std::max(k, r.K);
  return k;
}

}  // namespace

KeyValues resolve_config(const ExperimentSpec& spec) {
  KeyValues kv = spec.config_path.empty() ? KeyValues{} : KeyValues::load(spec.config_path);
  reject_unknown(kv);
  if (spec.seed) kv.set("run.seed", std::to_string(*spec.seed));
  if (spec.jobs) {
    if (*spec.jobs < 1) throw UsageError("--jobs must be >= 1");
    kv.set("ensemble.jobs", std::to_string(*spec.jobs));
  }
  return kv;
}

// ── ground state ──

int cmd_ground_state(const ExperimentSpec& spec, std::ostream& log) {
  const KeyValues kv = resolve_config(spec);
  GroundStateJob job = ground_state_job(kv);
  const std::string dir = output_dir(spec);
  ensure_dir(dir);
  const Grid grid(job.dim, job.points, job.length);
  const KeyValues resolved = to_key_values(job);

  auto write_metadata = [&](const std::vector<std::pair<std::string, std::string>>& results) {
    auto out = open_out(fs::path(dir) / "metadata.txt");
    resolved.write(out);
    for (const auto& [k, v] : results) out << "result." << k << " = " << v << "\n";
  };

  GroundState shoot;
  GroundState gs;
  try {
    shoot = solve_radial_ground_state(job.dim, std::min(job.tol, 1e-10), job.options);
    if (job.method == GroundStateMethod::flow) {
      GroundStateOptions opts = job.options;
      opts.warm_start = shoot.profile;
      gs = solve_ground_state(grid, GroundStateMethod::flow, job.tol, opts);
    } else {
      gs = solve_ground_state(grid, GroundStateMethod::shooting, job.tol, job.options);
    }
  } catch (const ConvergenceError& e) {
    write_metadata({{"status", "not_converged"}, {"last_residual", fmt(e.last_residual())}, {"message", e.what()}});
    log << "ground-state solve did not converge: " << e.what() << " (last residual " << e.last_residual()
        << "); partial metadata in " << dir << "/metadata.txt\n";
    return kExitFailure;
  } catch (const DegenerateSolutionError& e) {
    write_metadata({{"status", "degenerate"}, {"message", e.what()}});
    log << "ground-state solve failed: " << e.what() << "\n";
    return kExitFailure;
  }

  // Cross-checks: the lifted shooting profile and the dilation identity.
  auto [sphi, spsi] = lift_radial(grid, *shoot.profile);
  const double gap = std::sqrt((norm_sq(gs.phi - sphi) + norm_sq(gs.psi - spsi)) / (norm_sq(sphi) + norm_sq(spsi)));
  const double act = action(gs.phi, gs.psi);
  const double dil = dilation_derivative(gs.phi, gs.psi);

  std::vector<std::pair<std::string, std::string>> meta = {
      {"d", std::to_string(job.dim)},
      {"n", std::to_string(job.points)},
      {"L", fmt(job.length)},
      {"method", to_string(gs.method)},
      {"tol", fmt(job.tol)},
      {"status", "converged"},
      {"mass", fmt(gs.mass)},
      {"residual_phi", fmt(gs.residual[0])},
      {"residual_psi", fmt(gs.residual[1])},
      {"gn_coefficient", fmt(gs.gn_coefficient)},
      {"kinetic", fmt(gs.kinetic)},
      {"potential", fmt(gs.potential)},
      {"energy", fmt(gs.energy)},
      {"energy_over_kinetic", fmt(gs.energy / gs.kinetic)},
      {"action", fmt(act)},
      {"dilation_derivative", fmt(dil)},
      {"iterations", std::to_string(gs.iterations)},
      {"phi0", fmt(gs.phi0)},
      {"psi0", fmt(gs.psi0)},
      {"shooting_mass", fmt(shoot.mass)},
      {"shooting_phi0", fmt(shoot.phi0)},
      {"shooting_psi0", fmt(shoot.psi0)},
      {"l2_gap_vs_shooting", fmt(gap)},
  };
  GroundStateArtifact art;
  art.metadata = meta;
  for (const auto& [k, v] : resolved.entries()) art.metadata.emplace_back("config." + k, v);
  art.profile = *gs.profile;
  art.mass = gs.mass;
  {
    auto out = open_out(fs::path(dir) / "ground_state.csv");
    write_ground_state_artifact(out, art);
  }
  write_metadata(meta);

  char buf[160];
  log << "ground state d=" << job.dim << " n=" << job.points << " L=" << job.length << " method "
      << to_string(gs.method) << "\n";
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "  %-26s %.10g\n", name, v);
    log << buf;
  };
  row("mass M(phi,psi)", gs.mass);
  row("residual phi", gs.residual[0]);
  row("residual psi", gs.residual[1]);
  row("gn coefficient", gs.gn_coefficient);
  row("kinetic K", gs.kinetic);
  row("energy E", gs.energy);
  row("|E| / K", std::abs(gs.energy) / gs.kinetic);
  row("dilation derivative / I", std::abs(dil) / act);
  row("shooting mass", shoot.mass);
  row("L2 gap vs shooting", gap);
  log << "  iterations                 " << gs.iterations << "\n";
  log << "wrote " << (fs::path(dir) / "ground_state.csv").string() << "\n";
  return kExitOk;
}

// ── trajectories ──

void write_trajectory_artifacts(const std::string& dir, const SimulationConfig& config,
                                const TrajectoryResult& result) {
  ensure_dir(dir);
  const KeyValues resolved = to_key_values(config);
  const fs::path base(dir);
  {
    auto out = open_out(base / "observables.csv");
    auto comments = config_lines(resolved);
    result.series.write_csv(out, comments);
  }
  if (config.system == SystemKind::rescaled) {
    const NoiseModel model(config.grid(), config.bumps);
    const BrownianPaths paths = trajectory_paths(config, model.count());
    auto [u, v] = to_physical(result.u, result.v, model, paths.at_time(result.stop_time));
    write_checkpoint((base / "final_u.bin").string(), u, result.stop_time);
    write_checkpoint((base / "final_v.bin").string(), v, result.stop_time);
    write_checkpoint((base / "final_y.bin").string(), result.u, result.stop_time);
    write_checkpoint((base / "final_z.bin").string(), result.v, result.stop_time);
  } else {
    write_checkpoint((base / "final_u.bin").string(), result.u, result.stop_time);
    write_checkpoint((base / "final_v.bin").string(), result.v, result.stop_time);
  }

  auto out = open_out(base / "metadata.txt");
  resolved.write(out);
  const auto& b = result.bounds;
  const auto& recs = result.series.records;
  auto put = [&](const std::string& k, const std::string& v) { out << "result." << k << " = " << v << "\n"; };
  put("stop_reason", to_string(result.stop_reason));
  put("stop_time", fmt(result.stop_time));
  if (!result.failure_message.empty()) put("failure_message", result.failure_message);
  put("seed", std::to_string(result.seed));
  put("blowup_surrogate", "H1_sum > run.blowup_factor * initial H1_sum");
  put("blowup_threshold", fmt(result.blowup_threshold));
  put("ground_state_mass", fmt(result.ground_state_mass));
  put("ground_state_source", result.ground_state_source);
  put("records", std::to_string(recs.size()));
  if (!recs.empty()) {
    put("initial_mass", fmt(recs.front().M));
    put("initial_mass_fraction", fmt(recs.front().M / result.ground_state_mass));
    put("final_mass", fmt(recs.back().M));
  }
  put("max_mass_drift", fmt(max_mass_drift(result.series)));
  put("max_K", fmt(max_kinetic(result.series)));
  put("fit_c", fmt(result.fit_c));
  put("coercivity", flag_word(b.coercivity_applicable, !b.first_coercivity_violation));
  if (b.coercivity_applicable) put("coercivity_factor", fmt(b.coercivity_factor));
  put("envelope", flag_word(true, !b.first_envelope_violation));
}

int cmd_simulate(const ExperimentSpec& spec, std::ostream& log) {
  const KeyValues kv = resolve_config(spec);
  const SimulationConfig config = simulation_config(kv);
  const bool dump_paths = kv.get_bool("noise.dump_paths", false);
  config.validate();
  const std::string dir = output_dir(spec);
  ensure_dir(dir);

  const GroundStateReference gs = resolve_ground_state(config);
  const TrajectoryResult res = run_trajectory(config, gs);
  write_trajectory_artifacts(dir, config, res);
  if (dump_paths) {
    auto out = open_out(fs::path(dir) / "paths.csv");
    trajectory_paths(config, config.system == SystemKind::deterministic ? 0 : config.bumps.size()).write_csv(out);
  }

  log << to_string(config.system) << " d=" << config.dim << " n=" << config.points << " seed=" << config.seed
      << ": stop_reason " << to_string(res.stop_reason) << " at t=" << res.stop_time << ", max mass drift "
      << max_mass_drift(res.series) << ", fitC " << res.fit_c << ", coercivity "
      << flag_word(res.bounds.coercivity_applicable, !res.bounds.first_coercivity_violation) << "\n";
  if (res.stop_reason == StopReason::numeric_failure) {
    log << "numeric failure: " << res.failure_message << " (last good fields written)\n";
    return kExitFailure;
  }
  return kExitOk;
}

// ── ensembles ──

std::size_t EnsembleSummary::horizon_count() const {
  return static_cast<std::size_t>(std::count_if(members.begin(), members.end(),
                                                [](const auto& m) { return m.stop_reason == StopReason::horizon; }));
}

std::size_t EnsembleSummary::numeric_failures() const {
  return static_cast<std::size_t>(std::count_if(
      members.begin(), members.end(), [](const auto& m) { return m.stop_reason == StopReason::numeric_failure; }));
}

double EnsembleSummary::max_mass_drift() const {
  double v = 0.0;
  for (const auto& m : members) v = std::max(v, m.mass_drift);
  return v;
}

double EnsembleSummary::max_K() const {
  double v = 0.0;
  for (const auto& m : members) v = std::max(v, m.max_K);
  return v;
}

namespace {

std::vector<double> sorted_fit_c(const std::vector<EnsembleMember>& members) {
  std::vector<double> c;
  for (const auto& m : members) c.push_back(m.fit_c);
  std::sort(c.begin(), c.end());
  return c;
}

}  // namespace

double EnsembleSummary::fit_c_min() const {
  auto c = sorted_fit_c(members);
  return c.empty() ? 0.0 : c.front();
}

double EnsembleSummary::fit_c_median() const {
  auto c = sorted_fit_c(members);
  if (c.empty()) return 0.0;
  const std::size_t h = c.size() / 2;
  return c.size() % 2 ? c[h] : 0.5 * (c[h - 1] + c[h]);
}

double EnsembleSummary::fit_c_max() const {
  auto c = sorted_fit_c(members);
  return c.empty() ? 0.0 : c.back();
}

EnsembleMember summarize_member(std::size_t index, const TrajectoryResult& r) {
  EnsembleMember m;
  m.index = index;
  m.seed = r.seed;
  m.stop_reason = r.stop_reason;
  m.stop_time = r.stop_time;
  m.mass_drift = max_mass_drift(r.series);
  m.max_K = max_kinetic(r.series);
  m.fit_c = r.fit_c;
  m.coercivity_flag = !r.bounds.coercivity_applicable ? -1 : r.bounds.first_coercivity_violation ? 1 : 0;
  m.envelope_pass = !r.bounds.first_envelope_violation;
  return m;
}

EnsembleSummary run_ensemble(const SimulationConfig& base, std::size_t size, int jobs,
                             const GroundStateReference& gs,
                             const std::function<void(std::size_t, const SimulationConfig&,
                                                      const TrajectoryResult&)>& sink) {
  if (size < 1) throw UsageError("ensemble.size must be >= 1");
  if (jobs < 1) throw UsageError("ensemble.jobs must be >= 1");
  base.validate();
  EnsembleSummary summary;
  summary.members.resize(size);
  std::vector<std::string> errors(size);
  std::atomic<std::size_t> next{0};
  std::mutex sink_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < size; i = next++) {
      SimulationConfig cfg = base;
      cfg.seed = base.seed + i;
      try {
        TrajectoryResult res = run_trajectory(cfg, gs);
        summary.members[i] = summarize_member(i, res);
        if (sink) {
          std::lock_guard lock(sink_mutex);
          sink(i, cfg, res);
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), size));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < size; ++i)
    if (!errors[i].empty()) throw std::runtime_error("ensemble member " + std::to_string(i) + ": " + errors[i]);
  return summary;
}

int cmd_ensemble(const ExperimentSpec& spec, std::ostream& log) {
  const KeyValues kv = resolve_config(spec);
  const SimulationConfig config = simulation_config(kv);
  const bool dump_paths = kv.get_bool("noise.dump_paths", false);
  const int size = kv.get_int("ensemble.size", 20);
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const int jobs = kv.get_int("ensemble.jobs", hw);
  if (size < 1) throw UsageError("ensemble.size must be >= 1");
  if (jobs < 1) throw UsageError("ensemble.jobs must be >= 1");
  config.validate();
  const std::string dir = output_dir(spec);
  ensure_dir(dir);

  const GroundStateReference gs = resolve_ground_state(config);
  char name[32];
  const EnsembleSummary summary = run_ensemble(
      config, static_cast<std::size_t>(size), jobs, gs,
      [&](std::size_t i, const SimulationConfig& cfg, const TrajectoryResult& res) {
        std::snprintf(name, sizeof name, "traj_%03zu", i);
        const fs::path sub = fs::path(dir) / name;
        write_trajectory_artifacts(sub.string(), cfg, res);
        if (dump_paths) {
          auto out = open_out(sub / "paths.csv");
          trajectory_paths(cfg, cfg.system == SystemKind::deterministic ? 0 : cfg.bumps.size()).write_csv(out);
        }
      });

  {
    auto out = open_out(fs::path(dir) / "summary.csv");
    out << "# qnls-ensemble-summary v1\n";
    out << "index,seed,stop_reason,stop_time,mass_drift,max_K,fit_c,coercivity,envelope\n";
    char buf[256];
    for (const auto& m : summary.members) {
      std::snprintf(buf, sizeof buf, "%zu,%llu,%s,%.17g,%.17g,%.17g,%.17g,%d,%d\n", m.index,
                    static_cast<unsigned long long>(m.seed), to_string(m.stop_reason).c_str(), m.stop_time,
                    m.mass_drift, m.max_K, m.fit_c, m.coercivity_flag, m.envelope_pass ? 0 : 1);
      out << buf;
    }
  }
  const std::size_t coercive = static_cast<std::size_t>(
      std::count_if(summary.members.begin(), summary.members.end(), [](const auto& m) { return m.coercivity_flag == 0; }));
  {
    auto out = open_out(fs::path(dir) / "summary.txt");
    KeyValues resolved = to_key_values(config);
    resolved.set("ensemble.size", std::to_string(size));
    resolved.write(out);
    auto put = [&](const std::string& k, const std::string& v) { out << "result." << k << " = " << v << "\n"; };
    put("base_seed", std::to_string(config.seed));
    put("ground_state_mass", fmt(gs.mass));
    put("ground_state_source", gs.source);
    put("horizon_count", std::to_string(summary.horizon_count()));
    put("horizon_fraction", fmt(static_cast<double>(summary.horizon_count()) / size));
    put("numeric_failures", std::to_string(summary.numeric_failures()));
    put("coercivity_pass_count", std::to_string(coercive));
    put("coercivity_evaluated", summary.members.front().coercivity_flag < 0 ? "false" : "true");
    put("max_mass_drift", fmt(summary.max_mass_drift()));
    put("max_K", fmt(summary.max_K()));
    put("fit_c_min", fmt(summary.fit_c_min()));
    put("fit_c_median", fmt(summary.fit_c_median()));
    put("fit_c_max", fmt(summary.fit_c_max()));
    put("fit_c_ensemble", fmt(summary.fit_c_max()));
  }
  log << "ensemble of " << size << " (" << to_string(config.system) << ", d=" << config.dim << ", seeds "
      << config.seed << ".." << config.seed + size - 1 << "): " << summary.horizon_count() << "/" << size
      << " reached the horizon, coercivity held on " << coercive << "/" << size << ", max mass drift "
      << summary.max_mass_drift() << ", fitC median " << summary.fit_c_median() << " max " << summary.fit_c_max()
      << "\n";
  return summary.numeric_failures() > 0 ? kExitFailure : kExitOk;
}

// ── verification ──

int cmd_verify(const ExperimentSpec& spec, std::ostream& log) {
  const KeyValues kv = resolve_config(spec);
  VerifyOptions opts;
  opts.seed = kv.get_u64("run.seed", 0);
  opts.ground_state_file = kv.get_string("ground_state.file", "");
  std::vector<std::string> suites = spec.suites.empty() ? verify_suite_names() : spec.suites;
  for (const auto& s : suites)
    if (std::find(verify_suite_names().begin(), verify_suite_names().end(), s) == verify_suite_names().end())
      throw UsageError("unknown verification suite '" + s + "'");
  // Fail before any work when the GN audit cannot run.
  if (std::find(suites.begin(), suites.end(), "gn") != suites.end()) {
    if (opts.ground_state_file.empty())
      throw PreconditionError("gn suite needs a ground-state artifact: set ground_state.file in the config");
    if (!fs::exists(opts.ground_state_file))
      throw PreconditionError("ground-state artifact not found: " + opts.ground_state_file);
  }

  std::ostringstream report;
  bool all = true;
  for (const auto& s : suites) {
    const SuiteReport r = run_suite(s, opts);
    std::ostringstream one;
    print_report(one, r);
    log << one.str() << std::flush;
    report << one.str();
    all = all && r.pass();
  }
  const char* verdict = all ? "all selected suites passed\n" : "verification FAILED\n";
  report << verdict;
  log << verdict;
  if (!spec.out_dir.empty()) {
    ensure_dir(spec.out_dir);
    auto out = open_out(fs::path(spec.out_dir) / "verify_report.txt");
    out << report.str();
  }
  return all ? kExitOk : kExitFailure;
}

int run_command(const ExperimentSpec& spec, std::ostream& log) {
  switch (spec.command) {
    case Command::ground_state: return cmd_ground_state(spec, log);
    case Command::simulate: return cmd_simulate(spec, log);
    case Command::ensemble: return cmd_ensemble(spec, log);
    case Command::verify: return cmd_verify(spec, log);
  }
  throw UsageError("unknown command");
}

}  // namespace qnls
