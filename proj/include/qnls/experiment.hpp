#pragma once

// Command layer behind the `qnls` executable: ground-state solves, single
// trajectories, seeded ensembles and the verification suites, with their
// on-disk artifacts.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qnls/config.hpp"
#include "qnls/dynamics.hpp"

namespace qnls {

enum class Command { ground_state, simulate, ensemble, verify };
std::string to_string(Command c);

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       // numeric failure, non-convergence or a failed verification
  kExitUsage = 2,         // invalid flags or configuration
  kExitPrecondition = 3,  // a required input artifact is missing
};

struct ExperimentSpec {
  Command command = Command::simulate;
  /// Empty: built-in defaults only.
  std::string config_path;
  /// Empty: the current directory (verify writes no files unless set).
  std::string out_dir;
  /// Overrides run.seed (base seed for ensembles).
  std::optional<std::uint64_t> seed;
  /// verify only; empty selects every suite.
  std::vector<std::string> suites;
  /// Overrides ensemble.jobs.
  std::optional<int> jobs;
};

/// Raw config with command-line overrides applied; unknown keys rejected.
KeyValues resolve_config(const ExperimentSpec& spec);

int cmd_ground_state(const ExperimentSpec& spec, std::ostream& log);
int cmd_simulate(const ExperimentSpec& spec, std::ostream& log);
int cmd_ensemble(const ExperimentSpec& spec, std::ostream& log);
int cmd_verify(const ExperimentSpec& spec, std::ostream& log);

/// Dispatch on spec.command. Library exceptions propagate to the caller.
int run_command(const ExperimentSpec& spec, std::ostream& log);

/// Files written for one trajectory: observables.csv, final_u.bin,
/// final_v.bin (physical fields; rescaled runs also write final_y.bin and
/// final_z.bin) and metadata.txt (resolved config plus result.* keys).
void write_trajectory_artifacts(const std::string& dir, const SimulationConfig& config,
                                const TrajectoryResult& result);

struct EnsembleMember {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  StopReason stop_reason = StopReason::horizon;
  double stop_time = 0.0;
  double mass_drift = 0.0;  // max over records of |M(t) - M(0)| / M(0)
  double max_K = 0.0;
  double fit_c = 0.0;
  int coercivity_flag = -1;  // 0 held on every record, 1 violated, -1 not evaluated
  bool envelope_pass = true;
};

struct EnsembleSummary {
  std::vector<EnsembleMember> members;
  std::size_t horizon_count() const;
  std::size_t numeric_failures() const;
  double max_mass_drift() const;
  double max_K() const;
  /// min, median, max of the per-path constants; max is also the ensemble-uniform constant.
  double fit_c_min() const;
  double fit_c_median() const;
  double fit_c_max() const;
};

EnsembleMember summarize_member(std::size_t index, const TrajectoryResult& result);

/// Run `size` trajectories with seeds base + i on `jobs` threads. The result
/// does not depend on `jobs`. Each finished member is handed to `sink` (from a
/// worker thread, serialized) before its fields are released.
EnsembleSummary run_ensemble(const SimulationConfig& base, std::size_t size, int jobs,
                             const GroundStateReference& gs,
                             const std::function<void(std::size_t, const SimulationConfig&,
                                                      const TrajectoryResult&)>& sink = {});

}  // namespace qnls
