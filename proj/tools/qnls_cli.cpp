// qnls: ground-state solves, trajectories, ensembles and verification suites
// for the quadratic Schrodinger system with conservative multiplicative noise.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qnls/errors.hpp"
#include "qnls/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"qnls - pseudo-spectral laboratory for the quadratic NLS system with multiplicative noise"};
  app.require_subcommand(1);

  qnls::ExperimentSpec spec;
  std::uint64_t seed = 0;
  int jobs = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", spec.config_path, "Experiment config (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--out", spec.out_dir, "Output directory");
    sub->add_option("--seed", seed, "Seed (overrides run.seed; base seed for ensembles)");
  };

  auto* gs = app.add_subcommand("ground-state", "Solve the coupled elliptic system and write the profile");
  add_common(gs);
  auto* sim = app.add_subcommand("simulate", "Integrate one trajectory");
  add_common(sim);
  auto* ens = app.add_subcommand("ensemble", "Integrate seeded trajectories with seeds base+i");
  add_common(ens);
  ens->add_option("--jobs", jobs, "Worker threads (overrides ensemble.jobs)")->check(CLI::PositiveNumber);
  auto* ver = app.add_subcommand("verify", "Run verification suites");
  add_common(ver);
  ver->add_option("--suite", spec.suites, "Suite to run (repeatable): spectral, cancellation, gn, equivalence, conservation")
      ->check(CLI::IsMember({"spectral", "cancellation", "gn", "equivalence", "conservation"}));
  ver->add_option("--jobs", jobs, "Accepted for uniformity; suites run sequentially")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : qnls::kExitUsage;
  }

  if (*gs) spec.command = qnls::Command::ground_state;
  if (*sim) spec.command = qnls::Command::simulate;
  if (*ens) spec.command = qnls::Command::ensemble;
  if (*ver) spec.command = qnls::Command::verify;
  for (auto* sub : {gs, sim, ens, ver}) {
    if (!*sub) continue;
    if (sub->count("--seed")) spec.seed = seed;
    if (sub->get_option_no_throw("--jobs") && sub->count("--jobs")) spec.jobs = jobs;
  }

  try {
    return qnls::run_command(spec, std::cout);
  } catch (const qnls::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return qnls::kExitUsage;
  } catch (const qnls::PreconditionError& e) {
    std::cerr << "precondition error: " << e.what() << "\n";
    return qnls::kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qnls::kExitFailure;
  }
}
