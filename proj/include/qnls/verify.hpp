#pragma once

// Self-contained verification suites run by `qnls verify`. Each suite measures
// a handful of errors at fixed desk-scale sizes and compares them to fixed
// tolerances.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qnls {

struct SuiteCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  /// "<": pass when measured < tolerance; ">": pass when measured > tolerance.
  char relation = '<';
  bool pass() const;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;
  double seconds = 0.0;
  bool pass() const;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Ground-state artifact for the GN audit; required by that suite.
  std::string ground_state_file;
};

const std::vector<std::string>& verify_suite_names();

SuiteReport verify_spectral(const VerifyOptions& options);
SuiteReport verify_cancellation(const VerifyOptions& options);
/// Throws PreconditionError naming the file when the artifact is missing.
SuiteReport verify_gn(const VerifyOptions& options);
SuiteReport verify_equivalence(const VerifyOptions& options);
SuiteReport verify_conservation(const VerifyOptions& options);

SuiteReport run_suite(const std::string& name, const VerifyOptions& options);

void print_report(std::ostream& out, const SuiteReport& report);

}  // namespace qnls
