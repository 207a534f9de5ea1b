#pragma once

// Noise coefficients phi_k, Brownian paths, and every noise-derived field the
// three system forms need.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qnls/spectral.hpp"

namespace qnls {

enum class BumpShape {
  gaussian,  // a * exp(-|xi - c|^2 / sigma^2)
  constant,  // a, everywhere; test-only (violates asymptotic flatness)
};

struct BumpSpec {
  BumpShape shape = BumpShape::gaussian;
  double amplitude = 1.0;
  std::array<double, Grid::kMaxDim> center{};
  double width = 1.0;

  /// Closed-form partial derivative d^nu phi at a point.
  double derivative(std::span<const int> nu, std::span<const double> x) const;
};

/// Static fields for one bump, sampled on the grid (all real-valued).
struct BumpFields {
  std::vector<double> value;
  std::vector<std::vector<double>> grad;      // [j][point]
  std::vector<std::vector<double>> hessian;   // [i*d + j][point], symmetric
  std::vector<double> laplacian;
  std::vector<double> bilaplacian;
};

class NoiseModel {
 public:
  NoiseModel(const Grid& grid, std::vector<BumpSpec> bumps, bool test_only = false,
             double flatness_threshold = 1e-8);

  /// N = 0: the deterministic system.
  static NoiseModel none(const Grid& grid) { return NoiseModel(grid, {}); }

  const Grid& grid() const { return grid_; }
  std::size_t count() const { return bumps_.size(); }
  const std::vector<BumpSpec>& bumps() const { return bumps_; }
  const BumpFields& fields(std::size_t k) const { return fields_[k]; }
  bool test_only() const { return test_only_; }
  double flatness_threshold() const { return flatness_threshold_; }

  /// mu = 1/2 sum phi_k^2 and mu~ = 4 mu.
  const ComplexField& mu() const { return mu_; }
  const ComplexField& mu_tilde() const { return mu_tilde_; }
  ComplexField phi(std::size_t k) const;

 private:
  Grid grid_;
  std::vector<BumpSpec> bumps_;
  std::vector<BumpFields> fields_;
  ComplexField mu_;
  ComplexField mu_tilde_;
  bool test_only_;
  double flatness_threshold_;
};

/// N real Brownian paths on a uniform lattice t_m = m * dt, m = 0..steps.
class BrownianPaths {
 public:
  BrownianPaths(std::size_t count, double dt, std::size_t steps, std::uint64_t seed,
                std::vector<double> values);

  std::size_t count() const { return count_; }
  double dt() const { return dt_; }
  std::size_t steps() const { return steps_; }
  std::uint64_t seed() const { return seed_; }
  double horizon() const { return dt_ * static_cast<double>(steps_); }

  /// B_k(t_m).
  double at(std::size_t k, std::size_t m) const;
  /// All B_k(t_m), k = 0..N-1.
  std::vector<double> at_step(std::size_t m) const;
  /// Linear interpolation of the lattice in t; t is clamped to [0, horizon].
  std::vector<double> at_time(double t) const;

  /// Restriction to every factor-th lattice point (same path, coarser lattice).
  BrownianPaths coarsen(std::size_t factor) const;

  void write_csv(std::ostream& out) const;

 private:
  std::size_t count_;
  double dt_;
  std::size_t steps_;
  std::uint64_t seed_;
  std::vector<double> values_;  // [m * count + k]
};

/// Independent Gaussian increments with variance dt; B_k(0) = 0.
BrownianPaths sample_paths(std::size_t count, double dt, std::size_t steps, std::uint64_t seed);

/// W = i sum_k phi_k B_k, with B given directly.
ComplexField eval_W(const NoiseModel& model, std::span<const double> b);
ComplexField eval_W(const NoiseModel& model, const BrownianPaths& paths, std::size_t m);
ComplexField eval_Wtilde(const NoiseModel& model, const BrownianPaths& paths, std::size_t m);

/// Coefficients of the rescaled operators
///   A1 = i (Laplacian + b1 . grad + c1),  A2 = i (1/2 Laplacian + b2 . grad + c2).
struct NoiseCoefficients {
  std::vector<ComplexField> b1;
  std::vector<ComplexField> b2;
  ComplexField c1;
  ComplexField c2;
};

NoiseCoefficients eval_coeffs(const NoiseModel& model, std::span<const double> b);
NoiseCoefficients eval_coeffs(const NoiseModel& model, const BrownianPaths& paths, std::size_t m);

/// Real fields g_j = sum_k B_k d_j phi_k and a = sum_k B_k Laplacian(phi_k);
/// the rescaled coefficients are b1 = b2 = 2 i g, c1 = -|g|^2 + i a,
/// c2 = -2 |g|^2 + i a.
struct DriftFields {
  std::vector<std::vector<double>> g;
  std::vector<double> a;
};
DriftFields eval_drift_fields(const NoiseModel& model, std::span<const double> b);

struct FlatnessEntry {
  std::size_t bump = 0;
  std::array<int, Grid::kMaxDim> nu{};
  double score = 0.0;
};

struct FlatnessReport {
  bool pass = true;
  double threshold = 0.0;
  double worst_score = 0.0;
  std::vector<FlatnessEntry> entries;
};

/// max over the outer 10% shell of the box of <xi>^2 |d^nu phi_k| for every
/// multi-index |nu| <= max_order.
FlatnessReport check_flatness(const NoiseModel& model, int max_order, double threshold = 1e-8);

}  // namespace qnls
