#pragma once

// Conserved and monitored functionals, the energy-rate identity, and the
// coercivity / Gronwall diagnostics.

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qnls/noise.hpp"
#include "qnls/spectral.hpp"

namespace qnls {

/// ||u||^2 + 2 ||v||^2
double mass(const ComplexField& u, const ComplexField& v);
/// ||grad u||^2 + 1/2 ||grad v||^2
double kinetic(const ComplexField& u, const ComplexField& v);
/// Re <v, u^2> = Re int v conj(u)^2
double potential(const ComplexField& u, const ComplexField& v);
/// K - 2P
double energy(const ComplexField& u, const ComplexField& v);

/// The seven groups of the simplified energy rate, in order:
///   (i)   sum_k B_k int Lap^2 phi_k |y|^2
///   (ii)  1/2 sum_k B_k int Lap^2 phi_k |z|^2
///   (iii) -4 sum_k B_k Re sum_ij int d_i d_j phi_k d_i y conj(d_j y)
///   (iv)  -2 sum_k B_k Re sum_ij int d_i d_j phi_k d_i z conj(d_j z)
///   (v)   -2 sum_j Im int grad(g_j^2) . grad y conj(y)
///   (vi)  -1/2 sum_j Im int grad((2 g_j)^2) . grad z conj(z)
///   (vii) 2 sum_k B_k Re int Lap phi_k z conj(y)^2
/// with g_j = sum_k B_k d_j phi_k.
struct EnergyRateTerms {
  std::array<double, 7> term{};
  double total() const;
};

EnergyRateTerms energy_rate_terms(const ComplexField& y, const ComplexField& z, const NoiseModel& model,
                                  std::span<const double> b);
double energy_rate_rhs(const ComplexField& y, const ComplexField& z, const NoiseModel& model,
                       std::span<const double> b);

/// I_1..I_8: the energy rate before any integration by parts,
///   I_1 = -2 Im int Lap y conj(b1 . grad y)      I_2 = -2 Im int 2 z conj(y) conj(b1 . grad y)
///   I_3 = -2 Im int Lap y conj(c1 y)             I_4 = -2 Im int 2 z conj(y) conj(c1 y)
///   I_5 = -2 Im int 1/2 Lap z conj(b2 . grad z)  I_6 = -2 Im int y^2 conj(b2 . grad z)
///   I_7 = -2 Im int 1/2 Lap z conj(c2 z)         I_8 = -2 Im int y^2 conj(c2 z)
/// evaluated from the coefficient fields b1, b2, c1, c2 by direct quadrature.
std::array<double, 8> raw_energy_rate_terms(const ComplexField& y, const ComplexField& z,
                                            const NoiseModel& model, std::span<const double> b);

/// Flag values: 0 holds, 1 violated, -1 not evaluated.
struct ObservableRecord {
  double t = 0.0;
  double M = 0.0;
  double K = 0.0;
  double P = 0.0;
  double E = 0.0;
  double dE_rhs = std::numeric_limits<double>::quiet_NaN();
  double H1_sum = 0.0;
  int flag_E2 = -1;
  int flag_gronwall = -1;
};

ObservableRecord observe(double t, const ComplexField& u, const ComplexField& v);

struct ObservableSeries {
  std::vector<ObservableRecord> records;

  /// `comments` are written as "# line" between the version header and the column header.
  void write_csv(std::ostream& out, const std::vector<std::string>& comments = {}) const;
  static ObservableSeries read_csv(std::istream& in);
};

/// Smallest C >= 0 with E(t) <= E(0) + C + C int_0^t K ds on every record
/// (trapezoid quadrature on the record times).
double fit_gronwall_constant(const ObservableSeries& series);

struct BoundsDiagnostics {
  /// False when M(0) >= M_gs; the coercivity check is then skipped.
  bool coercivity_applicable = false;
  double coercivity_factor = 0.0;  // 1 - sqrt(M0 / M_gs)
  std::optional<std::size_t> first_coercivity_violation;
  std::optional<std::size_t> first_envelope_violation;
  std::vector<int> flag_E2;
  std::vector<int> flag_gronwall;

  bool pass() const { return !first_coercivity_violation && !first_envelope_violation; }
};

/// (a) E(t) >= (1 - sqrt(M0/M_gs)) K(t) - tol,  (b) E(t) <= E(0) + C + C int K.
/// `tol` is relative to max(1, K(t)) for (a) and to max(1, |E(0)|) for (b).
BoundsDiagnostics check_bounds(const ObservableSeries& series, double ground_state_mass, double fit_c,
                               double tol = 1e-8);

/// Copy the diagnostic flags into the series records.
void apply_flags(ObservableSeries& series, const BoundsDiagnostics& diag);

}  // namespace qnls
