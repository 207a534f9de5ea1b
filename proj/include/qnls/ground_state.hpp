#pragma once

// Ground state of the coupled elliptic system
//   -Lap(phi) + phi = 2 psi phi,   -1/2 Lap(psi) + 2 psi = phi^2
// and the sharp Gagliardo-Nirenberg coefficient derived from its mass.

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qnls/spectral.hpp"

namespace qnls {

/// Radial profile on a uniform lattice r_m = m * dr, m = 0..size-1.
struct RadialProfile {
  int dim = 4;
  double dr = 1e-3;
  std::vector<double> phi;
  std::vector<double> psi;
  std::vector<double> dphi;  // radial derivatives, when known
  std::vector<double> dpsi;

  double r_max() const { return dr * static_cast<double>(phi.size() - 1); }
  /// Cubic interpolation in r (even extension through the origin); beyond the
  /// last node the decaying tails r^{-(d-1)/2} e^{-r} and e^{-2r} are used.
  double phi_at(double r) const;
  double psi_at(double r) const;
};

enum class GroundStateMethod { flow, shooting };

std::string to_string(GroundStateMethod m);
GroundStateMethod parse_ground_state_method(const std::string& s);

struct GroundState {
  GroundStateMethod method = GroundStateMethod::flow;
  ComplexField phi;
  ComplexField psi;
  double mass = 0.0;
  /// L2 norms of the two elliptic residuals. For the flow these are the grid
  /// residuals; for shooting they are the radial-ODE residuals of the profile.
  std::array<double, 2> residual{};
  double gn_coefficient = 0.0;  // 1 / (2 sqrt(mass))
  double kinetic = 0.0;
  double potential = 0.0;
  double energy = 0.0;
  int iterations = 0;
  std::optional<RadialProfile> profile;
  /// Values at the origin.
  double phi0 = 0.0;
  double psi0 = 0.0;
};

struct GroundStateOptions {
  int max_iterations = 3000;
  /// Under-relaxation for the grid iteration; the unrelaxed map has a
  /// period-two mode for this system.
  double mixing = 0.5;
  /// Grid flow initial data. Empty: positive Gaussian pair.
  std::optional<RadialProfile> warm_start;
  /// Explicit initial data for the grid flow (overrides warm_start).
  std::optional<std::pair<ComplexField, ComplexField>> initial;
  /// Shooting: matching radius and RK4 step.
  double shoot_radius = 12.0;
  double radial_step = 1e-3;
};

/// Solve on `grid`. Flow: preconditioned imaginary-time iteration on the grid
/// with a Nehari-type stabilizing factor. Shooting: radial two-parameter
/// shooting on (phi(0), psi(0)), lifted to the grid by cubic interpolation.
GroundState solve_ground_state(const Grid& grid, GroundStateMethod method, double tol,
                               const GroundStateOptions& options = {});

/// Radial solve only (no grid). `tol` bounds the shooting Newton update.
GroundState solve_radial_ground_state(int dim, double tol, const GroundStateOptions& options = {});

/// (||-Lap phi + phi - 2 psi phi||, ||-1/2 Lap psi + 2 psi - phi^2||) on the grid.
std::array<double, 2> elliptic_residual(const ComplexField& phi, const ComplexField& psi);
std::array<double, 2> elliptic_residual(const GroundState& gs);

/// Radial-ODE residuals of a profile, 4th-order differences, radial L2 measure.
std::array<double, 2> radial_residual(const RadialProfile& profile);

/// I = 1/2 M + 1/2 E for a real pair.
double action(const ComplexField& phi, const ComplexField& psi);

/// Central difference in lambda of I(phi(./lambda), psi(./lambda)); on the
/// grid the dilated pair is evaluated through the exact scaling of M, K, P.
double dilation_derivative(const ComplexField& phi, const ComplexField& psi, double delta = 1e-4);
/// Same, with the dilation applied by resampling the radial profile.
double radial_dilation_derivative(const RadialProfile& profile, double delta = 1e-4);

struct RadialFunctionals {
  double mass = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double energy() const { return kinetic - 2.0 * potential; }
  double action() const { return 0.5 * mass + 0.5 * energy(); }
};
/// M, K, P of a radial profile by quadrature, dilated by lambda.
RadialFunctionals radial_functionals(const RadialProfile& profile, double lambda = 1.0);

/// P(f,g) / (1/2 sqrt(M(f,g)/M_gs) K(f,g)); at most 1 by the sharp
/// Gagliardo-Nirenberg inequality.
double gn_ratio(const ComplexField& f, const ComplexField& g, double ground_state_mass);
double gn_ratio(const ComplexField& f, const ComplexField& g, const GroundState& gs);

/// Lift a radial profile onto a grid (origin at the grid center).
std::pair<ComplexField, ComplexField> lift_radial(const Grid& grid, const RadialProfile& profile);

/// Ground-state artifact: metadata header lines ("# key=value") followed by
/// CSV columns r,phi,psi.
struct GroundStateArtifact {
  std::vector<std::pair<std::string, std::string>> metadata;
  RadialProfile profile;
  double mass = 0.0;

  std::optional<std::string> get(const std::string& key) const;
};

void write_ground_state_artifact(std::ostream& out, const GroundStateArtifact& artifact);
GroundStateArtifact read_ground_state_artifact(std::istream& in);
GroundStateArtifact load_ground_state_artifact(const std::string& path);

}  // namespace qnls
