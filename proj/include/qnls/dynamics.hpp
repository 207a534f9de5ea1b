#pragma once

// Time integration of the deterministic, rescaled-random and direct
// stochastic forms of the quadratic Schrodinger system.
//
//   deterministic:  u_t = i Lap u + 2 i v conj(u),         v_t = i/2 Lap v + i u^2
//   rescaled:       y_t = i (Lap + b1.grad + c1) y + 2 i z conj(y)
//                   z_t = i (1/2 Lap + b2.grad + c2) z + i y^2
//   direct (Ito):   du = (...) dt - mu u dt + u dW,        dv = (...) dt - mu~ v dt + v dW~

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qnls/ground_state.hpp"
#include "qnls/noise.hpp"
#include "qnls/observables.hpp"
#include "qnls/spectral.hpp"

namespace qnls {

enum class SystemKind { deterministic, rescaled, direct };
std::string to_string(SystemKind k);
SystemKind parse_system_kind(const std::string& s);

/// One classical RK4 step of the pointwise system u' = 2 i v conj(u), v' = i u^2.
std::pair<ComplexField, ComplexField> nonlinear_substep(const ComplexField& u, const ComplexField& v, double h);
void nonlinear_substep_in_place(ComplexField& u, ComplexField& v, double h);

/// Rescaled-system scheme. strang: exact free flow around an RK4 step of the
/// coefficient and nonlinear terms. rk4: classical RK4 on the whole right-hand
/// side (method of lines), stable for dt <~ 2.8 / max|k|^2.
enum class RescaledScheme { strang, rk4 };
std::string to_string(RescaledScheme s);
RescaledScheme parse_rescaled_scheme(const std::string& s);

struct StepOptions {
  bool nonlinear = true;  // test switch: false drops the quadratic terms
  bool dealias = true;    // 2/3-rule projection folded into the linear half steps
  RescaledScheme scheme = RescaledScheme::strang;
};

/// Fixed-step integrator for one grid and one dt. The free-flow multipliers
/// are computed once at construction.
class Integrator {
 public:
  Integrator(const Grid& grid, double dt, StepOptions options = {});

  const Grid& grid() const { return grid_; }
  double dt() const { return dt_; }

  /// Strang: half free flow, RK4 nonlinear substep, half free flow.
  void step_deterministic(ComplexField& u, ComplexField& v) const;

  /// Strang: half free flow, one RK4 step over dt of the coefficient and
  /// nonlinear terms (B interpolated at the stage times t, t+dt/2, t+dt),
  /// half free flow. With N = 0 this is step_deterministic exactly.
  void step_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model, const BrownianPaths& paths,
                     double t) const;

  /// step_deterministic followed by the exact pointwise flow of the noise,
  /// u <- u exp(i sum phi_k dB_k), v <- v exp(2 i sum phi_k dB_k).
  void step_direct(ComplexField& u, ComplexField& v, const NoiseModel& model, std::span<const double> dB) const;

 private:
  void free_half_step(ComplexField& u, ComplexField& v) const;
  void middle_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model, const BrownianPaths& paths,
                       double t, bool with_laplacian) const;

  Grid grid_;
  double dt_;
  StepOptions options_;
  std::vector<cplx> half_u_;  // exp(-i |k|^2 dt/2) / size, with the dealiasing mask
  std::vector<cplx> half_v_;  // exp(-i |k|^2 dt/4) / size
  std::vector<double> mask_;  // dealiasing mask / size
};

void step_deterministic(ComplexField& u, ComplexField& v, double dt, StepOptions options = {});
void step_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model, const BrownianPaths& paths, double t,
                   double dt, StepOptions options = {});
void step_direct(ComplexField& u, ComplexField& v, const NoiseModel& model, std::span<const double> dB, double dt,
                 StepOptions options = {});

/// u = e^W y, v = e^{W~} z at Brownian values b.
std::pair<ComplexField, ComplexField> to_physical(const ComplexField& y, const ComplexField& z,
                                                  const NoiseModel& model, std::span<const double> b);

enum class InitKind { zero, gaussian, ground_state, file };
std::string to_string(InitKind k);
InitKind parse_init_kind(const std::string& s);

struct InitialDataSpec {
  InitKind kind = InitKind::gaussian;
  /// Gaussian: u0 = A exp(-|xi|^2 / (2 w^2)), v0 = v_ratio * u0.
  double width = 1.5;
  double v_ratio = 0.5;
  double amplitude = 1.0;
  /// Ground state: u0 = s phi, v0 = s psi.
  double scale = 1.0;
  /// When set, A or s is chosen so that M(u0, v0) = mass_fraction * M_gs.
  std::optional<double> mass_fraction;
  std::string u_file;
  std::string v_file;
};

struct SimulationConfig {
  SystemKind system = SystemKind::deterministic;
  int dim = 2;
  int points = 64;
  double length = 20.0;
  std::vector<BumpSpec> bumps;
  /// Brownian lattice spacing; 0 means the integrator step.
  double path_dt = 0.0;
  double T = 1.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  /// Blow-up surrogate: H1 sum above blowup_factor * initial H1 sum.
  double blowup_factor = 1e3;
  int record_every = 1;
  InitialDataSpec init;
  std::string ground_state_file;
  StepOptions step;
  /// dt cap c * h^2 for the explicit RK4 rescaled scheme.
  double rk4_cfl = 0.1;

  Grid grid() const { return Grid(dim, points, length); }
  /// Number of steps; throws UsageError unless T is a positive multiple of dt.
  std::size_t steps() const;
  void validate() const;
};

enum class StopReason { horizon, blowup_threshold, numeric_failure };
std::string to_string(StopReason r);

struct TrajectoryResult {
  /// Integrated variables: (u, v) or, for the rescaled system, (y, z).
  ComplexField u;
  ComplexField v;
  ObservableSeries series;
  double stop_time = 0.0;
  StopReason stop_reason = StopReason::horizon;
  std::string failure_message;
  std::uint64_t seed = 0;
  double blowup_threshold = 0.0;
  double ground_state_mass = 0.0;
  std::string ground_state_source;
  double fit_c = 0.0;
  BoundsDiagnostics bounds;
};

/// Ground-state mass used for thresholds and mass-fraction initial data:
/// from the configured artifact, or a radial shooting solve otherwise.
struct GroundStateReference {
  double mass = 0.0;
  std::string source;
  std::optional<RadialProfile> profile;
};
GroundStateReference resolve_ground_state(const SimulationConfig& config);

std::pair<ComplexField, ComplexField> make_initial_data(const SimulationConfig& config,
                                                        const GroundStateReference& gs);

/// Brownian lattice used by run_trajectory: spacing path_dt (or dt), covering [0, T].
BrownianPaths trajectory_paths(const SimulationConfig& config, std::size_t count);

TrajectoryResult run_trajectory(const SimulationConfig& config);
TrajectoryResult run_trajectory(const SimulationConfig& config, const GroundStateReference& gs);

/// Flat binary field checkpoint: "QNLSFLD1", int32 d, int32 n, double L,
/// double t, then interleaved (re, im) doubles in row-major order.
void write_checkpoint(std::ostream& out, const ComplexField& f, double t);
void write_checkpoint(const std::string& path, const ComplexField& f, double t);
std::pair<ComplexField, double> read_checkpoint(std::istream& in);
std::pair<ComplexField, double> read_checkpoint(const std::string& path);

}  // namespace qnls
