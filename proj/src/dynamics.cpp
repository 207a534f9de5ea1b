#include "qnls/dynamics.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <tuple>

namespace qnls {

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::deterministic: return "deterministic";
    case SystemKind::rescaled: return "rescaled";
    case SystemKind::direct: return "direct";
  }
  return "?";
}

SystemKind parse_system_kind(const std::string& s) {
  if (s == "deterministic") return SystemKind::deterministic;
  if (s == "rescaled") return SystemKind::rescaled;
  if (s == "direct") return SystemKind::direct;
  throw UsageError("unknown system kind '" + s + "' (expected deterministic|rescaled|direct)");
}

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::zero: return "zero";
    case InitKind::gaussian: return "gaussian";
    case InitKind::ground_state: return "ground_state";
    case InitKind::file: return "file";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& s) {
  if (s == "zero") return InitKind::zero;
  if (s == "gaussian") return InitKind::gaussian;
  if (s == "ground_state") return InitKind::ground_state;
  if (s == "file") return InitKind::file;
  throw UsageError("unknown initial-data kind '" + s + "' (expected zero|gaussian|ground_state|file)");
}

std::string to_string(RescaledScheme s) { return s == RescaledScheme::strang ? "strang" : "rk4"; }

RescaledScheme parse_rescaled_scheme(const std::string& s) {
  if (s == "strang") return RescaledScheme::strang;
  if (s == "rk4") return RescaledScheme::rk4;
  throw UsageError("unknown rescaled scheme '" + s + "' (expected strang|rk4)");
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::horizon: return "horizon";
    case StopReason::blowup_threshold: return "blowup_threshold";
    case StopReason::numeric_failure: return "numeric_failure";
  }
  return "?";
}

namespace {

constexpr double kOverflowGuard = 1e150;

void check_overflow(const ComplexField& f, const char* where) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    const cplx v = f[i];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()) || std::abs(v) > kOverflowGuard) {
      std::ostringstream os;
      os << where << ": overflow at grid index " << i << "; reduce dt";
      throw NumericError(os.str());
    }
  }
}

}  // namespace

void nonlinear_substep_in_place(ComplexField& u, ComplexField& v, double h) {
  require_same_grid(u, v);
  if (!(h > 0.0)) throw UsageError("nonlinear_substep: h must be positive");
  const cplx I(0.0, 1.0);
  for (std::size_t p = 0; p < u.size(); ++p) {
    const cplx u0 = u[p], v0 = v[p];
    const cplx k1u = 2.0 * I * v0 * std::conj(u0), k1v = I * u0 * u0;
    const cplx u1 = u0 + 0.5 * h * k1u, v1 = v0 + 0.5 * h * k1v;
    const cplx k2u = 2.0 * I * v1 * std::conj(u1), k2v = I * u1 * u1;
    const cplx u2 = u0 + 0.5 * h * k2u, v2 = v0 + 0.5 * h * k2v;
    const cplx k3u = 2.0 * I * v2 * std::conj(u2), k3v = I * u2 * u2;
    const cplx u3 = u0 + h * k3u, v3 = v0 + h * k3v;
    const cplx k4u = 2.0 * I * v3 * std::conj(u3), k4v = I * u3 * u3;
    u[p] = u0 + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
    v[p] = v0 + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  check_overflow(u, "nonlinear_substep");
  check_overflow(v, "nonlinear_substep");
}

std::pair<ComplexField, ComplexField> nonlinear_substep(const ComplexField& u, const ComplexField& v, double h) {
  ComplexField a = u, b = v;
  nonlinear_substep_in_place(a, b, h);
  return {std::move(a), std::move(b)};
}

Integrator::Integrator(const Grid& grid, double dt, StepOptions options)
    : grid_(grid), dt_(dt), options_(options), half_u_(grid.size()), half_v_(grid.size()), mask_(grid.size()) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw UsageError("time step must be positive");
  const int cutoff = grid.dealias_cutoff();
  const double inv = 1.0 / static_cast<double>(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto ix = grid.unravel(i);
    double k2 = 0.0;
    bool keep = true;
    for (int j = 0; j < grid.dim(); ++j) {
      k2 += std::pow(grid.wavenumber(ix[j]), 2);
      keep = keep && std::abs(grid.mode(ix[j])) <= cutoff;
    }
    if (options_.dealias && !keep) continue;
    mask_[i] = inv;
    half_u_[i] = std::polar(inv, -k2 * dt / 2.0);
    half_v_[i] = std::polar(inv, -k2 * dt / 4.0);
  }
}

void Integrator::free_half_step(ComplexField& u, ComplexField& v) const {
  fft_in_place(u, Direction::forward);
  fft_in_place(v, Direction::forward);
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] *= half_u_[i];
    v[i] *= half_v_[i];
  }
  fft_in_place(u, Direction::inverse);
  fft_in_place(v, Direction::inverse);
}

void Integrator::step_deterministic(ComplexField& u, ComplexField& v) const {
  require_same_grid(u, v);
  if (!(u.grid() == grid_)) throw UsageError("field grid does not match the integrator grid");
  free_half_step(u, v);
  if (options_.nonlinear) nonlinear_substep_in_place(u, v, dt_);
  free_half_step(u, v);
}

void Integrator::middle_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model,
                                 const BrownianPaths& paths, double t, bool with_laplacian) const {
  const int d = grid_.dim();
  const std::size_t n = grid_.size();
  const DriftFields at_start = eval_drift_fields(model, paths.at_time(t));
  const DriftFields at_mid = eval_drift_fields(model, paths.at_time(t + 0.5 * dt_));
  const DriftFields at_end = eval_drift_fields(model, paths.at_time(t + dt_));
  const cplx I(0.0, 1.0);
  const bool nonlinear = options_.nonlinear;

  // y' = -2 g.grad y - (i|g|^2 + a) y + 2 i z conj(y)
  // z' = -2 g.grad z - (2i|g|^2 + a) z + i y^2
  auto rhs = [&](const DriftFields& df, const ComplexField& cy, const ComplexField& cz, ComplexField& dy,
                 ComplexField& dz) {
    const auto gy = gradient(cy);
    const auto gz = gradient(cz);
    if (with_laplacian) {
      dy = laplacian(cy, 1.0);
      dz = laplacian(cz, 0.5);
      dy *= I;
      dz *= I;
    } else {
      dy = ComplexField(grid_);
      dz = ComplexField(grid_);
    }
    for (std::size_t p = 0; p < n; ++p) {
      cplx adv_y{}, adv_z{};
      double g2 = 0.0;
      for (int j = 0; j < d; ++j) {
        const double gj = df.g[j][p];
        adv_y += gj * gy[j][p];
        adv_z += gj * gz[j][p];
        g2 += gj * gj;
      }
      const double a = df.a[p];
      dy[p] += -2.0 * adv_y - cplx(a, g2) * cy[p];
      dz[p] += -2.0 * adv_z - cplx(a, 2.0 * g2) * cz[p];
      if (nonlinear) {
        dy[p] += 2.0 * I * cz[p] * std::conj(cy[p]);
        dz[p] += I * cy[p] * cy[p];
      }
    }
  };

  ComplexField k1y(grid_), k1z(grid_), k2y(grid_), k2z(grid_), k3y(grid_), k3z(grid_), k4y(grid_), k4z(grid_);
  ComplexField sy(grid_), sz(grid_);
  auto stage = [&](const ComplexField& ky, const ComplexField& kz, double w) {
    for (std::size_t p = 0; p < n; ++p) {
      sy[p] = y[p] + w * ky[p];
      sz[p] = z[p] + w * kz[p];
    }
  };
  rhs(at_start, y, z, k1y, k1z);
  stage(k1y, k1z, 0.5 * dt_);
  rhs(at_mid, sy, sz, k2y, k2z);
  stage(k2y, k2z, 0.5 * dt_);
  rhs(at_mid, sy, sz, k3y, k3z);
  stage(k3y, k3z, dt_);
  rhs(at_end, sy, sz, k4y, k4z);
  const double w = dt_ / 6.0;
  for (std::size_t p = 0; p < n; ++p) {
    y[p] += w * (k1y[p] + 2.0 * k2y[p] + 2.0 * k3y[p] + k4y[p]);
    z[p] += w * (k1z[p] + 2.0 * k2z[p] + 2.0 * k3z[p] + k4z[p]);
  }
  check_overflow(y, "step_rescaled");
  check_overflow(z, "step_rescaled");
}

void Integrator::step_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model,
                               const BrownianPaths& paths, double t) const {
  require_same_grid(y, z);
  if (!(y.grid() == grid_) || !(model.grid() == grid_))
    throw UsageError("field or noise-model grid does not match the integrator grid");
  if (paths.count() != model.count()) throw UsageError("path count must equal the number of bumps");
  if (model.count() == 0 && options_.scheme == RescaledScheme::strang) {
    step_deterministic(y, z);
    return;
  }
  if (options_.scheme == RescaledScheme::rk4) {
    middle_rescaled(y, z, model, paths, t, true);
    if (options_.dealias) {
      for (ComplexField* f : {&y, &z}) {
        fft_in_place(*f, Direction::forward);
        for (std::size_t i = 0; i < f->size(); ++i) (*f)[i] *= mask_[i];
        fft_in_place(*f, Direction::inverse);
      }
    }
    return;
  }
  free_half_step(y, z);
  middle_rescaled(y, z, model, paths, t, false);
  free_half_step(y, z);
}

void Integrator::step_direct(ComplexField& u, ComplexField& v, const NoiseModel& model,
                             std::span<const double> dB) const {
  if (dB.size() != model.count()) throw UsageError("increment count must equal the number of bumps");
  if (!(model.grid() == grid_)) throw UsageError("noise-model grid does not match the integrator grid");
  step_deterministic(u, v);
  if (model.count() == 0) return;
  for (std::size_t p = 0; p < u.size(); ++p) {
    double theta = 0.0;
    for (std::size_t k = 0; k < model.count(); ++k) theta += model.fields(k).value[p] * dB[k];
    u[p] *= std::polar(1.0, theta);
    v[p] *= std::polar(1.0, 2.0 * theta);
  }
}

void step_deterministic(ComplexField& u, ComplexField& v, double dt, StepOptions options) {
  Integrator(u.grid(), dt, options).step_deterministic(u, v);
}

void step_rescaled(ComplexField& y, ComplexField& z, const NoiseModel& model, const BrownianPaths& paths, double t,
                   double dt, StepOptions options) {
  Integrator(y.grid(), dt, options).step_rescaled(y, z, model, paths, t);
}

void step_direct(ComplexField& u, ComplexField& v, const NoiseModel& model, std::span<const double> dB, double dt,
                 StepOptions options) {
  Integrator(u.grid(), dt, options).step_direct(u, v, model, dB);
}

std::pair<ComplexField, ComplexField> to_physical(const ComplexField& y, const ComplexField& z,
                                                  const NoiseModel& model, std::span<const double> b) {
  const ComplexField w = eval_W(model, b);
  ComplexField u = y, v = z;
  for (std::size_t p = 0; p < u.size(); ++p) {
    u[p] *= std::exp(w[p]);
    v[p] *= std::exp(2.0 * w[p]);
  }
  return {std::move(u), std::move(v)};
}

std::size_t SimulationConfig::steps() const {
  if (!(dt > 0.0)) throw UsageError("run.dt must be positive");
  if (!(T >= dt)) throw UsageError("run.T must be at least run.dt");
  const double ratio = T / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * ratio) throw UsageError("run.T must be an integer multiple of run.dt");
  return static_cast<std::size_t>(rounded);
}

void SimulationConfig::validate() const {
  const Grid g = grid();
  (void)steps();
  if (system == SystemKind::rescaled && step.scheme == RescaledScheme::rk4 &&
      dt > rk4_cfl * g.spacing() * g.spacing())
    throw UsageError("run.dt exceeds the explicit RK4 limit run.rk4_cfl * h^2");
  if (record_every < 1) throw UsageError("run.record_every must be >= 1");
  if (!(blowup_factor > 1.0)) throw UsageError("run.blowup_factor must exceed 1");
  if (path_dt < 0.0) throw UsageError("noise.path_dt must be nonnegative");
  if (bumps.size() > 16) throw UsageError("at most 16 noise bumps are supported");
  for (const auto& b : bumps)
    if (!(b.width > 0.0)) throw UsageError("noise bump width must be positive");
  if (init.mass_fraction && !(*init.mass_fraction >= 0.0)) throw UsageError("init.mass_fraction must be >= 0");
  if (init.kind == InitKind::gaussian && !(init.width > 0.0)) throw UsageError("init.width must be positive");
  if (init.kind == InitKind::file && (init.u_file.empty() || init.v_file.empty()))
    throw UsageError("init.kind = file needs init.u_file and init.v_file");
}

GroundStateReference resolve_ground_state(const SimulationConfig& config) {
  GroundStateReference ref;
  if (!config.ground_state_file.empty()) {
    auto art = load_ground_state_artifact(config.ground_state_file);
    if (art.profile.dim != config.dim)
      throw UsageError("ground-state artifact dimension does not match grid.dim");
    ref.mass = art.mass;
    ref.source = config.ground_state_file;
    ref.profile = std::move(art.profile);
    return ref;
  }
  GroundState gs = solve_radial_ground_state(config.dim, 1e-10);
  ref.mass = gs.mass;
  ref.source = "radial-shooting";
  ref.profile = std::move(gs.profile);
  return ref;
}

std::pair<ComplexField, ComplexField> make_initial_data(const SimulationConfig& config,
                                                        const GroundStateReference& gs) {
  const Grid grid = config.grid();
  const auto& spec = config.init;
  switch (spec.kind) {
    case InitKind::zero: return {ComplexField(grid), ComplexField(grid)};
    case InitKind::file: {
      auto [u, tu] = read_checkpoint(spec.u_file);
      auto [v, tv] = read_checkpoint(spec.v_file);
      if (!(u.grid() == grid) || !(v.grid() == grid))
        throw UsageError("initial-data checkpoint grid does not match the configured grid");
      return {std::move(u), std::move(v)};
    }
    case InitKind::gaussian: {
      ComplexField u(grid), v(grid);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        auto x = grid.position(i);
        double r2 = 0.0;
        for (int j = 0; j < grid.dim(); ++j) r2 += x[j] * x[j];
        u[i] = std::exp(-r2 / (2.0 * spec.width * spec.width));
        v[i] = spec.v_ratio * u[i];
      }
      double a = spec.amplitude;
      if (spec.mass_fraction) {
        const double m = mass(u, v);
        if (!(m > 0.0)) throw UsageError("gaussian initial data has zero mass");
        a = std::sqrt(*spec.mass_fraction * gs.mass / m);
      }
      u *= a;
      v *= a;
      return {std::move(u), std::move(v)};
    }
    case InitKind::ground_state: {
      if (!gs.profile) throw PreconditionError("ground-state initial data needs a radial profile");
      auto [u, v] = lift_radial(grid, *gs.profile);
      double s = spec.scale;
      if (spec.mass_fraction) s = std::sqrt(*spec.mass_fraction * gs.mass / mass(u, v));
      u *= s;
      v *= s;
      return {std::move(u), std::move(v)};
    }
  }
  throw UsageError("unsupported initial-data kind");
}

BrownianPaths trajectory_paths(const SimulationConfig& config, std::size_t count) {
  const double path_dt = config.path_dt > 0.0 ? config.path_dt : config.dt;
  const auto path_steps = static_cast<std::size_t>(std::ceil(config.T / path_dt - 1e-9));
  return sample_paths(count, path_dt, path_steps, config.seed);
}

TrajectoryResult run_trajectory(const SimulationConfig& config) {
  config.validate();
  return run_trajectory(config, resolve_ground_state(config));
}

TrajectoryResult run_trajectory(const SimulationConfig& config, const GroundStateReference& gs) {
  config.validate();
  const Grid grid = config.grid();
  const std::size_t steps = config.steps();
  const bool noisy = config.system != SystemKind::deterministic;
  const NoiseModel model = noisy ? NoiseModel(grid, config.bumps) : NoiseModel::none(grid);
  const BrownianPaths paths = trajectory_paths(config, model.count());
  const Integrator integ(grid, config.dt, config.step);

  TrajectoryResult res;
  res.seed = config.seed;
  res.ground_state_mass = gs.mass;
  res.ground_state_source = gs.source;
  std::tie(res.u, res.v) = make_initial_data(config, gs);

  auto record = [&](double t) {
    ObservableRecord r = observe(t, res.u, res.v);
    switch (config.system) {
      case SystemKind::deterministic: r.dE_rhs = 0.0; break;
      case SystemKind::rescaled: r.dE_rhs = energy_rate_rhs(res.u, res.v, model, paths.at_time(t)); break;
      case SystemKind::direct: break;
    }
    res.series.records.push_back(r);
    return r;
  };

  const double h1_0 = record(0.0).H1_sum;
  res.blowup_threshold =
      h1_0 > 0.0 ? config.blowup_factor * h1_0 : std::numeric_limits<double>::infinity();

  ComplexField last_u = res.u, last_v = res.v;
  for (std::size_t m = 1; m <= steps; ++m) {
    const double t0 = config.dt * static_cast<double>(m - 1);
    const double t1 = config.dt * static_cast<double>(m);
    try {
      switch (config.system) {
        case SystemKind::deterministic: integ.step_deterministic(res.u, res.v); break;
        case SystemKind::rescaled: integ.step_rescaled(res.u, res.v, model, paths, t0); break;
        case SystemKind::direct: {
          auto b0 = paths.at_time(t0);
          auto b1 = paths.at_time(t1);
          for (std::size_t k = 0; k < b0.size(); ++k) b1[k] -= b0[k];
          integ.step_direct(res.u, res.v, model, b1);
          break;
        }
      }
    } catch (const NumericError& e) {
      res.u = last_u;
      res.v = last_v;
      res.stop_reason = StopReason::numeric_failure;
      res.stop_time = t0;
      res.failure_message = e.what();
      break;
    }
    const bool due = m % static_cast<std::size_t>(config.record_every) == 0 || m == steps;
    const double h1 = due ? record(t1).H1_sum : h1_norm(res.u) + h1_norm(res.v);
    if (h1 > res.blowup_threshold) {
      if (!due) record(t1);
      res.stop_reason = StopReason::blowup_threshold;
      res.stop_time = t1;
      break;
    }
    if (m == steps) res.stop_time = config.T;
    last_u = res.u;
    last_v = res.v;
  }

  res.fit_c = fit_gronwall_constant(res.series);
  res.bounds = check_bounds(res.series, gs.mass, res.fit_c);
  if (config.dim != 4) {
    // The coercivity bound is the mass-critical statement; elsewhere it is not evaluated.
    res.bounds.coercivity_applicable = false;
    res.bounds.first_coercivity_violation.reset();
    std::fill(res.bounds.flag_E2.begin(), res.bounds.flag_E2.end(), -1);
  }
  apply_flags(res.series, res.bounds);
  return res;
}

namespace {

constexpr char kMagic[8] = {'Q', 'N', 'L', 'S', 'F', 'L', 'D', '1'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw UsageError("checkpoint: truncated header");
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ComplexField& f, double t) {
  const Grid& g = f.grid();
  out.write(kMagic, sizeof kMagic);
  put<std::int32_t>(out, g.dim());
  put<std::int32_t>(out, g.points());
  put<double>(out, g.length());
  put<double>(out, t);
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(cplx)));
}

void write_checkpoint(const std::string& path, const ComplexField& f, double t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write checkpoint " + path);
  write_checkpoint(out, f, t);
}

std::pair<ComplexField, double> read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw UsageError("checkpoint: bad magic");
  const auto d = get<std::int32_t>(in);
  const auto n = get<std::int32_t>(in);
  const auto L = get<double>(in);
  const auto t = get<double>(in);
  Grid grid(d, n, L);
  ComplexField f(grid);
  if (!in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(cplx))))
    throw UsageError("checkpoint: truncated payload");
  return {std::move(f), t};
}

std::pair<ComplexField, double> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PreconditionError("checkpoint not found: " + path);
  return read_checkpoint(in);
}

}  // namespace qnls
