// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qnls/dynamics.hpp"
#include "qnls/experiment.hpp"
#include "qnls/ground_state.hpp"
#include "qnls/noise.hpp"
#include "qnls/observables.hpp"

using namespace qnls;

namespace {

using Clock = std::chrono::steady_clock;

struct Check {
  std::string what;
  double value;
  double limit;
  char rel;  // '<' or '>'
  bool ok() const { return std::isfinite(value) && (rel == '<' ? value < limit : value > limit); }
};

struct Outcome {
  std::vector<Check> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.ok(); });
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double rel_l2(const ComplexField& a, const ComplexField& b) { return std::sqrt(norm_sq(a - b) / norm_sq(b)); }

BumpSpec bump(double amplitude, double width, std::initializer_list<double> center) {
  BumpSpec b;
  b.amplitude = amplitude;
  b.width = width;
  int j = 0;
  for (double c : center) b.center[j++] = c;
  return b;
}

std::pair<ComplexField, ComplexField> pulse_1d(const Grid& g) {
  ComplexField u(g), v(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.position(i)[0];
    u[i] = 1.2 * std::exp(-x * x / 4.0) * std::polar(1.0, 0.5 * x);
    v[i] = 0.6 * std::exp(-x * x / 3.0);
  }
  return {u, v};
}

std::pair<ComplexField, ComplexField> pulse_2d(const Grid& g) {
  ComplexField u(g), v(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.position(i);
    const double r2 = x[0] * x[0] + x[1] * x[1];
    u[i] = std::exp(-r2 / 3.0) * std::polar(1.0, 0.4 * x[0]);
    v[i] = 0.5 * std::exp(-((x[0] - 0.5) * (x[0] - 0.5) + x[1] * x[1]) / 2.5);
  }
  return {u, v};
}

// 1. Sum of the raw rate integrals against the simplified rate.
Outcome cancellation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  int pairs = 0;
  for (int d = 1; d <= 2; ++d) {
    const Grid g(d, 64, 24.0);
    for (int s = 0; s < 50; ++s, ++pairs) {
      std::vector<BumpSpec> bumps(2);
      for (auto& b : bumps) {
        b.amplitude = 0.5 + unit(rng);
        b.width = 1.5 + 0.2 * unit(rng);
        for (int j = 0; j < d; ++j) b.center[j] = -0.75 + 1.5 * unit(rng);
      }
      const NoiseModel model(g, bumps);
      const ComplexField y = random_band_limited(g, g.points() / 6, rng);
      const ComplexField z = random_band_limited(g, g.points() / 6, rng);
      const std::vector<double> b = {normal(rng), normal(rng)};
      double sum = 0.0;
      for (double t : raw_energy_rate_terms(y, z, model, b)) sum += t;
      const double rhs = energy_rate_rhs(y, z, model, b);
      worst = std::max(worst, std::abs(sum - rhs) / std::max(std::abs(sum), 1e-300));
    }
  }
  return {{{"worst relative mismatch over " + std::to_string(pairs) + " pairs", worst, 1e-8, '<'},
           {"runtime [s]", seconds_since(t0), 60.0, '<'}}};
}

// Shared by 2 and 3: deterministic d = 2 runs to T = 1 at two step sizes.
struct DeterministicRuns {
  std::vector<double> mass_drift, energy_drift;
  double seconds = 0.0;
};

const DeterministicRuns& deterministic_runs() {
  static const DeterministicRuns runs = [] {
    const auto t0 = Clock::now();
    DeterministicRuns r;
    const Grid g(2, 128, 32.0);
    for (double dt : {1e-3, 5e-4}) {
      auto [u, v] = pulse_2d(g);
      const double m0 = mass(u, v), e0 = energy(u, v);
      const Integrator integ(g, dt);
      const auto steps = static_cast<std::size_t>(std::llround(1.0 / dt));
      const std::size_t every = steps / 100;
      double md = 0.0, ed = 0.0;
      for (std::size_t s = 1; s <= steps; ++s) {
        integ.step_deterministic(u, v);
        if (s % every != 0) continue;
        md = std::max(md, std::abs(mass(u, v) - m0) / m0);
        ed = std::max(ed, std::abs(energy(u, v) - e0) / std::abs(e0));
      }
      r.mass_drift.push_back(md);
      r.energy_drift.push_back(ed);
    }
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

// 2. Mass conservation, deterministic and rescaled (explicit RK4 scheme).
Outcome mass_conservation() {
  const DeterministicRuns& det = deterministic_runs();
  const auto t0 = Clock::now();
  const Grid g(2, 128, 32.0);
  const NoiseModel model(g, {bump(1.0, 2.2, {-0.5, 0.3}), bump(0.8, 2.0, {0.7, -0.4})});
  const BrownianPaths paths = sample_paths(2, 1e-2, 100, 11);
  std::vector<double> drift;
  for (double dt : {1e-3, 5e-4}) {
    auto [y, z] = pulse_2d(g);
    const double m0 = mass(y, z);
    StepOptions opt;
    opt.scheme = RescaledScheme::rk4;
    const Integrator integ(g, dt, opt);
    const auto steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    const std::size_t every = steps / 100;
    double worst = 0.0;
    for (std::size_t s = 1; s <= steps; ++s) {
      integ.step_rescaled(y, z, model, paths, dt * static_cast<double>(s - 1));
      if (s % every == 0) worst = std::max(worst, std::abs(mass(y, z) - m0) / m0);
    }
    drift.push_back(worst);
  }
  const double runtime = det.seconds + seconds_since(t0);
  return {{{"deterministic drift, dt 1e-3", det.mass_drift[0], 1e-8, '<'},
           {"rescaled drift, dt 1e-3", drift[0], 1e-6, '<'},
           {"rescaled drift ratio dt/(dt/2)", drift[0] / drift[1], 8.0, '>'},
           {"runtime [s]", runtime, 120.0, '<'}}};
}

// 3. Deterministic energy conservation and its order.
Outcome energy_conservation() {
  const DeterministicRuns& det = deterministic_runs();
  const double order = std::log2(det.energy_drift[0] / det.energy_drift[1]);
  return {{{"energy drift, dt 1e-3", det.energy_drift[0], 1e-5, '<'},
           {"order", order, 1.7, '>'},
           {"order", order, 2.3, '<'}}};
}

// 4. Centered difference of E along a rescaled trajectory against the rate.
Outcome energy_rate() {
  const Grid g(1, 256, 40.0);
  const NoiseModel model(g, {bump(0.8, 2.5, {-1.0}), bump(1.0, 2.0, {1.5})});
  // B is piecewise linear on this lattice; differences are taken at the
  // interval midpoints, where E is smooth on both sides.
  const double lattice = 1e-2;
  const BrownianPaths paths = sample_paths(2, lattice, 50, 42);
  std::vector<double> err;
  const double dts[] = {2e-4, 1e-4, 5e-5};
  for (double dt : dts) {
    auto [y, z] = pulse_1d(g);
    const Integrator integ(g, dt);
    const auto steps = static_cast<std::size_t>(std::llround(0.5 / dt));
    const auto per = static_cast<std::size_t>(std::llround(lattice / dt));
    std::vector<double> E(steps + 1), rate(steps + 1, std::numeric_limits<double>::quiet_NaN());
    E[0] = energy(y, z);
    for (std::size_t s = 1; s <= steps; ++s) {
      integ.step_rescaled(y, z, model, paths, dt * static_cast<double>(s - 1));
      E[s] = energy(y, z);
      if (s % per == per / 2) rate[s] = energy_rate_rhs(y, z, model, paths.at_time(dt * static_cast<double>(s)));
    }
    double diff = 0.0, scale = 0.0;
    for (std::size_t s = 1; s < steps; ++s) {
      if (std::isnan(rate[s])) continue;
      const double fd = (E[s + 1] - E[s - 1]) / (2.0 * dt);
      diff = std::max(diff, std::abs(fd - rate[s]));
      scale = std::max(scale, std::abs(rate[s]));
    }
    err.push_back(diff / scale);
  }
  return {{{"relative error at dt 1e-4", err[1], 1e-3, '<'},
           {"order 2e-4 -> 1e-4", std::log2(err[0] / err[1]), 1.7, '>'},
           {"order 1e-4 -> 5e-5", std::log2(err[1] / err[2]), 1.7, '>'}}};
}

// Ground state used by 5 and 6: grid flow at d = 4, n = 32, warm-started from shooting.
struct GroundStatePair {
  GroundState shooting;
  GroundState flow;
  double seconds = 0.0;
};

const GroundStatePair& ground_states() {
  static const GroundStatePair pair = [] {
    const auto t0 = Clock::now();
    GroundStatePair p;
    const Grid g(4, 32, 12.0);
    p.shooting = solve_ground_state(g, GroundStateMethod::shooting, 1e-10);
    GroundStateOptions opt;
    opt.warm_start = p.shooting.profile;
    p.flow = solve_ground_state(g, GroundStateMethod::flow, 1e-10, opt);
    p.seconds = seconds_since(t0);
    return p;
  }();
  return pair;
}

// 5. Shooting against flow, residuals, dilation and zero energy.
Outcome ground_state() {
  const GroundStatePair& p = ground_states();
  const GroundState& f = p.flow;
  const double gap = std::sqrt(mass(f.phi - p.shooting.phi, f.psi - p.shooting.psi) / mass(p.shooting.phi, p.shooting.psi));
  const double I = action(f.phi, f.psi);
  return {{{"L2 gap flow vs shooting", gap, 1e-4, '<'},
           {"residual phi eq", f.residual[0], 1e-8, '<'},
           {"residual psi eq", f.residual[1], 1e-8, '<'},
           {"|dI/dlambda| / I", std::abs(dilation_derivative(f.phi, f.psi)) / I, 1e-6, '<'},
           {"|E| / K", std::abs(f.energy) / f.kinetic, 1e-5, '<'},
           {"runtime [s]", p.seconds, 600.0, '<'}}};
}

// 6. Sharp GN inequality on random pairs and at the ground state.
Outcome gagliardo_nirenberg() {
  const GroundState& gs = ground_states().flow;
  const Grid& g = gs.phi.grid();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < 100; ++s) {
    ComplexField f = random_band_limited(g, g.points() / 6, rng);
    ComplexField h = random_band_limited(g, g.points() / 6, rng);
    if (s % 2 == 0) {
      const double w = 1.0 + 2.0 * unit(rng);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.position(i);
        double r2 = 0.0;
        for (int j = 0; j < 4; ++j) r2 += x[j] * x[j];
        const double env = std::exp(-r2 / (2.0 * w * w));
        f[i] = env * (1.0 + 0.3 * f[i]);
        h[i] = env * (0.5 + 0.3 * h[i]);
      }
    }
    worst = std::max(worst, gn_ratio(f, h, gs));
  }
  return {{{"max ratio - 1 over 100 pairs", worst - 1.0, 1e-6, '<'},
           {"|ratio(gs) - 1|", std::abs(gn_ratio(gs.phi, gs.psi, gs) - 1.0), 1e-3, '<'}}};
}

// 7. Direct run against the gauge-transformed rescaled run on one Brownian lattice.
Outcome equivalence() {
  const Grid g(1, 256, 40.0);
  const NoiseModel model(g, {bump(1.0, 2.0, {-1.0}), bump(0.7, 2.5, {1.5})});
  const BrownianPaths fine = sample_paths(2, 1.25e-4, 4000, 5);
  std::vector<double> gap;
  for (std::size_t factor : {8, 4, 2, 1}) {
    const BrownianPaths p = fine.coarsen(factor);
    const Integrator integ(g, p.dt());
    auto [u, v] = pulse_1d(g);
    ComplexField y = u, z = v;
    for (std::size_t m = 1; m <= p.steps(); ++m) {
      integ.step_rescaled(y, z, model, p, p.dt() * static_cast<double>(m - 1));
      auto db = p.at_step(m);
      const auto b0 = p.at_step(m - 1);
      for (std::size_t k = 0; k < db.size(); ++k) db[k] -= b0[k];
      integ.step_direct(u, v, model, db);
    }
    auto [pu, pv] = to_physical(y, z, model, p.at_step(p.steps()));
    gap.push_back(rel_l2(u, pu));
  }
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < gap.size(); ++i) worst_ratio = std::min(worst_ratio, gap[i - 1] / gap[i]);
  return {{{"discrepancy at dt 1e-3", gap[0], 5e-3, '<'}, {"min ratio per halving", worst_ratio, 1.0, '>'}}};
}

// 8. d = 4 ensemble at 0.81 of the ground-state mass.
Outcome boundedness() {
  const auto t0 = Clock::now();
  SimulationConfig c;
  c.system = SystemKind::rescaled;
  c.dim = 4;
  c.points = 16;
  c.length = 16.0;
  c.T = 1.0;
  c.dt = 0.01;
  c.seed = 1000;
  c.bumps = {bump(1.0, 1.0, {0.5, 0.0, 0.0, 0.0}), bump(0.8, 1.0, {-0.5, 0.5, 0.0, 0.0})};
  c.init.kind = InitKind::gaussian;
  c.init.width = 1.8;
  c.init.mass_fraction = 0.81;
  const GroundStateReference gs = resolve_ground_state(c);
  const int jobs = std::max(1u, std::thread::hardware_concurrency());
  const EnsembleSummary sum = run_ensemble(c, 20, jobs, gs);
  double coercive = 0.0, envelope = 0.0;
  for (const auto& m : sum.members) {
    coercive += m.coercivity_flag == 0 ? 1.0 : 0.0;
    envelope += m.envelope_pass && std::isfinite(m.fit_c) ? 1.0 : 0.0;
  }
  return {{{"trajectories reaching the horizon", static_cast<double>(sum.horizon_count()), 19.5, '>'},
           {"coercivity held on every record", coercive, 19.5, '>'},
           {"envelope certified with finite fitC", envelope, 19.5, '>'},
           {"max fitC", sum.fit_c_max(), std::numeric_limits<double>::infinity(), '<'},
           {"runtime [s]", seconds_since(t0), 900.0, '<'}}};
}

// 9. Without noise both stochastic forms reduce to the deterministic step.
Outcome reduction() {
  const Grid g(2, 128, 32.0);
  const NoiseModel none = NoiseModel::none(g);
  const BrownianPaths empty = sample_paths(0, 1e-3, 100, 0);
  const Integrator integ(g, 1e-3);
  auto [ud, vd] = pulse_2d(g);
  ComplexField ur = ud, vr = vd, ux = ud, vx = vd;
  for (int s = 0; s < 100; ++s) {
    integ.step_deterministic(ud, vd);
    integ.step_rescaled(ur, vr, none, empty, 1e-3 * s);
    integ.step_direct(ux, vx, none, {});
  }
  return {{{"rescaled vs deterministic", std::max(rel_l2(ur, ud), rel_l2(vr, vd)), 1e-10, '<'},
           {"direct vs deterministic", std::max(rel_l2(ux, ud), rel_l2(vx, vd)), 1e-10, '<'}}};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"cancellation identity", cancellation},
      {"mass conservation", mass_conservation},
      {"deterministic energy conservation", energy_conservation},
      {"energy-rate consistency", energy_rate},
      {"ground state", ground_state},
      {"sharp GN inequality", gagliardo_nirenberg},
      {"rescaling equivalence", equivalence},
      {"global boundedness below threshold", boundedness},
      {"reduction consistency", reduction},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = false;
    try {
      const Outcome out = criteria[i].second();
      ok = out.ok();
      char buf[160];
      for (const auto& c : out.checks) {
        std::snprintf(buf, sizeof buf, "%s%s%s %.3g %c %.3g", detail.empty() ? "" : "; ", c.ok() ? "" : "!",
                      c.what.c_str(), c.value, c.rel, c.limit);
        detail += buf;
      }
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    failed += ok ? 0 : 1;
    std::printf("criterion %zu %-36s %s  [%s] (%.1f s)\n", i + 1, criteria[i].first.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
