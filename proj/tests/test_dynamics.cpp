#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qnls/dynamics.hpp"
#include "qnls/errors.hpp"

using namespace qnls;

namespace {

BumpSpec bump(double a, double sigma, double c0) {
  BumpSpec b;
  b.amplitude = a;
  b.width = sigma;
  b.center[0] = c0;
  return b;
}

bool identical(const ComplexField& a, const ComplexField& b) {
  if (!(a.grid() == b.grid())) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

double rel(const ComplexField& a, const ComplexField& b) { return std::sqrt(norm_sq(a - b) / norm_sq(b)); }

std::pair<ComplexField, ComplexField> pulse(const Grid& g) {
  ComplexField u(g), v(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.position(i)[0];
    u[i] = 1.2 * std::exp(-x * x / 4.0) * std::polar(1.0, 0.5 * x);
    v[i] = 0.6 * std::exp(-x * x / 3.0);
  }
  return {u, v};
}

SimulationConfig small_config() {
  SimulationConfig c;
  c.dim = 1;
  c.points = 256;
  c.length = 40.0;
  c.T = 0.2;
  c.dt = 1e-3;
  c.seed = 9;
  c.init.kind = InitKind::gaussian;
  c.init.width = 1.5;
  c.init.amplitude = 1.0;
  c.bumps = {bump(1.0, 2.0, -1.0), bump(0.7, 2.5, 1.5)};
  return c;
}

}  // namespace

TEST_CASE("pointwise nonlinear step") {
  const Grid g(1, 4, 1.0);
  SUBCASE("u = 0 is a fixed point") {
    ComplexField u(g), v(g, cplx(0.3, -0.2));
    nonlinear_substep_in_place(u, v, 0.1);
    CHECK(u.max_abs() == 0.0);
    CHECK(v[0] == cplx(0.3, -0.2));
  }
  SUBCASE("v = 0 grows linearly in h") {
    // u' = 0 at v = 0 to first order; the exact solution has v(h) = i u0^2 h + O(h^3).
    ComplexField u(g, cplx(0.5, 0.1)), v(g);
    nonlinear_substep_in_place(u, v, 1e-4);
    const cplx expected = cplx(0.0, 1e-4) * cplx(0.5, 0.1) * cplx(0.5, 0.1);
    CHECK(std::abs(v[0] - expected) < 1e-11);
  }
  SUBCASE("one step against a fine RK4 reference") {
    const cplx u0(0.8, 0.3), v0(-0.4, 0.6);
    auto f = [](cplx u, cplx v) { return std::pair{cplx(0, 2) * v * std::conj(u), cplx(0, 1) * u * u}; };
    cplx ru = u0, rv = v0;
    const int substeps = 1000;
    const double h = 1e-2 / substeps;
    for (int s = 0; s < substeps; ++s) {
      auto [a1, b1] = f(ru, rv);
      auto [a2, b2] = f(ru + 0.5 * h * a1, rv + 0.5 * h * b1);
      auto [a3, b3] = f(ru + 0.5 * h * a2, rv + 0.5 * h * b2);
      auto [a4, b4] = f(ru + h * a3, rv + h * b3);
      ru += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
      rv += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    }
    auto [u, v] = nonlinear_substep(ComplexField(g, u0), ComplexField(g, v0), 1e-2);
    CHECK(std::abs(u[2] - ru) < 1e-10);
    CHECK(std::abs(v[2] - rv) < 1e-10);
  }
  CHECK_THROWS_AS(nonlinear_substep(ComplexField(g), ComplexField(g), 0.0), UsageError);
}

TEST_CASE("linear flow rotates plane waves by their dispersion phase") {
  const Grid g(2, 32, 10.0);
  const int m[] = {2, -1};
  const double k2 = std::pow(2.0 * std::numbers::pi / 10.0, 2) * 5.0;
  ComplexField u = plane_wave(g, m), v = plane_wave(g, m);
  const ComplexField u0 = u, v0 = v;
  StepOptions opt;
  opt.nonlinear = false;
  const Integrator integ(g, 0.01, opt);
  for (int s = 0; s < 10; ++s) integ.step_deterministic(u, v);
  CHECK(rel(u, std::polar(1.0, -k2 * 0.1) * u0) < 1e-12);
  CHECK(rel(v, std::polar(1.0, -0.5 * k2 * 0.1) * v0) < 1e-12);
}

TEST_CASE("deterministic Strang: mass conserved, energy drift second order") {
  const Grid g(1, 256, 40.0);
  auto run = [&](double dt) {
    auto [u, v] = pulse(g);
    const double m0 = mass(u, v), e0 = energy(u, v);
    const Integrator integ(g, dt);
    const int steps = static_cast<int>(std::lround(0.5 / dt));
    for (int s = 0; s < steps; ++s) integ.step_deterministic(u, v);
    return std::pair{std::abs(mass(u, v) - m0) / m0, std::abs(energy(u, v) - e0) / std::abs(e0)};
  };
  const auto [m1, e1] = run(2e-3);
  const auto [m2, e2] = run(1e-3);
  CHECK(m1 < 1e-10);
  CHECK(m2 < 1e-10);
  CHECK(e1 < 1e-4);
  CHECK(std::log2(e1 / e2) > 1.7);
}

TEST_CASE("without noise every system form reduces to the deterministic step") {
  const Grid g(1, 128, 32.0);
  auto [u0, v0] = pulse(g);
  const Integrator integ(g, 1e-3);
  ComplexField ud = u0, vd = v0, ur = u0, vr = v0, ux = u0, vx = v0;
  const NoiseModel none = NoiseModel::none(g);
  const BrownianPaths paths = sample_paths(0, 1e-3, 20, 1);
  for (int s = 0; s < 20; ++s) {
    integ.step_deterministic(ud, vd);
    integ.step_rescaled(ur, vr, none, paths, s * 1e-3);
    integ.step_direct(ux, vx, none, {});
  }
  CHECK(identical(ur, ud));
  CHECK(identical(vr, vd));
  CHECK(identical(ux, ud));
  CHECK(identical(vx, vd));

  SUBCASE("a spatially constant coefficient leaves the rescaled flow unchanged") {
    BumpSpec c;
    c.shape = BumpShape::constant;
    c.amplitude = 0.3;
    const NoiseModel flat(g, {c}, true);
    const BrownianPaths p = sample_paths(1, 1e-3, 20, 3);
    ComplexField y = u0, z = v0;
    for (int s = 0; s < 20; ++s) integ.step_rescaled(y, z, flat, p, s * 1e-3);
    CHECK(rel(y, ud) < 1e-13);
    CHECK(rel(z, vd) < 1e-13);
  }
}

TEST_CASE("direct step applies the exact noise phase") {
  const Grid g(1, 64, 24.0);
  const NoiseModel model(g, {bump(0.8, 1.5, 0.0)});
  StepOptions opt;
  opt.nonlinear = false;
  opt.dealias = false;
  const Integrator integ(g, 1e-3, opt);
  ComplexField u(g, 1.0), v(g, 0.5);
  const double dB = 0.03;
  integ.step_direct(u, v, model, std::vector<double>{dB});
  const ComplexField phi = model.phi(0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(u[i] - std::polar(1.0, phi[i].real() * dB)) < 1e-14);
    CHECK(std::abs(v[i] - 0.5 * std::polar(1.0, 2.0 * phi[i].real() * dB)) < 1e-14);
  }
  CHECK(mass(u, v) == doctest::Approx(mass(ComplexField(g, 1.0), ComplexField(g, 0.5))).epsilon(1e-14));
}

TEST_CASE("to_physical inverts the gauge transform") {
  const Grid g(1, 64, 24.0);
  const NoiseModel model(g, {bump(1.0, 1.5, 0.0)});
  auto [y, z] = pulse(g);
  const std::vector<double> b = {0.6};
  auto [u, v] = to_physical(y, z, model, b);
  const ComplexField W = eval_W(model, b);
  for (std::size_t i = 0; i < g.size(); i += 7) {
    CHECK(std::abs(u[i] - std::exp(W[i]) * y[i]) < 1e-14);
    CHECK(std::abs(v[i] - std::exp(2.0 * W[i]) * z[i]) < 1e-14);
  }
}

TEST_CASE("direct and rescaled trajectories converge to each other") {
  const Grid g(1, 256, 40.0);
  const NoiseModel model(g, {bump(1.0, 2.0, -1.0), bump(0.7, 2.5, 1.5)});
  const BrownianPaths fine = sample_paths(2, 2.5e-4, 800, 5);
  auto [u0, v0] = pulse(g);
  auto gap = [&](std::size_t factor) {
    const BrownianPaths p = fine.coarsen(factor);
    const Integrator integ(g, p.dt());
    ComplexField y = u0, z = v0, u = u0, v = v0;
    for (std::size_t m = 0; m < p.steps(); ++m) {
      integ.step_rescaled(y, z, model, p, p.dt() * m);
      auto b0 = p.at_step(m), b1 = p.at_step(m + 1);
      for (std::size_t k = 0; k < b0.size(); ++k) b1[k] -= b0[k];
      integ.step_direct(u, v, model, b1);
    }
    auto [pu, pv] = to_physical(y, z, model, p.at_step(p.steps()));
    return std::sqrt(mass(u - pu, v - pv) / mass(u, v));
  };
  const double coarse = gap(4), finer = gap(2);
  CHECK(finer < coarse);
  CHECK(finer < 1e-3);
}

TEST_CASE("trajectory runner") {
  SUBCASE("zero data stays zero") {
    SimulationConfig c = small_config();
    c.system = SystemKind::rescaled;
    c.init.kind = InitKind::zero;
    const TrajectoryResult r = run_trajectory(c);
    CHECK(r.stop_reason == StopReason::horizon);
    CHECK(r.u.max_abs() == 0.0);
    CHECK(r.series.records.back().M == 0.0);
  }
  SUBCASE("same seed, same trajectory") {
    SimulationConfig c = small_config();
    c.system = SystemKind::direct;
    const TrajectoryResult a = run_trajectory(c), b = run_trajectory(c);
    CHECK(identical(a.u, b.u));
    CHECK(identical(a.v, b.v));
    c.seed = 10;
    CHECK_FALSE(identical(run_trajectory(c).u, a.u));
  }
  SUBCASE("deterministic records carry a zero energy rate and fit constant") {
    SimulationConfig c = small_config();
    const TrajectoryResult r = run_trajectory(c);
    CHECK(r.series.records.size() == 201);
    CHECK(r.series.records[5].dE_rhs == 0.0);
    CHECK(r.stop_time == doctest::Approx(0.2));
    CHECK(r.fit_c < 1e-6);
  }
  SUBCASE("horizon shorter than one step is rejected") {
    SimulationConfig c = small_config();
    c.T = 5e-4;
    CHECK_THROWS_AS(run_trajectory(c), UsageError);
    c.T = 0.2;
    c.dt = 3e-3;
    CHECK_THROWS_AS(run_trajectory(c), UsageError);
  }
  SUBCASE("overflow stops the run and keeps the last finite fields") {
    SimulationConfig c = small_config();
    c.init.amplitude = 1e60;
    const TrajectoryResult r = run_trajectory(c);
    CHECK(r.stop_reason == StopReason::numeric_failure);
    CHECK(r.u.all_finite());
    CHECK(r.v.all_finite());
    CHECK(r.stop_time == 0.0);
    CHECK_FALSE(r.failure_message.empty());
  }
  SUBCASE("growth past the H1 threshold stops the run") {
    SimulationConfig c = small_config();
    c.init.amplitude = 4.0;
    c.init.v_ratio = 0.0;
    c.blowup_factor = 1.05;
    const TrajectoryResult r = run_trajectory(c);
    CHECK(r.stop_reason == StopReason::blowup_threshold);
    CHECK(r.series.records.back().H1_sum > r.blowup_threshold);
    CHECK(r.stop_time < c.T);
  }
}

TEST_CASE("sub-threshold d = 4 run keeps the coercive energy bound") {
  SimulationConfig c;
  c.dim = 4;
  c.points = 16;
  c.length = 16.0;
  c.T = 0.1;
  c.dt = 0.01;
  c.init.kind = InitKind::gaussian;
  c.init.width = 1.8;
  c.init.mass_fraction = 0.81;
  const TrajectoryResult r = run_trajectory(c);
  REQUIRE(r.stop_reason == StopReason::horizon);
  CHECK(r.series.records.front().M == doctest::Approx(0.81 * r.ground_state_mass).epsilon(1e-10));
  CHECK(r.bounds.coercivity_applicable);
  CHECK_FALSE(r.bounds.first_coercivity_violation);
  // n = 16 leaves the dealiasing projection some mass to remove.
  CHECK(std::abs(r.series.records.back().M / r.series.records.front().M - 1.0) < 1e-5);
}

TEST_CASE("checkpoint round trip") {
  const Grid g(2, 8, 3.5);
  std::mt19937_64 rng(1);
  const ComplexField f = random_band_limited(g, 2, rng);
  std::stringstream io;
  write_checkpoint(io, f, 0.75);
  auto [back, t] = read_checkpoint(io);
  CHECK(t == 0.75);
  CHECK(back.grid() == g);
  CHECK(identical(back, f));
  std::istringstream bad("NOTAFILE");
  CHECK_THROWS_AS(read_checkpoint(bad), UsageError);
  CHECK_THROWS_AS(read_checkpoint(std::string("/nonexistent/x.bin")), PreconditionError);
}
