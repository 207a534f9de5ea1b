#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qnls/errors.hpp"
#include "qnls/observables.hpp"

using namespace qnls;

namespace {

BumpSpec bump(double a, double sigma, double c0, double c1 = 0.0) {
  BumpSpec b;
  b.amplitude = a;
  b.width = sigma;
  b.center[0] = c0;
  b.center[1] = c1;
  return b;
}

ObservableRecord rec(double t, double M, double K, double E) {
  ObservableRecord r;
  r.t = t;
  r.M = M;
  r.K = K;
  r.E = E;
  return r;
}

}  // namespace

TEST_CASE("functionals of constant fields") {
  const Grid g(2, 16, 4.0);
  const double V = 16.0;
  const ComplexField one(g, 1.0);
  CHECK(mass(one, one) == doctest::Approx(3.0 * V));
  CHECK(kinetic(one, one) == doctest::Approx(0.0));
  CHECK(potential(one, one) == doctest::Approx(V));
  CHECK(energy(one, one) == doctest::Approx(-2.0 * V));
  const ComplexField zero(g);
  CHECK(mass(zero, zero) == 0.0);
  CHECK(energy(zero, zero) == 0.0);
}

TEST_CASE("functionals of a resonant plane-wave pair") {
  const Grid g(1, 64, 10.0);
  const double k = 2.0 * std::numbers::pi / 10.0;
  const int m1[] = {1}, m2[] = {2};
  const ComplexField u = plane_wave(g, m1), v = plane_wave(g, m2);
  CHECK(mass(u, v) == doctest::Approx(30.0));
  CHECK(kinetic(u, v) == doctest::Approx(3.0 * k * k * 10.0));
  CHECK(potential(u, v) == doctest::Approx(10.0));

  const double lam = 1.7;
  const ComplexField lu = cplx(lam) * u, lv = cplx(lam) * v;
  CHECK(mass(lu, lv) == doctest::Approx(lam * lam * mass(u, v)));
  CHECK(kinetic(lu, lv) == doctest::Approx(lam * lam * kinetic(u, v)));
  CHECK(potential(lu, lv) == doctest::Approx(lam * lam * lam * potential(u, v)));
}

TEST_CASE("mass and potential are invariant under the noise gauge") {
  const Grid g(1, 128, 24.0);
  const NoiseModel model(g, {bump(1.0, 1.5, 0.5)});
  std::mt19937_64 rng(2);
  const ComplexField y = random_band_limited(g, 20, rng), z = random_band_limited(g, 20, rng);
  const std::vector<double> b = {0.9};
  const ComplexField W = eval_W(model, b);
  ComplexField u = y, v = z;
  for (std::size_t i = 0; i < g.size(); ++i) {
    u[i] *= std::exp(W[i]);
    v[i] *= std::exp(2.0 * W[i]);
  }
  CHECK(mass(u, v) == doctest::Approx(mass(y, z)).epsilon(1e-13));
  CHECK(potential(u, v) == doctest::Approx(potential(y, z)).epsilon(1e-12));
}

TEST_CASE("energy-rate identity: raw integrals against the simplified groups") {
  const Grid g(2, 64, 24.0);
  const NoiseModel model(g, {bump(1.0, 1.6, 0.75, 0.0), bump(0.8, 1.5, -0.75, 0.5)});
  std::mt19937_64 rng(8);
  const ComplexField y = random_band_limited(g, 10, rng), z = random_band_limited(g, 10, rng);
  const std::vector<double> b = {0.7, -1.1};

  const auto raw = raw_energy_rate_terms(y, z, model, b);
  double raw_sum = 0.0, raw_scale = 0.0;
  for (double t : raw) {
    raw_sum += t;
    raw_scale = std::max(raw_scale, std::abs(t));
  }
  const double rhs = energy_rate_rhs(y, z, model, b);
  CHECK(std::abs(raw_sum - rhs) < 1e-10 * raw_scale);
  // The second-order terms only cancel in the sum.
  CHECK(std::abs(raw[1]) > 1e-3 * raw_scale);

  const std::vector<double> b2 = {1.4, -2.2};
  const auto t1 = energy_rate_terms(y, z, model, b), t2 = energy_rate_terms(y, z, model, b2);
  for (int j : {0, 1, 2, 3, 6}) CHECK(t2.term[j] == doctest::Approx(2.0 * t1.term[j]).epsilon(1e-12));
  for (int j : {4, 5}) CHECK(t2.term[j] == doctest::Approx(4.0 * t1.term[j]).epsilon(1e-12));
}

TEST_CASE("energy rate vanishes without noise") {
  const Grid g(1, 64, 24.0);
  std::mt19937_64 rng(4);
  const ComplexField y = random_band_limited(g, 10, rng), z = random_band_limited(g, 10, rng);
  const NoiseModel model(g, {bump(1.0, 1.5, 0.0)});
  const std::vector<double> zero = {0.0};
  CHECK(energy_rate_rhs(y, z, model, zero) == 0.0);
  const NoiseModel empty = NoiseModel::none(g);
  CHECK(energy_rate_rhs(y, z, empty, {}) == 0.0);
  CHECK_THROWS_AS(energy_rate_rhs(y, z, model, std::vector<double>{1.0, 2.0}), UsageError);
}

TEST_CASE("a spatially constant coefficient gives no energy rate") {
  const Grid g(1, 64, 24.0);
  BumpSpec c;
  c.shape = BumpShape::constant;
  c.amplitude = 0.4;
  const NoiseModel model(g, {c}, true);
  std::mt19937_64 rng(6);
  const ComplexField y = random_band_limited(g, 10, rng), z = random_band_limited(g, 10, rng);
  const std::vector<double> b = {1.3};
  CHECK(std::abs(energy_rate_rhs(y, z, model, b)) < 1e-12);
}

TEST_CASE("observe reports E = K - 2P") {
  const Grid g(2, 32, 12.0);
  std::mt19937_64 rng(10);
  const ComplexField u = random_band_limited(g, 6, rng), v = random_band_limited(g, 6, rng);
  const ObservableRecord r = observe(0.25, u, v);
  CHECK(r.t == 0.25);
  CHECK(r.E == doctest::Approx(r.K - 2.0 * r.P).epsilon(1e-14));
  CHECK(r.M == doctest::Approx(mass(u, v)));
  CHECK(std::isnan(r.dE_rhs));
}

TEST_CASE("Gronwall constant fit") {
  ObservableSeries flat;
  for (int i = 0; i < 5; ++i) flat.records.push_back(rec(0.1 * i, 1.0, 2.0, -0.5 - 0.01 * i));
  CHECK(fit_gronwall_constant(flat) == 0.0);

  ObservableSeries bumpy = flat;
  bumpy.records[3].E = 1.5;  // E rises by 2 at t = 0.3, with int K = 0.6
  const double c = fit_gronwall_constant(bumpy);
  CHECK(c == doctest::Approx(2.0 / 1.6));
  // M0 = 1 is above the reference mass 0.5, so only the envelope is checked.
  CHECK(check_bounds(bumpy, 0.5, c).pass());
  const BoundsDiagnostics tight = check_bounds(bumpy, 0.5, 0.99 * c);
  REQUIRE(tight.first_envelope_violation);
  CHECK(*tight.first_envelope_violation == 3);
  CHECK(tight.flag_gronwall[3] == 1);
  CHECK(tight.flag_gronwall[2] == 0);
}

TEST_CASE("coercivity check") {
  ObservableSeries s;
  s.records = {rec(0.0, 25.0, 4.0, 2.5), rec(0.1, 25.0, 4.0, 1.0)};
  // factor = 1 - sqrt(25/100) = 1/2, so E must stay above K/2 = 2.
  const BoundsDiagnostics d = check_bounds(s, 100.0, 10.0);
  CHECK(d.coercivity_applicable);
  CHECK(d.coercivity_factor == doctest::Approx(0.5));
  CHECK(d.flag_E2[0] == 0);
  CHECK(d.flag_E2[1] == 1);
  REQUIRE(d.first_coercivity_violation);
  CHECK(*d.first_coercivity_violation == 1);

  const BoundsDiagnostics above = check_bounds(s, 20.0, 10.0);
  CHECK_FALSE(above.coercivity_applicable);
  CHECK(above.flag_E2[1] == -1);
  CHECK(above.pass());
  CHECK_THROWS_AS(check_bounds(s, 0.0, 1.0), UsageError);

  apply_flags(s, d);
  CHECK(s.records[1].flag_E2 == 1);
}

TEST_CASE("observable CSV round trip") {
  ObservableSeries s;
  s.records = {rec(0.0, 3.0, 1.0 / 3.0, -2.0), rec(0.5, 3.0000000001, 0.4, -1.9)};
  s.records[1].dE_rhs = 0.125;
  s.records[1].flag_gronwall = 0;
  std::stringstream io;
  s.write_csv(io, {"system.kind = rescaled"});
  CHECK(io.str().find("# system.kind = rescaled\n") != std::string::npos);
  const ObservableSeries back = ObservableSeries::read_csv(io);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].K == s.records[0].K);
  CHECK(back.records[1].M == s.records[1].M);
  CHECK(std::isnan(back.records[0].dE_rhs));
  CHECK(back.records[1].dE_rhs == 0.125);
  CHECK(back.records[1].flag_gronwall == 0);
  CHECK(back.records[0].flag_E2 == -1);

  std::istringstream bad("t,M\n");
  CHECK_THROWS_AS(ObservableSeries::read_csv(bad), UsageError);
}
