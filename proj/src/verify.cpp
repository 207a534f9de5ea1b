#include "qnls/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <random>

#include "qnls/dynamics.hpp"
#include "qnls/errors.hpp"
#include "qnls/ground_state.hpp"
#include "qnls/noise.hpp"
#include "qnls/observables.hpp"
#include "qnls/spectral.hpp"

namespace qnls {

bool SuiteCheck::pass() const {
  if (!std::isfinite(measured)) return false;
  return relation == '>' ? measured > tolerance : measured < tolerance;
}

bool SuiteReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.pass(); });
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"spectral", "cancellation", "gn", "equivalence", "conservation"};
  return names;
}

namespace {

using Clock = std::chrono::steady_clock;

double rel_diff(const ComplexField& a, const ComplexField& b) {
  const double den = std::sqrt(norm_sq(b));
  return std::sqrt(norm_sq(a - b)) / (den > 0.0 ? den : 1.0);
}

double finish(const Clock::time_point& t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<BumpSpec> random_bumps(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<BumpSpec> out(2);
  for (auto& b : out) {
    b.amplitude = 0.5 + unit(rng);
    b.width = 1.5 + 0.2 * unit(rng);
    for (int j = 0; j < d; ++j) b.center[j] = -0.75 + 1.5 * unit(rng);
  }
  return out;
}

// Smooth localized pulse pair used by the dynamics checks.
std::pair<ComplexField, ComplexField> pulse_pair(const Grid& g, double ky) {
  ComplexField u(g), v(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.position(i);
    double r2 = 0.0, s2 = 0.0;
    for (int j = 0; j < g.dim(); ++j) {
      r2 += x[j] * x[j];
      const double c = j == 0 ? x[j] - 0.5 : x[j];
      s2 += c * c;
    }
    u[i] = 1.2 * std::exp(-r2 / 4.0) * std::polar(1.0, ky * x[0]);
    v[i] = 0.6 * std::exp(-s2 / 3.0);
  }
  return {u, v};
}

}  // namespace

SuiteReport verify_spectral(const VerifyOptions& options) {
  const auto t0 = Clock::now();
  SuiteReport rep{"spectral", {}, 0.0};
  std::mt19937_64 rng(options.seed);
  double roundtrip = 0.0, parseval = 0.0, eigen = 0.0, divgrad = 0.0, parts = 0.0, imag = 0.0;
  const int sizes[] = {64, 32, 16, 8};
  for (int d = 1; d <= 4; ++d) {
    const Grid g(d, sizes[d - 1], 12.0);
    for (int s = 0; s < 4; ++s) {
      const ComplexField f = random_band_limited(g, g.points() / 3, rng);
      const ComplexField fh = transform(f, Direction::forward);
      roundtrip = std::max(roundtrip, rel_diff(transform(fh, Direction::inverse), f));
      parseval = std::max(parseval, std::abs(norm_sq(fh) - norm_sq(f)) / norm_sq(f));

      std::vector<ComplexField> grad = gradient(f);
      divgrad = std::max(divgrad, rel_diff(divergence(grad), laplacian(f, 1.0)));
      const double gsq = gradient_norm_sq(f);
      const double ibp = -inner_product(laplacian(f, 1.0), f).real();
      parts = std::max(parts, std::abs(gsq - ibp) / gsq);
      imag = std::max(imag, std::abs(inner_product(f, f).imag()) / norm_sq(f));
    }
    std::vector<int> modes(d, 0);
    modes[0] = 2;
    if (d > 1) modes[d - 1] = -1;
    const ComplexField pw = plane_wave(g, modes);
    double k2 = 0.0;
    for (int m : modes) k2 += std::pow(2.0 * std::numbers::pi * m / g.length(), 2);
    eigen = std::max(eigen, rel_diff(laplacian(pw, 1.0), cplx(-k2) * pw));
  }
  rep.checks = {{"transform round trip (rel)", roundtrip, 1e-12},
                {"Parseval (rel)", parseval, 1e-12},
                {"plane-wave Laplacian eigenvalue (rel)", eigen, 1e-12},
                {"div grad = Laplacian (rel)", divgrad, 1e-10},
                {"|grad f|^2 = -Re<Lap f, f> (rel)", parts, 1e-10},
                {"Im <f, f> residue (rel)", imag, 1e-14}};
  rep.seconds = finish(t0);
  return rep;
}

SuiteReport verify_cancellation(const VerifyOptions& options) {
  const auto t0 = Clock::now();
  SuiteReport rep{"cancellation", {}, 0.0};
  std::mt19937_64 rng(options.seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0, smallest_i2 = std::numeric_limits<double>::infinity(), homog = 0.0;
  for (int d = 1; d <= 2; ++d) {
    const Grid g(d, 64, 24.0);
    for (int s = 0; s < 50; ++s) {
      const NoiseModel model(g, random_bumps(d, rng));
      const ComplexField y = random_band_limited(g, g.points() / 6, rng);
      const ComplexField z = random_band_limited(g, g.points() / 6, rng);
      const std::vector<double> b = {normal(rng), normal(rng)};
      const auto raw = raw_energy_rate_terms(y, z, model, b);
      double sum = 0.0, scale = 0.0;
      for (double v : raw) {
        sum += v;
        scale = std::max(scale, std::abs(v));
      }
      const double rhs = energy_rate_rhs(y, z, model, b);
      worst = std::max(worst, std::abs(sum - rhs) / std::max(std::abs(sum), 1e-300));
      smallest_i2 = std::min(smallest_i2, std::abs(raw[1]) / scale);

      // B -> 2B doubles the terms linear in B and quadruples the quadratic ones.
      const std::vector<double> b2 = {2.0 * b[0], 2.0 * b[1]};
      const auto t1 = energy_rate_terms(y, z, model, b).term;
      const auto t2 = energy_rate_terms(y, z, model, b2).term;
      for (int j = 0; j < 7; ++j) {
        const double factor = (j == 4 || j == 5) ? 4.0 : 2.0;
        homog = std::max(homog, std::abs(t2[j] - factor * t1[j]) / std::max(std::abs(factor * t1[j]), 1e-300));
      }
    }
  }
  rep.checks = {{"sum I_j vs energy-rate rhs, 100 pairs (rel)", worst, 1e-8},
                {"min |I_2| / max |I_j| (pre-cancellation term present)", smallest_i2, 1e-6, '>'},
                {"termwise homogeneity in B (rel)", homog, 1e-10}};
  rep.seconds = finish(t0);
  return rep;
}

SuiteReport verify_gn(const VerifyOptions& options) {
  if (options.ground_state_file.empty())
    throw PreconditionError("gn suite needs a ground-state artifact: set ground_state.file");
  if (!std::filesystem::exists(options.ground_state_file))
    throw PreconditionError("ground-state artifact not found: " + options.ground_state_file);
  const auto t0 = Clock::now();
  SuiteReport rep{"gn", {}, 0.0};
  const GroundStateArtifact art = load_ground_state_artifact(options.ground_state_file);
  const int d = art.profile.dim;
  const int n = art.get("n") ? std::stoi(*art.get("n")) : 32;
  const double L = art.get("L") ? std::stod(*art.get("L")) : 12.0;
  const Grid g(d, n, L);
  auto [phi, psi] = lift_radial(g, art.profile);

  std::mt19937_64 rng(options.seed + 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < 100; ++s) {
    ComplexField f = random_band_limited(g, std::max(1, g.points() / 6), rng);
    ComplexField h = random_band_limited(g, std::max(1, g.points() / 6), rng);
    if (s % 2 == 0) {
      // Localized variants: random pulses under a Gaussian envelope.
      const double w = 1.0 + 2.0 * unit(rng);
      for (std::size_t i = 0; i < g.size(); ++i) {
        auto x = g.position(i);
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        const double env = std::exp(-r2 / (2.0 * w * w));
        f[i] = env * (1.0 + 0.3 * f[i]);
        h[i] = env * (0.5 + 0.3 * h[i]);
      }
    }
    worst = std::max(worst, gn_ratio(f, h, art.mass));
  }
  const double at_gs = gn_ratio(phi, psi, art.mass);
  rep.checks = {{"max gn_ratio over 100 random pairs - 1", worst - 1.0, 1e-6},
                {"|gn_ratio(ground state) - 1|", std::abs(at_gs - 1.0), 1e-3}};
  rep.seconds = finish(t0);
  return rep;
}

SuiteReport verify_equivalence(const VerifyOptions& options) {
  const auto t0 = Clock::now();
  SuiteReport rep{"equivalence", {}, 0.0};
  const Grid g(1, 256, 40.0);
  std::vector<BumpSpec> bumps(2);
  bumps[0].amplitude = 1.0;
  bumps[0].width = 2.0;
  bumps[0].center[0] = -1.0;
  bumps[1].amplitude = 0.7;
  bumps[1].width = 2.5;
  bumps[1].center[0] = 1.5;
  const NoiseModel model(g, bumps);
  const BrownianPaths fine = sample_paths(2, 2.5e-4, 2000, options.seed + 3);
  std::vector<double> errs;
  for (std::size_t factor : {4, 2}) {
    const BrownianPaths p = fine.coarsen(factor);
    const Integrator integ(g, p.dt());
    auto [u, v] = pulse_pair(g, 0.5);
    ComplexField y = u, z = v;
    for (std::size_t m = 1; m <= p.steps(); ++m) {
      integ.step_rescaled(y, z, model, p, p.dt() * static_cast<double>(m - 1));
      auto db = p.at_step(m);
      const auto b0 = p.at_step(m - 1);
      for (std::size_t k = 0; k < db.size(); ++k) db[k] -= b0[k];
      integ.step_direct(u, v, model, db);
    }
    auto [pu, pv] = to_physical(y, z, model, p.at_step(p.steps()));
    errs.push_back(rel_diff(u, pu));
  }
  rep.checks = {{"|u_direct - e^W y| / |u| at dt = 1e-3", errs[0], 5e-3},
                {"discrepancy ratio dt / (dt/2)", errs[0] / errs[1], 1.0, '>'}};
  rep.seconds = finish(t0);
  return rep;
}

SuiteReport verify_conservation(const VerifyOptions& options) {
  const auto t0 = Clock::now();
  SuiteReport rep{"conservation", {}, 0.0};
  const Grid g(2, 128, 32.0);
  double mass_drift = 0.0;
  std::vector<double> e_drift;
  for (double dt : {2e-3, 1e-3}) {
    auto [u, v] = pulse_pair(g, 0.4);
    const double m0 = mass(u, v), e0 = energy(u, v);
    const Integrator integ(g, dt);
    double worst = 0.0;
    const auto steps = static_cast<std::size_t>(std::llround(0.5 / dt));
    for (std::size_t s = 1; s <= steps; ++s) {
      integ.step_deterministic(u, v);
      worst = std::max(worst, std::abs(energy(u, v) - e0) / std::abs(e0));
    }
    mass_drift = std::max(mass_drift, std::abs(mass(u, v) - m0) / m0);
    e_drift.push_back(worst);
  }
  const double order = std::log2(e_drift[0] / e_drift[1]);

  std::vector<BumpSpec> bumps(2);
  bumps[0].amplitude = 1.0;
  bumps[0].width = 2.2;
  bumps[0].center = {-0.5, 0.3};
  bumps[1].amplitude = 0.8;
  bumps[1].width = 2.0;
  bumps[1].center = {0.7, -0.4};
  const NoiseModel model(g, bumps);
  const BrownianPaths paths = sample_paths(2, 1e-3, 500, options.seed + 4);
  auto [y, z] = pulse_pair(g, 0.4);
  const double m0 = mass(y, z);
  const Integrator integ(g, 1e-3);
  double resc_drift = 0.0;
  for (std::size_t s = 1; s <= paths.steps(); ++s) {
    integ.step_rescaled(y, z, model, paths, 1e-3 * static_cast<double>(s - 1));
    resc_drift = std::max(resc_drift, std::abs(mass(y, z) - m0) / m0);
  }

  // N = 0 rescaled and direct steps against the deterministic step.
  const NoiseModel none = NoiseModel::none(g);
  const BrownianPaths empty = sample_paths(0, 1e-3, 100, 0);
  auto [ud, vd] = pulse_pair(g, 0.4);
  ComplexField ur = ud, vr = vd, ux = ud, vx = vd;
  for (int s = 0; s < 100; ++s) {
    integ.step_deterministic(ud, vd);
    integ.step_rescaled(ur, vr, none, empty, 1e-3 * s);
    integ.step_direct(ux, vx, none, {});
  }
  const double reduction = std::max({rel_diff(ur, ud), rel_diff(vr, vd), rel_diff(ux, ud), rel_diff(vx, vd)});

  rep.checks = {{"deterministic mass drift (rel)", mass_drift, 1e-8},
                {"deterministic energy drift at dt = 1e-3 (rel)", e_drift[1], 1e-5},
                {"energy drift order under dt halving", order, 1.7, '>'},
                {"rescaled mass drift, T = 0.5 (rel)", resc_drift, 1e-6},
                {"N = 0 reduction after 100 steps (rel)", reduction, 1e-10}};
  rep.seconds = finish(t0);
  return rep;
}

SuiteReport run_suite(const std::string& name, const VerifyOptions& options) {
  if (name == "spectral") return verify_spectral(options);
  if (name == "cancellation") return verify_cancellation(options);
  if (name == "gn") return verify_gn(options);
  if (name == "equivalence") return verify_equivalence(options);
  if (name == "conservation") return verify_conservation(options);
  throw UsageError("unknown verification suite '" + name +
                   "' (expected spectral|cancellation|gn|equivalence|conservation)");
}

void print_report(std::ostream& out, const SuiteReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "[%s] %s (%.2f s)\n", report.pass() ? "PASS" : "FAIL", report.suite.c_str(),
                report.seconds);
  out << buf;
  for (const auto& c : report.checks) {
    std::snprintf(buf, sizeof buf, "  %-4s %-58s %12.4e %c %.1e\n", c.pass() ? "ok" : "FAIL", c.name.c_str(),
                  c.measured, c.relation, c.tolerance);
    out << buf;
  }
}

}  // namespace qnls
