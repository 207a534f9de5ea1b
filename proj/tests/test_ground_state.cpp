#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qnls/errors.hpp"
#include "qnls/ground_state.hpp"

using namespace qnls;

namespace {

// Masses of the radial solutions for d = 1..4, from an independent
// high-resolution shooting run (radial step 2.5e-4, matching radius 16).
constexpr double kMass[] = {7.5531033574, 32.2137255811, 110.1347970498, 271.6589435238069};

}  // namespace

TEST_CASE("zero data is rejected and has zero residual") {
  const Grid g(1, 64, 20.0);
  const ComplexField zero(g);
  const auto r = elliptic_residual(zero, zero);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 0.0);
  GroundStateOptions opt;
  opt.initial = std::make_pair(zero, zero);
  CHECK_THROWS_AS(solve_ground_state(g, GroundStateMethod::flow, 1e-9, opt), DegenerateSolutionError);
}

TEST_CASE("tolerance and dimension are validated") {
  const Grid g(1, 64, 20.0);
  CHECK_THROWS_AS(solve_ground_state(g, GroundStateMethod::flow, 0.0), UsageError);
  CHECK_THROWS_AS(solve_ground_state(g, GroundStateMethod::shooting, -1.0), UsageError);
  CHECK_THROWS_AS(solve_radial_ground_state(5, 1e-9), UsageError);
  CHECK_THROWS_AS(parse_ground_state_method("newton"), UsageError);
}

TEST_CASE("radial shooting matches reference masses and is a dilation critical point") {
  for (int d = 1; d <= 4; ++d) {
    CAPTURE(d);
    const GroundState gs = solve_radial_ground_state(d, 1e-10);
    CHECK(gs.mass == doctest::Approx(kMass[d - 1]).epsilon(1e-6));
    CHECK(std::abs(radial_dilation_derivative(*gs.profile)) < 1e-6 * gs.mass);
    CHECK(gs.phi0 > 0.0);
    CHECK(gs.psi0 > 0.0);
    CHECK(gs.gn_coefficient == doctest::Approx(1.0 / (2.0 * std::sqrt(gs.mass))));
    const auto rr = radial_residual(*gs.profile);
    CHECK(rr[0] < 1e-5);
    CHECK(rr[1] < 1e-5);
  }
}

TEST_CASE("d = 4 ground state has zero energy") {
  // Nehari M + K = 3P and the dilation identity 2M + K = 4P give K = 2P.
  const GroundState gs = solve_radial_ground_state(4, 1e-10);
  const RadialFunctionals f = radial_functionals(*gs.profile);
  CHECK(std::abs(f.energy()) < 1e-6 * f.kinetic);
  CHECK(f.mass == doctest::Approx(f.potential).epsilon(1e-6));
}

TEST_CASE("lifted profile is a grid critical point; perturbations are first order") {
  const Grid g(1, 256, 32.0);
  const GroundState gs = solve_ground_state(g, GroundStateMethod::shooting, 1e-10);
  const auto r0 = elliptic_residual(gs);
  CHECK(r0[0] < 1e-6);
  CHECK(r0[1] < 1e-6);
  CHECK(std::abs(dilation_derivative(gs.phi, gs.psi)) < 1e-6);

  ComplexField h(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.position(i)[0];
    h[i] = std::exp(-(x - 1.0) * (x - 1.0));
  }
  auto res = [&](double eps) { return elliptic_residual(gs.phi + cplx(eps) * h, gs.psi)[0]; };
  const double ratio = res(1e-3) / res(5e-4);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.02));

  // Negative control: a dilated profile is not critical.
  RadialProfile stretched = *gs.profile;
  stretched.dr *= 1.2;
  auto [phi, psi] = lift_radial(g, stretched);
  CHECK(std::abs(dilation_derivative(phi, psi)) > 1e-2);
}

TEST_CASE("flow agrees with shooting and is refinement invariant in d = 1") {
  const GroundState coarse = solve_ground_state(Grid(1, 128, 32.0), GroundStateMethod::flow, 1e-11);
  const GroundState fine = solve_ground_state(Grid(1, 256, 32.0), GroundStateMethod::flow, 1e-11);
  CHECK(coarse.mass == doctest::Approx(kMass[0]).epsilon(1e-7));
  CHECK(fine.mass == doctest::Approx(coarse.mass).epsilon(1e-9));
  CHECK(fine.phi0 == doctest::Approx(solve_radial_ground_state(1, 1e-10).phi0).epsilon(1e-6));
  CHECK(std::abs(fine.energy - (fine.kinetic - 2.0 * fine.potential)) < 1e-12 * fine.kinetic);
}

TEST_CASE("Gagliardo-Nirenberg ratio") {
  // At d = 4 the ground state has K = 2P, so the ratio is exactly 1 there.
  const RadialFunctionals f4 = radial_functionals(*solve_radial_ground_state(4, 1e-10).profile);
  CHECK(f4.potential / (0.5 * f4.kinetic) == doctest::Approx(1.0).epsilon(1e-6));

  // At d = 2 the two identities give K = P instead, and the ratio is 2: the
  // inequality in this form is the mass-critical one.
  const Grid g(2, 64, 24.0);
  const GroundState gs = solve_ground_state(g, GroundStateMethod::shooting, 1e-10);
  CHECK(gn_ratio(gs.phi, gs.psi, gs) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(gn_ratio(gs.phi, cplx(-1.0) * gs.psi, gs) == doctest::Approx(-2.0).epsilon(1e-4));

  std::mt19937_64 rng(17);
  const ComplexField f = random_band_limited(g, 8, rng), h = random_band_limited(g, 8, rng);
  CHECK(gn_ratio(f, h, gs.mass) < 2.0);

  const ComplexField zero(g);
  CHECK_THROWS_AS(gn_ratio(zero, zero, gs.mass), DomainError);
  CHECK_THROWS_AS(gn_ratio(f, h, 0.0), DomainError);
  CHECK_THROWS_AS(gn_ratio(ComplexField(g, 1.0), zero, gs.mass), DomainError);
}

TEST_CASE("ground-state artifact round trip") {
  const GroundState gs = solve_radial_ground_state(2, 1e-10);
  GroundStateArtifact art;
  art.profile = *gs.profile;
  art.metadata = {{"d", "2"}, {"mass", "32.2137255811"}, {"method", "shooting"}};
  std::stringstream io;
  write_ground_state_artifact(io, art);
  const GroundStateArtifact back = read_ground_state_artifact(io);
  CHECK(back.mass == 32.2137255811);
  CHECK(back.profile.dim == 2);
  CHECK(back.get("method") == std::optional<std::string>("shooting"));
  REQUIRE(back.profile.phi.size() == art.profile.phi.size());
  CHECK(back.profile.dr == doctest::Approx(art.profile.dr).epsilon(1e-12));
  for (std::size_t m = 0; m < art.profile.phi.size(); m += 97) {
    CHECK(back.profile.phi[m] == art.profile.phi[m]);
    CHECK(back.profile.psi[m] == art.profile.psi[m]);
  }

  std::istringstream bad("r,phi,psi\n0,1,1\n");
  CHECK_THROWS_AS(read_ground_state_artifact(bad), UsageError);
  CHECK_THROWS_AS(load_ground_state_artifact("/nonexistent/gs.csv"), PreconditionError);
}
