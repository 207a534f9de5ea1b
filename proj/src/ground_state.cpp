#include "qnls/ground_state.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>

namespace qnls {

namespace {

// |S^{d-1}|
double sphere_area(int d) { return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d); }

// ---------------------------------------------------------------------------
// Radial ODE
//   phi'' + (d-1)/r phi' = phi - 2 psi phi
//   psi'' + (d-1)/r psi' = 4 psi - 2 phi^2
// integrated together with its tangent with respect to (phi(0), psi(0)).
// ---------------------------------------------------------------------------

struct RadialState {
  // phi, phi', psi, psi', then the tangent columns for d/dphi0 and d/dpsi0.
  std::array<double, 12> v{};
};

RadialState radial_rhs(const RadialState& s, double r, int d) {
  RadialState out;
  const double c = (d - 1) / r;
  const double phi = s.v[0], dphi = s.v[1], psi = s.v[2], dpsi = s.v[3];
  out.v[0] = dphi;
  out.v[1] = -c * dphi + phi - 2.0 * psi * phi;
  out.v[2] = dpsi;
  out.v[3] = -c * dpsi + 4.0 * psi - 2.0 * phi * phi;
  for (int col = 0; col < 2; ++col) {
    const double* t = &s.v[4 + 4 * col];
    double* o = &out.v[4 + 4 * col];
    o[0] = t[1];
    o[1] = -c * t[1] + (1.0 - 2.0 * psi) * t[0] - 2.0 * phi * t[2];
    o[2] = t[3];
    o[3] = -c * t[3] + 4.0 * t[2] - 4.0 * phi * t[0];
  }
  return out;
}

RadialState rk4_step(const RadialState& s, double r, double h, int d) {
  auto axpy = [](const RadialState& a, double w, const RadialState& b) {
    RadialState o;
    for (std::size_t i = 0; i < o.v.size(); ++i) o.v[i] = a.v[i] + w * b.v[i];
    return o;
  };
  const RadialState k1 = radial_rhs(s, r, d);
  const RadialState k2 = radial_rhs(axpy(s, 0.5 * h, k1), r + 0.5 * h, d);
  const RadialState k3 = radial_rhs(axpy(s, 0.5 * h, k2), r + 0.5 * h, d);
  const RadialState k4 = radial_rhs(axpy(s, h, k3), r + h, d);
  RadialState o;
  for (std::size_t i = 0; i < o.v.size(); ++i)
    o.v[i] = s.v[i] + h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
  return o;
}

// Taylor start near the origin (through r^4) with its parameter derivatives.
RadialState series_start(double phi0, double psi0, double r, int d) {
  const double p2 = phi0 * (1.0 - 2.0 * psi0) / (2.0 * d);
  const double q2 = (2.0 * psi0 - phi0 * phi0) / d;
  const double p4 = (p2 * (1.0 - 2.0 * psi0) - 2.0 * q2 * phi0) / (4.0 * (d + 2));
  const double q4 = (q2 - phi0 * p2) / (d + 2);

  const double p2_a = (1.0 - 2.0 * psi0) / (2.0 * d), p2_b = -phi0 / d;
  const double q2_a = -2.0 * phi0 / d, q2_b = 2.0 / d;
  const double p4_a = (p2_a * (1.0 - 2.0 * psi0) - 2.0 * (q2_a * phi0 + q2)) / (4.0 * (d + 2));
  const double p4_b = (p2_b * (1.0 - 2.0 * psi0) - 2.0 * p2 - 2.0 * q2_b * phi0) / (4.0 * (d + 2));
  const double q4_a = (q2_a - p2 - phi0 * p2_a) / (d + 2);
  const double q4_b = (q2_b - phi0 * p2_b) / (d + 2);

  const double r2 = r * r, r3 = r2 * r, r4 = r2 * r2;
  RadialState s;
  s.v = {phi0 + p2 * r2 + p4 * r4, 2.0 * p2 * r + 4.0 * p4 * r3,
         psi0 + q2 * r2 + q4 * r4, 2.0 * q2 * r + 4.0 * q4 * r3,
         1.0 + p2_a * r2 + p4_a * r4, 2.0 * p2_a * r + 4.0 * p4_a * r3,
         q2_a * r2 + q4_a * r4, 2.0 * q2_a * r + 4.0 * q4_a * r3,
         p2_b * r2 + p4_b * r4, 2.0 * p2_b * r + 4.0 * p4_b * r3,
         1.0 + q2_b * r2 + q4_b * r4, 2.0 * q2_b * r + 4.0 * q4_b * r3};
  return s;
}

struct ShotResult {
  bool finite = true;
  std::array<double, 2> mismatch{};
  std::array<std::array<double, 2>, 2> jacobian{};
};

// Integrate to radius R; optionally record the profile at every node.
ShotResult shoot(double phi0, double psi0, int d, double radius, double dr, RadialProfile* record) {
  const auto steps = static_cast<std::size_t>(std::llround(radius / dr));
  RadialState s = series_start(phi0, psi0, dr, d);
  if (record != nullptr) {
    record->dim = d;
    record->dr = dr;
    record->phi.assign(1, phi0);
    record->psi.assign(1, psi0);
    record->dphi.assign(1, 0.0);
    record->dpsi.assign(1, 0.0);
  }
  auto push = [&](const RadialState& st) {
    if (record == nullptr) return;
    record->phi.push_back(st.v[0]);
    record->dphi.push_back(st.v[1]);
    record->psi.push_back(st.v[2]);
    record->dpsi.push_back(st.v[3]);
  };
  push(s);
  ShotResult out;
  for (std::size_t m = 1; m < steps; ++m) {
    s = rk4_step(s, dr * static_cast<double>(m), dr, d);
    if (!std::isfinite(s.v[0]) || !std::isfinite(s.v[2]) || std::abs(s.v[0]) > 1e12 ||
        std::abs(s.v[2]) > 1e12) {
      out.finite = false;
      return out;
    }
    push(s);
  }
  const double k1 = 1.0 + (d - 1) / (2.0 * radius);
  const double k2 = 2.0 + (d - 1) / (2.0 * radius);
  out.mismatch = {s.v[1] + k1 * s.v[0], s.v[3] + k2 * s.v[2]};
  for (int col = 0; col < 2; ++col) {
    const double* t = &s.v[4 + 4 * col];
    out.jacobian[0][col] = t[1] + k1 * t[0];
    out.jacobian[1][col] = t[3] + k2 * t[2];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Radial finite-difference iteration used only to seed the shooting Newton.
// ---------------------------------------------------------------------------

// Solve (alpha - beta * Lap_r) f = rhs on cell centres r_i = (i + 1/2) h with
// zero flux at the origin and f = 0 beyond the last cell.
std::vector<double> radial_helmholtz(const std::vector<double>& rhs, double alpha, double beta, double h,
                                     int d) {
  const std::size_t m = rhs.size();
  std::vector<double> lower(m), diag(m), upper(m), b(rhs);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = (static_cast<double>(i) + 0.5) * h;
    const double w = std::pow(r, d - 1);
    const double wp = std::pow(r + 0.5 * h, d - 1);
    const double wm = i == 0 ? 0.0 : std::pow(r - 0.5 * h, d - 1);
    const double s = beta / (h * h * w);
    lower[i] = -s * wm;
    upper[i] = -s * wp;
    diag[i] = alpha + s * (wp + wm);
  }
  // Thomas algorithm.
  for (std::size_t i = 1; i < m; ++i) {
    const double f = lower[i] / diag[i - 1];
    diag[i] -= f * upper[i - 1];
    b[i] -= f * b[i - 1];
  }
  std::vector<double> x(m);
  x[m - 1] = b[m - 1] / diag[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) x[i] = (b[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

std::pair<double, double> radial_seed(int d) {
  const double h = 0.01;
  const std::size_t m = 1500;
  std::vector<double> phi(m), psi(m), weight(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double r = (static_cast<double>(i) + 0.5) * h;
    phi[i] = 2.0 * std::exp(-0.5 * r * r);
    psi[i] = std::exp(-0.5 * r * r);
    weight[i] = std::pow(r, d - 1);
  }
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += weight[i] * a[i] * b[i];
    return s;
  };
  std::vector<double> n1(m), n2(m);
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      n1[i] = 2.0 * psi[i] * phi[i];
      n2[i] = phi[i] * phi[i];
    }
    auto t1 = radial_helmholtz(n1, 1.0, 1.0, h, d);
    auto t2 = radial_helmholtz(n2, 2.0, 0.5, h, d);
    const double num = dot(n1, phi) + dot(n2, psi);
    // <L u, u> for the flux-form operator, summed by parts.
    double lin = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = (static_cast<double>(i) + 0.5) * h;
      const double wp = std::pow(r + 0.5 * h, d - 1);
      const double next_phi = i + 1 < m ? phi[i + 1] : 0.0;
      const double next_psi = i + 1 < m ? psi[i + 1] : 0.0;
      lin += wp * (std::pow(next_phi - phi[i], 2) + 0.5 * std::pow(next_psi - psi[i], 2)) / (h * h);
      lin += weight[i] * (phi[i] * phi[i] + 2.0 * psi[i] * psi[i]);
    }
    if (!(num > 0.0)) break;
    const double stab = std::pow(lin / num, 2);
    double change = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double np = 0.5 * phi[i] + 0.5 * stab * t1[i];
      const double nq = 0.5 * psi[i] + 0.5 * stab * t2[i];
      change += weight[i] * std::pow(np - phi[i], 2);
      norm += weight[i] * phi[i] * phi[i];
      phi[i] = np;
      psi[i] = nq;
    }
    if (change < 1e-24 * norm) break;
  }
  // Extrapolate the two innermost cell values to r = 0 (even function).
  const double phi0 = (9.0 * phi[0] - phi[1]) / 8.0;
  const double psi0 = (9.0 * psi[0] - psi[1]) / 8.0;
  return {phi0, psi0};
}

double cubic_even(const std::vector<double>& f, double dr, double r) {
  const auto last = static_cast<long>(f.size()) - 1;
  const double pos = r / dr;
  long m = static_cast<long>(std::floor(pos));
  if (m + 2 > last) m = last - 2;
  const double t = pos - static_cast<double>(m);
  auto at = [&](long j) { return f[static_cast<std::size_t>(std::abs(j))]; };
  const double fm1 = at(m - 1), f0 = at(m), f1 = at(m + 1), f2 = at(m + 2);
  // Lagrange weights on nodes -1, 0, 1, 2.
  const double wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return wm1 * fm1 + w0 * f0 + w1 * f1 + w2 * f2;
}

double tail(double value_at_edge, double edge, double r, double rate, int d) {
  return value_at_edge * std::pow(edge / r, 0.5 * (d - 1)) * std::exp(-rate * (r - edge));
}

void check_real_pair(const ComplexField& phi, const ComplexField& psi) { require_same_grid(phi, psi); }

}  // namespace

double RadialProfile::phi_at(double r) const {
  r = std::abs(r);
  if (r > r_max()) return tail(phi.back(), r_max(), r, 1.0, dim);
  return cubic_even(phi, dr, r);
}

double RadialProfile::psi_at(double r) const {
  r = std::abs(r);
  if (r > r_max()) return tail(psi.back(), r_max(), r, 2.0, dim);
  return cubic_even(psi, dr, r);
}

std::string to_string(GroundStateMethod m) { return m == GroundStateMethod::flow ? "flow" : "shooting"; }

GroundStateMethod parse_ground_state_method(const std::string& s) {
  if (s == "flow") return GroundStateMethod::flow;
  if (s == "shooting") return GroundStateMethod::shooting;
  throw UsageError("unknown ground-state method '" + s + "' (expected flow|shooting)");
}

std::pair<ComplexField, ComplexField> lift_radial(const Grid& grid, const RadialProfile& profile) {
  ComplexField phi(grid), psi(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto x = grid.position(i);
    double r2 = 0.0;
    for (int j = 0; j < grid.dim(); ++j) r2 += x[j] * x[j];
    const double r = std::sqrt(r2);
    phi[i] = profile.phi_at(r);
    psi[i] = profile.psi_at(r);
  }
  return {std::move(phi), std::move(psi)};
}

std::array<double, 2> elliptic_residual(const ComplexField& phi, const ComplexField& psi) {
  check_real_pair(phi, psi);
  ComplexField r1 = laplacian(phi, -1.0);
  ComplexField r2 = laplacian(psi, -0.5);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    r1[i] += phi[i] - 2.0 * psi[i] * phi[i];
    r2[i] += 2.0 * psi[i] - phi[i] * phi[i];
  }
  return {std::sqrt(norm_sq(r1)), std::sqrt(norm_sq(r2))};
}

std::array<double, 2> elliptic_residual(const GroundState& gs) {
  if (gs.method == GroundStateMethod::shooting && gs.profile) return radial_residual(*gs.profile);
  return elliptic_residual(gs.phi, gs.psi);
}

std::array<double, 2> radial_residual(const RadialProfile& p) {
  const int d = p.dim;
  const double h = p.dr;
  const auto n = static_cast<long>(p.phi.size());
  auto at = [](const std::vector<double>& f, long j) { return f[static_cast<std::size_t>(std::abs(j))]; };
  double s1 = 0.0, s2 = 0.0;
  for (long m = 0; m + 2 < n; ++m) {
    const double r = h * static_cast<double>(m);
    auto lap = [&](const std::vector<double>& f) {
      const double d2 = (-at(f, m + 2) + 16.0 * at(f, m + 1) - 30.0 * at(f, m) + 16.0 * at(f, m - 1) -
                         at(f, m - 2)) /
                        (12.0 * h * h);
      if (m == 0) return d * d2;
      const double d1 = (-at(f, m + 2) + 8.0 * at(f, m + 1) - 8.0 * at(f, m - 1) + at(f, m - 2)) / (12.0 * h);
      return d2 + (d - 1) / r * d1;
    };
    const double phi = p.phi[m], psi = p.psi[m];
    const double e1 = -lap(p.phi) + phi - 2.0 * psi * phi;
    const double e2 = -0.5 * lap(p.psi) + 2.0 * psi - phi * phi;
    const double w = std::pow(r, d - 1) * h;
    s1 += w * e1 * e1;
    s2 += w * e2 * e2;
  }
  const double area = sphere_area(d);
  return {std::sqrt(area * s1), std::sqrt(area * s2)};
}

RadialFunctionals radial_functionals(const RadialProfile& p, double lambda) {
  const int d = p.dim;
  const double h = p.dr;
  const auto n = p.phi.size();
  const bool have_derivs = p.dphi.size() == n && p.dpsi.size() == n;
  auto deriv = [&](const std::vector<double>& dvals, const std::vector<double>& vals, double r) {
    if (have_derivs) {
      // The derivative of an even function is odd.
      const double pos = r / h;
      long m = static_cast<long>(std::floor(pos));
      const auto last = static_cast<long>(n) - 1;
      if (m + 2 > last) m = last - 2;
      const double t = pos - static_cast<double>(m);
      auto at = [&](long j) {
        const double v = dvals[static_cast<std::size_t>(std::abs(j))];
        return j < 0 ? -v : v;
      };
      const double wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
      const double w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
      const double w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
      const double w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
      return wm1 * at(m - 1) + w0 * at(m) + w1 * at(m + 1) + w2 * at(m + 2);
    }
    const double e = 1e-5;
    return (cubic_even(vals, h, r + e) - cubic_even(vals, h, std::abs(r - e))) / (2.0 * e);
  };
  // Composite Simpson over [0, r_max]; the dilated profile is phi(r / lambda).
  std::size_t intervals = n - 1;
  if (intervals % 2 == 1) --intervals;
  RadialFunctionals out;
  for (std::size_t m = 0; m <= intervals; ++m) {
    const double r = h * static_cast<double>(m);
    const double s = r / lambda;
    double phi, psi, dphi, dpsi;
    if (s > p.r_max()) {
      phi = p.phi_at(s);
      psi = p.psi_at(s);
      dphi = -phi;
      dpsi = -2.0 * psi;
    } else if (lambda == 1.0) {
      phi = p.phi[m];
      psi = p.psi[m];
      dphi = have_derivs ? p.dphi[m] : deriv(p.dphi, p.phi, s);
      dpsi = have_derivs ? p.dpsi[m] : deriv(p.dpsi, p.psi, s);
    } else {
      phi = p.phi_at(s);
      psi = p.psi_at(s);
      dphi = deriv(p.dphi, p.phi, s);
      dpsi = deriv(p.dpsi, p.psi, s);
    }
    dphi /= lambda;
    dpsi /= lambda;
    const double w = (m == 0 || m == intervals) ? 1.0 : (m % 2 == 1 ? 4.0 : 2.0);
    const double jac = w * std::pow(r, d - 1);
    out.mass += jac * (phi * phi + 2.0 * psi * psi);
    out.kinetic += jac * (dphi * dphi + 0.5 * dpsi * dpsi);
    out.potential += jac * psi * phi * phi;
  }
  const double scale = sphere_area(d) * h / 3.0;
  out.mass *= scale;
  out.kinetic *= scale;
  out.potential *= scale;
  return out;
}

double action(const ComplexField& phi, const ComplexField& psi) {
  check_real_pair(phi, psi);
  const double m = norm_sq(phi) + 2.0 * norm_sq(psi);
  const double k = gradient_norm_sq(phi) + 0.5 * gradient_norm_sq(psi);
  double p = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) p += (psi[i] * std::conj(phi[i] * phi[i])).real();
  p *= phi.grid().cell_volume();
  return 0.5 * m + 0.5 * (k - 2.0 * p);
}

double dilation_derivative(const ComplexField& phi, const ComplexField& psi, double delta) {
  check_real_pair(phi, psi);
  const int d = phi.grid().dim();
  const double m = norm_sq(phi) + 2.0 * norm_sq(psi);
  const double k = gradient_norm_sq(phi) + 0.5 * gradient_norm_sq(psi);
  double p = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) p += (psi[i] * std::conj(phi[i] * phi[i])).real();
  p *= phi.grid().cell_volume();
  // M, P scale as lambda^d and K as lambda^(d-2) under phi(x) -> phi(x/lambda).
  auto dilated_action = [&](double lambda) {
    return 0.5 * std::pow(lambda, d) * m + 0.5 * std::pow(lambda, d - 2) * k - std::pow(lambda, d) * p;
  };
  return (dilated_action(1.0 + delta) - dilated_action(1.0 - delta)) / (2.0 * delta);
}

double radial_dilation_derivative(const RadialProfile& profile, double delta) {
  const double plus = radial_functionals(profile, 1.0 + delta).action();
  const double minus = radial_functionals(profile, 1.0 - delta).action();
  return (plus - minus) / (2.0 * delta);
}

double gn_ratio(const ComplexField& f, const ComplexField& g, double ground_state_mass) {
  require_same_grid(f, g);
  if (!(ground_state_mass > 0.0)) throw DomainError("gn_ratio: ground-state mass must be positive");
  const double m = norm_sq(f) + 2.0 * norm_sq(g);
  const double k = gradient_norm_sq(f) + 0.5 * gradient_norm_sq(g);
  if (m == 0.0) throw DomainError("gn_ratio: both fields vanish");
  const double denom = 0.5 * std::sqrt(m / ground_state_mass) * k;
  if (!(denom > 0.0)) throw DomainError("gn_ratio: K(f,g) vanishes");
  double p = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) p += (g[i] * std::conj(f[i] * f[i])).real();
  p *= f.grid().cell_volume();
  return p / denom;
}

double gn_ratio(const ComplexField& f, const ComplexField& g, const GroundState& gs) {
  return gn_ratio(f, g, gs.mass);
}

GroundState solve_radial_ground_state(int dim, double tol, const GroundStateOptions& options) {
  if (!(tol > 0.0)) throw UsageError("ground-state tolerance must be positive");
  if (dim < 1 || dim > 4) throw UsageError("ground-state dimension must be in 1..4");
  const double dr = options.radial_step;
  const double radius = options.shoot_radius;
  auto [phi0, psi0] = radial_seed(dim);

  std::vector<double> radii;
  for (double r = 4.0; r < radius - 1e-9; r += 2.0) radii.push_back(r);
  radii.push_back(radius);

  int iterations = 0;
  double last_update = 0.0;
  for (double rad : radii) {
    bool converged = false;
    for (int it = 0; it < 60; ++it) {
      ++iterations;
      ShotResult shot = shoot(phi0, psi0, dim, rad, dr, nullptr);
      if (!shot.finite) throw ConvergenceError("shooting: trajectory diverged before the matching radius", 1.0);
      const auto& J = shot.jacobian;
      const double det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
      if (det == 0.0) throw ConvergenceError("shooting: singular Jacobian", 1.0);
      const double da = -(J[1][1] * shot.mismatch[0] - J[0][1] * shot.mismatch[1]) / det;
      const double db = -(-J[1][0] * shot.mismatch[0] + J[0][0] * shot.mismatch[1]) / det;
      // Damped update: try the full step, halve while the trajectory diverges.
      double step = 1.0;
      for (int halving = 0; halving < 30; ++halving) {
        if (shoot(phi0 + step * da, psi0 + step * db, dim, rad, dr, nullptr).finite) break;
        step *= 0.5;
      }
      phi0 += step * da;
      psi0 += step * db;
      last_update = std::hypot(step * da, step * db) / std::hypot(phi0, psi0);
      if (last_update < std::min(tol, 1e-13) && step == 1.0) {
        converged = true;
        break;
      }
    }
    if (!converged && rad == radius && last_update > tol)
      throw ConvergenceError("shooting: Newton iteration did not converge", last_update);
  }

  GroundState gs;
  gs.method = GroundStateMethod::shooting;
  gs.iterations = iterations;
  RadialProfile profile;
  shoot(phi0, psi0, dim, radius, dr, &profile);
  if (!(phi0 > 0.0) || !(psi0 > 0.0)) throw DegenerateSolutionError("shooting converged to a non-positive profile");
  auto fun = radial_functionals(profile);
  gs.mass = fun.mass;
  gs.kinetic = fun.kinetic;
  gs.potential = fun.potential;
  gs.energy = fun.energy();
  gs.gn_coefficient = 1.0 / (2.0 * std::sqrt(gs.mass));
  gs.residual = radial_residual(profile);
  gs.phi0 = phi0;
  gs.psi0 = psi0;
  gs.profile = std::move(profile);
  return gs;
}

GroundState solve_ground_state(const Grid& grid, GroundStateMethod method, double tol,
                               const GroundStateOptions& options) {
  if (!(tol > 0.0)) throw UsageError("ground-state tolerance must be positive");
  if (method == GroundStateMethod::shooting) {
    GroundState gs = solve_radial_ground_state(grid.dim(), tol, options);
    auto [phi, psi] = lift_radial(grid, *gs.profile);
    gs.phi = std::move(phi);
    gs.psi = std::move(psi);
    return gs;
  }

  ComplexField phi(grid), psi(grid);
  if (options.initial) {
    phi = options.initial->first;
    psi = options.initial->second;
    require_same_grid(phi, ComplexField(grid));
  } else if (options.warm_start) {
    std::tie(phi, psi) = lift_radial(grid, *options.warm_start);
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      auto x = grid.position(i);
      double r2 = 0.0;
      for (int j = 0; j < grid.dim(); ++j) r2 += x[j] * x[j];
      phi[i] = 2.0 * std::exp(-0.5 * r2);
      psi[i] = std::exp(-0.5 * r2);
    }
  }
  if (norm_sq(phi) == 0.0) throw DegenerateSolutionError("ground-state flow started from the zero field");

  // Fixed point of  phi = S^2 (1 - Lap)^{-1} (2 psi phi),  psi = S^2 (2 - Lap/2)^{-1} phi^2
  // where S = (<L1 phi,phi> + <L2 psi,psi>) / (<N1,phi> + <N2,psi>) removes the
  // unstable direction along the solution itself.
  const std::size_t n = grid.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double dv = grid.cell_volume();
  std::vector<double> k2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto ix = grid.unravel(i);
    for (int j = 0; j < grid.dim(); ++j) k2[i] += std::pow(grid.wavenumber(ix[j]), 2);
  }
  ComplexField phi_hat(grid), psi_hat(grid), n1(grid), n2(grid);
  std::array<double, 2> residual{1.0, 1.0};
  int it = 0;
  const double a = options.mixing;
  for (; it < options.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      n1[i] = 2.0 * psi[i].real() * phi[i].real();
      n2[i] = phi[i].real() * phi[i].real();
    }
    phi_hat = phi;
    psi_hat = psi;
    fft_in_place(phi_hat, Direction::forward);
    fft_in_place(psi_hat, Direction::forward);
    fft_in_place(n1, Direction::forward);
    fft_in_place(n2, Direction::forward);
    double lin = 0.0, nonlin = 0.0, res1 = 0.0, res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double l1 = 1.0 + k2[i];
      const double l2 = 2.0 + 0.5 * k2[i];
      lin += l1 * std::norm(phi_hat[i]) + l2 * std::norm(psi_hat[i]);
      nonlin += (n1[i] * std::conj(phi_hat[i])).real() + (n2[i] * std::conj(psi_hat[i])).real();
      res1 += std::norm(l1 * phi_hat[i] - n1[i]);
      res2 += std::norm(l2 * psi_hat[i] - n2[i]);
    }
    residual = {std::sqrt(res1 * dv * inv_n), std::sqrt(res2 * dv * inv_n)};
    if (!std::isfinite(residual[0]) || !std::isfinite(residual[1]))
      throw NumericError("ground-state flow produced non-finite values");
    if (residual[0] < tol && residual[1] < tol) break;
    if (!(nonlin > 0.0) || lin * dv * inv_n < 1e-300)
      throw DegenerateSolutionError("ground-state flow collapsed to the zero solution");
    const double stab = std::pow(lin / nonlin, 2);
    for (std::size_t i = 0; i < n; ++i) {
      n1[i] *= stab * inv_n / (1.0 + k2[i]);
      n2[i] *= stab * inv_n / (2.0 + 0.5 * k2[i]);
    }
    fft_in_place(n1, Direction::inverse);
    fft_in_place(n2, Direction::inverse);
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] = (1.0 - a) * phi[i].real() + a * n1[i].real();
      psi[i] = (1.0 - a) * psi[i].real() + a * n2[i].real();
    }
  }
  if (it == options.max_iterations)
    throw ConvergenceError("ground-state flow did not converge within the iteration budget",
                           std::max(residual[0], residual[1]));

  GroundState gs;
  gs.method = GroundStateMethod::flow;
  gs.iterations = it;
  gs.phi = std::move(phi);
  gs.psi = std::move(psi);
  gs.residual = elliptic_residual(gs.phi, gs.psi);
  gs.mass = norm_sq(gs.phi) + 2.0 * norm_sq(gs.psi);
  if (!(gs.mass > 0.0)) throw DegenerateSolutionError("ground-state flow converged to zero");
  gs.kinetic = gradient_norm_sq(gs.phi) + 0.5 * gradient_norm_sq(gs.psi);
  double p = 0.0;
  for (std::size_t i = 0; i < n; ++i) p += gs.psi[i].real() * gs.phi[i].real() * gs.phi[i].real();
  gs.potential = p * dv;
  gs.energy = gs.kinetic - 2.0 * gs.potential;
  gs.gn_coefficient = 1.0 / (2.0 * std::sqrt(gs.mass));
  // The origin sits at (n/2, ..., n/2).
  std::size_t center = 0;
  for (int j = 0; j < grid.dim(); ++j) center = center * grid.points() + grid.points() / 2;
  gs.phi0 = gs.phi[center].real();
  gs.psi0 = gs.psi[center].real();

  // Radial slice along axis 0 through the origin.
  RadialProfile slice;
  slice.dim = grid.dim();
  slice.dr = grid.spacing();
  std::size_t stride = 1;
  for (int j = 1; j < grid.dim(); ++j) stride *= grid.points();
  for (int m = 0; m < grid.points() / 2; ++m) {
    const std::size_t idx = center + static_cast<std::size_t>(m) * stride;
    slice.phi.push_back(gs.phi[idx].real());
    slice.psi.push_back(gs.psi[idx].real());
  }
  gs.profile = std::move(slice);
  return gs;
}

std::optional<std::string> GroundStateArtifact::get(const std::string& key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return v;
  return std::nullopt;
}

void write_ground_state_artifact(std::ostream& out, const GroundStateArtifact& artifact) {
  out << "# qnls-ground-state v1\n";
  for (const auto& [k, v] : artifact.metadata) out << "# " << k << "=" << v << "\n";
  out << "r,phi,psi\n";
  char buf[96];
  const auto& p = artifact.profile;
  for (std::size_t m = 0; m < p.phi.size(); ++m) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.dr * static_cast<double>(m), p.phi[m], p.psi[m]);
    out << buf;
  }
}

GroundStateArtifact read_ground_state_artifact(std::istream& in) {
  GroundStateArtifact art;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# qnls-ground-state", 0) != 0)
    throw UsageError("not a ground-state artifact (missing header line)");
  std::vector<double> r;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      art.metadata.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      if (line != "r,phi,psi") throw UsageError("ground-state artifact: unexpected column header");
      header_seen = true;
      continue;
    }
    std::istringstream row(line);
    double rv, pv, qv;
    char c1, c2;
    if (!(row >> rv >> c1 >> pv >> c2 >> qv)) throw UsageError("ground-state artifact: malformed row");
    r.push_back(rv);
    art.profile.phi.push_back(pv);
    art.profile.psi.push_back(qv);
  }
  if (r.size() < 4) throw UsageError("ground-state artifact: profile too short");
  art.profile.dr = r[1] - r[0];
  if (auto d = art.get("d")) art.profile.dim = std::stoi(*d);
  if (auto m = art.get("mass")) art.mass = std::stod(*m);
  else throw UsageError("ground-state artifact: missing mass");
  return art;
}

GroundStateArtifact load_ground_state_artifact(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("ground-state artifact not found: " + path);
  return read_ground_state_artifact(in);
}

}  // namespace qnls
