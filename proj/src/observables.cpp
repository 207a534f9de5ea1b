#include "qnls/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace qnls {

double mass(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  return norm_sq(u) + 2.0 * norm_sq(v);
}

double kinetic(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  return gradient_norm_sq(u) + 0.5 * gradient_norm_sq(v);
}

double potential(const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += (v[i] * std::conj(u[i] * u[i])).real();
  return acc * u.grid().cell_volume();
}

double energy(const ComplexField& u, const ComplexField& v) { return kinetic(u, v) - 2.0 * potential(u, v); }

double EnergyRateTerms::total() const {
  double s = 0.0;
  for (double t : term) s += t;
  return s;
}

namespace {

void check_b(const NoiseModel& model, std::span<const double> b) {
  if (b.size() != model.count()) throw UsageError("B vector length must equal the number of bumps");
}

}  // namespace

EnergyRateTerms energy_rate_terms(const ComplexField& y, const ComplexField& z, const NoiseModel& model,
                                  std::span<const double> b) {
  require_same_grid(y, z);
  check_b(model, b);
  EnergyRateTerms out;
  if (model.count() == 0) return out;
  const Grid& grid = y.grid();
  const int d = grid.dim();
  const std::size_t n = grid.size();
  const double dv = grid.cell_volume();

  // Static combinations of the bump fields at this B.
  std::vector<double> bilap(n, 0.0), lap(n, 0.0);
  std::vector<std::vector<double>> hess(d * d, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> g(d, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < model.count(); ++k) {
    const auto& f = model.fields(k);
    for (std::size_t p = 0; p < n; ++p) {
      bilap[p] += b[k] * f.bilaplacian[p];
      lap[p] += b[k] * f.laplacian[p];
    }
    for (int ij = 0; ij < d * d; ++ij)
      for (std::size_t p = 0; p < n; ++p) hess[ij][p] += b[k] * f.hessian[ij][p];
    for (int j = 0; j < d; ++j)
      for (std::size_t p = 0; p < n; ++p) g[j][p] += b[k] * f.grad[j][p];
  }
  const auto gy = gradient(y);
  const auto gz = gradient(z);

  auto& t = out.term;
  for (std::size_t p = 0; p < n; ++p) {
    t[0] += bilap[p] * std::norm(y[p]);
    t[1] += 0.5 * bilap[p] * std::norm(z[p]);
    double hy = 0.0, hz = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        hy += hess[i * d + j][p] * (gy[i][p] * std::conj(gy[j][p])).real();
        hz += hess[i * d + j][p] * (gz[i][p] * std::conj(gz[j][p])).real();
      }
    t[2] += -4.0 * hy;
    t[3] += -2.0 * hz;
    // sum_j d_i (g_j^2) = 2 sum_j g_j d_i g_j
    cplx qy{}, qz{};
    for (int i = 0; i < d; ++i) {
      double q = 0.0;
      for (int j = 0; j < d; ++j) q += 2.0 * g[j][p] * hess[i * d + j][p];
      qy += q * gy[i][p];
      qz += q * gz[i][p];
    }
    t[4] += -2.0 * (qy * std::conj(y[p])).imag();
    t[5] += -0.5 * 4.0 * (qz * std::conj(z[p])).imag();
    t[6] += 2.0 * lap[p] * (z[p] * std::conj(y[p] * y[p])).real();
  }
  for (double& v : t) v *= dv;
  return out;
}

double energy_rate_rhs(const ComplexField& y, const ComplexField& z, const NoiseModel& model,
                       std::span<const double> b) {
  return energy_rate_terms(y, z, model, b).total();
}

std::array<double, 8> raw_energy_rate_terms(const ComplexField& y, const ComplexField& z,
                                            const NoiseModel& model, std::span<const double> b) {
  require_same_grid(y, z);
  check_b(model, b);
  std::array<double, 8> out{};
  if (model.count() == 0) return out;
  const Grid& grid = y.grid();
  const int d = grid.dim();
  const std::size_t n = grid.size();
  const NoiseCoefficients c = eval_coeffs(model, b);
  const auto gy = gradient(y);
  const auto gz = gradient(z);
  const ComplexField ly = laplacian(y, 1.0);
  const ComplexField lz = laplacian(z, 0.5);
  cplx acc[8] = {};
  for (std::size_t p = 0; p < n; ++p) {
    cplx by{}, bz{};
    for (int j = 0; j < d; ++j) {
      by += c.b1[j][p] * gy[j][p];
      bz += c.b2[j][p] * gz[j][p];
    }
    const cplx cy = c.c1[p] * y[p];
    const cplx cz = c.c2[p] * z[p];
    const cplx nl1 = 2.0 * z[p] * std::conj(y[p]);
    const cplx nl2 = y[p] * y[p];
    acc[0] += ly[p] * std::conj(by);
    acc[1] += nl1 * std::conj(by);
    acc[2] += ly[p] * std::conj(cy);
    acc[3] += nl1 * std::conj(cy);
    acc[4] += lz[p] * std::conj(bz);
    acc[5] += nl2 * std::conj(bz);
    acc[6] += lz[p] * std::conj(cz);
    acc[7] += nl2 * std::conj(cz);
  }
  for (int j = 0; j < 8; ++j) out[j] = -2.0 * acc[j].imag() * grid.cell_volume();
  return out;
}

ObservableRecord observe(double t, const ComplexField& u, const ComplexField& v) {
  require_same_grid(u, v);
  ObservableRecord r;
  r.t = t;
  const double gu = gradient_norm_sq(u);
  const double gv = gradient_norm_sq(v);
  const double mu = norm_sq(u);
  const double mv = norm_sq(v);
  r.M = mu + 2.0 * mv;
  r.K = gu + 0.5 * gv;
  r.P = potential(u, v);
  r.E = r.K - 2.0 * r.P;
  r.H1_sum = std::sqrt(mu + gu) + std::sqrt(mv + gv);
  return r;
}

void ObservableSeries::write_csv(std::ostream& out, const std::vector<std::string>& comments) const {
  out << "# qnls-observables v1\n";
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "t,M,K,P,E,dE_rhs,H1_sum,flag_E2,flag_gronwall\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d\n", r.t, r.M, r.K, r.P,
                  r.E, r.dE_rhs, r.H1_sum, r.flag_E2, r.flag_gronwall);
    out << buf;
  }
}

ObservableSeries ObservableSeries::read_csv(std::istream& in) {
  ObservableSeries s;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# qnls-observables", 0) != 0)
    throw UsageError("not an observables file (missing version header)");
  do {
    if (!std::getline(in, line)) throw UsageError("observables file: missing column header");
  } while (line.rfind('#', 0) == 0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    ObservableRecord r;
    std::string de;
    if (!(row >> r.t >> r.M >> r.K >> r.P >> r.E >> de >> r.H1_sum >> r.flag_E2 >> r.flag_gronwall))
      throw UsageError("observables file: malformed row");
    r.dE_rhs = std::strtod(de.c_str(), nullptr);
    s.records.push_back(r);
  }
  return s;
}

namespace {

std::vector<double> cumulative_kinetic(const ObservableSeries& series) {
  std::vector<double> out(series.records.size(), 0.0);
  for (std::size_t i = 1; i < out.size(); ++i) {
    const auto& a = series.records[i - 1];
    const auto& b = series.records[i];
    out[i] = out[i - 1] + 0.5 * (b.t - a.t) * (a.K + b.K);
  }
  return out;
}

}  // namespace

double fit_gronwall_constant(const ObservableSeries& series) {
  if (series.records.empty()) return 0.0;
  const auto cum = cumulative_kinetic(series);
  const double e0 = series.records.front().E;
  double c = 0.0;
  for (std::size_t i = 0; i < cum.size(); ++i)
    c = std::max(c, (series.records[i].E - e0) / (1.0 + cum[i]));
  return c;
}

BoundsDiagnostics check_bounds(const ObservableSeries& series, double ground_state_mass, double fit_c,
                               double tol) {
  if (!(ground_state_mass > 0.0)) throw UsageError("check_bounds: ground-state mass must be positive");
  BoundsDiagnostics diag;
  const auto& recs = series.records;
  diag.flag_E2.assign(recs.size(), -1);
  diag.flag_gronwall.assign(recs.size(), -1);
  if (recs.empty()) return diag;
  const double m0 = recs.front().M;
  diag.coercivity_applicable = m0 < ground_state_mass;
  diag.coercivity_factor = diag.coercivity_applicable ? 1.0 - std::sqrt(m0 / ground_state_mass) : 0.0;
  const auto cum = cumulative_kinetic(series);
  const double e0 = recs.front().E;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (diag.coercivity_applicable) {
      const bool ok = r.E >= diag.coercivity_factor * r.K - tol * std::max(1.0, r.K);
      diag.flag_E2[i] = ok ? 0 : 1;
      if (!ok && !diag.first_coercivity_violation) diag.first_coercivity_violation = i;
    }
    const bool ok = r.E <= e0 + fit_c + fit_c * cum[i] + tol * std::max(1.0, std::abs(e0));
    diag.flag_gronwall[i] = ok ? 0 : 1;
    if (!ok && !diag.first_envelope_violation) diag.first_envelope_violation = i;
  }
  return diag;
}

void apply_flags(ObservableSeries& series, const BoundsDiagnostics& diag) {
  for (std::size_t i = 0; i < series.records.size() && i < diag.flag_E2.size(); ++i) {
    series.records[i].flag_E2 = diag.flag_E2[i];
    series.records[i].flag_gronwall = diag.flag_gronwall[i];
  }
}

}  // namespace qnls
