#include "qnls/noise.hpp"

#include <cmath>
#include <ostream>
#include <random>

namespace qnls {

namespace {

// d^m/drho^m exp(-s rho^2) = (-sqrt(s))^m H_m(sqrt(s) rho) exp(-s rho^2),
// H_m the physicists' Hermite polynomial.
double gaussian_derivative_1d(int m, double rho, double s) {
  const double sq = std::sqrt(s);
  const double x = sq * rho;
  double h_prev = 1.0;
  double h = 2.0 * x;
  if (m == 0) h = 1.0;
  for (int j = 1; j < m; ++j) {
    const double next = 2.0 * x * h - 2.0 * j * h_prev;
    h_prev = h;
    h = next;
  }
  return std::pow(-sq, m) * h * std::exp(-s * rho * rho);
}

std::vector<double> derivative_field(const Grid& grid, const BumpSpec& bump, std::span<const int> nu) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto x = grid.position(i);
    out[i] = bump.derivative(nu, std::span<const double>(x.data(), grid.dim()));
  }
  return out;
}

ComplexField real_field(const Grid& grid, const std::vector<double>& v, double scale = 1.0) {
  ComplexField f(grid);
  for (std::size_t i = 0; i < v.size(); ++i) f[i] = {scale * v[i], 0.0};
  return f;
}

void validate_b(const NoiseModel& model, std::span<const double> b) {
  if (b.size() != model.count()) throw UsageError("Brownian value count does not match bump count");
}

void enumerate_multi_indices(int dim, int max_order, std::array<int, Grid::kMaxDim>& nu, int axis,
                             int remaining, std::vector<std::array<int, Grid::kMaxDim>>& out) {
  if (axis == dim) {
    out.push_back(nu);
    return;
  }
  for (int m = 0; m <= remaining; ++m) {
    nu[axis] = m;
    enumerate_multi_indices(dim, max_order, nu, axis + 1, remaining - m, out);
  }
  nu[axis] = 0;
}

}  // namespace

double BumpSpec::derivative(std::span<const int> nu, std::span<const double> x) const {
  if (shape == BumpShape::constant) {
    for (int m : nu)
      if (m != 0) return 0.0;
    return amplitude;
  }
  const double s = 1.0 / (width * width);
  double v = amplitude;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const int m = j < nu.size() ? nu[j] : 0;
    v *= gaussian_derivative_1d(m, x[j] - center[j], s);
  }
  return v;
}

NoiseModel::NoiseModel(const Grid& grid, std::vector<BumpSpec> bumps, bool test_only,
                       double flatness_threshold)
    : grid_(grid),
      bumps_(std::move(bumps)),
      mu_(grid),
      mu_tilde_(grid),
      test_only_(test_only),
      flatness_threshold_(flatness_threshold) {
  const int d = grid.dim();
  for (const auto& b : bumps_) {
    if (b.shape == BumpShape::gaussian && !(b.width > 0.0))
      throw UsageError("bump width must be positive");
    if (!std::isfinite(b.amplitude)) throw UsageError("bump amplitude must be finite");
  }
  fields_.reserve(bumps_.size());
  for (const auto& b : bumps_) {
    BumpFields f;
    std::array<int, Grid::kMaxDim> nu{};
    f.value = derivative_field(grid, b, std::span<const int>(nu.data(), d));
    for (int j = 0; j < d; ++j) {
      nu = {};
      nu[j] = 1;
      f.grad.push_back(derivative_field(grid, b, std::span<const int>(nu.data(), d)));
    }
    f.hessian.resize(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        nu = {};
        nu[i] += 1;
        nu[j] += 1;
        f.hessian[i * d + j] = derivative_field(grid, b, std::span<const int>(nu.data(), d));
        if (i != j) f.hessian[j * d + i] = f.hessian[i * d + j];
      }
    }
    f.laplacian.assign(grid.size(), 0.0);
    for (int i = 0; i < d; ++i)
      for (std::size_t p = 0; p < grid.size(); ++p) f.laplacian[p] += f.hessian[i * d + i][p];
    f.bilaplacian.assign(grid.size(), 0.0);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        nu = {};
        nu[i] += 2;
        nu[j] += 2;
        auto term = derivative_field(grid, b, std::span<const int>(nu.data(), d));
        for (std::size_t p = 0; p < grid.size(); ++p) f.bilaplacian[p] += term[p];
      }
    }
    fields_.push_back(std::move(f));
  }
  for (const auto& f : fields_)
    for (std::size_t p = 0; p < grid.size(); ++p) mu_[p] += 0.5 * f.value[p] * f.value[p];
  for (std::size_t p = 0; p < grid.size(); ++p) mu_tilde_[p] = 4.0 * mu_[p];

  if (!test_only_) {
    auto report = check_flatness(*this, 4, flatness_threshold_);
    if (!report.pass)
      throw UsageError("noise bump is not asymptotically flat on this box (score " +
                       std::to_string(report.worst_score) + ")");
  }
}

ComplexField NoiseModel::phi(std::size_t k) const { return real_field(grid_, fields_.at(k).value); }

BrownianPaths::BrownianPaths(std::size_t count, double dt, std::size_t steps, std::uint64_t seed,
                             std::vector<double> values)
    : count_(count), dt_(dt), steps_(steps), seed_(seed), values_(std::move(values)) {
  if (!(dt > 0.0)) throw UsageError("Brownian lattice step must be positive");
  if (values_.size() != count * (steps + 1)) throw UsageError("Brownian value array has wrong length");
}

double BrownianPaths::at(std::size_t k, std::size_t m) const {
  if (k >= count_ || m > steps_) throw UsageError("Brownian path index out of range");
  return values_[m * count_ + k];
}

std::vector<double> BrownianPaths::at_step(std::size_t m) const {
  if (m > steps_) throw UsageError("Brownian step index out of range");
  return {values_.begin() + static_cast<std::ptrdiff_t>(m * count_),
          values_.begin() + static_cast<std::ptrdiff_t>((m + 1) * count_)};
}

std::vector<double> BrownianPaths::at_time(double t) const {
  std::vector<double> out(count_, 0.0);
  if (count_ == 0) return out;
  if (t <= 0.0) return at_step(0);
  const double pos = t / dt_;
  auto m = static_cast<std::size_t>(std::floor(pos));
  if (m >= steps_) return at_step(steps_);
  double frac = pos - static_cast<double>(m);
  // Snap lattice points exactly so stage times that coincide with t_m
  // reproduce the stored values.
  if (frac < 1e-12) frac = 0.0;
  if (frac > 1.0 - 1e-12) {
    frac = 0.0;
    ++m;
  }
  for (std::size_t k = 0; k < count_; ++k) {
    const double lo = values_[m * count_ + k];
    out[k] = frac == 0.0 ? lo : lo + frac * (values_[(m + 1) * count_ + k] - lo);
  }
  return out;
}

BrownianPaths BrownianPaths::coarsen(std::size_t factor) const {
  if (factor == 0 || steps_ % factor != 0) throw UsageError("coarsening factor must divide the step count");
  const std::size_t steps = steps_ / factor;
  std::vector<double> values((steps + 1) * count_);
  for (std::size_t m = 0; m <= steps; ++m)
    for (std::size_t k = 0; k < count_; ++k) values[m * count_ + k] = values_[m * factor * count_ + k];
  return BrownianPaths(count_, dt_ * static_cast<double>(factor), steps, seed_, std::move(values));
}

void BrownianPaths::write_csv(std::ostream& out) const {
  out << "# qnls-brownian-paths v1 seed=" << seed_ << " dt=" << dt_ << "\n";
  out << "t";
  for (std::size_t k = 0; k < count_; ++k) out << ",B_" << (k + 1);
  out << "\n";
  out.precision(17);
  for (std::size_t m = 0; m <= steps_; ++m) {
    out << dt_ * static_cast<double>(m);
    for (std::size_t k = 0; k < count_; ++k) out << "," << values_[m * count_ + k];
    out << "\n";
  }
}

BrownianPaths sample_paths(std::size_t count, double dt, std::size_t steps, std::uint64_t seed) {
  if (!(dt > 0.0)) throw UsageError("sample_paths: dt must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> increment(0.0, std::sqrt(dt));
  std::vector<double> values((steps + 1) * count, 0.0);
  for (std::size_t m = 1; m <= steps; ++m)
    for (std::size_t k = 0; k < count; ++k)
      values[m * count + k] = values[(m - 1) * count + k] + increment(rng);
  return BrownianPaths(count, dt, steps, seed, std::move(values));
}

ComplexField eval_W(const NoiseModel& model, std::span<const double> b) {
  validate_b(model, b);
  ComplexField w(model.grid());
  for (std::size_t k = 0; k < model.count(); ++k) {
    const auto& phi = model.fields(k).value;
    for (std::size_t p = 0; p < w.size(); ++p) w[p] += cplx(0.0, phi[p] * b[k]);
  }
  return w;
}

ComplexField eval_W(const NoiseModel& model, const BrownianPaths& paths, std::size_t m) {
  return eval_W(model, paths.at_step(m));
}

ComplexField eval_Wtilde(const NoiseModel& model, const BrownianPaths& paths, std::size_t m) {
  auto w = eval_W(model, paths, m);
  w *= 2.0;
  return w;
}

DriftFields eval_drift_fields(const NoiseModel& model, std::span<const double> b) {
  validate_b(model, b);
  const Grid& grid = model.grid();
  const int d = grid.dim();
  DriftFields out;
  out.g.assign(d, std::vector<double>(grid.size(), 0.0));
  out.a.assign(grid.size(), 0.0);
  for (std::size_t k = 0; k < model.count(); ++k) {
    const auto& f = model.fields(k);
    for (int j = 0; j < d; ++j)
      for (std::size_t p = 0; p < grid.size(); ++p) out.g[j][p] += f.grad[j][p] * b[k];
    for (std::size_t p = 0; p < grid.size(); ++p) out.a[p] += f.laplacian[p] * b[k];
  }
  return out;
}

NoiseCoefficients eval_coeffs(const NoiseModel& model, std::span<const double> b) {
  validate_b(model, b);
  const Grid& grid = model.grid();
  const int d = grid.dim();
  NoiseCoefficients out{std::vector<ComplexField>(d, ComplexField(grid)),
                        std::vector<ComplexField>(d, ComplexField(grid)), ComplexField(grid),
                        ComplexField(grid)};
  // b1 = 2 i sum grad(phi_k) B_k,  b2 = i sum grad(2 phi_k) B_k
  for (int j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < model.count(); ++k) {
      const auto& dphi = model.fields(k).grad[j];
      for (std::size_t p = 0; p < grid.size(); ++p) {
        out.b1[j][p] += cplx(0.0, 2.0 * dphi[p] * b[k]);
        out.b2[j][p] += cplx(0.0, (2.0 * dphi[p]) * b[k]);
      }
    }
  }
  // c1 = -sum_j (sum_k d_j phi_k B_k)^2 + i sum_k Lap(phi_k) B_k
  // c2 = -1/2 sum_j (sum_k d_j(2 phi_k) B_k)^2 + 1/2 i sum_k Lap(2 phi_k) B_k
  std::vector<double> g(grid.size()), g2(grid.size());
  for (int j = 0; j < d; ++j) {
    std::fill(g.begin(), g.end(), 0.0);
    std::fill(g2.begin(), g2.end(), 0.0);
    for (std::size_t k = 0; k < model.count(); ++k) {
      const auto& dphi = model.fields(k).grad[j];
      for (std::size_t p = 0; p < grid.size(); ++p) {
        g[p] += dphi[p] * b[k];
        g2[p] += (2.0 * dphi[p]) * b[k];
      }
    }
    for (std::size_t p = 0; p < grid.size(); ++p) {
      out.c1[p] -= g[p] * g[p];
      out.c2[p] -= 0.5 * g2[p] * g2[p];
    }
  }
  for (std::size_t k = 0; k < model.count(); ++k) {
    const auto& lap = model.fields(k).laplacian;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      out.c1[p] += cplx(0.0, lap[p] * b[k]);
      out.c2[p] += cplx(0.0, 0.5 * (2.0 * lap[p]) * b[k]);
    }
  }
  return out;
}

NoiseCoefficients eval_coeffs(const NoiseModel& model, const BrownianPaths& paths, std::size_t m) {
  return eval_coeffs(model, paths.at_step(m));
}

FlatnessReport check_flatness(const NoiseModel& model, int max_order, double threshold) {
  if (max_order < 0) throw UsageError("check_flatness: max_order must be >= 0");
  FlatnessReport report;
  report.threshold = threshold;
  const Grid& grid = model.grid();
  const int d = grid.dim();
  const double shell_start = 0.9 * grid.length() / 2.0;

  std::vector<std::size_t> shell;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    auto x = grid.position(p);
    double inf_norm = 0.0;
    for (int j = 0; j < d; ++j) inf_norm = std::max(inf_norm, std::abs(x[j]));
    if (inf_norm >= shell_start) shell.push_back(p);
  }

  std::vector<std::array<int, Grid::kMaxDim>> indices;
  std::array<int, Grid::kMaxDim> nu{};
  enumerate_multi_indices(d, max_order, nu, 0, max_order, indices);

  for (std::size_t k = 0; k < model.count(); ++k) {
    const auto& bump = model.bumps()[k];
    for (const auto& multi : indices) {
      double score = 0.0;
      for (std::size_t p : shell) {
        auto x = grid.position(p);
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) r2 += x[j] * x[j];
        const double v = bump.derivative(std::span<const int>(multi.data(), d),
                                         std::span<const double>(x.data(), d));
        score = std::max(score, (1.0 + r2) * std::abs(v));
      }
      report.entries.push_back({k, multi, score});
      report.worst_score = std::max(report.worst_score, score);
    }
  }
  report.pass = report.worst_score < threshold;
  return report;
}

}  // namespace qnls
