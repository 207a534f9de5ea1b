#include "qnls/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <tuple>

namespace qnls {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (dim, n, sign) and kept for the
// lifetime of the process.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int dim, int n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(dim, n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    int dims[Grid::kMaxDim];
    for (int j = 0; j < dim; ++j) {
      dims[j] = n;
      total *= static_cast<std::size_t>(n);
    }
    auto* buf = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(dim, dims, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (plan == nullptr) throw NumericError("FFTW failed to create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

std::size_t axis_stride(const Grid& g, int axis) {
  std::size_t stride = 1;
  for (int j = axis + 1; j < g.dim(); ++j) stride *= static_cast<std::size_t>(g.points());
  return stride;
}

int axis_index(const Grid& g, std::size_t idx, int axis) {
  return static_cast<int>((idx / axis_stride(g, axis)) % static_cast<std::size_t>(g.points()));
}

// |k|^2 per point, cached per grid.
const std::vector<double>& wavenumber_sq(const Grid& g) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<std::vector<double>>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(g.dim(), g.points(), g.length());
  auto& slot = cache[key];
  if (!slot) {
    auto k2 = std::make_shared<std::vector<double>>(g.size(), 0.0);
    for (int axis = 0; axis < g.dim(); ++axis) {
      const std::size_t stride = axis_stride(g, axis);
      for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const double k = g.wavenumber(static_cast<int>((idx / stride) % g.points()));
        (*k2)[idx] += k * k;
      }
    }
    slot = std::move(k2);
  }
  return *slot;
}

void require_finite(const ComplexField& f, const char* op) {
  if (!f.all_finite()) {
    std::ostringstream os;
    os << op << ": non-finite input field";
    throw NumericError(os.str());
  }
}

}  // namespace

Grid::Grid(int dim, int points, double length) : dim_(dim), points_(points), length_(length) {
  if (dim < 1 || dim > kMaxDim) throw UsageError("grid dimension must be in 1..4");
  if (points < 4 || !is_power_of_two(points))
    throw UsageError("grid points per axis must be a power of two >= 4");
  if (!(length > 0.0) || !std::isfinite(length)) throw UsageError("grid length must be positive");
  size_ = 1;
  for (int j = 0; j < dim; ++j) size_ *= static_cast<std::size_t>(points);
}

double Grid::cell_volume() const { return std::pow(spacing(), dim_); }
double Grid::volume() const { return std::pow(length_, dim_); }

double Grid::wavenumber(int i) const { return 2.0 * std::numbers::pi / length_ * mode(i); }

std::array<int, Grid::kMaxDim> Grid::unravel(std::size_t idx) const {
  std::array<int, kMaxDim> out{};
  for (int j = dim_ - 1; j >= 0; --j) {
    out[j] = static_cast<int>(idx % static_cast<std::size_t>(points_));
    idx /= static_cast<std::size_t>(points_);
  }
  return out;
}

std::array<double, Grid::kMaxDim> Grid::position(std::size_t idx) const {
  auto ix = unravel(idx);
  std::array<double, kMaxDim> x{};
  for (int j = 0; j < dim_; ++j) x[j] = coordinate(ix[j]);
  return x;
}

ComplexField::ComplexField(const Grid& grid, std::vector<cplx> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid.size()) throw UsageError("field length does not match grid size");
}

void require_same_grid(const ComplexField& a, const ComplexField& b) {
  if (!(a.grid() == b.grid())) throw UsageError("fields are bound to different grids");
}

ComplexField& ComplexField::operator+=(const ComplexField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ComplexField& ComplexField::operator-=(const ComplexField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ComplexField& ComplexField::operator*=(cplx s) {
  for (auto& v : values_) v *= s;
  return *this;
}

ComplexField& ComplexField::axpy(cplx s, const ComplexField& other) {
  require_same_grid(*this, other);
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * other.values_[i];
  return *this;
}

bool ComplexField::all_finite() const {
  for (const auto& v : values_)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

double ComplexField::max_abs() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
ComplexField operator*(cplx s, ComplexField a) { return a *= s; }

void fft_in_place(ComplexField& f, Direction direction) {
  const Grid& g = f.grid();
  const int sign = direction == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD;
  fftw_plan plan = PlanCache::instance().get(g.dim(), g.points(), sign);
  auto* p = reinterpret_cast<fftw_complex*>(f.data());
  fftw_execute_dft(plan, p, p);
}

ComplexField transform(const ComplexField& f, Direction direction) {
  ComplexField out = f;
  fft_in_place(out, direction);
  out *= 1.0 / std::sqrt(static_cast<double>(f.size()));
  return out;
}

ComplexField laplacian(const ComplexField& f, double factor) {
  require_finite(f, "laplacian");
  if (!std::isfinite(factor)) throw NumericError("laplacian: non-finite factor");
  ComplexField out = f;
  fft_in_place(out, Direction::forward);
  const auto& k2 = wavenumber_sq(f.grid());
  const double scale = -factor / static_cast<double>(f.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale * k2[i];
  fft_in_place(out, Direction::inverse);
  return out;
}

std::vector<ComplexField> gradient(const ComplexField& f) {
  require_finite(f, "gradient");
  const Grid& g = f.grid();
  ComplexField hat = f;
  fft_in_place(hat, Direction::forward);
  const double scale = 1.0 / static_cast<double>(f.size());
  std::vector<ComplexField> out;
  out.reserve(g.dim());
  for (int axis = 0; axis < g.dim(); ++axis) {
    ComplexField comp(g);
    for (std::size_t i = 0; i < hat.size(); ++i) {
      const int ia = axis_index(g, i, axis);
      if (ia == g.points() / 2) continue;
      comp[i] = cplx(0.0, g.wavenumber(ia) * scale) * hat[i];
    }
    fft_in_place(comp, Direction::inverse);
    out.push_back(std::move(comp));
  }
  return out;
}

ComplexField divergence(std::span<const ComplexField> components) {
  if (components.empty()) throw UsageError("divergence: no components");
  const Grid& g = components[0].grid();
  if (static_cast<int>(components.size()) != g.dim())
    throw UsageError("divergence: component count must equal grid dimension");
  ComplexField acc(g);
  const double scale = 1.0 / static_cast<double>(g.size());
  for (int axis = 0; axis < g.dim(); ++axis) {
    require_same_grid(components[axis], acc);
    require_finite(components[axis], "divergence");
    ComplexField hat = components[axis];
    fft_in_place(hat, Direction::forward);
    for (std::size_t i = 0; i < hat.size(); ++i) {
      const int ia = axis_index(g, i, axis);
      if (ia == g.points() / 2) continue;
      acc[i] += cplx(0.0, g.wavenumber(ia) * scale) * hat[i];
    }
  }
  fft_in_place(acc, Direction::inverse);
  return acc;
}

cplx inner_product(const ComplexField& f, const ComplexField& g) {
  require_same_grid(f, g);
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * std::conj(g[i]);
  return acc * f.grid().cell_volume();
}

double norm_sq(const ComplexField& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::norm(f[i]);
  return acc * f.grid().cell_volume();
}

double gradient_norm_sq(const ComplexField& f) {
  require_finite(f, "gradient_norm_sq");
  // Parseval with the multipliers of gradient(): Nyquist dropped on each axis.
  const Grid& g = f.grid();
  std::vector<double> k2(static_cast<std::size_t>(g.points()));
  for (int i = 0; i < g.points(); ++i) {
    const double k = i == g.points() / 2 ? 0.0 : g.wavenumber(i);
    k2[static_cast<std::size_t>(i)] = k * k;
  }
  ComplexField hat = f;
  fft_in_place(hat, Direction::forward);
  // Rows along the last axis; the other axes contribute a constant per row.
  const std::size_t n = static_cast<std::size_t>(g.points());
  double acc = 0.0;
  for (std::size_t row = 0; row < hat.size() / n; ++row) {
    double outer = 0.0;
    std::size_t r = row;
    for (int j = 0; j < g.dim() - 1; ++j) {
      outer += k2[r % n];
      r /= n;
    }
    const cplx* p = hat.data() + row * n;
    for (std::size_t i = 0; i < n; ++i) acc += (outer + k2[i]) * std::norm(p[i]);
  }
  return acc * g.cell_volume() / static_cast<double>(f.size());
}

double h1_norm(const ComplexField& f) { return std::sqrt(norm_sq(f) + gradient_norm_sq(f)); }

void band_limit(ComplexField& f, int max_mode) {
  const Grid& g = f.grid();
  fft_in_place(f, Direction::forward);
  const double scale = 1.0 / static_cast<double>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto ix = g.unravel(i);
    bool keep = true;
    for (int j = 0; j < g.dim() && keep; ++j) keep = std::abs(g.mode(ix[j])) <= max_mode;
    f[i] = keep ? f[i] * scale : cplx{};
  }
  fft_in_place(f, Direction::inverse);
}

void dealias(ComplexField& f) { band_limit(f, f.grid().dealias_cutoff()); }

ComplexField random_band_limited(const Grid& grid, int max_mode, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexField hat(grid);
  for (std::size_t i = 0; i < hat.size(); ++i) {
    auto ix = grid.unravel(i);
    bool keep = true;
    for (int j = 0; j < grid.dim() && keep; ++j) keep = std::abs(grid.mode(ix[j])) <= max_mode;
    if (!keep) continue;
    const double re = normal(rng);
    const double im = normal(rng);
    hat[i] = {re, im};
  }
  fft_in_place(hat, Direction::inverse);
  hat *= 1.0 / std::sqrt(norm_sq(hat));
  return hat;
}

ComplexField plane_wave(const Grid& grid, std::span<const int> modes) {
  if (static_cast<int>(modes.size()) != grid.dim()) throw UsageError("plane_wave: mode count mismatch");
  ComplexField f(grid);
  const double k0 = 2.0 * std::numbers::pi / grid.length();
  for (std::size_t i = 0; i < f.size(); ++i) {
    auto x = grid.position(i);
    double phase = 0.0;
    for (int j = 0; j < grid.dim(); ++j) phase += k0 * modes[j] * x[j];
    f[i] = std::polar(1.0, phase);
  }
  return f;
}

}  // namespace qnls
