#pragma once

// Periodic-box discretization with FFT-based differentiation and quadrature.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "qnls/errors.hpp"

namespace qnls {

using cplx = std::complex<double>;

/// Uniform periodic grid on [-L/2, L/2)^d with n points per axis.
///
/// Points are stored row-major with axis 0 slowest. Coordinate index i maps to
/// xi = (i - n/2) * h, so the origin sits on a grid point.
class Grid {
 public:
  static constexpr int kMaxDim = 4;

  Grid() = default;
  Grid(int dim, int points, double length);

  int dim() const { return dim_; }
  int points() const { return points_; }
  double length() const { return length_; }
  double spacing() const { return length_ / points_; }
  std::size_t size() const { return size_; }
  double cell_volume() const;
  double volume() const;

  double coordinate(int i) const { return (i - points_ / 2) * spacing(); }
  /// Angular wavenumber of FFT index i (standard FFT ordering).
  double wavenumber(int i) const;
  /// Signed mode number of FFT index i, in [-n/2, n/2).
  int mode(int i) const { return i < points_ / 2 ? i : i - points_; }

  std::array<int, kMaxDim> unravel(std::size_t idx) const;
  std::array<double, kMaxDim> position(std::size_t idx) const;

  /// Largest retained mode under the 2/3 rule: 3*K < n.
  int dealias_cutoff() const { return (points_ - 1) / 3; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int dim_ = 1;
  int points_ = 4;
  double length_ = 1.0;
  std::size_t size_ = 4;
};

/// Complex scalar field bound to a grid.
class ComplexField {
 public:
  ComplexField() = default;
  explicit ComplexField(const Grid& grid, cplx fill = {0.0, 0.0})
      : grid_(grid), values_(grid.size(), fill) {}
  ComplexField(const Grid& grid, std::vector<cplx> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  cplx& operator[](std::size_t i) { return values_[i]; }
  const cplx& operator[](std::size_t i) const { return values_[i]; }
  cplx* data() { return values_.data(); }
  const cplx* data() const { return values_.data(); }
  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }

  ComplexField& operator+=(const ComplexField& other);
  ComplexField& operator-=(const ComplexField& other);
  ComplexField& operator*=(cplx s);
  /// this += s * other
  ComplexField& axpy(cplx s, const ComplexField& other);

  bool all_finite() const;
  double max_abs() const;

 private:
  Grid grid_;
  std::vector<cplx> values_;
};

ComplexField operator+(ComplexField a, const ComplexField& b);
ComplexField operator-(ComplexField a, const ComplexField& b);
ComplexField operator*(cplx s, ComplexField a);

void require_same_grid(const ComplexField& a, const ComplexField& b);

enum class Direction { forward, inverse };

/// Unitary d-dimensional DFT in standard FFT ordering.
ComplexField transform(const ComplexField& f, Direction direction);

/// Raw (unnormalized) FFT in place; the inverse is NOT scaled by 1/size.
void fft_in_place(ComplexField& f, Direction direction);

/// factor * Laplacian(f), computed with the spectral multiplier -|k|^2.
ComplexField laplacian(const ComplexField& f, double factor = 1.0);

/// Spectral gradient. The Nyquist mode is dropped on the differentiated axis.
std::vector<ComplexField> gradient(const ComplexField& f);

/// Spectral divergence of d component fields (Nyquist dropped, as in gradient).
ComplexField divergence(std::span<const ComplexField> components);

/// <f, g> = sum f * conj(g) * h^d.
cplx inner_product(const ComplexField& f, const ComplexField& g);

double norm_sq(const ComplexField& f);
/// ||grad f||^2 through gradient() and inner_product().
double gradient_norm_sq(const ComplexField& f);
/// sqrt(||f||^2 + ||grad f||^2).
double h1_norm(const ComplexField& f);

/// Zero every mode with |m_j| > max_mode on any axis.
void band_limit(ComplexField& f, int max_mode);
/// 2/3-rule projection.
void dealias(ComplexField& f);

/// Field with independent standard-normal Fourier coefficients on the modes
/// |m_j| <= max_mode, scaled to unit L2 norm.
ComplexField random_band_limited(const Grid& grid, int max_mode, std::mt19937_64& rng);

/// Plane wave exp(i * 2*pi/L * sum_j m_j xi_j).
ComplexField plane_wave(const Grid& grid, std::span<const int> modes);

}  // namespace qnls
