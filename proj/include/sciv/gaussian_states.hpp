#ifndef SCIV_GAUSSIAN_STATES_HPP
#define SCIV_GAUSSIAN_STATES_HPP

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sciv {

using complex = std::complex<double>;

/// <x|g> = (Re w / pi)^(1/4) exp(-(w/2)(x-q)^2 + (i/hbar) p (x-q)), w = width.
struct GaussianState {
  double q = 0.0;
  double p = 0.0;
  complex width{1.0, 0.0};
  double hbar = 1.0;
};

/// Uniform periodic-style grid: x_j = x_min + j*dx, dx = (x_max - x_min)/n,
/// j = 0..n-1 (x_max itself is excluded).
struct UniformGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t n_points = 2;

  double spacing() const noexcept { return (x_max - x_min) / static_cast<double>(n_points); }
  double point(std::size_t j) const noexcept { return x_min + static_cast<double>(j) * spacing(); }
};

complex amplitude(const GaussianState& g, double x);

/// <bra|ket> in closed form; throws DomainError for non-normalisable widths
/// or mismatched hbar.
complex overlap(const GaussianState& bra, const GaussianState& ket);

struct GaussianTerm {
  complex coefficient;
  GaussianState state;
};

/// Samples of sum_k c_k <x|g_k> on the grid. Every centre must sit at least
/// 6/sqrt(min Re w) from both edges, otherwise GridCoverageError.
std::vector<complex> superpose_on_grid(std::span<const GaussianTerm> terms, const UniformGrid& grid);

/// Adds c <x|g> into `samples` wherever the Gaussian is above ~1e-18 of its
/// peak. No coverage requirement: whatever falls outside the grid is dropped.
/// Uses a two-multiply recurrence along the grid instead of one exp per point.
void accumulate_on_grid(complex coefficient, const GaussianState& g, const UniformGrid& grid,
                        std::span<complex> samples);

/// Trapezoid rule dx * sum |psi_j|^2 (the integrand vanishes at both ends).
double grid_norm(std::span<const complex> samples, const UniformGrid& grid);

}  // namespace sciv

#endif  // SCIV_GAUSSIAN_STATES_HPP
