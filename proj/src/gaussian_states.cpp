#include "sciv/gaussian_states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sciv/errors.hpp"

namespace sciv {

namespace {

double normalisation(const complex& width) { return std::pow(width.real() / std::numbers::pi, 0.25); }

// Points with Re w u^2 / 2 > 41 carry less than 1.6e-18 of the peak amplitude.
constexpr double kWindowExponent = 82.0;

}  // namespace

complex amplitude(const GaussianState& g, double x) {
  const double u = x - g.q;
  const complex exponent = -0.5 * g.width * u * u + complex(0.0, g.p * u / g.hbar);
  return normalisation(g.width) * std::exp(exponent);
}

// With y = x - q_bra and d = q_ket - q_bra the integrand conj(g_bra) g_ket is
//   N exp(-(A/2) y^2 + B y + C),
//   A = conj(w_bra) + w_ket,
//   B = w_ket d + i (p_ket - p_bra) / hbar,
//   C = -w_ket d^2 / 2 - i p_ket d / hbar,
//   N = (Re w_bra Re w_ket)^(1/4) / sqrt(pi),
// and the complex Gaussian integral gives sqrt(2 pi / A) exp(B^2 / (2A) + C)
// on the principal branch (Re A > 0). For equal real widths w this is
// exp(-w d^2/4 - dp^2/(4 hbar^2 w) + i phase).
complex overlap(const GaussianState& bra, const GaussianState& ket) {
  if (bra.hbar != ket.hbar) throw DomainError("overlap of Gaussians with different hbar");
  if (!(bra.width.real() > 0.0) || !(ket.width.real() > 0.0)) {
    throw DomainError("overlap requires Re(width) > 0 for both states");
  }
  const complex a = std::conj(bra.width) + ket.width;
  if (!(a.real() > 0.0)) throw DomainError("overlap exponent is not decaying");
  const double hbar = ket.hbar;
  const double d = ket.q - bra.q;
  const complex b = ket.width * d + complex(0.0, (ket.p - bra.p) / hbar);
  const complex c = -0.5 * ket.width * d * d - complex(0.0, ket.p * d / hbar);
  const double norm = std::pow(bra.width.real() * ket.width.real(), 0.25);
  return norm * std::sqrt(2.0 / a) * std::exp(b * b / (2.0 * a) + c);
}

std::vector<complex> superpose_on_grid(std::span<const GaussianTerm> terms, const UniformGrid& grid) {
  if (grid.n_points < 2 || !(grid.x_max > grid.x_min)) throw GridCoverageError("degenerate grid");
  const double last = grid.point(grid.n_points - 1);
  for (const GaussianTerm& term : terms) {
    if (!(term.state.width.real() > 0.0)) throw DomainError("Gaussian with Re(width) <= 0");
    const double margin = 6.0 / std::sqrt(term.state.width.real());
    if (term.state.q - margin < grid.x_min || term.state.q + margin > last) {
      throw GridCoverageError("grid [" + std::to_string(grid.x_min) + ", " + std::to_string(grid.x_max) +
                              "] does not cover Gaussian at q = " + std::to_string(term.state.q) +
                              " with margin " + std::to_string(margin));
    }
  }
  std::vector<complex> samples(grid.n_points);
  for (std::size_t j = 0; j < grid.n_points; ++j) {
    const double x = grid.point(j);
    complex sum = 0.0;
    for (const GaussianTerm& term : terms) sum += term.coefficient * amplitude(term.state, x);
    samples[j] = sum;
  }
  return samples;
}

void accumulate_on_grid(complex coefficient, const GaussianState& g, const UniformGrid& grid,
                        std::span<complex> samples) {
  const double re_width = g.width.real();
  if (!(re_width > 0.0)) throw DomainError("Gaussian with Re(width) <= 0");
  const auto n = static_cast<std::ptrdiff_t>(std::min(grid.n_points, samples.size()));
  const double dx = grid.spacing();
  const double reach = std::sqrt(kWindowExponent / re_width);
  const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((g.q - reach - grid.x_min) / dx)));
  const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::floor((g.q + reach - grid.x_min) / dx)));
  if (lo > hi) return;
  const auto start = std::clamp<std::ptrdiff_t>(std::llround((g.q - grid.x_min) / dx), lo, hi);

  const complex a = -0.5 * g.width;
  const complex b(0.0, g.p / g.hbar);
  const double u0 = grid.point(static_cast<std::size_t>(start)) - g.q;
  const complex peak = coefficient * amplitude(g, grid.point(static_cast<std::size_t>(start)));
  samples[start] += peak;

  // g(x + dx) / g(x) = exp(a (2 u dx + dx^2) + b dx), and that ratio itself
  // changes by exp(2 a dx^2) per step.
  const complex growth = std::exp(2.0 * a * dx * dx);
  complex value = peak;
  complex ratio = std::exp(a * (2.0 * u0 * dx + dx * dx) + b * dx);
  for (auto j = start + 1; j <= hi; ++j) {
    value *= ratio;
    ratio *= growth;
    samples[j] += value;
  }
  value = peak;
  ratio = std::exp(a * (-2.0 * u0 * dx + dx * dx) - b * dx);
  for (auto j = start - 1; j >= lo; --j) {
    value *= ratio;
    ratio *= growth;
    samples[j] += value;
  }
}

double grid_norm(std::span<const complex> samples, const UniformGrid& grid) {
  double sum = 0.0;
  for (const complex& s : samples) sum += std::norm(s);
  return sum * grid.spacing();
}

}  // namespace sciv
