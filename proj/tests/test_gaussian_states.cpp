#include <doctest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sciv/errors.hpp"
#include "sciv/gaussian_states.hpp"

using namespace sciv;

namespace {

complex quadrature_overlap(const GaussianState& a, const GaussianState& b, double lo, double hi) {
  boost::math::quadrature::tanh_sinh<double> ts(15);
  auto f = [&](double x) { return std::conj(amplitude(a, x)) * amplitude(b, x); };
  const double re = ts.integrate([&](double x) { return f(x).real(); }, lo, hi);
  const double im = ts.integrate([&](double x) { return f(x).imag(); }, lo, hi);
  return {re, im};
}

GaussianState random_state(std::mt19937_64& rng, double hbar) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianState g;
  g.q = 2.0 * u(rng);
  g.p = 2.0 * u(rng);
  g.width = {std::exp(1.5 * u(rng)), 2.0 * u(rng)};
  g.hbar = hbar;
  return g;
}

}  // namespace

TEST_CASE("amplitude") {
  CHECK(amplitude(GaussianState{}, 0.0).real() == doctest::Approx(0.7511255).epsilon(1e-7));
  CHECK(amplitude(GaussianState{}, 0.0).imag() == 0.0);

  SUBCASE("matches a 50-digit evaluation") {
    using big = boost::multiprecision::cpp_bin_float_50;
    const GaussianState g{1.0, 2.0, {2.0, 1.0}, 0.05};
    const double x = 1.3;
    const big dx = big(x) - big(g.q);
    const big re_exp = -big(g.width.real()) / 2 * dx * dx;
    const big im_exp = -big(g.width.imag()) / 2 * dx * dx + big(g.p) / big(g.hbar) * dx;
    const big norm = boost::multiprecision::pow(big(g.width.real()) / boost::math::constants::pi<big>(), big(0.25));
    const big mag = norm * boost::multiprecision::exp(re_exp);
    const complex expected(static_cast<double>(mag * boost::multiprecision::cos(im_exp)),
                           static_cast<double>(mag * boost::multiprecision::sin(im_exp)));
    CHECK(std::abs(amplitude(g, x) - expected) < 1e-12);
  }

  SUBCASE("normalised on a wide grid") {
    const UniformGrid grid{-12.0, 12.0, 2048};
    std::vector<complex> psi(grid.n_points);
    for (std::size_t j = 0; j < grid.n_points; ++j) psi[j] = amplitude(GaussianState{}, grid.point(j));
    CHECK(grid_norm(psi, grid) == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("overlap") {
  SUBCASE("self overlap is one") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
      const GaussianState g = random_state(rng, 0.3);
      CHECK(std::abs(overlap(g, g) - 1.0) < 1e-12);
    }
  }

  SUBCASE("pure displacement") {
    const double gamma = 100.0 / 9.0, d = 0.3;
    const GaussianState a{0.0, 0.0, gamma, 0.05};
    const GaussianState b{d, 0.0, gamma, 0.05};
    CHECK(std::abs(overlap(a, b)) == doctest::Approx(std::exp(-gamma * d * d / 4)).epsilon(1e-13));
  }

  SUBCASE("equal real widths reduce to the frozen form") {
    const double gamma = 3.0, hbar = 0.7;
    const GaussianState a{0.2, -0.4, gamma, hbar};
    const GaussianState b{-0.5, 0.9, gamma, hbar};
    const double dq = b.q - a.q, dp = b.p - a.p;
    CHECK(std::abs(overlap(a, b)) ==
          doctest::Approx(std::exp(-gamma * dq * dq / 4 - dp * dp / (4 * hbar * hbar * gamma))).epsilon(1e-13));
  }

  SUBCASE("complex width against quadrature") {
    const GaussianState bra{0.0, 0.0, 12.0, 1.0};
    const GaussianState ket{0.4, 1.1, {3.0, -5.0}, 1.0};
    CHECK(std::abs(overlap(bra, ket) - quadrature_overlap(bra, ket, -20.0, 20.0)) < 1e-10);
  }

  SUBCASE("hermitian symmetry and Cauchy-Schwarz") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 200; ++i) {
      const GaussianState a = random_state(rng, 0.5), b = random_state(rng, 0.5);
      const complex ab = overlap(a, b), ba = overlap(b, a);
      CHECK(std::abs(ab - std::conj(ba)) < 1e-14);
      CHECK(std::abs(ab) < 1.0);
    }
  }

  SUBCASE("errors") {
    GaussianState bad{0.0, 0.0, {-1.0, 0.0}, 1.0};
    CHECK_THROWS_AS(overlap(bad, GaussianState{}), DomainError);
    GaussianState other{};
    other.hbar = 2.0;
    CHECK_THROWS_AS(overlap(other, GaussianState{}), DomainError);
  }
}

TEST_CASE("superpose_on_grid") {
  const UniformGrid grid{-15.0, 15.0, 4096};

  SUBCASE("single term reproduces the amplitude") {
    const GaussianState g{0.5, 1.0, {2.0, 0.5}, 0.5};
    const GaussianTerm term{1.0, g};
    const auto psi = superpose_on_grid(std::span(&term, 1), grid);
    for (std::size_t j = 0; j < grid.n_points; j += 97) CHECK(std::abs(psi[j] - amplitude(g, grid.point(j))) < 1e-15);
  }

  SUBCASE("opposite coefficients cancel") {
    const GaussianState g{0.5, 1.0, 2.0, 0.5};
    const std::vector<GaussianTerm> terms = {{1.0, g}, {-1.0, g}};
    for (const complex v : superpose_on_grid(terms, grid)) CHECK(v == complex(0.0, 0.0));
  }

  SUBCASE("grid norm equals the Gram sum") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    std::vector<GaussianTerm> terms;
    for (int k = 0; k < 100; ++k) terms.push_back({complex(n01(rng), n01(rng)), random_state(rng, 1.0)});
    complex gram = 0.0;
    for (const auto& a : terms)
      for (const auto& b : terms) gram += std::conj(a.coefficient) * b.coefficient * overlap(a.state, b.state);
    const auto psi = superpose_on_grid(terms, grid);
    CHECK(grid_norm(psi, grid) == doctest::Approx(gram.real()).epsilon(1e-8));
  }

  SUBCASE("accumulation agrees with direct evaluation") {
    const GaussianState g{-1.0, 2.0, {0.7, -0.4}, 0.3};
    std::vector<complex> acc(grid.n_points);
    accumulate_on_grid({0.5, -0.25}, g, grid, acc);
    for (std::size_t j = 0; j < grid.n_points; ++j)
      CHECK(std::abs(acc[j] - complex(0.5, -0.25) * amplitude(g, grid.point(j))) < 1e-12);
  }

  SUBCASE("coverage") {
    const GaussianState edge{13.0, 0.0, 1.0, 1.0};
    const GaussianTerm term{1.0, edge};
    CHECK_THROWS_AS(superpose_on_grid(std::span(&term, 1), grid), GridCoverageError);
  }
}
