#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sciv/classical_dynamics.hpp"
#include "sciv/errors.hpp"

using namespace sciv;

namespace {

std::vector<double> linspace(double t_max, int n) {
  std::vector<double> t(n + 1);
  for (int k = 0; k <= n; ++k) t[k] = t_max * k / n;
  return t;
}

}  // namespace

TEST_CASE("harmonic monodromy special times") {
  const Monodromy id = harmonic_monodromy(2.0, 1.0, 0.0);
  CHECK(id.qq == 1.0);
  CHECK(id.qp == 0.0);
  CHECK(id.pq == 0.0);
  CHECK(id.pp == 1.0);

  const Monodromy quarter = harmonic_monodromy(2.0, 1.0, std::numbers::pi / 4.0);
  CHECK(std::abs(quarter.qq) < 1e-15);
  CHECK(quarter.qp == doctest::Approx(0.5));
  CHECK(quarter.pq == doctest::Approx(-2.0));
  CHECK(std::abs(quarter.pp) < 1e-15);

  const Monodromy half = harmonic_monodromy(1.0, 1.0, std::numbers::pi);
  CHECK(half.qq == doctest::Approx(-1.0));
  CHECK(half.pp == doctest::Approx(-1.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(harmonic_monodromy(u(rng), u(rng), 10.0 * u(rng)).determinant() - 1.0) < 1e-13);
  }
}

TEST_CASE("full harmonic period returns to the start") {
  const Potential h = Potential::harmonic(1.0, 1.0);
  const std::vector<double> times = {0.0, 2.0 * std::numbers::pi};
  const auto states = propagate(h, 0.0, 1.0, times, {1e-3});
  const TrajectoryState& s = states.back();
  CHECK(std::abs(s.q) < 1e-10);
  CHECK(s.p == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(s.action) < 1e-10);
  CHECK(s.stability.qq == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(s.stability.qp) < 1e-10);
  CHECK(states.front().action == 0.0);
  CHECK(states.front().stability.qq == 1.0);
}

TEST_CASE("harmonic monodromy from integration matches the closed form") {
  const double omega = 1.3, mass = 0.8;
  const Potential h = Potential::harmonic(mass, omega);
  const auto times = linspace(20.0, 200);
  const auto states = propagate(h, 0.4, -0.7, times, {1e-3});
  for (const auto& s : states) {
    const Monodromy m = harmonic_monodromy(omega, mass, s.t);
    CHECK(std::abs(s.stability.qq - m.qq) < 1e-8);
    CHECK(std::abs(s.stability.qp - m.qp) < 1e-8);
    CHECK(std::abs(s.stability.pq - m.pq) < 1e-8);
    CHECK(std::abs(s.stability.pp - m.pp) < 1e-8);
  }
}

TEST_CASE("morse trajectory agrees with a ten times finer step") {
  const Potential m = Potential::morse(1.0, 30.0, 0.08);
  const std::vector<double> times = {0.0, 50.0};
  const auto coarse = propagate(m, 0.5, 0.0, times, {1e-2});
  const auto fine = propagate(m, 0.5, 0.0, times, {1e-3});
  const double e0 = m.energy(0.5, 0.0);
  CHECK(std::abs(m.energy(coarse[1].q, coarse[1].p) - e0) / e0 <= 1e-8);
  CHECK(std::abs(coarse[1].stability.determinant() - 1.0) <= 1e-8);
  CHECK(std::abs(coarse[1].q - fine[1].q) <= 1e-6);
  CHECK(std::abs(coarse[1].p - fine[1].p) <= 1e-6);
}

TEST_CASE("time reversal recovers the initial point") {
  const Potential models[] = {Potential::baranger(1.0, 1.0, 5.0, 1.0), Potential::morse(1.0, 30.0, 0.08)};
  for (const auto& model : models) {
    const std::vector<double> times = {0.0, 40.0};
    const auto forward = propagate(model, 0.3, 1.1, times, {1e-3});
    const auto back = propagate(model, forward[1].q, -forward[1].p, times, {1e-3});
    CHECK(std::abs(back[1].q - 0.3) < 1e-6);
    CHECK(std::abs(back[1].p + 1.1) < 1e-6);
  }
}

TEST_CASE("monodromy matches centred finite differences") {
  const Potential models[] = {Potential::baranger(1.0, 1.0, 5.0, 1.0), Potential::morse(1.0, 30.0, 0.08),
                              Potential::harmonic(1.0, 0.9)};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> q_dist(-1.0, 1.0), p_dist(-1.5, 1.5);
  const double eps = 1e-6;
  const std::vector<double> times = {0.0, 15.0};
  const IntegratorConfig cfg{1e-3};
  for (const auto& model : models) {
    for (int i = 0; i < 20; ++i) {
      const double q = q_dist(rng), p = p_dist(rng);
      const Monodromy m = propagate(model, q, p, times, cfg)[1].stability;
      const auto end = [&](double qi, double pi) { return propagate(model, qi, pi, times, cfg)[1]; };
      const auto qp = end(q + eps, p), qm = end(q - eps, p), pp = end(q, p + eps), pm = end(q, p - eps);
      CHECK(std::abs((qp.q - qm.q) / (2 * eps) - m.qq) <= 1e-4 * std::max(1.0, std::abs(m.qq)));
      CHECK(std::abs((pp.q - pm.q) / (2 * eps) - m.qp) <= 1e-4 * std::max(1.0, std::abs(m.qp)));
      CHECK(std::abs((qp.p - qm.p) / (2 * eps) - m.pq) <= 1e-4 * std::max(1.0, std::abs(m.pq)));
      CHECK(std::abs((pp.p - pm.p) / (2 * eps) - m.pp) <= 1e-4 * std::max(1.0, std::abs(m.pp)));
    }
  }
}

TEST_CASE("output times are hit exactly and observed in order") {
  const Potential h = Potential::harmonic(1.0, 1.0);
  const std::vector<double> times = {0.0, 0.25, 0.7, 1.0};
  std::vector<double> seen;
  std::size_t steps = 0;
  integrate(h, 1.0, 0.0, times, {0.1}, [&](const TrajectoryState& s, std::optional<std::size_t> k) {
    ++steps;
    if (k) {
      CHECK(*k == seen.size());
      seen.push_back(s.t);
    }
  });
  CHECK(seen == times);
  CHECK(steps == 1 + 3 + 5 + 3);
}

TEST_CASE("invalid time grids") {
  const Potential h = Potential::harmonic(1.0, 1.0);
  const std::vector<double> not_zero = {0.5, 1.0};
  const std::vector<double> decreasing = {0.0, 1.0, 1.0};
  const std::vector<double> ok = {0.0, 1.0};
  CHECK_THROWS_AS(propagate(h, 0, 0, not_zero, {}), ConfigError);
  CHECK_THROWS_AS(propagate(h, 0, 0, decreasing, {}), ConfigError);
  CHECK_THROWS_AS(propagate(h, 0, 0, ok, {0.0}), ConfigError);
  CHECK_THROWS_AS(propagate(h, 0, 0, std::vector<double>{}, {}), ConfigError);
}

TEST_CASE("escaping trajectory carries the last valid state") {
  const Potential b = Potential::baranger(1.0, 1.0, 5.0, 1.0);
  const std::vector<double> times = {0.0, 10.0};
  // The first RK4 stage already lands far beyond the overflow guard.
  try {
    propagate(b, 690.0, 1e152, times, {1e-2});
    FAIL("expected TrajectoryEscapeError");
  } catch (const TrajectoryEscapeError& e) {
    CHECK(e.last_valid().t >= 0.0);
    CHECK(std::isfinite(e.last_valid().q));
  }
}
