#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sciv/classical_dynamics.hpp"
#include "sciv/errors.hpp"
#include "sciv/ivr_propagators.hpp"

using namespace sciv;

namespace {

const Potential baranger_model = Potential::baranger(1.0, 1.0, 5.0, 1.0);
const Potential morse_model = Potential::morse(1.0, 30.0, 0.08);
const GaussianState baranger_state{0.0, 1.0, 100.0 / 9.0, 0.05};
const GaussianState morse_state{0.0, 0.0, 12.0, 1.0};

std::vector<double> linspace(double t_max, std::size_t n) {
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = t_max * static_cast<double>(k) / static_cast<double>(n);
  return t;
}

Monodromy random_symplectic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Monodromy m;
  m.qq = u(rng);
  m.qp = u(rng);
  m.pq = u(rng);
  // pp fixed by det = 1; keep qq away from zero.
  if (std::abs(m.qq) < 0.1) m.qq = 0.1;
  m.pp = (1.0 + m.qp * m.pq) / m.qq;
  return m;
}

// Prefactor of one variant at every integrator step of one trajectory.
std::vector<complex> prefactor_steps(const Potential& model, const GaussianState& g0, const MethodSpec& method,
                                     double q, double p, double t_max, double dt) {
  const double width = g0.width.real();
  const double hbar = g0.hbar;
  const bool ccw = method.variant == Variant::thawed || method.variant == Variant::global_harmonic;
  BranchContinuation branch(ccw ? Winding::counter_clockwise : Winding::unknown);
  std::optional<double> omega;
  if (method.variant == Variant::global_harmonic) omega = frequency(model, model.energy(q, p)).omega;
  std::vector<complex> out;
  const std::vector<double> times = {0.0, t_max};
  integrate(model, q, p, times, {dt}, [&](const TrajectoryState& s, std::optional<std::size_t>) {
    const Monodromy& m = s.stability;
    switch (method.variant) {
      case Variant::herman_kluk:
        out.push_back(prefactor_hk(m, width, hbar, branch));
        break;
      case Variant::thawed:
        out.push_back(prefactor_tga(m, width, tga_width(m, width, hbar), hbar, branch));
        break;
      case Variant::root_thawed:
        out.push_back(prefactor_general(m, root_width(tga_width(m, width, hbar), method.root_order), width, hbar, branch));
        break;
      case Variant::global_harmonic: {
        const Monodromy mh = harmonic_monodromy(*omega, model.mass(), s.t);
        out.push_back(prefactor_tga(mh, width, squeezed_width(*omega, model.mass(), width, hbar, s.t), hbar, branch));
        break;
      }
    }
  });
  return out;
}

double max_abs_difference(const CorrelationSeries& a, const CorrelationSeries& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) worst = std::max(worst, std::abs(a.values[k] - b.values[k]));
  return worst;
}

}  // namespace

TEST_CASE("method labels") {
  for (const char* label : {"HK", "TGA", "RootTGA(2)", "RootTGA(16)", "GlobalHarmonicTGA"}) {
    CHECK(MethodSpec::parse(label).label() == label);
  }
  CHECK(MethodSpec::parse("RootTGA(4)").file_stem() == "root_tga_4");
  CHECK(MethodSpec::parse("GlobalHarmonicTGA").file_stem() == "global_harmonic_tga");
  CHECK_THROWS_AS(MethodSpec::parse("RootTGA(3)"), ConfigError);
  CHECK_THROWS_AS(MethodSpec::parse("RootTGA(0)"), ConfigError);
  CHECK_THROWS_AS(MethodSpec::parse("Heller"), ConfigError);
}

TEST_CASE("thawed width") {
  CHECK(std::abs(tga_width(Monodromy::identity(), 3.0, 0.2) - 3.0) < 1e-15);

  SUBCASE("harmonic monodromy gives the squeezed width") {
    for (double t = 0.0; t < 3.0 * 2.0 * std::numbers::pi / 0.7; t += 0.05) {
      const complex a = tga_width(harmonic_monodromy(0.7, 1.2, t), 5.0, 0.3);
      CHECK(std::abs(a - squeezed_width(0.7, 1.2, 5.0, 0.3, t)) < 1e-10 * std::abs(a));
    }
  }

  SUBCASE("baranger centre trajectory at t = 50, monodromy by finite differences") {
    const double eps = 1e-6;
    const std::vector<double> times = {0.0, 50.0};
    const auto end = [&](double q, double p) { return propagate(baranger_model, q, p, times, {1e-3})[1]; };
    const auto qp = end(eps, 1.0), qm = end(-eps, 1.0), pp = end(0.0, 1.0 + eps), pm = end(0.0, 1.0 - eps);
    Monodromy fd;
    fd.qq = (qp.q - qm.q) / (2 * eps);
    fd.qp = (pp.q - pm.q) / (2 * eps);
    fd.pq = (qp.p - qm.p) / (2 * eps);
    fd.pp = (pp.p - pm.p) / (2 * eps);
    const double gamma = baranger_state.width.real();
    const complex from_fd = tga_width(fd, gamma, 0.05);
    const complex lib = tga_width(end(0.0, 1.0).stability, gamma, 0.05);
    CHECK(std::abs(lib - from_fd) < 1e-4 * std::max(1.0, std::abs(lib)));
    CHECK(lib.real() > 0.0);
    CHECK(lib.real() < 0.1 * gamma);
  }
}

TEST_CASE("squeezed width") {
  CHECK(std::abs(squeezed_width(0.6, 1.0, 12.0, 1.0, 0.0) - 12.0) < 1e-14);
  for (double t = 0.0; t < 20.0; t += 0.37) CHECK(std::abs(squeezed_width(2.0, 1.5, 6.0, 0.5, t) - 6.0) < 1e-12);
  const double omega = 0.6196773;
  CHECK(std::abs(squeezed_width(omega, 1.0, 12.0, 1.0, 2.0) - tga_width(harmonic_monodromy(omega, 1.0, 2.0), 12.0, 1.0)) <
        1e-12 * 12.0);
}

TEST_CASE("principal roots of the width") {
  CHECK(root_width(4.0, 2) == complex(2.0, 0.0));
  CHECK(std::abs(root_width(16.0, 4) - 2.0) < 1e-15);
  const complex near_axis = root_width(complex(0.3, 1e-9), 2);
  CHECK(near_axis.real() > 0.0);
  const complex g(0.01, 3.0);
  const complex r = root_width(g, 4);
  CHECK(std::abs(r - std::polar(std::pow(std::abs(g), 0.25), std::arg(g) / 4.0)) < 1e-14);
  CHECK_THROWS(root_width(complex(1.0, 0.0), 3));
}

TEST_CASE("prefactors at t = 0 and for the matched harmonic oscillator") {
  BranchContinuation b1, b2, b3(Winding::counter_clockwise);
  CHECK(std::abs(prefactor_general(Monodromy::identity(), 2.0, 2.0, 0.5, b1) - 1.0) < 1e-15);
  CHECK(std::abs(prefactor_hk(Monodromy::identity(), 2.0, 0.5, b2) - 1.0) < 1e-15);
  CHECK(std::abs(prefactor_tga(Monodromy::identity(), 2.0, 2.0, 0.5, b3) - 1.0) < 1e-15);

  const double omega = 1.4, mass = 0.5, hbar = 0.35;
  const double gamma = mass * omega / hbar;
  BranchContinuation hk, general, tga(Winding::counter_clockwise);
  for (double t = 0.0; t < 30.0; t += 0.01) {
    const Monodromy m = harmonic_monodromy(omega, mass, t);
    const complex expected = std::polar(1.0, -omega * t / 2.0);
    CHECK(std::abs(prefactor_hk(m, gamma, hbar, hk) - expected) < 1e-10);
    CHECK(std::abs(prefactor_general(m, gamma, gamma, hbar, general) - expected) < 1e-10);
    CHECK(std::abs(prefactor_tga(m, gamma, gamma, hbar, tga) - expected) < 1e-10);
  }
}

TEST_CASE("prefactor identities on random symplectic matrices") {
  std::mt19937_64 rng(4);
  const double gamma = 2.5, hbar = 0.4;
  for (int i = 0; i < 100; ++i) {
    const Monodromy m = random_symplectic(rng);
    BranchContinuation a, b, c(Winding::counter_clockwise), d;
    CHECK(std::abs(prefactor_hk(m, gamma, hbar, a) - prefactor_general(m, gamma, gamma, hbar, b)) < 1e-12);
    const complex g1 = tga_width(m, gamma, hbar);
    const complex r_tga = prefactor_tga(m, gamma, g1, hbar, c);
    CHECK(std::abs(std::abs(prefactor_general(m, g1, gamma, hbar, d)) - std::abs(r_tga)) < 1e-8 * std::abs(r_tga));
    const complex denom(m.qq, hbar * gamma * m.qp);
    CHECK(std::pow(std::abs(r_tga), 4) * g1.real() / gamma * std::norm(denom) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("thawed and general prefactors share their phase along a Morse trajectory") {
  const double gamma = 12.0, hbar = 1.0;
  BranchContinuation general, thawed(Winding::counter_clockwise);
  complex ratio0;
  bool first = true;
  const std::vector<double> times = {0.0, 60.0};
  integrate(morse_model, 0.6, 1.5, times, {1e-3}, [&](const TrajectoryState& s, std::optional<std::size_t> k) {
    const complex g1 = tga_width(s.stability, gamma, hbar);
    const complex rg = prefactor_general(s.stability, g1, gamma, hbar, general);
    const complex rt = prefactor_tga(s.stability, gamma, g1, hbar, thawed);
    if (first) {
      ratio0 = rg / rt;
      first = false;
    }
    if (k && *k == 1) {
      CHECK(std::abs(std::abs(rg) - std::abs(rt)) < 1e-8 * std::abs(rt));
      CHECK(std::abs(rg / rt - ratio0) < 1e-8);
    }
  });
}

TEST_CASE("branch continuity along sampled trajectories") {
  struct Setup {
    const Potential* model;
    GaussianState g0;
    double t_max;
    std::vector<MethodSpec> methods;
  };
  const std::vector<Setup> setups = {
      {&baranger_model, baranger_state, 110.0,
       {MethodSpec::parse("HK"), MethodSpec::parse("TGA"), MethodSpec::parse("RootTGA(2)"),
        MethodSpec::parse("RootTGA(4)"), MethodSpec::parse("GlobalHarmonicTGA")}},
      {&morse_model, morse_state, 100.0,
       {MethodSpec::parse("HK"), MethodSpec::parse("TGA"), MethodSpec::parse("GlobalHarmonicTGA")}},
  };
  for (const Setup& s : setups) {
    for (const PhaseSpacePoint& start : sample_initial_conditions(s.g0, 10, 1)) {
      if (s.model->energy(start.q, start.p) >= s.model->escape_energy()) continue;
      for (const MethodSpec& method : s.methods) {
        const auto r = prefactor_steps(*s.model, s.g0, method, start.q, start.p, s.t_max, 1e-2);
        std::size_t violations = 0;
        for (std::size_t k = 1; k < r.size(); ++k) violations += !(std::abs(r[k] - r[k - 1]) < std::abs(r[k] + r[k - 1]));
        INFO(method.label(), " from q=", start.q, " p=", start.p);
        CHECK(violations == 0);
      }
    }
  }
}

TEST_CASE("morse prefactor is step-size independent") {
  for (const char* label : {"HK", "TGA", "GlobalHarmonicTGA"}) {
    const MethodSpec method = MethodSpec::parse(label);
    const auto coarse = prefactor_steps(morse_model, morse_state, method, 0.4, 2.0, 100.0, 1e-2);
    const auto fine = prefactor_steps(morse_model, morse_state, method, 0.4, 2.0, 100.0, 5e-3);
    REQUIRE(fine.size() == 2 * coarse.size() - 1);
    double worst = 0.0;
    for (std::size_t k = 0; k < coarse.size(); ++k) worst = std::max(worst, std::abs(coarse[k] - fine[2 * k]));
    INFO(label);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("branch continuation") {
  SUBCASE("follows a radicand around the origin") {
    BranchContinuation b;
    complex last = b.sqrt(1.0);
    for (int k = 1; k <= 400; ++k) last = b.sqrt(std::polar(1.0, 4.0 * std::numbers::pi * k / 400.0));
    CHECK(std::abs(last - 1.0) < 1e-12);  // two turns: back to +1
    b.reset();
    last = b.sqrt(1.0);
    for (int k = 1; k <= 200; ++k) last = b.sqrt(std::polar(1.0, 2.0 * std::numbers::pi * k / 200.0));
    CHECK(std::abs(last + 1.0) < 1e-12);  // one turn: sign flipped
  }

  SUBCASE("jumps across the origin are ambiguous") {
    BranchContinuation b;
    b.sqrt(1.0);
    CHECK_THROWS_AS(b.sqrt(-1.0), BranchAmbiguityError);
    CHECK_THROWS_AS(BranchContinuation().sqrt(0.0), BranchAmbiguityError);
  }

  SUBCASE("counter-clockwise unwrapping survives a near miss of the origin") {
    BranchContinuation b(Winding::counter_clockwise);
    b.sqrt(complex(1.0, -1e-3));
    // The radicand passes just right of zero and turns by almost pi in one call.
    const complex r = b.sqrt(complex(-1.0, -1e-3));
    CHECK(b.unwrapped_argument() == doctest::Approx(std::numbers::pi + 1e-3).epsilon(1e-9));
    CHECK(std::abs(r - std::polar(1.0, (std::numbers::pi + 1e-3) / 2.0)) < 1e-6);
  }
}

TEST_CASE("sampling") {
  const GaussianState g{0.3, -0.7, 4.0, 0.5};
  const std::size_t n = 200000;
  const auto points = sample_initial_conditions(g, n, 42);
  double mq = 0.0, mp = 0.0;
  for (const auto& s : points) {
    mq += s.q;
    mp += s.p;
  }
  mq /= n;
  mp /= n;
  double vq = 0.0, vp = 0.0;
  for (const auto& s : points) {
    vq += (s.q - mq) * (s.q - mq);
    vp += (s.p - mp) * (s.p - mp);
  }
  vq /= n - 1;
  vp /= n - 1;
  // |<g(p,q)|g0>| = exp(-gamma dq^2/4 - dp^2/(4 hbar^2 gamma)): variances 2/gamma and 2 hbar^2 gamma.
  const double sq = std::sqrt(2.0 / 4.0), sp = std::sqrt(2.0 * 0.25 * 4.0);
  CHECK(std::abs(mq - g.q) < 4.0 * sq / std::sqrt(double(n)));
  CHECK(std::abs(mp - g.p) < 4.0 * sp / std::sqrt(double(n)));
  CHECK(vq == doctest::Approx(sq * sq).epsilon(0.02));
  CHECK(vp == doctest::Approx(sp * sp).epsilon(0.02));

  const auto squared = sampling_widths(4.0, 0.5, SamplingDensity::overlap_squared);
  CHECK(squared.sigma_q == doctest::Approx(std::sqrt(1.0 / 4.0)));
  CHECK(squared.sigma_p == doctest::Approx(std::sqrt(0.25 * 4.0)));

  // Each point is a function of (seed, index) alone.
  const PhaseSpacePoint p17 = sample_initial_condition(g, SamplingDensity::overlap_magnitude, 42, 17);
  CHECK(p17.q == points[17].q);
  CHECK(p17.p == points[17].p);
  CHECK(p17.weight == points[17].weight);
}

TEST_CASE("c(0) = 1 for every variant") {
  const std::vector<MethodSpec> methods = {MethodSpec::parse("HK"), MethodSpec::parse("TGA"),
                                           MethodSpec::parse("RootTGA(2)"), MethodSpec::parse("GlobalHarmonicTGA")};
  const std::vector<double> times = {0.0, 0.05};
  for (SamplingDensity density : {SamplingDensity::overlap_magnitude, SamplingDensity::overlap_squared}) {
    EnsembleOptions opts;
    opts.n_trajectories = 10000;
    opts.sampling = density;
    const auto result = run_ensemble(baranger_model, baranger_state, methods, times, opts);
    for (const auto& s : result.series) CHECK(std::abs(s.values[0] - 1.0) <= 3.0 * s.mc_error[0]);
  }
}

TEST_CASE("Monte Carlo error scales as one over root N") {
  const auto times = linspace(10.0, 100);
  const MethodSpec hk = MethodSpec::parse("HK");
  const auto small = autocorrelation(baranger_model, hk, baranger_state, times, 2000, 3, {1e-2});
  const auto large = autocorrelation(baranger_model, hk, baranger_state, times, 4000, 3, {1e-2});
  double ratio = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) ratio += large.mc_error[k] / small.mc_error[k];
  ratio /= static_cast<double>(times.size());
  CHECK(ratio >= 1.0 / std::sqrt(2.0) - 0.15);
  CHECK(ratio <= 1.0 / std::sqrt(2.0) + 0.15);
}

TEST_CASE("ensembles are reproducible for any thread count") {
  const auto times = linspace(20.0, 50);
  const std::vector<MethodSpec> methods = {MethodSpec::parse("HK"), MethodSpec::parse("TGA"),
                                           MethodSpec::parse("RootTGA(4)")};
  EnsembleOptions opts;
  opts.n_trajectories = 300;
  opts.seed = 9;
  opts.integrator.dt = 1e-2;
  opts.norm_grid = UniformGrid{-12.0, 12.0, 1024};
  opts.checkpoints = {100};
  const auto serial = run_ensemble(baranger_model, baranger_state, methods, times, opts);
  opts.threads = 4;
  const auto threaded = run_ensemble(baranger_model, baranger_state, methods, times, opts);
  const auto again = run_ensemble(baranger_model, baranger_state, methods, times, opts);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    CHECK(serial.series[m].values == threaded.series[m].values);
    CHECK(serial.series[m].norm == threaded.series[m].norm);
    CHECK(serial.series[m].mc_error == threaded.series[m].mc_error);
    CHECK(again.series[m].values == threaded.series[m].values);
  }

  SUBCASE("a checkpoint equals a standalone run of that size") {
    EnsembleOptions small = opts;
    small.n_trajectories = 100;
    small.checkpoints.clear();
    small.norm_grid.reset();
    const auto standalone = run_ensemble(baranger_model, baranger_state, methods, times, small);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      CHECK(serial.checkpoint_series[0][m].values == standalone.series[m].values);
      CHECK(serial.checkpoint_series[0][m].n_trajectories == 100);
    }
  }
}

TEST_CASE("higher roots approach the frozen-width result") {
  const auto times = linspace(110.0, 550);
  const std::vector<MethodSpec> methods = {MethodSpec::parse("HK"), MethodSpec::parse("RootTGA(2)"),
                                           MethodSpec::parse("RootTGA(16)")};
  EnsembleOptions opts;
  opts.n_trajectories = 1000;
  opts.integrator.dt = 1e-2;
  const auto r = run_ensemble(baranger_model, baranger_state, methods, times, opts);
  CHECK(max_abs_difference(r.series[2], r.series[0]) < max_abs_difference(r.series[1], r.series[0]));
}

TEST_CASE("harmonic potential") {
  const Potential h = Potential::harmonic(1.0, 1.0);
  const GaussianState g{1.0, 0.0, 1.0, 1.0};
  const auto times = linspace(4.0 * std::numbers::pi, 80);
  const std::vector<MethodSpec> methods = {MethodSpec::parse("HK"), MethodSpec::parse("TGA"),
                                           MethodSpec::parse("GlobalHarmonicTGA")};
  EnsembleOptions opts;
  opts.n_trajectories = 4000;
  opts.integrator.dt = 1e-2;
  opts.norm_grid = UniformGrid{-12.0, 12.0, 512};
  const auto r = run_ensemble(h, g, methods, times, opts);

  for (std::size_t k = 0; k < times.size(); ++k) {
    // GlobalHarmonicTGA and TGA coincide here up to integration error.
    CHECK(std::abs(r.series[2].values[k] - r.series[1].values[k]) <= 3.0 * r.series[1].mc_error[k]);
    // The norm is quadratic in the sampled amplitudes, so its scatter is about twice theirs.
    CHECK(std::abs(r.series[0].norm[k] - 1.0) <= 2.0 * 3.0 * r.series[0].mc_error[k]);
  }
  CHECK(r.diagnostics.harmonic_fallbacks == 0);
}

TEST_CASE("global harmonic fallback for unbound Morse samples") {
  const GaussianState g{0.0, 7.0, 12.0, 1.0};  // E ~ 24.5 of 30: the tail is unbound
  const std::vector<double> times = {0.0, 1.0};
  EnsembleOptions opts;
  opts.n_trajectories = 2000;
  const MethodSpec gh = MethodSpec::parse("GlobalHarmonicTGA");
  const auto r = run_ensemble(morse_model, g, std::span(&gh, 1), times, opts);
  std::size_t unbound = 0;
  for (const auto& s : sample_initial_conditions(g, 2000, opts.seed))
    unbound += morse_model.energy(s.q, s.p) >= morse_model.escape_energy();
  CHECK(unbound > 0);
  CHECK(r.diagnostics.harmonic_fallbacks == unbound);
}

TEST_CASE("norm at t = 0") {
  const std::vector<double> times = {0.0, 1.0};
  const UniformGrid grid{-12.0, 12.0, 1024};
  for (const char* label : {"HK", "TGA"}) {
    const auto norm = norm_series(baranger_model, MethodSpec::parse(label), baranger_state, times, 3000, 1, grid, {1e-2});
    CHECK(norm[0] == doctest::Approx(1.0).epsilon(0.05));
  }
  const UniformGrid narrow{-0.5, 0.5, 256};
  CHECK_THROWS_AS(norm_series(baranger_model, MethodSpec::parse("HK"), baranger_state, times, 10, 1, narrow, {1e-2}),
                  GridCoverageError);
}

TEST_CASE("width diagnostic") {
  const auto times = linspace(40.0, 400);
  const auto w = width_diagnostic(Potential::harmonic(1.0, 1.0), 0.5, 0.0, 3.0, 1.0, times, {1e-3});
  CHECK(w.re_width[0] == doctest::Approx(3.0));
  CHECK(w.re_square_root[0] == doctest::Approx(std::sqrt(3.0)));
  CHECK(w.re_fourth_root[0] == doctest::Approx(std::pow(3.0, 0.25)));
  // Period pi for the breathing width of a harmonic oscillator with omega = 1.
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const complex expected = squeezed_width(1.0, 1.0, 3.0, 1.0, times[k]);
    CHECK(w.re_width[k] == doctest::Approx(expected.real()).epsilon(1e-8));
    CHECK(w.re_width[k] > 1.0 / 3.0 - 1e-9);
  }
}
