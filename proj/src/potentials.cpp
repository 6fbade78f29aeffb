#include "sciv/potentials.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <vector>

#include "sciv/errors.hpp"

namespace sciv {

namespace {

// exp() overflows just above 709.78; stay clear of it so that products with
// the prefactors cannot overflow either.
constexpr double kExpGuard = 700.0;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string("potential parameter '") + what + "' must be positive and finite");
  }
}

std::string fmt_x(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

GaussLegendreRule build_gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussLegendreRule& gauss_legendre(int n) {
  static std::mutex mutex;
  static std::map<int, GaussLegendreRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
  return it->second;
}

void check_bound_energy(const Potential& model, double energy) {
  if (!std::isfinite(energy) || energy <= model.minimum_value()) {
    throw DomainError("energy " + fmt_x(energy) + " is not above the potential minimum " +
                      fmt_x(model.minimum_value()));
  }
  if (energy >= model.escape_energy()) {
    throw UnboundMotionError("energy " + fmt_x(energy) + " is at or above the dissociation threshold " +
                             fmt_x(model.escape_energy()) + "; motion is unbound");
  }
}

// Root of E - V(x) between `inside` (E > V) and `outside` (E <= V):
// bisection keeps the bracket, Newton steps are accepted when they stay inside it.
double polish_turning_point(const Potential& model, double energy, double inside, double outside) {
  double lo = inside;
  double hi = outside;
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const PotentialValues v = model.evaluate(x);
    const double f = energy - v.value;
    if (f > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (std::abs(hi - lo) < 1e-12) break;
    double next = 0.5 * (lo + hi);
    if (v.gradient != 0.0) {
      const double newton = x + f / v.gradient;
      if ((newton - lo) * (newton - hi) < 0.0) next = newton;
    }
    if (next == x) next = 0.5 * (lo + hi);
    x = next;
  }
  return 0.5 * (lo + hi);
}

double bracket_and_solve(const Potential& model, double energy, double direction) {
  const double x0 = model.minimum_position();
  double step = 1e-3;
  double inside = x0;
  double outside = x0 + direction * step;
  for (int k = 0; model.value(outside) < energy; ++k) {
    if (k > 200) throw NumericalError("failed to bracket turning point at energy " + fmt_x(energy));
    inside = outside;
    step *= 2.0;
    outside = x0 + direction * step;
  }
  return polish_turning_point(model, energy, inside, outside);
}

double numeric_frequency(const Potential& model, double energy) {
  const double above_min = energy - model.minimum_value();
  double h = 1e-3 * above_min;
  if (std::isfinite(model.escape_energy())) {
    h = std::min(h, 0.25 * (model.escape_energy() - energy));
  }
  auto centred = [&](double step) {
    return (action_variable(model, energy + step) - action_variable(model, energy - step)) / (2.0 * step);
  };
  const double coarse = centred(h);
  const double fine = centred(0.5 * h);
  const double slope = (4.0 * fine - coarse) / 3.0;
  if (!(slope > 0.0)) {
    throw NumericalError("dI/dE = " + fmt_x(slope) + " is not positive at energy " + fmt_x(energy));
  }
  return 1.0 / slope;
}

}  // namespace

PotentialValues MorsePotential::evaluate(double x) const {
  const double arg = -range * x;
  if (arg > kExpGuard) throw OutOfRangeError("Morse potential overflows at x = " + fmt_x(x));
  const double e = std::exp(arg);
  const double one_minus = 1.0 - e;
  return {depth * one_minus * one_minus, 2.0 * depth * range * e * one_minus,
          2.0 * depth * range * range * e * (2.0 * e - 1.0)};
}

PotentialValues BarangerPotential::evaluate(double x) const {
  const double arg = steepness * x;
  if (std::abs(arg) > kExpGuard) throw OutOfRangeError("Baranger potential overflows at x = " + fmt_x(x));
  const double up = std::exp(arg);
  const double down = 1.0 / up;
  const double value = scale * (up + down);
  return {value, steepness * scale * (up - down), steepness * steepness * value};
}

Potential Potential::harmonic(double mass, double omega) {
  require_positive(mass, "mass");
  require_positive(omega, "omega");
  return Potential(HarmonicPotential{mass, omega});
}

Potential Potential::morse(double mass, double depth, double range) {
  require_positive(mass, "mass");
  require_positive(depth, "v0");
  require_positive(range, "lambda");
  return Potential(MorsePotential{mass, depth, range});
}

Potential Potential::baranger(double mass, double depth, double offset, double steepness) {
  require_positive(mass, "mass");
  require_positive(depth, "v0");
  require_positive(steepness, "alpha");
  if (!std::isfinite(offset)) throw ConfigError("potential parameter 'a' must be finite");
  return Potential(BarangerPotential{mass, depth, offset, steepness, depth * std::exp(-steepness * offset)});
}

double Potential::mass() const noexcept {
  return std::visit([](const auto& m) { return m.mass; }, model_);
}

double Potential::minimum_value() const { return value(minimum_position()); }

double Potential::escape_energy() const noexcept {
  if (const auto* m = std::get_if<MorsePotential>(&model_)) return m->depth;
  return std::numeric_limits<double>::infinity();
}

std::string Potential::describe() const {
  std::ostringstream s;
  s.precision(17);
  struct Printer {
    std::ostringstream& s;
    void operator()(const HarmonicPotential& m) const { s << "harmonic(mass=" << m.mass << ", omega=" << m.omega << ")"; }
    void operator()(const MorsePotential& m) const {
      s << "morse(mass=" << m.mass << ", v0=" << m.depth << ", lambda=" << m.range << ")";
    }
    void operator()(const BarangerPotential& m) const {
      s << "baranger(mass=" << m.mass << ", v0=" << m.depth << ", a=" << m.offset << ", alpha=" << m.steepness << ")";
    }
  };
  std::visit(Printer{s}, model_);
  return s.str();
}

TurningPoints turning_points(const Potential& model, double energy) {
  check_bound_energy(model, energy);
  return {bracket_and_solve(model, energy, -1.0), bracket_and_solve(model, energy, +1.0)};
}

double action_variable(const Potential& model, double energy, const ActionQuadrature& quad) {
  const TurningPoints tp = turning_points(model, energy);
  const double mid = 0.5 * (tp.left + tp.right);
  const double half = 0.5 * (tp.right - tp.left);
  const double two_mass = 2.0 * model.mass();

  auto integrate = [&](int order) {
    const GaussLegendreRule& rule = gauss_legendre(order);
    constexpr double scale = 0.5 * std::numbers::pi;
    double sum = 0.0;
    for (int i = 0; i < order; ++i) {
      const double theta = scale * rule.nodes[i];
      const double q = mid + half * std::sin(theta);
      const double kinetic = std::max(energy - model.value(q), 0.0);
      sum += rule.weights[i] * std::sqrt(two_mass * kinetic) * half * std::cos(theta);
    }
    // (1/2pi) * 2 * integral over [q-, q+]
    return scale * sum / std::numbers::pi;
  };

  int order = std::max(quad.order, 2);
  double previous = integrate(order);
  while (order < quad.max_order) {
    order *= 2;
    const double current = integrate(order);
    if (std::abs(current - previous) <= quad.rel_tol * std::abs(current)) return current;
    previous = current;
  }
  return previous;
}

FrequencyResult frequency(const Potential& model, double energy, bool force_numeric) {
  check_bound_energy(model, energy);
  if (!force_numeric) {
    if (const auto* h = model.as<HarmonicPotential>()) return {h->omega, FrequencyPath::analytic};
    if (const auto* m = model.as<MorsePotential>()) {
      const double omega0 = m->range * std::sqrt(2.0 * m->depth / m->mass);
      return {omega0 * std::sqrt(1.0 - energy / m->depth), FrequencyPath::analytic};
    }
  }
  return {numeric_frequency(model, energy), FrequencyPath::numeric};
}

}  // namespace sciv
