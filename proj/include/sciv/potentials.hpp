#ifndef SCIV_POTENTIALS_HPP
#define SCIV_POTENTIALS_HPP

#include <string>
#include <variant>

namespace sciv {

/// Potential value together with its first two derivatives at one point.
struct PotentialValues {
  double value;
  double gradient;
  double curvature;
};

/// V(x) = m w^2 x^2 / 2
struct HarmonicPotential {
  double mass;
  double omega;

  PotentialValues evaluate(double x) const noexcept {
    const double k = mass * omega * omega;
    return {0.5 * k * x * x, k * x, k};
  }
};

/// V(x) = V0 (1 - exp(-lambda x))^2, dissociation energy V0 at x -> +inf.
struct MorsePotential {
  double mass;
  double depth;  // V0
  double range;  // lambda

  PotentialValues evaluate(double x) const;
};

/// V(x) = 2 V0 exp(-alpha A) cosh(alpha x)
struct BarangerPotential {
  double mass;
  double depth;      // V0
  double offset;     // A
  double steepness;  // alpha
  double scale;      // V0 exp(-alpha A), filled in by Potential::baranger

  PotentialValues evaluate(double x) const;
};

enum class PotentialKind { harmonic, morse, baranger };

/// A one-dimensional potential model with mass. Construct through the named
/// factories, which validate the parameters.
class Potential {
 public:
  static Potential harmonic(double mass, double omega);
  static Potential morse(double mass, double depth, double range);
  static Potential baranger(double mass, double depth, double offset, double steepness);

  PotentialKind kind() const noexcept { return static_cast<PotentialKind>(model_.index()); }
  double mass() const noexcept;

  /// Throws OutOfRangeError when exp/cosh would overflow at x.
  PotentialValues evaluate(double x) const {
    return std::visit([x](const auto& m) { return m.evaluate(x); }, model_);
  }

  double value(double x) const { return evaluate(x).value; }

  /// H = p^2 / 2m + V(q)
  double energy(double q, double p) const { return 0.5 * p * p / mass() + value(q); }

  // All supported models have their minimum at x = 0.
  double minimum_position() const noexcept { return 0.0; }
  double minimum_value() const;

  /// Dissociation threshold; +inf for confining potentials.
  double escape_energy() const noexcept;

  /// Dispatch on the concrete model, so hot loops can be monomorphic.
  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), model_);
  }

  /// The concrete model if it is a T, else nullptr.
  template <class T>
  const T* as() const noexcept {
    return std::get_if<T>(&model_);
  }

  std::string describe() const;

 private:
  using Model = std::variant<HarmonicPotential, MorsePotential, BarangerPotential>;
  explicit Potential(Model m) : model_(m) {}
  Model model_;
};

struct TurningPoints {
  double left;
  double right;
};

/// Classical turning points of bound motion at the given energy, to 1e-12 in q.
TurningPoints turning_points(const Potential& model, double energy);

struct ActionQuadrature {
  int order = 64;        // initial Gauss-Legendre order
  int max_order = 1024;  // refinement stops here
  double rel_tol = 1e-13;
};

/// I(E) = (1/2pi) \oint p dq over the bound orbit at energy E.
///
/// The turning-point square-root singularity is removed by q = mid + half*sin(theta);
/// the resulting smooth integrand is integrated with Gauss-Legendre, doubling
/// the order until two successive estimates agree to rel_tol.
///
/// Throws DomainError for E at or below the minimum and UnboundMotionError
/// when E reaches the dissociation threshold.
double action_variable(const Potential& model, double energy, const ActionQuadrature& quad = {});

enum class FrequencyPath { analytic, numeric };

struct FrequencyResult {
  double omega;
  FrequencyPath path;
};

/// omega(E) = dH/dI. Harmonic and Morse use closed forms unless force_numeric is
/// set; otherwise 1/(dI/dE) by centred differences with one Richardson step.
FrequencyResult frequency(const Potential& model, double energy, bool force_numeric = false);

}  // namespace sciv

#endif  // SCIV_POTENTIALS_HPP
