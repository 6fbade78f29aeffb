#ifndef SCIV_QUANTUM_REFERENCE_HPP
#define SCIV_QUANTUM_REFERENCE_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sciv/gaussian_states.hpp"
#include "sciv/potentials.hpp"

namespace sciv {

/// Floating type used inside the split-operator loop. Double-precision FFTs
/// leak norm at roughly 1e-16 per step through rounded transform constants;
/// extended (x87 long double) keeps runs of 1e5+ steps within 1e-12 at about
/// five times the cost.
enum class Precision { standard, extended };

/// Periodic grid for split-operator propagation plus the time step.
struct GridSpec {
  double x_min = -10.0;
  double x_max = 10.0;
  std::size_t n_points = 1024;  // power of two, >= 256
  double dt = 1e-3;
  Precision precision = Precision::standard;

  UniformGrid grid() const noexcept { return {x_min, x_max, n_points}; }
  /// hbar k_max^2 dt / (2 m) with k_max = pi / dx.
  double max_kinetic_phase(double hbar, double mass) const noexcept;
};

/// Throws ConfigError unless n_points is a power of two >= 256, the domain is
/// non-empty, dt > 0 and the kinetic phase per step is below pi/4.
void validate_grid(const GridSpec& spec, double hbar, double mass);

/// Wavefunction samples are considered to have reached the boundary once
/// either end point exceeds this magnitude.
inline constexpr double kEdgeAmplitudeLimit = 1e-10;

/// Strang-split propagator
///   exp(-i V dt / 2 hbar) F^-1 exp(-i hbar k^2 dt / 2m) F exp(-i V dt / 2 hbar)
/// on a periodic grid, transforms by FFTW. Not copyable; one instance owns its
/// buffers and plans, so separate instances may run on separate threads.
class SplitOperator {
 public:
  SplitOperator(const Potential& model, const GridSpec& spec, double hbar);
  ~SplitOperator();
  SplitOperator(const SplitOperator&) = delete;
  SplitOperator& operator=(const SplitOperator&) = delete;

  const GridSpec& spec() const noexcept { return spec_; }

  /// Observer receives (output index, samples at times[index]).
  using Observer = std::function<void(std::size_t, std::span<const complex>)>;

  /// Propagates psi0 through the increasing times (times[0] is the start
  /// time). Each interval is cut into ceil(interval / dt) equal steps.
  /// Throws DomainError if psi0 is not normalised to 1e-10 and
  /// GridCoverageError naming the time at which an edge sample first exceeds
  /// kEdgeAmplitudeLimit.
  void propagate(std::span<const complex> psi0, std::span<const double> times, const Observer& observer);

  /// <psi|H|psi> / <psi|psi> with the kinetic term evaluated spectrally.
  double energy(std::span<const complex> psi);

  struct Engine;

 private:
  GridSpec spec_;
  std::unique_ptr<Engine> engine_;
};

/// Samples at all requested times.
std::vector<std::vector<complex>> split_operator_propagate(const Potential& model, std::span<const complex> psi0,
                                                           const GridSpec& spec, double hbar,
                                                           std::span<const double> times);

/// Trapezoid rule dx * sum conj(psi0) psi_t on the common grid.
complex quantum_autocorrelation(std::span<const complex> psi0, std::span<const complex> psi_t, const UniformGrid& grid);

struct QuantumSeries {
  std::vector<double> times;
  std::vector<complex> values;  // c(t)
  std::vector<double> norm;
  std::vector<double> energy;
};

/// Samples the Gaussian on the grid, propagates it and records c(t), the
/// norm and <H> at every time.
QuantumSeries quantum_reference(const Potential& model, const GaussianState& initial, const GridSpec& spec,
                                std::span<const double> times);

}  // namespace sciv

#endif  // SCIV_QUANTUM_REFERENCE_HPP
