#ifndef SCIV_IVR_PROPAGATORS_HPP
#define SCIV_IVR_PROPAGATORS_HPP

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sciv/classical_dynamics.hpp"
#include "sciv/gaussian_states.hpp"
#include "sciv/potentials.hpp"

namespace sciv {

enum class Variant {
  herman_kluk,      // frozen width, gamma_1 = gamma_2 = gamma
  thawed,           // gamma_1 from the true monodromy
  root_thawed,      // principal n-th root of the thawed width, general prefactor
  global_harmonic,  // thawed width/prefactor of a harmonic oscillator at omega(E)
};

/// One semiclassical propagator variant. The width and hbar are those of the
/// initial Gaussian the ensemble is run for.
struct MethodSpec {
  Variant variant = Variant::herman_kluk;
  int root_order = 0;  // RootTGA only: even, >= 2

  /// "HK", "TGA", "RootTGA(4)", "GlobalHarmonicTGA"
  std::string label() const;
  /// File-name stem: hk, tga, root_tga_4, global_harmonic_tga
  std::string file_stem() const;
  /// Inverse of label(); throws ConfigError.
  static MethodSpec parse(std::string_view text);

  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// Thawed width
///   gamma_1 = -(i/hbar) (M_pq + i hbar gamma M_pp) / (M_qq + i hbar gamma M_qp).
/// Throws SingularWidthError if the denominator vanishes or Re gamma_1 <= 0.
complex tga_width(const Monodromy& m, double width, double hbar);

/// Breathing width of a squeezed state in a harmonic well of frequency omega.
complex squeezed_width(double omega, double mass, double width, double hbar, double t);

/// Principal n-th root; n must be even and >= 2, Re gamma_1 > 0.
complex root_width(complex width, int order);

/// Direction information about how a radicand moves in time.
enum class Winding {
  unknown,            // nearest-root continuation
  counter_clockwise,  // arg(radicand) is known to be non-decreasing
};

/// Square root continued along a time series. The first call returns the
/// principal root.
///
/// With Winding::unknown later calls return the root nearer to the previous
/// one; a root that turns by more than 60 degrees in one call is a branch
/// ambiguity (the radicand passed too close to zero for the step size).
///
/// With Winding::counter_clockwise the argument of the radicand is unwrapped
/// assuming each call advances it by an angle in [-pi/4, 7pi/4). The thawed
/// denominator M_qq + i hbar gamma M_qp satisfies
/// d arg/dt = hbar gamma det(M) / (m |.|^2) > 0 and sweeps past the origin at
/// every reflection from a steep wall, where nearest-root selection would need
/// a very small step.
class BranchContinuation {
 public:
  explicit BranchContinuation(Winding winding = Winding::unknown) noexcept : winding_(winding) {}

  complex sqrt(complex radicand);
  std::optional<complex> previous() const noexcept { return previous_; }
  /// Continuous argument of the last radicand (counter-clockwise mode only).
  double unwrapped_argument() const noexcept { return phase_; }
  void reset() noexcept {
    previous_.reset();
    phase_ = 0.0;
  }

 private:
  Winding winding_;
  std::optional<complex> previous_;
  complex previous_radicand_;
  double phase_ = 0.0;
};

/// General coherent-state IVR prefactor for final width g1 and initial width g2.
complex prefactor_general(const Monodromy& m, complex g1, complex g2, double hbar, BranchContinuation& branch);

/// Herman-Kluk prefactor (general prefactor at g1 = g2 = width).
complex prefactor_hk(const Monodromy& m, double width, double hbar, BranchContinuation& branch);

/// Thawed-Gaussian prefactor (width/Re g1)^(1/4) (M_qq + i hbar width M_qp)^(-1/2).
/// Only the inverse square root is branch-continued; pass a continuation
/// built with Winding::counter_clockwise unless the steps are very fine.
complex prefactor_tga(const Monodromy& m, double width, complex g1, double hbar, BranchContinuation& branch);

enum class SamplingDensity {
  overlap_magnitude,  // |<g(p,q)|g0>|: variance 2/gamma in q, 2 hbar^2 gamma in p
  overlap_squared,    // |<g(p,q)|g0>|^2: variance 1/gamma in q, hbar^2 gamma in p
};

struct SamplingWidths {
  double sigma_q;
  double sigma_p;
};

SamplingWidths sampling_widths(double width, double hbar, SamplingDensity density);

/// A phase-space starting point and its importance weight
/// w = 1 / (2 pi hbar * sampling density), so that the plain mean of
/// f(q, p) * w estimates \int dq dp / (2 pi hbar) f(q, p).
struct PhaseSpacePoint {
  double q;
  double p;
  double weight;
};

/// Starting point `index` of the stream identified by `seed`. The random
/// stream depends only on (seed, index), never on evaluation order.
PhaseSpacePoint sample_initial_condition(const GaussianState& initial, SamplingDensity density, std::uint64_t seed,
                                         std::size_t index);

std::vector<PhaseSpacePoint> sample_initial_conditions(const GaussianState& initial, std::size_t count,
                                                       std::uint64_t seed,
                                                       SamplingDensity density = SamplingDensity::overlap_magnitude);

struct CorrelationSeries {
  std::vector<double> times;
  std::vector<complex> values;
  std::vector<double> norm;      // empty when the norm was not requested
  std::vector<double> mc_error;  // standard error of the complex mean
  std::size_t n_trajectories = 0;
  std::uint64_t seed = 0;
};

struct EnsembleOptions {
  std::size_t n_trajectories = 5000;
  std::uint64_t seed = 1;
  IntegratorConfig integrator;
  SamplingDensity sampling = SamplingDensity::overlap_magnitude;
  unsigned threads = 1;
  /// When set, the wavefunction of every method is rebuilt on this grid and
  /// its norm reported at every output time.
  std::optional<UniformGrid> norm_grid;
  /// Additional prefix sizes (< n_trajectories) whose series are reported
  /// too. Trajectory k is identical in every run with the same seed, so a
  /// prefix equals a standalone run with that many trajectories.
  std::vector<std::size_t> checkpoints;
};

struct EnsembleDiagnostics {
  /// GlobalHarmonicTGA samples with unbound energy that used the thawed
  /// propagator instead.
  std::size_t harmonic_fallbacks = 0;
};

struct EnsembleResult {
  std::vector<MethodSpec> methods;
  std::vector<CorrelationSeries> series;  // one per method
  /// checkpoint_series[c][m]: prefix options.checkpoints[c], method m.
  std::vector<std::vector<CorrelationSeries>> checkpoint_series;
  EnsembleDiagnostics diagnostics;
};

/// Monte Carlo evaluation of the semiclassical autocorrelation function for
/// several variants over one shared set of trajectories.
///
/// Every sampled trajectory is integrated once. Prefactor branches are
/// continued at every integrator step; contributions are formed at output
/// times. Results are bit-identical for any thread count: trajectories are
/// reduced in index order, and each norm accumulator sums its trajectories in
/// index order.
EnsembleResult run_ensemble(const Potential& model, const GaussianState& initial, std::span<const MethodSpec> methods,
                            std::span<const double> times, const EnsembleOptions& options);

/// Single-method convenience wrapper around run_ensemble (no norm).
CorrelationSeries autocorrelation(const Potential& model, const MethodSpec& method, const GaussianState& initial,
                                  std::span<const double> times, std::size_t n_trajectories, std::uint64_t seed,
                                  const IntegratorConfig& cfg);

/// Norm of the semiclassically propagated wavefunction on `grid`. The grid
/// must cover the initial packet q0 +- 6/sqrt(gamma); later spreading
/// beyond the grid counts as lost norm.
std::vector<double> norm_series(const Potential& model, const MethodSpec& method, const GaussianState& initial,
                                std::span<const double> times, std::size_t n_trajectories, std::uint64_t seed,
                                const UniformGrid& grid, const IntegratorConfig& cfg);

struct WidthSeries {
  std::vector<double> times;
  std::vector<double> re_width;         // Re gamma_1
  std::vector<double> re_square_root;   // Re gamma_1^(1/2)
  std::vector<double> re_fourth_root;   // Re gamma_1^(1/4)
};

/// Real parts of the thawed width and its square and fourth roots along one
/// trajectory.
WidthSeries width_diagnostic(const Potential& model, double q_initial, double p_initial, double width, double hbar,
                             std::span<const double> times, const IntegratorConfig& cfg);

}  // namespace sciv

#endif  // SCIV_IVR_PROPAGATORS_HPP
