#include "sciv/quantum_reference.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>

#include "sciv/errors.hpp"

namespace sciv {

namespace {

// FFTW's planner is not re-entrant; execution of existing plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

template <class Real>
struct Fftw;

template <>
struct Fftw<double> {
  using Complex = fftw_complex;
  using PlanHandle = fftw_plan;
  static Complex* alloc(std::size_t n) { return fftw_alloc_complex(n); }
  static void free(Complex* p) { fftw_free(p); }
  static PlanHandle plan(std::size_t n, Complex* data, int sign) {
    return fftw_plan_dft_1d(static_cast<int>(n), data, data, sign, FFTW_ESTIMATE);
  }
  static void execute(PlanHandle p) { fftw_execute(p); }
  static void destroy(PlanHandle p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<long double> {
  using Complex = fftwl_complex;
  using PlanHandle = fftwl_plan;
  static Complex* alloc(std::size_t n) { return fftwl_alloc_complex(n); }
  static void free(Complex* p) { fftwl_free(p); }
  static PlanHandle plan(std::size_t n, Complex* data, int sign) {
    return fftwl_plan_dft_1d(static_cast<int>(n), data, data, sign, FFTW_ESTIMATE);
  }
  static void execute(PlanHandle p) { fftwl_execute(p); }
  static void destroy(PlanHandle p) { fftwl_destroy_plan(p); }
};

// In-place transform buffer with one forward and one backward plan.
// FFTW_ESTIMATE picks the algorithm without timing runs, so the same grid
// always gets the same plan and bit-identical results.
template <class Real>
class Transform {
  using F = Fftw<Real>;

 public:
  explicit Transform(std::size_t n) : n_(n), data_(F::alloc(n)) {
    if (!data_) throw std::bad_alloc();
    std::lock_guard lock(planner_mutex());
    forward_ = F::plan(n, data_, FFTW_FORWARD);
    backward_ = F::plan(n, data_, FFTW_BACKWARD);
    if (!forward_ || !backward_) {
      release();
      throw NumericalError("FFTW could not create a plan");
    }
  }
  ~Transform() { release(); }
  Transform(const Transform&) = delete;
  Transform& operator=(const Transform&) = delete;

  std::complex<Real>* data() noexcept { return reinterpret_cast<std::complex<Real>*>(data_); }
  std::size_t size() const noexcept { return n_; }
  void forward() { F::execute(forward_); }
  void backward() { F::execute(backward_); }

 private:
  void release() {
    std::lock_guard lock(planner_mutex());
    if (forward_) F::destroy(forward_);
    if (backward_) F::destroy(backward_);
    forward_ = nullptr;
    backward_ = nullptr;
    if (data_) F::free(data_);
    data_ = nullptr;
  }

  std::size_t n_;
  typename F::Complex* data_;
  typename F::PlanHandle forward_ = nullptr;
  typename F::PlanHandle backward_ = nullptr;
};

double wavenumber(std::size_t j, std::size_t n, double length) {
  const auto signed_index = j < n / 2 ? static_cast<double>(j) : static_cast<double>(j) - static_cast<double>(n);
  return 2.0 * std::numbers::pi * signed_index / length;
}

std::string format_time(double t) {
  std::ostringstream out;
  out.precision(10);
  out << t;
  return out.str();
}

}  // namespace

double GridSpec::max_kinetic_phase(double hbar, double mass) const noexcept {
  const double k_max = std::numbers::pi / grid().spacing();
  return hbar * k_max * k_max * dt / (2.0 * mass);
}

void validate_grid(const GridSpec& spec, double hbar, double mass) {
  if (spec.n_points < 256 || !std::has_single_bit(spec.n_points)) {
    throw ConfigError("quantum grid n_points must be a power of two >= 256, got " + std::to_string(spec.n_points));
  }
  if (!(spec.x_max > spec.x_min)) throw ConfigError("quantum grid needs x_max > x_min");
  if (!(spec.dt > 0.0)) throw ConfigError("quantum time step must be positive");
  const double phase = spec.max_kinetic_phase(hbar, mass);
  if (!(phase < 0.25 * std::numbers::pi)) {
    throw ConfigError("quantum grid: kinetic phase per step hbar k_max^2 dt / 2m = " + format_time(phase) +
                      " must stay below pi/4; use fewer points or a smaller dt");
  }
}

struct SplitOperator::Engine {
  virtual ~Engine() = default;
  virtual void propagate(std::span<const complex> psi0, std::span<const double> times, const Observer& observer) = 0;
  virtual double energy(std::span<const complex> psi) = 0;
};

namespace {

template <class Real>
class TypedEngine final : public SplitOperator::Engine {
  using Complex = std::complex<Real>;

 public:
  TypedEngine(const Potential& model, const GridSpec& spec, double hbar)
      : spec_(spec), hbar_(hbar), mass_(model.mass()), psi_(spec.n_points), scratch_(spec.n_points) {
    const std::size_t n = spec.n_points;
    const UniformGrid g = spec.grid();
    potential_.resize(n);
    wavenumber_sq_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      potential_[j] = model.value(g.point(j));
      const double k = wavenumber(j, n, spec.x_max - spec.x_min);
      wavenumber_sq_[j] = k * k;
    }
    output_.resize(n);
  }

  void propagate(std::span<const complex> psi0, std::span<const double> times,
                 const SplitOperator::Observer& observer) override {
    const std::size_t n = spec_.n_points;
    Complex* data = psi_.data();
    for (std::size_t j = 0; j < n; ++j) data[j] = Complex(psi0[j].real(), psi0[j].imag());
    check_edges(times[0]);
    publish(0, observer);
    for (std::size_t j = 1; j < times.size(); ++j) {
      const double interval = times[j] - times[j - 1];
      const auto steps = static_cast<std::size_t>(std::ceil(interval / spec_.dt - 1e-9));
      const double h = interval / static_cast<double>(steps);
      prepare_step(h);
      for (std::size_t k = 1; k <= steps; ++k) {
        step();
        check_edges(times[j - 1] + static_cast<double>(k) * h);
      }
      publish(j, observer);
    }
  }

  double energy(std::span<const complex> psi) override {
    const std::size_t n = spec_.n_points;
    Real norm = 0;
    Real potential = 0;
    Complex* data = scratch_.data();
    for (std::size_t j = 0; j < n; ++j) {
      data[j] = Complex(psi[j].real(), psi[j].imag());
      const Real density = std::norm(data[j]);
      norm += density;
      potential += static_cast<Real>(potential_[j]) * density;
    }
    scratch_.forward();
    Real kinetic = 0;
    for (std::size_t j = 0; j < n; ++j) kinetic += static_cast<Real>(wavenumber_sq_[j]) * std::norm(data[j]);
    // Parseval: sum |psi_j|^2 = (1/n) sum |phi_k|^2
    kinetic *= static_cast<Real>(hbar_ * hbar_ / (2.0 * mass_)) / static_cast<Real>(n);
    return static_cast<double>((kinetic + potential) / norm);
  }

 private:
  void prepare_step(double step) {
    if (step == cached_step_) return;
    const std::size_t n = spec_.n_points;
    half_potential_phase_.resize(n);
    kinetic_phase_.resize(n);
    const Real inv_n = Real(1) / static_cast<Real>(n);
    for (std::size_t j = 0; j < n; ++j) {
      half_potential_phase_[j] = std::polar(Real(1), static_cast<Real>(-0.5 * potential_[j] * step / hbar_));
      // The backward transform is unnormalised; fold 1/n in here.
      kinetic_phase_[j] = std::polar(inv_n, static_cast<Real>(-hbar_ * wavenumber_sq_[j] * step / (2.0 * mass_)));
    }
    cached_step_ = step;
  }

  // Plain component arithmetic: std::complex operator*= carries the
  // inf/nan recovery of C Annex G, which blocks vectorisation.
  static void multiply(Complex* data, const std::vector<Complex>& factors) {
    Real* d = reinterpret_cast<Real*>(data);
    const Real* f = reinterpret_cast<const Real*>(factors.data());
    const std::size_t n = factors.size();
    for (std::size_t j = 0; j < n; ++j) {
      const Real re = d[2 * j];
      const Real im = d[2 * j + 1];
      d[2 * j] = re * f[2 * j] - im * f[2 * j + 1];
      d[2 * j + 1] = re * f[2 * j + 1] + im * f[2 * j];
    }
  }

  void step() {
    Complex* data = psi_.data();
    multiply(data, half_potential_phase_);
    psi_.forward();
    multiply(data, kinetic_phase_);
    psi_.backward();
    multiply(data, half_potential_phase_);
  }

  void check_edges(double t) {
    const Complex* data = psi_.data();
    const auto edge = static_cast<double>(std::max(std::abs(data[0]), std::abs(data[spec_.n_points - 1])));
    if (!(edge <= kEdgeAmplitudeLimit)) {
      throw GridCoverageError("quantum grid [" + format_time(spec_.x_min) + ", " + format_time(spec_.x_max) +
                              "] too small: edge amplitude " + format_time(edge) + " exceeds 1e-10 at t = " +
                              format_time(t));
    }
  }

  void publish(std::size_t index, const SplitOperator::Observer& observer) {
    const Complex* data = psi_.data();
    for (std::size_t j = 0; j < spec_.n_points; ++j) {
      output_[j] = complex(static_cast<double>(data[j].real()), static_cast<double>(data[j].imag()));
    }
    observer(index, output_);
  }

  GridSpec spec_;
  double hbar_;
  double mass_;
  std::vector<double> potential_;
  std::vector<double> wavenumber_sq_;
  Transform<Real> psi_;
  Transform<Real> scratch_;
  std::vector<complex> output_;

  // Phase factors for the step size last used.
  double cached_step_ = 0.0;
  std::vector<Complex> half_potential_phase_;
  std::vector<Complex> kinetic_phase_;
};

}  // namespace

SplitOperator::SplitOperator(const Potential& model, const GridSpec& spec, double hbar) : spec_(spec) {
  if (!(hbar > 0.0)) throw ConfigError("hbar must be positive");
  validate_grid(spec, hbar, model.mass());
  if (spec.precision == Precision::extended) {
    engine_ = std::make_unique<TypedEngine<long double>>(model, spec, hbar);
  } else {
    engine_ = std::make_unique<TypedEngine<double>>(model, spec, hbar);
  }
}

SplitOperator::~SplitOperator() = default;

void SplitOperator::propagate(std::span<const complex> psi0, std::span<const double> times,
                              const Observer& observer) {
  if (psi0.size() != spec_.n_points) throw DomainError("initial wavefunction does not match the grid size");
  if (times.empty()) return;
  for (std::size_t j = 1; j < times.size(); ++j) {
    if (!(times[j] > times[j - 1])) throw ConfigError("output times must be strictly increasing");
  }
  const double norm0 = grid_norm(psi0, spec_.grid());
  if (!(std::abs(norm0 - 1.0) <= 1e-10)) {
    throw DomainError("initial wavefunction norm " + format_time(norm0) + " differs from 1 by more than 1e-10");
  }
  engine_->propagate(psi0, times, observer);
}

double SplitOperator::energy(std::span<const complex> psi) {
  if (psi.size() != spec_.n_points) throw DomainError("wavefunction does not match the grid size");
  return engine_->energy(psi);
}

std::vector<std::vector<complex>> split_operator_propagate(const Potential& model, std::span<const complex> psi0,
                                                           const GridSpec& spec, double hbar,
                                                           std::span<const double> times) {
  SplitOperator propagator(model, spec, hbar);
  std::vector<std::vector<complex>> out(times.size());
  propagator.propagate(psi0, times, [&](std::size_t j, std::span<const complex> psi) {
    out[j].assign(psi.begin(), psi.end());
  });
  return out;
}

complex quantum_autocorrelation(std::span<const complex> psi0, std::span<const complex> psi_t,
                                const UniformGrid& grid) {
  if (psi0.size() != psi_t.size()) throw DomainError("autocorrelation needs both wavefunctions on one grid");
  complex sum = 0.0;
  for (std::size_t j = 0; j < psi0.size(); ++j) sum += std::conj(psi0[j]) * psi_t[j];
  return sum * grid.spacing();
}

QuantumSeries quantum_reference(const Potential& model, const GaussianState& initial, const GridSpec& spec,
                                std::span<const double> times) {
  SplitOperator propagator(model, spec, initial.hbar);
  const UniformGrid grid = spec.grid();
  std::vector<complex> psi0(grid.n_points);
  for (std::size_t j = 0; j < grid.n_points; ++j) psi0[j] = amplitude(initial, grid.point(j));

  QuantumSeries out;
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  out.norm.resize(times.size());
  out.energy.resize(times.size());
  propagator.propagate(psi0, times, [&](std::size_t j, std::span<const complex> psi) {
    out.values[j] = quantum_autocorrelation(psi0, psi, grid);
    out.norm[j] = grid_norm(psi, grid);
    out.energy[j] = propagator.energy(psi);
  });
  return out;
}

}  // namespace sciv
