#ifndef SCIV_CLASSICAL_DYNAMICS_HPP
#define SCIV_CLASSICAL_DYNAMICS_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sciv/errors.hpp"
#include "sciv/potentials.hpp"

namespace sciv {

/// 2x2 stability matrix d(q_t, p_t) / d(q_i, p_i).
struct Monodromy {
  double qq = 1.0;  // dq_t/dq_i
  double qp = 0.0;  // dq_t/dp_i
  double pq = 0.0;  // dp_t/dq_i
  double pp = 1.0;  // dp_t/dp_i

  static constexpr Monodromy identity() noexcept { return {}; }
  double determinant() const noexcept { return qq * pp - qp * pq; }
};

struct TrajectoryState {
  double t = 0.0;
  double q = 0.0;
  double p = 0.0;
  double action = 0.0;  // S = \int_0^t L dt'
  Monodromy stability;
};

struct IntegratorConfig {
  double dt = 1e-3;
};

/// Thrown when a trajectory leaves the region where the potential can be
/// evaluated. Carries the last state that was fully valid.
class TrajectoryEscapeError : public NumericalError {
 public:
  TrajectoryEscapeError(const std::string& what, const TrajectoryState& last)
      : NumericalError(what), last_valid_(last) {}
  const TrajectoryState& last_valid() const noexcept { return last_valid_; }

 private:
  TrajectoryState last_valid_;
};

/// Closed-form monodromy of a harmonic oscillator after time t.
inline Monodromy harmonic_monodromy(double omega, double mass, double t) noexcept {
  const double c = std::cos(omega * t);
  const double s = std::sin(omega * t);
  return {c, s / (mass * omega), -mass * omega * s, c};
}

/// Throws ConfigError unless times[0] == 0, times strictly increase and dt > 0.
void validate_time_grid(std::span<const double> times, const IntegratorConfig& cfg);

namespace detail {

struct Derivative {
  double q, p, action;
  Monodromy m;
};

template <class Model>
inline Derivative rhs(const Model& model, double inv_mass, const TrajectoryState& s) {
  const PotentialValues v = model.evaluate(s.q);
  const double velocity = s.p * inv_mass;
  Derivative d;
  d.q = velocity;
  d.p = -v.gradient;
  d.action = 0.5 * s.p * velocity - v.value;
  // dM/dt = [[0, 1/m], [-V'', 0]] M
  d.m.qq = inv_mass * s.stability.pq;
  d.m.qp = inv_mass * s.stability.pp;
  d.m.pq = -v.curvature * s.stability.qq;
  d.m.pp = -v.curvature * s.stability.qp;
  return d;
}

inline TrajectoryState advance(const TrajectoryState& s, const Derivative& d, double h) {
  TrajectoryState out;
  out.t = s.t + h;
  out.q = s.q + h * d.q;
  out.p = s.p + h * d.p;
  out.action = s.action + h * d.action;
  out.stability.qq = s.stability.qq + h * d.m.qq;
  out.stability.qp = s.stability.qp + h * d.m.qp;
  out.stability.pq = s.stability.pq + h * d.m.pq;
  out.stability.pp = s.stability.pp + h * d.m.pp;
  return out;
}

template <class Model>
inline TrajectoryState rk4_step(const Model& model, double inv_mass, const TrajectoryState& s, double h) {
  const Derivative k1 = rhs(model, inv_mass, s);
  const Derivative k2 = rhs(model, inv_mass, advance(s, k1, 0.5 * h));
  const Derivative k3 = rhs(model, inv_mass, advance(s, k2, 0.5 * h));
  const Derivative k4 = rhs(model, inv_mass, advance(s, k3, h));
  const double w = h / 6.0;
  TrajectoryState out;
  out.t = s.t + h;
  out.q = s.q + w * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  out.p = s.p + w * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  out.action = s.action + w * (k1.action + 2.0 * k2.action + 2.0 * k3.action + k4.action);
  out.stability.qq = s.stability.qq + w * (k1.m.qq + 2.0 * k2.m.qq + 2.0 * k3.m.qq + k4.m.qq);
  out.stability.qp = s.stability.qp + w * (k1.m.qp + 2.0 * k2.m.qp + 2.0 * k3.m.qp + k4.m.qp);
  out.stability.pq = s.stability.pq + w * (k1.m.pq + 2.0 * k2.m.pq + 2.0 * k3.m.pq + k4.m.pq);
  out.stability.pp = s.stability.pp + w * (k1.m.pp + 2.0 * k2.m.pp + 2.0 * k3.m.pp + k4.m.pp);
  return out;
}

}  // namespace detail

/// Integrates (q, p, S, M) with fixed-step RK4 and reports every step.
///
/// Each interval between consecutive output times is split into
/// ceil(interval / dt) equal substeps so that output times are hit exactly.
/// `observer(state, output_index)` is called for the initial state and after
/// every substep; output_index is set only when state.t is an output time.
template <class Observer>
void integrate(const Potential& model, double q_initial, double p_initial, std::span<const double> times,
               const IntegratorConfig& cfg, Observer&& observer) {
  validate_time_grid(times, cfg);
  const double inv_mass = 1.0 / model.mass();
  TrajectoryState state;
  state.q = q_initial;
  state.p = p_initial;
  observer(static_cast<const TrajectoryState&>(state), std::optional<std::size_t>(0));

  model.visit([&](const auto& concrete) {
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double interval = times[k] - times[k - 1];
      const auto substeps = static_cast<std::size_t>(std::ceil(interval / cfg.dt - 1e-9));
      const double h = interval / static_cast<double>(substeps);
      for (std::size_t s = 1; s <= substeps; ++s) {
        TrajectoryState next;
        try {
          next = detail::rk4_step(concrete, inv_mass, state, h);
        } catch (const OutOfRangeError& e) {
          throw TrajectoryEscapeError(std::string("trajectory escaped the evaluable region: ") + e.what(), state);
        }
        if (!std::isfinite(next.q) || !std::isfinite(next.p) || !std::isfinite(next.action)) {
          throw TrajectoryEscapeError("trajectory became non-finite", state);
        }
        const bool at_output = (s == substeps);
        next.t = at_output ? times[k] : times[k - 1] + static_cast<double>(s) * h;
        state = next;
        observer(static_cast<const TrajectoryState&>(state),
                 at_output ? std::optional<std::size_t>(k) : std::optional<std::size_t>());
      }
    }
  });
}

/// Trajectory states at the requested output times.
std::vector<TrajectoryState> propagate(const Potential& model, double q_initial, double p_initial,
                                       std::span<const double> times, const IntegratorConfig& cfg);

}  // namespace sciv

#endif  // SCIV_CLASSICAL_DYNAMICS_HPP
