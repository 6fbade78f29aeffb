#include "sciv/classical_dynamics.hpp"

namespace sciv {

void validate_time_grid(std::span<const double> times, const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("integrator dt must be positive");
  if (times.empty() || times.front() != 0.0) throw ConfigError("time grid must start at t = 0");
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw ConfigError("time grid must be strictly increasing");
  }
}

std::vector<TrajectoryState> propagate(const Potential& model, double q_initial, double p_initial,
                                       std::span<const double> times, const IntegratorConfig& cfg) {
  std::vector<TrajectoryState> out(times.size());
  integrate(model, q_initial, p_initial, times, cfg,
            [&](const TrajectoryState& s, std::optional<std::size_t> index) {
              if (index) out[*index] = s;
            });
  return out;
}

}  // namespace sciv
