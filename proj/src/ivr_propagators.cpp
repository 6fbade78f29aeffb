#include "sciv/ivr_propagators.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>

#include "parallel.hpp"
#include "sciv/errors.hpp"

namespace sciv {

namespace {

constexpr complex kI{0.0, 1.0};

// Trajectories are integrated in blocks of this size and then reduced in
// index order. Fixed, so that results never depend on the thread count.
constexpr std::size_t kBlockSize = 64;

// M_qq + i hbar gamma M_qp
complex thawed_denominator(const Monodromy& m, double width, double hbar) {
  return complex(m.qq, hbar * width * m.qp);
}

complex hk_radicand(const Monodromy& m, double width, double hbar) {
  const double hg = hbar * width;
  // (1/2)(M_qq + M_pp - i hbar g M_qp - M_pq / (i hbar g))
  return 0.5 * complex(m.qq + m.pp, m.pq / hg - hg * m.qp);
}

complex general_radicand(const Monodromy& m, complex g1, complex g2, double hbar) {
  const complex sum = g1 * m.qq + g2 * m.pp - kI * hbar * g1 * g2 * m.qp - m.pq / (kI * hbar);
  return sum / (2.0 * std::sqrt(g1.real() * g2.real()));
}

complex tga_from_root(double width, complex g1, complex root) {
  return std::pow(width / g1.real(), 0.25) / root;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string MethodSpec::label() const {
  switch (variant) {
    case Variant::herman_kluk:
      return "HK";
    case Variant::thawed:
      return "TGA";
    case Variant::root_thawed:
      return "RootTGA(" + std::to_string(root_order) + ")";
    case Variant::global_harmonic:
      return "GlobalHarmonicTGA";
  }
  return "?";
}

std::string MethodSpec::file_stem() const {
  switch (variant) {
    case Variant::herman_kluk:
      return "hk";
    case Variant::thawed:
      return "tga";
    case Variant::root_thawed:
      return "root_tga_" + std::to_string(root_order);
    case Variant::global_harmonic:
      return "global_harmonic_tga";
  }
  return "unknown";
}

MethodSpec MethodSpec::parse(std::string_view text) {
  if (text == "HK") return {Variant::herman_kluk, 0};
  if (text == "TGA") return {Variant::thawed, 0};
  if (text == "GlobalHarmonicTGA") return {Variant::global_harmonic, 0};
  constexpr std::string_view prefix = "RootTGA(";
  if (text.starts_with(prefix) && text.ends_with(")")) {
    const std::string_view digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    int order = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), order);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || order < 2 || order % 2 != 0) {
      throw ConfigError("RootTGA order must be an even integer >= 2, got '" + std::string(digits) + "'");
    }
    return {Variant::root_thawed, order};
  }
  throw ConfigError("unknown method '" + std::string(text) + "' (expected HK, TGA, RootTGA(n), GlobalHarmonicTGA)");
}

complex tga_width(const Monodromy& m, double width, double hbar) {
  const complex denominator = thawed_denominator(m, width, hbar);
  if (std::abs(denominator) < 1e-30) throw SingularWidthError("thawed width denominator vanishes");
  const complex g1 = -(kI / hbar) * complex(m.pq, hbar * width * m.pp) / denominator;
  if (!(g1.real() > 0.0)) throw SingularWidthError("thawed width lost its positive real part");
  return g1;
}

complex squeezed_width(double omega, double mass, double width, double hbar, double t) {
  const double c = std::cos(omega * t);
  const double s = std::sin(omega * t);
  const complex numerator(-mass * omega * s, hbar * width * c);
  const complex denominator(c, hbar * width / (mass * omega) * s);
  return -(kI / hbar) * numerator / denominator;
}

complex root_width(complex width, int order) {
  if (order < 2 || order % 2 != 0) throw DomainError("root order must be even and >= 2");
  if (!(width.real() > 0.0)) throw DomainError("root_width requires Re(width) > 0");
  return std::pow(width, 1.0 / order);
}

complex BranchContinuation::sqrt(complex radicand) {
  if (radicand == 0.0) throw BranchAmbiguityError("prefactor radicand is exactly zero; reduce the time step");
  complex root = std::sqrt(radicand);
  if (!previous_) {
    phase_ = std::arg(radicand);
  } else if (winding_ == Winding::counter_clockwise) {
    double step = std::arg(radicand / previous_radicand_);
    if (step < -0.25 * std::numbers::pi) step += 2.0 * std::numbers::pi;
    phase_ += step;
    // phase_ - arg(radicand) is a multiple of 2 pi; odd multiples flip the root.
    const auto turns = std::llround((phase_ - std::arg(radicand)) / (2.0 * std::numbers::pi));
    if (turns % 2 != 0) root = -root;
  } else {
    const complex prev = *previous_;
    double alignment = (root * std::conj(prev)).real();
    if (alignment < 0.0) {
      root = -root;
      alignment = -alignment;
    }
    // cos(60 deg) = 0.5
    if (alignment * alignment < 0.25 * std::norm(root) * std::norm(prev)) {
      throw BranchAmbiguityError(
          "prefactor square root turned by more than 60 degrees in one step; the radicand passed too close to "
          "zero, reduce the integrator time step");
    }
  }
  previous_ = root;
  previous_radicand_ = radicand;
  return root;
}

complex prefactor_general(const Monodromy& m, complex g1, complex g2, double hbar, BranchContinuation& branch) {
  if (!(g1.real() > 0.0) || !(g2.real() > 0.0)) throw DomainError("prefactor requires Re(width) > 0");
  return branch.sqrt(general_radicand(m, g1, g2, hbar));
}

complex prefactor_hk(const Monodromy& m, double width, double hbar, BranchContinuation& branch) {
  return branch.sqrt(hk_radicand(m, width, hbar));
}

complex prefactor_tga(const Monodromy& m, double width, complex g1, double hbar, BranchContinuation& branch) {
  if (!(g1.real() > 0.0)) throw DomainError("prefactor requires Re(width) > 0");
  return tga_from_root(width, g1, branch.sqrt(thawed_denominator(m, width, hbar)));
}

SamplingWidths sampling_widths(double width, double hbar, SamplingDensity density) {
  // |<g(p,q)|g0>| = exp(-width dq^2/4 - dp^2/(4 hbar^2 width))
  const double scale = density == SamplingDensity::overlap_magnitude ? 2.0 : 1.0;
  return {std::sqrt(scale / width), hbar * std::sqrt(scale * width)};
}

PhaseSpacePoint sample_initial_condition(const GaussianState& initial, SamplingDensity density, std::uint64_t seed,
                                         std::size_t index) {
  const double width = initial.width.real();
  const SamplingWidths s = sampling_widths(width, initial.hbar, density);
  std::mt19937_64 engine(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index))));
  std::normal_distribution<double> normal;
  const double zq = normal(engine);
  const double zp = normal(engine);
  // density = exp(-(zq^2 + zp^2)/2) / (2 pi sigma_q sigma_p), weight = 1/(2 pi hbar density)
  const double weight = s.sigma_q * s.sigma_p / initial.hbar * std::exp(0.5 * (zq * zq + zp * zp));
  return {initial.q + s.sigma_q * zq, initial.p + s.sigma_p * zp, weight};
}

std::vector<PhaseSpacePoint> sample_initial_conditions(const GaussianState& initial, std::size_t count,
                                                       std::uint64_t seed, SamplingDensity density) {
  std::vector<PhaseSpacePoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_initial_condition(initial, density, seed, i));
  return out;
}

namespace {

struct MethodTrack {
  std::vector<complex> contribution;  // integrand * weight at each output time
  std::vector<complex> coefficient;   // R exp(iS/hbar) <g_i|g0> w at each output time
  std::vector<complex> final_width;   // gamma_1 at each output time
};

struct TrajectoryRecord {
  std::vector<double> q;
  std::vector<double> p;
  std::vector<MethodTrack> methods;
  bool harmonic_fallback = false;
};

struct TraceContext {
  const Potential& model;
  const GaussianState& initial;
  std::span<const MethodSpec> methods;
  std::span<const double> times;
  const EnsembleOptions& options;
  bool keep_wavefunction;
};

TrajectoryRecord trace_trajectory(const TraceContext& ctx, std::size_t index) {
  const GaussianState& g0 = ctx.initial;
  const double width = g0.width.real();
  const double hbar = g0.hbar;
  const double mass = ctx.model.mass();
  const std::size_t n_out = ctx.times.size();
  const std::size_t n_methods = ctx.methods.size();

  const PhaseSpacePoint start = sample_initial_condition(g0, ctx.options.sampling, ctx.options.seed, index);
  const GaussianState launch{start.q, start.p, complex(width, 0.0), hbar};
  const complex initial_factor = overlap(launch, g0) * start.weight;

  TrajectoryRecord rec;
  rec.q.resize(n_out);
  rec.p.resize(n_out);
  rec.methods.resize(n_methods);
  for (MethodTrack& t : rec.methods) {
    t.contribution.resize(n_out);
    if (ctx.keep_wavefunction) {
      t.coefficient.resize(n_out);
      t.final_width.resize(n_out);
    }
  }

  // omega(E) for the global harmonic variant; nullopt means thawed fallback.
  std::optional<double> omega;
  const bool wants_harmonic = std::any_of(ctx.methods.begin(), ctx.methods.end(),
                                          [](const MethodSpec& m) { return m.variant == Variant::global_harmonic; });
  if (wants_harmonic) {
    try {
      omega = frequency(ctx.model, ctx.model.energy(start.q, start.p)).omega;
    } catch (const DomainError&) {
      rec.harmonic_fallback = true;
    }
  }

  std::vector<BranchContinuation> branches;
  for (const MethodSpec& method : ctx.methods) {
    const bool thawed_denominator_tracked =
        method.variant == Variant::thawed || method.variant == Variant::global_harmonic;
    branches.emplace_back(thawed_denominator_tracked ? Winding::counter_clockwise : Winding::unknown);
  }
  std::vector<complex> roots(n_methods);

  auto on_step = [&](const TrajectoryState& s, std::optional<std::size_t> output) {
    const Monodromy& m = s.stability;
    for (std::size_t k = 0; k < n_methods; ++k) {
      const MethodSpec& method = ctx.methods[k];
      switch (method.variant) {
        case Variant::herman_kluk:
          roots[k] = branches[k].sqrt(hk_radicand(m, width, hbar));
          break;
        case Variant::thawed:
          roots[k] = branches[k].sqrt(thawed_denominator(m, width, hbar));
          break;
        case Variant::root_thawed: {
          const complex g1 = root_width(tga_width(m, width, hbar), method.root_order);
          roots[k] = branches[k].sqrt(general_radicand(m, g1, complex(width, 0.0), hbar));
          break;
        }
        case Variant::global_harmonic: {
          const Monodromy& mh = omega ? harmonic_monodromy(*omega, mass, s.t) : m;
          roots[k] = branches[k].sqrt(thawed_denominator(mh, width, hbar));
          break;
        }
      }
    }
    if (!output) return;

    const std::size_t j = *output;
    rec.q[j] = s.q;
    rec.p[j] = s.p;
    const complex phase = std::exp(kI * (s.action / hbar)) * initial_factor;
    for (std::size_t k = 0; k < n_methods; ++k) {
      const MethodSpec& method = ctx.methods[k];
      complex g1;
      complex prefactor;
      switch (method.variant) {
        case Variant::herman_kluk:
          g1 = width;
          prefactor = roots[k];
          break;
        case Variant::thawed:
          g1 = tga_width(m, width, hbar);
          prefactor = tga_from_root(width, g1, roots[k]);
          break;
        case Variant::root_thawed:
          g1 = root_width(tga_width(m, width, hbar), method.root_order);
          prefactor = roots[k];
          break;
        case Variant::global_harmonic:
          g1 = omega ? squeezed_width(*omega, mass, width, hbar, s.t) : tga_width(m, width, hbar);
          prefactor = tga_from_root(width, g1, roots[k]);
          break;
      }
      const complex coefficient = prefactor * phase;
      const complex final_overlap = overlap(g0, GaussianState{s.q, s.p, g1, hbar});
      MethodTrack& track = rec.methods[k];
      track.contribution[j] = final_overlap * coefficient;
      if (ctx.keep_wavefunction) {
        track.coefficient[j] = coefficient;
        track.final_width[j] = g1;
      }
    }
  };

  integrate(ctx.model, start.q, start.p, ctx.times, ctx.options.integrator, on_step);
  return rec;
}

struct Accumulator {
  std::vector<complex> sum;
  std::vector<double> sum_sq_re;
  std::vector<double> sum_sq_im;

  explicit Accumulator(std::size_t n) : sum(n), sum_sq_re(n), sum_sq_im(n) {}

  void add(std::span<const complex> values) {
    for (std::size_t j = 0; j < values.size(); ++j) {
      sum[j] += values[j];
      sum_sq_re[j] += values[j].real() * values[j].real();
      sum_sq_im[j] += values[j].imag() * values[j].imag();
    }
  }

  CorrelationSeries finish(std::span<const double> times, std::size_t count, std::uint64_t seed) const {
    CorrelationSeries out;
    out.times.assign(times.begin(), times.end());
    out.values.resize(times.size());
    out.mc_error.resize(times.size());
    out.n_trajectories = count;
    out.seed = seed;
    const double n = static_cast<double>(count);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const complex mean = sum[j] / n;
      out.values[j] = mean;
      if (count < 2) {
        out.mc_error[j] = std::nan("");
        continue;
      }
      const double var_re = std::max(0.0, (sum_sq_re[j] - n * mean.real() * mean.real()) / (n - 1.0));
      const double var_im = std::max(0.0, (sum_sq_im[j] - n * mean.imag() * mean.imag()) / (n - 1.0));
      out.mc_error[j] = std::sqrt((var_re + var_im) / n);
    }
    return out;
  }
};

}  // namespace

EnsembleResult run_ensemble(const Potential& model, const GaussianState& initial, std::span<const MethodSpec> methods,
                            std::span<const double> times, const EnsembleOptions& options) {
  if (methods.empty()) throw ConfigError("no semiclassical method requested");
  if (options.n_trajectories < 1) throw ConfigError("n_trajectories must be >= 1");
  if (initial.width.imag() != 0.0 || !(initial.width.real() > 0.0)) {
    throw ConfigError("the initial Gaussian must have a real positive width");
  }
  if (!(initial.hbar > 0.0)) throw ConfigError("hbar must be positive");
  for (std::size_t c : options.checkpoints) {
    if (c < 1 || c > options.n_trajectories) throw ConfigError("checkpoint outside [1, n_trajectories]");
  }
  validate_time_grid(times, options.integrator);

  const std::size_t n_out = times.size();
  const std::size_t n_methods = methods.size();
  const std::size_t total = options.n_trajectories;
  const bool with_norm = options.norm_grid.has_value();

  if (with_norm) {
    const UniformGrid& g = *options.norm_grid;
    const double margin = 6.0 / std::sqrt(initial.width.real());
    if (g.n_points < 2 || initial.q - margin < g.x_min || initial.q + margin > g.point(g.n_points - 1)) {
      throw GridCoverageError("norm grid does not cover the initial wave packet q0 +- 6/sqrt(gamma)");
    }
  }

  const TraceContext ctx{model, initial, methods, times, options, with_norm};

  std::vector<Accumulator> acc(n_methods, Accumulator(n_out));
  std::vector<std::size_t> checkpoints = options.checkpoints;
  std::sort(checkpoints.begin(), checkpoints.end());

  EnsembleResult result;
  result.methods.assign(methods.begin(), methods.end());
  std::vector<std::pair<std::size_t, std::vector<CorrelationSeries>>> snapshots;

  // wavefunction[m * n_out + j] holds method m at output time j.
  std::vector<std::vector<complex>> wavefunction;
  if (with_norm) wavefunction.assign(n_methods * n_out, std::vector<complex>(options.norm_grid->n_points));

  std::vector<TrajectoryRecord> block;
  std::size_t next_checkpoint = 0;
  for (std::size_t first = 0; first < total; first += kBlockSize) {
    const std::size_t count = std::min(kBlockSize, total - first);
    block.assign(count, TrajectoryRecord{});
    detail::parallel_for(count, options.threads, [&](std::size_t i) { block[i] = trace_trajectory(ctx, first + i); });

    for (std::size_t i = 0; i < count; ++i) {
      const TrajectoryRecord& rec = block[i];
      if (rec.harmonic_fallback) ++result.diagnostics.harmonic_fallbacks;
      for (std::size_t k = 0; k < n_methods; ++k) acc[k].add(rec.methods[k].contribution);
      const std::size_t done = first + i + 1;
      while (next_checkpoint < checkpoints.size() && checkpoints[next_checkpoint] == done) {
        std::vector<CorrelationSeries> snap;
        for (std::size_t k = 0; k < n_methods; ++k) snap.push_back(acc[k].finish(times, done, options.seed));
        snapshots.emplace_back(done, std::move(snap));
        ++next_checkpoint;
      }
    }

    if (with_norm) {
      const UniformGrid& grid = *options.norm_grid;
      const double inv_total = 1.0 / static_cast<double>(total);
      detail::parallel_for(n_methods * n_out, options.threads, [&](std::size_t slot) {
        const std::size_t k = slot / n_out;
        const std::size_t j = slot % n_out;
        std::vector<complex>& psi = wavefunction[slot];
        for (const TrajectoryRecord& rec : block) {
          const MethodTrack& track = rec.methods[k];
          accumulate_on_grid(track.coefficient[j] * inv_total,
                             GaussianState{rec.q[j], rec.p[j], track.final_width[j], initial.hbar}, grid, psi);
        }
      });
    }
  }

  for (std::size_t k = 0; k < n_methods; ++k) {
    CorrelationSeries s = acc[k].finish(times, total, options.seed);
    if (with_norm) {
      s.norm.resize(n_out);
      for (std::size_t j = 0; j < n_out; ++j) s.norm[j] = grid_norm(wavefunction[k * n_out + j], *options.norm_grid);
    }
    result.series.push_back(std::move(s));
  }
  // Report checkpoints in the caller's order.
  for (std::size_t c : options.checkpoints) {
    const auto it = std::find_if(snapshots.begin(), snapshots.end(), [c](const auto& s) { return s.first == c; });
    result.checkpoint_series.push_back(it->second);
  }
  return result;
}

CorrelationSeries autocorrelation(const Potential& model, const MethodSpec& method, const GaussianState& initial,
                                  std::span<const double> times, std::size_t n_trajectories, std::uint64_t seed,
                                  const IntegratorConfig& cfg) {
  EnsembleOptions options;
  options.n_trajectories = n_trajectories;
  options.seed = seed;
  options.integrator = cfg;
  return run_ensemble(model, initial, std::span(&method, 1), times, options).series.front();
}

std::vector<double> norm_series(const Potential& model, const MethodSpec& method, const GaussianState& initial,
                                std::span<const double> times, std::size_t n_trajectories, std::uint64_t seed,
                                const UniformGrid& grid, const IntegratorConfig& cfg) {
  EnsembleOptions options;
  options.n_trajectories = n_trajectories;
  options.seed = seed;
  options.integrator = cfg;
  options.norm_grid = grid;
  return run_ensemble(model, initial, std::span(&method, 1), times, options).series.front().norm;
}

WidthSeries width_diagnostic(const Potential& model, double q_initial, double p_initial, double width, double hbar,
                             std::span<const double> times, const IntegratorConfig& cfg) {
  WidthSeries out;
  out.times.assign(times.begin(), times.end());
  out.re_width.resize(times.size());
  out.re_square_root.resize(times.size());
  out.re_fourth_root.resize(times.size());
  integrate(model, q_initial, p_initial, times, cfg, [&](const TrajectoryState& s, std::optional<std::size_t> j) {
    if (!j) return;
    const complex g1 = tga_width(s.stability, width, hbar);
    out.re_width[*j] = g1.real();
    out.re_square_root[*j] = root_width(g1, 2).real();
    out.re_fourth_root[*j] = root_width(g1, 4).real();
  });
  return out;
}

}  // namespace sciv
