#ifndef SCIV_HARNESS_HPP
#define SCIV_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sciv/ivr_propagators.hpp"
#include "sciv/potentials.hpp"
#include "sciv/quantum_reference.hpp"

namespace sciv {

inline constexpr std::string_view kQuantumLabel = "Quantum";

struct PotentialConfig {
  PotentialKind kind = PotentialKind::harmonic;
  double mass = 1.0;
  double omega = 1.0;      // harmonic
  double depth = 1.0;      // morse, baranger
  double range = 1.0;      // morse
  double offset = 1.0;     // baranger
  double steepness = 1.0;  // baranger
};

struct NormConfig {
  bool enabled = false;
  std::optional<UniformGrid> grid;  // default chosen from the potential
};

/// One experiment. See README for the text format.
struct ExperimentConfig {
  PotentialConfig potential;
  double hbar = 1.0;
  double q0 = 0.0;
  double p0 = 0.0;
  double gamma = 1.0;
  std::vector<std::string> methods;  // labels, "Quantum" for the grid reference
  double t_max = 10.0;
  std::size_t n_output = 100;
  std::size_t n_trajectories = 5000;
  std::uint64_t seed = 1;
  SamplingDensity sampling = SamplingDensity::overlap_magnitude;
  double dt = 1e-2;
  std::optional<GridSpec> quantum;  // default chosen from the potential
  NormConfig norm;
  std::string output_dir;  // empty: "sciv-output"
};

/// Parses the sectioned text format. `source` names the input in messages,
/// which have the form "source:line: [section] key: problem". Throws
/// ConfigError.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ExperimentConfig& config);

/// Applies one "section.key=value" override with the same validation as a
/// config file line.
void apply_override(ExperimentConfig& config, std::string_view assignment);

/// Throws ConfigError for inconsistent settings (empty method list, bad
/// method labels, grid invariants, ...).
void validate(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
ExperimentConfig preset(std::string_view name);

Potential make_potential(const ExperimentConfig& config);
GaussianState initial_state(const ExperimentConfig& config);
std::vector<double> output_times(const ExperimentConfig& config);
GridSpec quantum_grid(const ExperimentConfig& config);
UniformGrid norm_grid(const ExperimentConfig& config);
std::vector<MethodSpec> semiclassical_methods(const ExperimentConfig& config);
bool wants_quantum(const ExperimentConfig& config);

/// FNV-1a of the canonical config without the output section.
std::uint64_t config_hash(const ExperimentConfig& config);

struct RunOptions {
  unsigned threads = 1;
  bool gnuplot = false;
  /// Wins over SCIV_OUTPUT_DIR and the config's output directory.
  std::optional<std::filesystem::path> output_dir;
};

struct MethodOutput {
  std::string label;
  std::filesystem::path csv;
  double wall_seconds = 0.0;
};

struct RunSummary {
  std::filesystem::path directory;
  std::vector<MethodOutput> outputs;
  EnsembleDiagnostics diagnostics;
};

/// Runs every requested method and writes into config.output_dir:
///   <method>.csv    t,re_c,im_c,abs_c,norm,mc_error
///   manifest.ini    the config plus hash, seed and versions (loadable)
///   diagnostics.csv deterministic run diagnostics
///   timing.csv      wall-clock times (the only non-reproducible file)
///   *.gp            gnuplot scripts when requested
/// Files are written only after all computations finish.
RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SeriesTable {
  std::vector<double> t;
  std::vector<double> re;
  std::vector<double> im;
  std::vector<double> abs;
  std::vector<double> norm;
  std::vector<double> mc_error;
};

/// Reads a method CSV written by run_experiment. Throws IoError/ConfigError.
SeriesTable read_series_csv(const std::filesystem::path& path);

struct ComparisonRow {
  std::string label;
  double max_abs_deviation = 0.0;  // max_t | |c| - |c_ref| |
  double rms_abs_deviation = 0.0;
  double max_norm_deviation = 0.0;  // max_t |norm - 1|, NaN without norm
  std::size_t n_trajectories = 0;   // 0 for the grid reference
  double wall_seconds = 0.0;        // NaN when timing.csv is absent
};

struct ComparisonReport {
  std::string baseline;
  std::vector<ComparisonRow> rows;  // ascending RMS deviation
};

/// Compares every series of a run directory against `baseline` (default the
/// quantum series). Throws ConfigError when the baseline is missing.
ComparisonReport compare_run(const std::filesystem::path& directory, std::string_view baseline = kQuantumLabel);

/// Writes comparison.csv and comparison.txt next to the run files.
void write_report(const ComparisonReport& report, const std::filesystem::path& directory);
std::string format_report(const ComparisonReport& report);

struct ConvergenceRow {
  std::string label;
  std::size_t n_trajectories = 0;
  double rms_vs_largest = 0.0;
  double max_vs_largest = 0.0;
  double mean_mc_error = 0.0;
};

/// Runs the semiclassical methods once with max(n_list) trajectories and
/// evaluates every smaller N as a prefix of the same sample stream (equal to
/// a standalone run with that N and seed). Writes convergence.csv.
std::vector<ConvergenceRow> converge(const ExperimentConfig& config, std::vector<std::size_t> n_list,
                                     const RunOptions& options = {});

/// Width diagnostic along the trajectory starting at (q_i, p_i); writes
/// width_diagnostic.csv.
WidthSeries diagnose_width(const ExperimentConfig& config, double q_initial, double p_initial,
                           const RunOptions& options = {});

/// options.output_dir, else $SCIV_OUTPUT_DIR, else config.output_dir, else
/// "sciv-output".
std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const RunOptions& options = {});

std::string version_string();

}  // namespace sciv

#endif  // SCIV_HARNESS_HPP
