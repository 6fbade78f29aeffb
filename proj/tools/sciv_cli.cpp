// Command-line front end. Everything goes through the C interface.
//
// Exit codes: 0 success, 1 configuration / usage / i/o error, 2 numerical error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sciv/sciv.h"

namespace {

int exit_code(sciv_status status) {
  switch (status) {
    case SCIV_OK:
      return 0;
    case SCIV_ERROR_CONFIG:
    case SCIV_ERROR_IO:
    case SCIV_ERROR_INVALID_ARGUMENT:
      return 1;
    case SCIV_ERROR_NUMERICAL:
    case SCIV_ERROR_INTERNAL:
      return 2;
  }
  return 2;
}

int report(sciv_status status) {
  if (status != SCIV_OK) std::cerr << "sciv: " << sciv_status_string(status) << ": " << sciv_last_error() << "\n";
  return exit_code(status);
}

struct ConfigSource {
  std::string path;
  std::string preset;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("config", path, "Experiment config file");
    cmd->add_option("--preset", preset, "Built-in preset instead of a config file");
    cmd->add_option("--set", overrides, "Override a config value, e.g. --set monte_carlo.seed=7")
        ->take_all()
        ->allow_extra_args(false);
  }

  // Loads the config and applies overrides; returns the failing status.
  sciv_status load(sciv_config** out) const {
    *out = nullptr;
    sciv_status status;
    if (!preset.empty() && !path.empty()) {
      std::cerr << "sciv: give either a config file or --preset, not both\n";
      return SCIV_ERROR_CONFIG;
    }
    if (!preset.empty()) {
      status = sciv_config_preset(preset.c_str(), out);
    } else if (!path.empty()) {
      status = sciv_config_load(path.c_str(), out);
    } else {
      std::cerr << "sciv: a config file or --preset is required\n";
      return SCIV_ERROR_CONFIG;
    }
    if (status != SCIV_OK) return status;
    for (const std::string& o : overrides) {
      status = sciv_config_set(*out, o.c_str());
      if (status != SCIV_OK) {
        sciv_config_free(*out);
        *out = nullptr;
        return status;
      }
    }
    return SCIV_OK;
  }
};

struct OutputFlags {
  std::string out;
  unsigned threads = 1;
  bool gnuplot = false;

  void attach(CLI::App* cmd, bool with_gnuplot) {
    cmd->add_option("--out", out, "Output directory (overrides SCIV_OUTPUT_DIR and the config)");
    cmd->add_option("--threads", threads, "Worker threads; results do not depend on this")
        ->check(CLI::Range(1u, 1024u));
    if (with_gnuplot) cmd->add_flag("--gnuplot", gnuplot, "Also write gnuplot scripts");
  }

  sciv_run_options options() const {
    return sciv_run_options{threads, gnuplot ? 1 : 0, out.empty() ? nullptr : out.c_str()};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiclassical IVR propagators versus split-operator quantum dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("sciv ") + sciv_version());

  ConfigSource run_source;
  OutputFlags run_flags;
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write CSVs plus a manifest");
  run_source.attach(run);
  run_flags.attach(run, true);

  std::string compare_dir;
  std::string baseline = "Quantum";
  CLI::App* compare = app.add_subcommand("compare", "Rank the methods of a run against a baseline series");
  compare->add_option("run_dir", compare_dir, "Run directory")->required();
  compare->add_option("--baseline", baseline, "Reference series label")->capture_default_str();

  ConfigSource converge_source;
  OutputFlags converge_flags;
  std::vector<std::size_t> n_list;
  CLI::App* converge = app.add_subcommand("converge", "Monte Carlo error versus trajectory count");
  converge_source.attach(converge);
  converge_flags.attach(converge, false);
  converge->add_option("--n-list", n_list, "Trajectory counts, e.g. 1000,2000,4000")
      ->required()
      ->delimiter(',');

  ConfigSource width_source;
  OutputFlags width_flags;
  double q_initial = 0.0;
  double p_initial = 0.0;
  CLI::App* width = app.add_subcommand("diagnose-width", "Real parts of the thawed width and its roots along one trajectory");
  width_source.attach(width);
  width_flags.attach(width, true);
  width->add_option("--qi", q_initial, "Initial position")->required();
  width->add_option("--pi", p_initial, "Initial momentum")->required();

  ConfigSource show_source;
  CLI::App* show = app.add_subcommand("show-config", "Print the canonical form of a config or preset");
  show_source.attach(show);

  CLI::App* presets = app.add_subcommand("presets", "List the built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (presets->parsed()) {
    for (std::size_t i = 0; i < sciv_preset_count(); ++i) std::cout << sciv_preset_name(i) << "\n";
    return 0;
  }

  if (compare->parsed()) {
    sciv_report* rep = nullptr;
    const sciv_status status = sciv_compare(compare_dir.c_str(), baseline.c_str(), &rep);
    if (status != SCIV_OK) return report(status);
    std::cout << sciv_report_text(rep);
    sciv_report_free(rep);
    return 0;
  }

  ConfigSource* source = run->parsed()        ? &run_source
                         : converge->parsed() ? &converge_source
                         : width->parsed()    ? &width_source
                                              : &show_source;
  sciv_config* config = nullptr;
  sciv_status status = source->load(&config);
  if (status != SCIV_OK) return sciv_last_error()[0] ? report(status) : exit_code(status);

  char* path = nullptr;
  if (show->parsed()) {
    status = sciv_config_serialize(config, &path);
    if (status == SCIV_OK) std::cout << path;
  } else if (run->parsed()) {
    const sciv_run_options opts = run_flags.options();
    status = sciv_run(config, &opts, &path);
    if (status == SCIV_OK) std::cout << "wrote " << path << "\n";
  } else if (converge->parsed()) {
    const sciv_run_options opts = converge_flags.options();
    status = sciv_converge(config, n_list.data(), n_list.size(), &opts, &path);
    if (status == SCIV_OK) std::cout << "wrote " << path << "\n";
  } else {
    const sciv_run_options opts = width_flags.options();
    status = sciv_diagnose_width(config, q_initial, p_initial, &opts, &path);
    if (status == SCIV_OK) std::cout << "wrote " << path << "\n";
  }
  sciv_string_free(path);
  sciv_config_free(config);
  return report(status);
}
