#include "sciv/sciv.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "sciv/errors.hpp"
#include "sciv/harness.hpp"

struct sciv_config {
  sciv::ExperimentConfig value;
};

struct sciv_report {
  sciv::ComparisonReport value;
  std::string text;
};

namespace {

thread_local std::string last_error;

sciv_status fail(sciv_status status, const char* message) {
  last_error = message;
  return status;
}

// Runs body and translates exceptions into status codes.
template <class Body>
sciv_status guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return SCIV_OK;
  } catch (const sciv::ConfigError& e) {
    return fail(SCIV_ERROR_CONFIG, e.what());
  } catch (const sciv::IoError& e) {
    return fail(SCIV_ERROR_IO, e.what());
  } catch (const sciv::Error& e) {
    return fail(SCIV_ERROR_NUMERICAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SCIV_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SCIV_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(SCIV_ERROR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

sciv::RunOptions run_options(const sciv_run_options* options) {
  sciv::RunOptions out;
  if (options) {
    out.threads = options->threads == 0 ? 1 : options->threads;
    out.gnuplot = options->gnuplot != 0;
    if (options->output_dir) out.output_dir = options->output_dir;
  }
  return out;
}

}  // namespace

extern "C" {

const char* sciv_version(void) {
  static const std::string version = sciv::version_string();
  return version.c_str();
}

const char* sciv_status_string(sciv_status status) {
  switch (status) {
    case SCIV_OK:
      return "ok";
    case SCIV_ERROR_CONFIG:
      return "configuration error";
    case SCIV_ERROR_NUMERICAL:
      return "numerical error";
    case SCIV_ERROR_IO:
      return "i/o error";
    case SCIV_ERROR_INVALID_ARGUMENT:
      return "invalid argument";
    case SCIV_ERROR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* sciv_last_error(void) { return last_error.c_str(); }

void sciv_string_free(char* text) { std::free(text); }

size_t sciv_preset_count(void) { return sciv::preset_names().size(); }

const char* sciv_preset_name(size_t index) {
  static const std::vector<std::string> names = sciv::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

sciv_status sciv_config_load(const char* path, sciv_config** out) {
  if (!path || !out) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_load: NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new sciv_config{sciv::load_config(path)}; });
}

sciv_status sciv_config_parse(const char* text, sciv_config** out) {
  if (!text || !out) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_parse: NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new sciv_config{sciv::parse_config(text, "<text>")}; });
}

sciv_status sciv_config_preset(const char* name, sciv_config** out) {
  if (!name || !out) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_preset: NULL argument");
  *out = nullptr;
  return guarded([&] { *out = new sciv_config{sciv::preset(name)}; });
}

sciv_status sciv_config_set(sciv_config* config, const char* assignment) {
  if (!config || !assignment) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_set: NULL argument");
  // Apply to a copy so a rejected override leaves the config untouched.
  return guarded([&] {
    sciv::ExperimentConfig updated = config->value;
    sciv::apply_override(updated, assignment);
    config->value = std::move(updated);
  });
}

sciv_status sciv_config_validate(const sciv_config* config) {
  if (!config) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_validate: NULL config");
  return guarded([&] { sciv::validate(config->value); });
}

sciv_status sciv_config_serialize(const sciv_config* config, char** text) {
  if (!config || !text) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_config_serialize: NULL argument");
  *text = nullptr;
  return guarded([&] { *text = copy_string(sciv::serialize_config(config->value)); });
}

void sciv_config_free(sciv_config* config) { delete config; }

sciv_status sciv_run(const sciv_config* config, const sciv_run_options* options, char** out_dir) {
  if (!config) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_run: NULL config");
  if (out_dir) *out_dir = nullptr;
  return guarded([&] {
    const sciv::RunSummary summary = sciv::run_experiment(config->value, run_options(options));
    if (out_dir) *out_dir = copy_string(summary.directory.string());
  });
}

sciv_status sciv_compare(const char* run_dir, const char* baseline, sciv_report** out) {
  if (!run_dir || !out) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_compare: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto report = std::make_unique<sciv_report>();
    report->value = sciv::compare_run(run_dir, baseline ? baseline : sciv::kQuantumLabel);
    report->text = sciv::format_report(report->value);
    sciv::write_report(report->value, run_dir);
    *out = report.release();
  });
}

size_t sciv_report_size(const sciv_report* report) { return report ? report->value.rows.size() : 0; }

sciv_status sciv_report_row_at(const sciv_report* report, size_t index, sciv_report_row* row) {
  if (!report || !row) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_report_row_at: NULL argument");
  if (index >= report->value.rows.size()) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_report_row_at: index out of range");
  const sciv::ComparisonRow& r = report->value.rows[index];
  *row = sciv_report_row{r.label.c_str(), r.rms_abs_deviation, r.max_abs_deviation, r.max_norm_deviation,
                         r.n_trajectories, r.wall_seconds};
  return SCIV_OK;
}

const char* sciv_report_text(const sciv_report* report) { return report ? report->text.c_str() : ""; }

void sciv_report_free(sciv_report* report) { delete report; }

sciv_status sciv_converge(const sciv_config* config, const size_t* n_list, size_t n_count,
                          const sciv_run_options* options, char** csv_path) {
  if (!config || (!n_list && n_count > 0)) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_converge: NULL argument");
  if (csv_path) *csv_path = nullptr;
  return guarded([&] {
    const sciv::RunOptions opts = run_options(options);
    sciv::converge(config->value, std::vector<std::size_t>(n_list, n_list + n_count), opts);
    if (csv_path) *csv_path = copy_string((sciv::resolve_output_dir(config->value, opts) / "convergence.csv").string());
  });
}

sciv_status sciv_diagnose_width(const sciv_config* config, double q_initial, double p_initial,
                                const sciv_run_options* options, char** csv_path) {
  if (!config) return fail(SCIV_ERROR_INVALID_ARGUMENT, "sciv_diagnose_width: NULL config");
  if (csv_path) *csv_path = nullptr;
  return guarded([&] {
    const sciv::RunOptions opts = run_options(options);
    sciv::diagnose_width(config->value, q_initial, p_initial, opts);
    if (csv_path) {
      *csv_path = copy_string((sciv::resolve_output_dir(config->value, opts) / "width_diagnostic.csv").string());
    }
  });
}

}  // extern "C"
