/* C interface to the semiclassical IVR toolkit.
 *
 * All functions return a sciv_status. On failure a description of the last
 * error on the calling thread is available from sciv_last_error(). Objects
 * are opaque and owned by the caller once returned; release them with the
 * matching *_free function. Strings returned through char** parameters are
 * allocated by the library and released with sciv_string_free().
 */
#ifndef SCIV_H
#define SCIV_H

#include <stddef.h>

#if defined(_WIN32)
#define SCIV_API __declspec(dllexport)
#else
#define SCIV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sciv_status {
  SCIV_OK = 0,
  SCIV_ERROR_CONFIG = 1,           /* invalid configuration or preset */
  SCIV_ERROR_NUMERICAL = 2,        /* branch ambiguity, grid coverage, overflow */
  SCIV_ERROR_IO = 3,               /* unreadable input or unwritable output */
  SCIV_ERROR_INVALID_ARGUMENT = 4, /* NULL handle, index out of range */
  SCIV_ERROR_INTERNAL = 5
} sciv_status;

typedef struct sciv_config sciv_config;
typedef struct sciv_report sciv_report;

typedef struct sciv_run_options {
  unsigned threads;       /* 0 or 1: single-threaded */
  int gnuplot;            /* non-zero: also write gnuplot scripts */
  const char* output_dir; /* NULL: $SCIV_OUTPUT_DIR, then the config */
} sciv_run_options;

typedef struct sciv_report_row {
  const char* method; /* valid while the report lives */
  double rms_abs_deviation;
  double max_abs_deviation;
  double max_norm_deviation; /* NaN when the run had no norm */
  size_t n_trajectories;     /* 0 for the grid reference */
  double wall_seconds;       /* NaN when unknown */
} sciv_report_row;

SCIV_API const char* sciv_version(void);
SCIV_API const char* sciv_status_string(sciv_status status);
/* Message of the last failed call on this thread ("" if none). */
SCIV_API const char* sciv_last_error(void);
SCIV_API void sciv_string_free(char* text);

SCIV_API size_t sciv_preset_count(void);
SCIV_API const char* sciv_preset_name(size_t index);

SCIV_API sciv_status sciv_config_load(const char* path, sciv_config** out);
SCIV_API sciv_status sciv_config_parse(const char* text, sciv_config** out);
SCIV_API sciv_status sciv_config_preset(const char* name, sciv_config** out);
/* "section.key=value", validated like a config line. */
SCIV_API sciv_status sciv_config_set(sciv_config* config, const char* assignment);
SCIV_API sciv_status sciv_config_validate(const sciv_config* config);
SCIV_API sciv_status sciv_config_serialize(const sciv_config* config, char** text);
SCIV_API void sciv_config_free(sciv_config* config);

/* Runs all configured methods and writes CSVs, manifest and diagnostics.
 * The resolved output directory is returned through out_dir when non-NULL. */
SCIV_API sciv_status sciv_run(const sciv_config* config, const sciv_run_options* options, char** out_dir);

/* Compares a run directory against `baseline` (NULL: "Quantum"), writes
 * comparison.csv / comparison.txt there and returns the ranked report. */
SCIV_API sciv_status sciv_compare(const char* run_dir, const char* baseline, sciv_report** out);
SCIV_API size_t sciv_report_size(const sciv_report* report);
SCIV_API sciv_status sciv_report_row_at(const sciv_report* report, size_t index, sciv_report_row* row);
/* Human-readable table; valid while the report lives. */
SCIV_API const char* sciv_report_text(const sciv_report* report);
SCIV_API void sciv_report_free(sciv_report* report);

/* Trajectory-count study; writes convergence.csv and returns its path. */
SCIV_API sciv_status sciv_converge(const sciv_config* config, const size_t* n_list, size_t n_count,
                                   const sciv_run_options* options, char** csv_path);

/* Width diagnostic along one trajectory; writes width_diagnostic.csv. */
SCIV_API sciv_status sciv_diagnose_width(const sciv_config* config, double q_initial, double p_initial,
                                         const sciv_run_options* options, char** csv_path);

#ifdef __cplusplus
}
#endif

#endif /* SCIV_H */
