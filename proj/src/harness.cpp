#include "sciv/harness.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "sciv/errors.hpp"

namespace sciv {

namespace {

constexpr std::string_view kVersion = "1.0.0";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Shortest text that parses back to the same double.
std::string format_number(double x) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string format_csv_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

double parse_plain_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

// Accepts plain decimals and simple fractions such as "100/9".
double parse_number(std::string_view text) {
  const auto slash = text.find('/');
  double value;
  if (slash == std::string_view::npos) {
    value = parse_plain_number(text);
  } else {
    const double numerator = parse_plain_number(text.substr(0, slash));
    const double denominator = parse_plain_number(text.substr(slash + 1));
    if (denominator == 0.0) throw ConfigError("division by zero in '" + std::string(trim(text)) + "'");
    value = numerator / denominator;
  }
  if (!std::isfinite(value)) throw ConfigError("value must be finite, got '" + std::string(trim(text)) + "'");
  return value;
}

std::uint64_t parse_unsigned(std::string_view text) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text) {
  text = trim(text);
  if (text == "true" || text == "yes" || text == "on" || text == "1") return true;
  if (text == "false" || text == "no" || text == "off" || text == "0") return false;
  throw ConfigError("expected true or false, got '" + std::string(text) + "'");
}

std::string_view kind_name(PotentialKind kind) {
  switch (kind) {
    case PotentialKind::harmonic:
      return "harmonic";
    case PotentialKind::morse:
      return "morse";
    case PotentialKind::baranger:
      return "baranger";
  }
  return "?";
}

PotentialKind parse_kind(std::string_view text) {
  text = trim(text);
  if (text == "harmonic") return PotentialKind::harmonic;
  if (text == "morse") return PotentialKind::morse;
  if (text == "baranger") return PotentialKind::baranger;
  throw ConfigError("unknown potential kind '" + std::string(text) + "' (expected harmonic, morse or baranger)");
}

std::vector<std::string> parse_method_list(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string_view item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
    if (!item.empty()) {
      if (item != kQuantumLabel) MethodSpec::parse(item);
      if (!seen.insert(std::string(item)).second) throw ConfigError("method '" + std::string(item) + "' listed twice");
      out.emplace_back(item);
    } else if (comma != std::string_view::npos) {
      throw ConfigError("empty entry in method list");
    }
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Power of two >= max(n, 256).
std::size_t grid_size_for(double n) {
  std::size_t size = 256;
  while (static_cast<double>(size) < n) size *= 2;
  return size;
}

// Harmonic motion stays within the classical amplitude plus the packet's
// breathing width, and within the matching momentum range.
GridSpec harmonic_default_grid(const ExperimentConfig& c) {
  const double mass = c.potential.mass;
  const double omega = c.potential.omega;
  const double hbar = c.hbar;
  const double amplitude = std::hypot(c.q0, c.p0 / (mass * omega));
  const double position_width = std::max(1.0 / std::sqrt(c.gamma), hbar * std::sqrt(c.gamma) / (mass * omega));
  const double half = amplitude + 12.0 * position_width;
  const double momentum =
      std::hypot(c.p0, mass * omega * c.q0) + 12.0 * std::max(hbar * std::sqrt(c.gamma), mass * omega / std::sqrt(c.gamma));
  const double k_needed = 1.5 * momentum / hbar;
  GridSpec spec;
  spec.x_min = -half;
  spec.x_max = half;
  spec.n_points = grid_size_for(2.0 * half * k_needed / std::numbers::pi);
  spec.dt = 1e-3;
  while (!(spec.max_kinetic_phase(hbar, mass) < 0.125 * std::numbers::pi)) spec.dt *= 0.5;
  return spec;
}

GridSpec default_quantum_grid(const ExperimentConfig& c) {
  switch (c.potential.kind) {
    case PotentialKind::harmonic:
      return harmonic_default_grid(c);
    case PotentialKind::morse:
      // The dissociating tail of the paper's packet travels ~21 length units
      // per unit time at 1e-10 amplitude.
      return {-25.0, 2800.0, 32768, 5e-4, Precision::standard};
    case PotentialKind::baranger:
      return {-12.0, 12.0, 1024, 5e-4, Precision::extended};
  }
  return {};
}

UniformGrid default_norm_grid(const ExperimentConfig& c) {
  switch (c.potential.kind) {
    case PotentialKind::harmonic:
      return quantum_grid(c).grid();
    case PotentialKind::morse:
      return {-20.0, 150.0, 2048};
    case PotentialKind::baranger:
      return {-12.0, 12.0, 1024};
  }
  return {};
}

GridSpec& quantum_slot(ExperimentConfig& c) {
  if (!c.quantum) c.quantum = default_quantum_grid(c);
  return *c.quantum;
}

UniformGrid& norm_slot(ExperimentConfig& c) {
  if (!c.norm.grid) c.norm.grid = default_norm_grid(c);
  return *c.norm.grid;
}

// Sections and keys in canonical order.
const std::vector<std::pair<std::string_view, std::vector<std::string_view>>>& schema() {
  static const std::vector<std::pair<std::string_view, std::vector<std::string_view>>> s = {
      {"potential", {"kind", "mass", "omega", "depth", "range", "offset", "steepness"}},
      {"state", {"hbar", "q0", "p0", "gamma"}},
      {"methods", {"list"}},
      {"time", {"t_max", "n_output"}},
      {"monte_carlo", {"n_trajectories", "seed", "sampling"}},
      {"integrator", {"dt"}},
      {"quantum", {"x_min", "x_max", "n_points", "dt", "precision"}},
      {"norm", {"enabled", "x_min", "x_max", "n_points"}},
      {"output", {"dir"}},
  };
  return s;
}

bool known_key(std::string_view section, std::string_view key) {
  for (const auto& [name, keys] : schema()) {
    if (name == section) return std::find(keys.begin(), keys.end(), key) != keys.end();
  }
  return false;
}

void assign(ExperimentConfig& c, std::string_view section, std::string_view key, std::string_view value) {
  if (section == "potential") {
    if (key == "kind") {
      c.potential.kind = parse_kind(value);
    } else if (key == "mass") {
      c.potential.mass = parse_number(value);
    } else if (key == "omega") {
      c.potential.omega = parse_number(value);
    } else if (key == "depth") {
      c.potential.depth = parse_number(value);
    } else if (key == "range") {
      c.potential.range = parse_number(value);
    } else if (key == "offset") {
      c.potential.offset = parse_number(value);
    } else if (key == "steepness") {
      c.potential.steepness = parse_number(value);
    }
  } else if (section == "state") {
    if (key == "hbar") c.hbar = parse_number(value);
    if (key == "q0") c.q0 = parse_number(value);
    if (key == "p0") c.p0 = parse_number(value);
    if (key == "gamma") c.gamma = parse_number(value);
  } else if (section == "methods") {
    c.methods = parse_method_list(value);
  } else if (section == "time") {
    if (key == "t_max") c.t_max = parse_number(value);
    if (key == "n_output") c.n_output = parse_unsigned(value);
  } else if (section == "monte_carlo") {
    if (key == "n_trajectories") c.n_trajectories = parse_unsigned(value);
    if (key == "seed") c.seed = parse_unsigned(value);
    if (key == "sampling") {
      const std::string_view v = trim(value);
      if (v == "magnitude") {
        c.sampling = SamplingDensity::overlap_magnitude;
      } else if (v == "squared") {
        c.sampling = SamplingDensity::overlap_squared;
      } else {
        throw ConfigError("expected magnitude or squared, got '" + std::string(v) + "'");
      }
    }
  } else if (section == "integrator") {
    c.dt = parse_number(value);
  } else if (section == "quantum") {
    GridSpec& q = quantum_slot(c);
    if (key == "x_min") q.x_min = parse_number(value);
    if (key == "x_max") q.x_max = parse_number(value);
    if (key == "n_points") q.n_points = parse_unsigned(value);
    if (key == "dt") q.dt = parse_number(value);
    if (key == "precision") {
      const std::string_view v = trim(value);
      if (v == "standard") {
        q.precision = Precision::standard;
      } else if (v == "extended") {
        q.precision = Precision::extended;
      } else {
        throw ConfigError("expected standard or extended, got '" + std::string(v) + "'");
      }
    }
  } else if (section == "norm") {
    if (key == "enabled") {
      c.norm.enabled = parse_bool(value);
    } else {
      UniformGrid& g = norm_slot(c);
      if (key == "x_min") g.x_min = parse_number(value);
      if (key == "x_max") g.x_max = parse_number(value);
      if (key == "n_points") g.n_points = parse_unsigned(value);
    }
  } else if (section == "output") {
    c.output_dir = std::string(trim(value));
  }
}

const std::vector<std::string_view>& potential_keys(PotentialKind kind) {
  static const std::vector<std::string_view> harmonic = {"kind", "mass", "omega"};
  static const std::vector<std::string_view> morse = {"kind", "mass", "depth", "range"};
  static const std::vector<std::string_view> baranger = {"kind", "mass", "depth", "offset", "steepness"};
  switch (kind) {
    case PotentialKind::harmonic:
      return harmonic;
    case PotentialKind::morse:
      return morse;
    case PotentialKind::baranger:
      return baranger;
  }
  return harmonic;
}

struct Entry {
  std::string value;
  int line;
};

[[noreturn]] void fail_at(std::string_view source, int line, std::string_view section, std::string_view key,
                          const std::string& problem) {
  std::string message(source);
  if (line > 0) message += ":" + std::to_string(line);
  message += ": [" + std::string(section) + "]";
  if (!key.empty()) message += " " + std::string(key);
  message += ": " + problem;
  throw ConfigError(message);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string method_file_stem(std::string_view label) {
  if (label == kQuantumLabel) return "quantum";
  return MethodSpec::parse(label).file_stem();
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed while writing '" + path.string() + "'");
}

void prepare_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
  }
}

void write_series(const std::filesystem::path& path, std::span<const double> t, std::span<const complex> c,
                  std::span<const double> norm, std::span<const double> mc_error) {
  std::ofstream out = open_output(path);
  out << "t,re_c,im_c,abs_c,norm,mc_error\n";
  const double nan = std::nan("");
  for (std::size_t j = 0; j < t.size(); ++j) {
    out << format_csv_number(t[j]) << ',' << format_csv_number(c[j].real()) << ','
        << format_csv_number(c[j].imag()) << ',' << format_csv_number(std::abs(c[j])) << ','
        << format_csv_number(norm.empty() ? nan : norm[j]) << ','
        << format_csv_number(mc_error.empty() ? nan : mc_error[j]) << '\n';
  }
  finish_output(out, path);
}

std::string gnuplot_quote(std::string_view s) {
  std::string out = "'";
  for (char ch : s) {
    if (ch == '\'') out += "''";
    else out += ch;
  }
  return out + "'";
}

void write_gnuplot(const std::filesystem::path& path, std::string_view png, std::string_view ylabel, int column,
                   const std::vector<std::pair<std::string, std::string>>& series) {
  std::ofstream out = open_output(path);
  out << "# gnuplot " << path.filename().string() << " (run from this directory)\n"
      << "set datafile separator ','\n"
      << "set terminal png size 1000,600\n"
      << "set output " << gnuplot_quote(png) << "\n"
      << "set xlabel 't'\n"
      << "set ylabel " << gnuplot_quote(ylabel) << "\n"
      << "set key outside right\n"
      << "plot ";
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i) out << ", \\\n     ";
    out << gnuplot_quote(series[i].second) << " using 1:" << column << " with lines title "
        << gnuplot_quote(series[i].first);
  }
  out << "\n";
  finish_output(out, path);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double parse_csv_number(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  const std::string_view v = trim(text);
  if (v == "nan" || v == "-nan") return std::nan("");
  try {
    return parse_plain_number(v);
  } catch (const ConfigError&) {
    throw ConfigError(path.string() + ":" + std::to_string(line) + ": malformed number '" + std::string(v) + "'");
  }
}

std::map<std::string, double> read_timing(const std::filesystem::path& dir) {
  std::map<std::string, double> out;
  std::ifstream in(dir / "timing.csv");
  if (!in) return out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) continue;
    try {
      out[fields[0]] = parse_plain_number(fields[1]);
    } catch (const ConfigError&) {
    }
  }
  return out;
}

double rms(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum / static_cast<double>(v.size()));
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::string current;
  bool in_manifest = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto newline = text.find('\n', pos);
    std::string_view line = text.substr(pos, newline == std::string_view::npos ? text.npos : newline - pos);
    pos = newline == std::string_view::npos ? text.size() + 1 : newline + 1;
    ++line_no;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(source, line_no, line, "", "malformed section header");
      const std::string name(trim(line.substr(1, line.size() - 2)));
      in_manifest = name == "manifest";
      const bool known = std::any_of(schema().begin(), schema().end(), [&](const auto& s) { return s.first == name; });
      if (!known && !in_manifest) fail_at(source, line_no, name, "", "unknown section");
      current = name;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail_at(source, line_no, current, "", "expected 'key = value', got '" + std::string(line) + "'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (current.empty()) fail_at(source, line_no, "", key, "key outside of any section");
    if (in_manifest) continue;  // informational, written by run
    if (!known_key(current, key)) fail_at(source, line_no, current, key, "unknown key");
    auto& section = sections[current];
    if (section.contains(key)) {
      fail_at(source, line_no, current, key, "duplicate key (first set on line " + std::to_string(section[key].line) + ")");
    }
    section[key] = Entry{value, line_no};
  }

  auto require = [&](std::string_view section, std::string_view key) {
    const auto s = sections.find(std::string(section));
    if (s == sections.end() || !s->second.contains(std::string(key))) {
      fail_at(source, 0, section, key, "missing required field");
    }
  };
  require("potential", "kind");
  require("state", "hbar");
  require("state", "q0");
  require("state", "p0");
  require("state", "gamma");
  require("methods", "list");
  require("time", "t_max");
  require("time", "n_output");

  ExperimentConfig config;
  // Grid sections come last: their defaults depend on everything else.
  for (const auto& [name, keys] : schema()) {
    const auto s = sections.find(std::string(name));
    if (s == sections.end()) continue;
    for (const std::string_view key : keys) {
      const auto e = s->second.find(std::string(key));
      if (e == s->second.end()) continue;
      try {
        assign(config, name, key, e->second.value);
      } catch (const ConfigError& err) {
        fail_at(source, e->second.line, name, key, err.what());
      }
    }
    if (name == "potential") {
      const auto& allowed = potential_keys(config.potential.kind);
      for (const auto& [key, entry] : s->second) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
          fail_at(source, entry.line, name, key,
                  "not a parameter of the " + std::string(kind_name(config.potential.kind)) + " potential");
        }
      }
      for (const std::string_view key : allowed) {
        if (key != "mass") require(name, key);
      }
    }
  }
  if (config.methods.empty()) fail_at(source, sections["methods"]["list"].line, "methods", "list", "method list is empty");
  quantum_slot(config);
  norm_slot(config);
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

namespace {

std::string serialize_body(const ExperimentConfig& in, bool with_output) {
  ExperimentConfig c = in;
  quantum_slot(c);
  norm_slot(c);
  std::ostringstream out;
  out << "[potential]\n"
      << "kind = " << kind_name(c.potential.kind) << "\n"
      << "mass = " << format_number(c.potential.mass) << "\n";
  switch (c.potential.kind) {
    case PotentialKind::harmonic:
      out << "omega = " << format_number(c.potential.omega) << "\n";
      break;
    case PotentialKind::morse:
      out << "depth = " << format_number(c.potential.depth) << "\n"
          << "range = " << format_number(c.potential.range) << "\n";
      break;
    case PotentialKind::baranger:
      out << "depth = " << format_number(c.potential.depth) << "\n"
          << "offset = " << format_number(c.potential.offset) << "\n"
          << "steepness = " << format_number(c.potential.steepness) << "\n";
      break;
  }
  out << "\n[state]\n"
      << "hbar = " << format_number(c.hbar) << "\n"
      << "q0 = " << format_number(c.q0) << "\n"
      << "p0 = " << format_number(c.p0) << "\n"
      << "gamma = " << format_number(c.gamma) << "\n";
  out << "\n[methods]\nlist = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) out << (i ? ", " : "") << c.methods[i];
  out << "\n\n[time]\n"
      << "t_max = " << format_number(c.t_max) << "\n"
      << "n_output = " << c.n_output << "\n";
  out << "\n[monte_carlo]\n"
      << "n_trajectories = " << c.n_trajectories << "\n"
      << "seed = " << c.seed << "\n"
      << "sampling = " << (c.sampling == SamplingDensity::overlap_magnitude ? "magnitude" : "squared") << "\n";
  out << "\n[integrator]\n"
      << "dt = " << format_number(c.dt) << "\n";
  const GridSpec& q = *c.quantum;
  out << "\n[quantum]\n"
      << "x_min = " << format_number(q.x_min) << "\n"
      << "x_max = " << format_number(q.x_max) << "\n"
      << "n_points = " << q.n_points << "\n"
      << "dt = " << format_number(q.dt) << "\n"
      << "precision = " << (q.precision == Precision::extended ? "extended" : "standard") << "\n";
  const UniformGrid& g = *c.norm.grid;
  out << "\n[norm]\n"
      << "enabled = " << (c.norm.enabled ? "true" : "false") << "\n"
      << "x_min = " << format_number(g.x_min) << "\n"
      << "x_max = " << format_number(g.x_max) << "\n"
      << "n_points = " << g.n_points << "\n";
  if (with_output && !c.output_dir.empty()) out << "\n[output]\ndir = " << c.output_dir << "\n";
  return out.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& config) { return serialize_body(config, true); }

std::uint64_t config_hash(const ExperimentConfig& config) { return fnv1a(serialize_body(config, false)); }

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like section.key=value");
  }
  const std::string section(trim(assignment.substr(0, dot)));
  const std::string key(trim(assignment.substr(dot + 1, eq - dot - 1)));
  const std::string_view value = trim(assignment.substr(eq + 1));
  const bool known_section =
      std::any_of(schema().begin(), schema().end(), [&](const auto& s) { return s.first == section; });
  if (!known_section) fail_at("--set", 0, section, "", "unknown section");
  if (!known_key(section, key)) fail_at("--set", 0, section, key, "unknown key");
  try {
    assign(config, section, key, value);
  } catch (const ConfigError& err) {
    fail_at("--set", 0, section, key, err.what());
  }
}

Potential make_potential(const ExperimentConfig& c) {
  const PotentialConfig& p = c.potential;
  switch (p.kind) {
    case PotentialKind::harmonic:
      return Potential::harmonic(p.mass, p.omega);
    case PotentialKind::morse:
      return Potential::morse(p.mass, p.depth, p.range);
    case PotentialKind::baranger:
      return Potential::baranger(p.mass, p.depth, p.offset, p.steepness);
  }
  throw ConfigError("unknown potential kind");
}

GaussianState initial_state(const ExperimentConfig& c) { return {c.q0, c.p0, complex(c.gamma, 0.0), c.hbar}; }

std::vector<double> output_times(const ExperimentConfig& c) {
  std::vector<double> times(c.n_output + 1);
  for (std::size_t j = 0; j <= c.n_output; ++j) {
    times[j] = c.t_max * static_cast<double>(j) / static_cast<double>(c.n_output);
  }
  return times;
}

GridSpec quantum_grid(const ExperimentConfig& c) { return c.quantum ? *c.quantum : default_quantum_grid(c); }

UniformGrid norm_grid(const ExperimentConfig& c) { return c.norm.grid ? *c.norm.grid : default_norm_grid(c); }

std::vector<MethodSpec> semiclassical_methods(const ExperimentConfig& c) {
  std::vector<MethodSpec> out;
  for (const std::string& label : c.methods) {
    if (label != kQuantumLabel) out.push_back(MethodSpec::parse(label));
  }
  return out;
}

bool wants_quantum(const ExperimentConfig& c) {
  return std::find(c.methods.begin(), c.methods.end(), kQuantumLabel) != c.methods.end();
}

void validate(const ExperimentConfig& c) {
  if (c.methods.empty()) throw ConfigError("[methods] list: method list is empty");
  parse_method_list([&] {
    std::string joined;
    for (const auto& m : c.methods) joined += m + ",";
    return joined;
  }());
  make_potential(c);
  if (!(c.hbar > 0.0)) throw ConfigError("[state] hbar: must be positive");
  if (!(c.gamma > 0.0)) throw ConfigError("[state] gamma: must be positive");
  if (!(c.t_max > 0.0)) throw ConfigError("[time] t_max: must be positive");
  if (c.n_output < 1) throw ConfigError("[time] n_output: must be at least 1");
  const Potential model = make_potential(c);
  if (model.kind() == PotentialKind::morse && model.energy(c.q0, c.p0) >= model.escape_energy()) {
    throw ConfigError("[state]: the packet centre is above the dissociation threshold");
  }
  if (!semiclassical_methods(c).empty()) {
    if (c.n_trajectories < 1) throw ConfigError("[monte_carlo] n_trajectories: must be at least 1");
    IntegratorConfig cfg;
    cfg.dt = c.dt;
    const std::vector<double> times = output_times(c);
    try {
      validate_time_grid(times, cfg);
    } catch (const Error& e) {
      throw ConfigError(std::string("[integrator] dt: ") + e.what());
    }
  }
  if (wants_quantum(c)) {
    try {
      validate_grid(quantum_grid(c), c.hbar, c.potential.mass);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("[quantum]: ") + e.what());
    }
    const GridSpec q = quantum_grid(c);
    if (!(c.q0 > q.x_min && c.q0 < q.x_max)) throw ConfigError("[quantum]: grid does not contain q0");
  }
  if (c.norm.enabled) {
    const UniformGrid g = norm_grid(c);
    if (g.n_points < 2 || !(g.x_max > g.x_min)) throw ConfigError("[norm]: degenerate grid");
  }
}

std::vector<std::string> preset_names() { return {"baranger-paper", "morse-paper", "harmonic-coherent"}; }

ExperimentConfig preset(std::string_view name) {
  ExperimentConfig c;
  if (name == "baranger-paper") {
    c.potential = {PotentialKind::baranger, 1.0, 1.0, 1.0, 1.0, 5.0, 1.0};
    c.hbar = 0.05;
    c.q0 = 0.0;
    c.p0 = 1.0;
    c.gamma = 100.0 / 9.0;
    c.methods = {"HK", "TGA", "RootTGA(2)", "RootTGA(4)", "Quantum"};
    c.t_max = 110.0;
    c.n_output = 1100;
    c.norm.enabled = true;
  } else if (name == "morse-paper") {
    // hbar is not given for this setup; 1 is the scaled-unit choice.
    c.potential = {PotentialKind::morse, 1.0, 1.0, 30.0, 0.08, 1.0, 1.0};
    c.hbar = 1.0;
    c.q0 = 0.0;
    c.p0 = 0.0;
    c.gamma = 12.0;
    c.methods = {"HK", "TGA", "GlobalHarmonicTGA", "Quantum"};
    c.t_max = 100.0;
    c.n_output = 1000;
  } else if (name == "harmonic-coherent") {
    c.potential = {PotentialKind::harmonic, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    c.hbar = 1.0;
    c.q0 = 1.0;
    c.p0 = 0.0;
    c.gamma = 1.0;
    c.methods = {"HK", "TGA", "Quantum"};
    c.t_max = 8.0 * std::numbers::pi;
    c.n_output = 400;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + std::string(name) + "' (available: " + known + ")");
  }
  c.n_trajectories = name == "harmonic-coherent" ? 10000 : 5000;
  c.seed = 1;
  c.dt = 1e-2;
  c.output_dir = "sciv-output/" + std::string(name);
  quantum_slot(c);
  norm_slot(c);
  return c;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config, const RunOptions& options) {
  if (options.output_dir) return *options.output_dir;
  if (const char* env = std::getenv("SCIV_OUTPUT_DIR"); env && *env) return env;
  if (!config.output_dir.empty()) return config.output_dir;
  return "sciv-output";
}

std::string version_string() { return std::string(kVersion); }

RunSummary run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  validate(config);
  const std::filesystem::path dir = resolve_output_dir(config, options);
  prepare_directory(dir);

  const Potential model = make_potential(config);
  const GaussianState initial = initial_state(config);
  const std::vector<double> times = output_times(config);
  const std::vector<MethodSpec> methods = semiclassical_methods(config);
  const unsigned threads = std::max(1u, options.threads);

  std::optional<EnsembleResult> ensemble;
  std::optional<QuantumSeries> quantum;
  double ensemble_seconds = 0.0;
  double quantum_seconds = 0.0;

  auto run_quantum = [&] {
    const auto start = std::chrono::steady_clock::now();
    quantum = quantum_reference(model, initial, quantum_grid(config), times);
    quantum_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  auto run_semiclassical = [&] {
    EnsembleOptions eo;
    eo.n_trajectories = config.n_trajectories;
    eo.seed = config.seed;
    eo.integrator.dt = config.dt;
    eo.sampling = config.sampling;
    eo.threads = threads;
    if (config.norm.enabled) eo.norm_grid = norm_grid(config);
    const auto start = std::chrono::steady_clock::now();
    ensemble = run_ensemble(model, initial, methods, times, eo);
    ensemble_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  const bool both = wants_quantum(config) && !methods.empty();
  if (both && threads > 1) {
    std::exception_ptr quantum_error;
    std::jthread worker([&] {
      try {
        run_quantum();
      } catch (...) {
        quantum_error = std::current_exception();
      }
    });
    std::exception_ptr ensemble_error;
    try {
      run_semiclassical();
    } catch (...) {
      ensemble_error = std::current_exception();
    }
    worker.join();
    if (ensemble_error) std::rethrow_exception(ensemble_error);
    if (quantum_error) std::rethrow_exception(quantum_error);
  } else {
    if (!methods.empty()) run_semiclassical();
    if (wants_quantum(config)) run_quantum();
  }

  RunSummary summary;
  summary.directory = dir;
  std::vector<std::pair<std::string, std::string>> plotted;
  for (const std::string& label : config.methods) {
    const std::string file = method_file_stem(label) + ".csv";
    const std::filesystem::path path = dir / file;
    double seconds;
    if (label == kQuantumLabel) {
      const std::vector<double> zero_error(times.size(), 0.0);
      write_series(path, times, quantum->values, quantum->norm, zero_error);
      seconds = quantum_seconds;
    } else {
      const auto it = std::find(methods.begin(), methods.end(), MethodSpec::parse(label));
      const CorrelationSeries& s = ensemble->series[static_cast<std::size_t>(it - methods.begin())];
      write_series(path, times, s.values, s.norm, s.mc_error);
      seconds = ensemble_seconds;
    }
    summary.outputs.push_back({label, path, seconds});
    plotted.emplace_back(label, file);
  }
  if (ensemble) summary.diagnostics = ensemble->diagnostics;

  {
    const std::filesystem::path path = dir / "diagnostics.csv";
    std::ofstream out = open_output(path);
    out << "quantity,value\n";
    if (ensemble) out << "harmonic_fallbacks," << ensemble->diagnostics.harmonic_fallbacks << "\n";
    if (quantum) {
      double norm_dev = 0.0;
      double energy_drift = 0.0;
      for (std::size_t j = 0; j < times.size(); ++j) {
        norm_dev = std::max(norm_dev, std::abs(quantum->norm[j] - 1.0));
        energy_drift = std::max(energy_drift, std::abs(quantum->energy[j] - quantum->energy[0]));
      }
      out << "quantum_initial_energy," << format_csv_number(quantum->energy[0]) << "\n"
          << "quantum_max_norm_deviation," << format_csv_number(norm_dev) << "\n"
          << "quantum_relative_energy_drift," << format_csv_number(energy_drift / std::abs(quantum->energy[0]))
          << "\n";
    }
    finish_output(out, path);
  }
  {
    // Times are shared: every semiclassical method comes out of one ensemble.
    const std::filesystem::path path = dir / "timing.csv";
    std::ofstream out = open_output(path);
    out << "method,wall_seconds\n";
    for (const MethodOutput& o : summary.outputs) out << o.label << ',' << format_number(o.wall_seconds) << "\n";
    finish_output(out, path);
  }
  {
    const std::filesystem::path path = dir / "manifest.ini";
    ExperimentConfig recorded = config;
    recorded.output_dir = dir.string();
    std::ofstream out = open_output(path);
    out << "# Run manifest: load with `sciv run manifest.ini` to reproduce this run.\n"
        << serialize_config(recorded) << "\n[manifest]\n"
        << "config_hash = " << hex64(config_hash(config)) << "\n"
        << "seed = " << config.seed << "\n"
        << "sciv_version = " << kVersion << "\n"
        << "fftw_version = " << fftw_version << "\n"
        << "compiler = " << __VERSION__ << "\n";
    finish_output(out, path);
  }
  if (options.gnuplot) {
    write_gnuplot(dir / "autocorrelation.gp", "autocorrelation.png", "|c(t)|", 4, plotted);
    std::vector<std::pair<std::string, std::string>> with_norm;
    for (const auto& p : plotted) {
      if (p.first == kQuantumLabel || config.norm.enabled) with_norm.push_back(p);
    }
    if (!with_norm.empty()) write_gnuplot(dir / "norm.gp", "norm.png", "norm", 5, with_norm);
  }
  return summary;
}

SeriesTable read_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,re_c,im_c,abs_c,norm,mc_error") {
    throw ConfigError(path.string() + ":1: unexpected header");
  }
  SeriesTable t;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 6 columns");
    t.t.push_back(parse_csv_number(f[0], path, line_no));
    t.re.push_back(parse_csv_number(f[1], path, line_no));
    t.im.push_back(parse_csv_number(f[2], path, line_no));
    t.abs.push_back(parse_csv_number(f[3], path, line_no));
    t.norm.push_back(parse_csv_number(f[4], path, line_no));
    t.mc_error.push_back(parse_csv_number(f[5], path, line_no));
  }
  return t;
}

ComparisonReport compare_run(const std::filesystem::path& directory, std::string_view baseline) {
  const std::filesystem::path manifest = directory / "manifest.ini";
  if (!std::filesystem::exists(manifest)) {
    throw ConfigError("'" + directory.string() + "' is not a run directory (no manifest.ini)");
  }
  const ExperimentConfig config = load_config(manifest);
  if (std::find(config.methods.begin(), config.methods.end(), baseline) == config.methods.end() ||
      !std::filesystem::exists(directory / (method_file_stem(baseline) + ".csv"))) {
    throw ConfigError("run in '" + directory.string() + "' has no " + std::string(baseline) +
                      " series to compare against");
  }
  const SeriesTable reference = read_series_csv(directory / (method_file_stem(baseline) + ".csv"));
  const std::map<std::string, double> timing = read_timing(directory);

  ComparisonReport report;
  report.baseline = baseline;
  for (const std::string& label : config.methods) {
    const SeriesTable s = read_series_csv(directory / (method_file_stem(label) + ".csv"));
    if (s.t != reference.t) {
      throw ConfigError("series " + label + " and " + std::string(baseline) + " use different time grids");
    }
    ComparisonRow row;
    row.label = label;
    std::vector<double> deviation(s.t.size());
    bool has_norm = false;
    for (std::size_t j = 0; j < s.t.size(); ++j) {
      deviation[j] = std::abs(s.abs[j] - reference.abs[j]);
      row.max_abs_deviation = std::max(row.max_abs_deviation, deviation[j]);
      if (!std::isnan(s.norm[j])) {
        has_norm = true;
        row.max_norm_deviation = std::max(row.max_norm_deviation, std::abs(s.norm[j] - 1.0));
      }
    }
    row.rms_abs_deviation = rms(deviation);
    if (!has_norm) row.max_norm_deviation = std::nan("");
    row.n_trajectories = label == kQuantumLabel ? 0 : config.n_trajectories;
    const auto t = timing.find(label);
    row.wall_seconds = t == timing.end() ? std::nan("") : t->second;
    report.rows.push_back(row);
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return a.rms_abs_deviation < b.rms_abs_deviation;
  });
  return report;
}

std::string format_report(const ComparisonReport& report) {
  std::ostringstream out;
  out << "Deviation of |c(t)| from " << report.baseline << ", ranked by RMS over the output times\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %-20s %12s %12s %12s %8s %10s\n", "rank", "method", "rms_dev", "max_dev",
                "max|norm-1|", "n_traj", "wall_s");
  out << buf;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const ComparisonRow& r = report.rows[i];
    std::snprintf(buf, sizeof buf, "%-4zu %-20s %12.4e %12.4e %12.4e %8zu %10.2f\n", i + 1, r.label.c_str(),
                  r.rms_abs_deviation, r.max_abs_deviation, r.max_norm_deviation, r.n_trajectories, r.wall_seconds);
    out << buf;
  }
  return out.str();
}

void write_report(const ComparisonReport& report, const std::filesystem::path& directory) {
  {
    const std::filesystem::path path = directory / "comparison.csv";
    std::ofstream out = open_output(path);
    out << "rank,method,rms_abs_deviation,max_abs_deviation,max_norm_deviation,n_trajectories,wall_seconds\n";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const ComparisonRow& r = report.rows[i];
      out << i + 1 << ',' << r.label << ',' << format_csv_number(r.rms_abs_deviation) << ','
          << format_csv_number(r.max_abs_deviation) << ',' << format_csv_number(r.max_norm_deviation) << ','
          << r.n_trajectories << ',' << format_csv_number(r.wall_seconds) << '\n';
    }
    finish_output(out, path);
  }
  const std::filesystem::path path = directory / "comparison.txt";
  std::ofstream out = open_output(path);
  out << format_report(report);
  finish_output(out, path);
}

std::vector<ConvergenceRow> converge(const ExperimentConfig& config, std::vector<std::size_t> n_list,
                                     const RunOptions& options) {
  validate(config);
  std::sort(n_list.begin(), n_list.end());
  n_list.erase(std::unique(n_list.begin(), n_list.end()), n_list.end());
  if (n_list.size() < 2) throw ConfigError("convergence study needs at least two distinct trajectory counts");
  if (n_list.front() < 2) throw ConfigError("trajectory counts must be at least 2");
  const std::vector<MethodSpec> methods = semiclassical_methods(config);
  if (methods.empty()) throw ConfigError("convergence study needs at least one semiclassical method");
  const std::filesystem::path dir = resolve_output_dir(config, options);
  prepare_directory(dir);

  EnsembleOptions eo;
  eo.n_trajectories = n_list.back();
  eo.seed = config.seed;
  eo.integrator.dt = config.dt;
  eo.sampling = config.sampling;
  eo.threads = std::max(1u, options.threads);
  eo.checkpoints.assign(n_list.begin(), n_list.end() - 1);
  const std::vector<double> times = output_times(config);
  const EnsembleResult result = run_ensemble(make_potential(config), initial_state(config), methods, times, eo);

  std::vector<ConvergenceRow> rows;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const CorrelationSeries& largest = result.series[k];
    for (std::size_t c = 0; c < n_list.size(); ++c) {
      const CorrelationSeries& s = c + 1 < n_list.size() ? result.checkpoint_series[c][k] : largest;
      ConvergenceRow row;
      row.label = methods[k].label();
      row.n_trajectories = n_list[c];
      std::vector<double> deviation(times.size());
      double mc = 0.0;
      for (std::size_t j = 0; j < times.size(); ++j) {
        deviation[j] = std::abs(std::abs(s.values[j]) - std::abs(largest.values[j]));
        row.max_vs_largest = std::max(row.max_vs_largest, deviation[j]);
        mc += s.mc_error[j];
      }
      row.rms_vs_largest = rms(deviation);
      row.mean_mc_error = mc / static_cast<double>(times.size());
      rows.push_back(row);
    }
  }

  const std::filesystem::path path = dir / "convergence.csv";
  std::ofstream out = open_output(path);
  out << "method,n_trajectories,rms_vs_largest,max_vs_largest,mean_mc_error\n";
  for (const ConvergenceRow& r : rows) {
    out << r.label << ',' << r.n_trajectories << ',' << format_csv_number(r.rms_vs_largest) << ','
        << format_csv_number(r.max_vs_largest) << ',' << format_csv_number(r.mean_mc_error) << '\n';
  }
  finish_output(out, path);
  return rows;
}

WidthSeries diagnose_width(const ExperimentConfig& config, double q_initial, double p_initial,
                           const RunOptions& options) {
  make_potential(config);
  if (!(config.gamma > 0.0) || !(config.hbar > 0.0)) throw ConfigError("[state]: gamma and hbar must be positive");
  if (!std::isfinite(q_initial) || !std::isfinite(p_initial)) throw ConfigError("initial point must be finite");
  const std::filesystem::path dir = resolve_output_dir(config, options);
  prepare_directory(dir);
  IntegratorConfig cfg;
  cfg.dt = config.dt;
  const std::vector<double> times = output_times(config);
  const WidthSeries w =
      width_diagnostic(make_potential(config), q_initial, p_initial, config.gamma, config.hbar, times, cfg);

  const std::filesystem::path path = dir / "width_diagnostic.csv";
  std::ofstream out = open_output(path);
  out << "t,re_gamma1,re_sqrt_gamma1,re_fourth_root_gamma1\n";
  for (std::size_t j = 0; j < times.size(); ++j) {
    out << format_csv_number(w.times[j]) << ',' << format_csv_number(w.re_width[j]) << ','
        << format_csv_number(w.re_square_root[j]) << ',' << format_csv_number(w.re_fourth_root[j]) << '\n';
  }
  finish_output(out, path);
  if (options.gnuplot) {
    const std::filesystem::path gp = dir / "width.gp";
    std::ofstream g = open_output(gp);
    g << "# gnuplot width.gp (run from this directory)\n"
      << "set datafile separator ','\n"
      << "set terminal png size 1000,900\n"
      << "set output 'width.png'\n"
      << "set multiplot layout 3,1\n"
      << "set xlabel 't'\n"
      << "plot 'width_diagnostic.csv' using 1:4 with lines title 'Re gamma_1^(1/4)'\n"
      << "plot 'width_diagnostic.csv' using 1:3 with lines title 'Re gamma_1^(1/2)'\n"
      << "plot 'width_diagnostic.csv' using 1:2 with lines title 'Re gamma_1'\n"
      << "unset multiplot\n";
    finish_output(g, gp);
  }
  return w;
}

}  // namespace sciv
