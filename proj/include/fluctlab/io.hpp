#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/field.hpp"
#include "fluctlab/grid.hpp"
#include "fluctlab/lattice.hpp"
#include "fluctlab/pde.hpp"

namespace fluctlab {

inline constexpr const char* kCsvSchema = "# fluctlab-csv v1";

/// Thrown for malformed config text; line() is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string source, unsigned long line)
      : std::runtime_error(what), source_(std::move(source)), line_(line) {}
  const std::string& source() const { return source_; }
  unsigned long line() const { return line_; }

 private:
  std::string source_;
  unsigned long line_;
};

/// Flat INI config: [section] headers and key = value lines. Keys are
/// addressed as "section.key". Every lookup records the resolved value
/// (default or given), which is what the manifest echoes.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& source = "<string>");
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return given_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { given_[key] = value; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key, int fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);

  const std::map<std::string, std::string>& resolved() const { return resolved_; }
  /// Given keys that were never looked up.
  std::vector<std::string> unused() const;

 private:
  std::string source_ = "<string>";
  std::map<std::string, std::string> given_;
  std::map<std::string, unsigned long> lines_;
  std::map<std::string, std::string> resolved_;
  template <class T>
  T typed(const std::string& key, T fallback, const char* kind);
};

/// Initial-profile description: constant m, m + a cos(2 pi k u_0), or a step
/// (value `high` on [0, width) along axis 0, `low` elsewhere).
struct ProfileSpec {
  std::string kind = "constant";
  double m = 0.5;
  double amplitude = 0.0;
  int frequency = 1;
  double low = 0.0;
  double high = 1.0;
  double width = 0.5;

  ScalarFunction function() const;
};

/// Drift description: none, constant E, or F_0 = amplitude sin(2 pi k u_0).
struct FieldSpec {
  std::string kind = "none";
  Point E{0.0, 0.0, 0.0};
  double amplitude = 0.0;
  int frequency = 1;

  DriftField build(int dim) const;
};

struct ExperimentConfig {
  Model model = Model::ssep;
  std::string model_label = "ssep";
  int d = 1;
  int N = 100;
  int M = 64;
  double T = 0.05;
  double dt = 0.0;  // 0: half the explicit stability limit
  std::uint64_t seed = 1;
  ProfileSpec profile;
  FieldSpec field;
  std::filesystem::path out = "out";

  /// Reads the [run], [profile] and [field] sections.
  static ExperimentConfig from(Config& cfg);
  TransportCoefficients coefficients() const { return coefficients_for(model); }
};

/// CSV writer: schema line, optional comment lines, header, rows. Doubles
/// are written with 17 significant digits so files round-trip exactly.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
            const std::vector<std::string>& comments = {});

  template <class... Args>
  void row(const Args&... args) {
    std::string line;
    bool first = true;
    ((line += (first ? "" : ","), line += cell(args), first = false), ...);
    out_ << line << '\n';
  }
  void row_values(const std::vector<double>& values);
  void flush() { out_.flush(); }

  static std::string cell(double v) { return fmt::format("{:.17g}", v); }
  static std::string cell(float v) { return cell(static_cast<double>(v)); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class I>
  static std::string cell(I v)
    requires std::is_integral_v<I>
  {
    return fmt::format("{}", v);
  }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Reads a CSV written by CsvWriter; rejects a missing or different schema line.
CsvTable read_csv(const std::filesystem::path& path);

/// manifest.ini: the resolved config plus [manifest] version and subcommand.
void write_manifest(const std::filesystem::path& dir, const std::string& subcommand, const Config& cfg);
std::string code_version();

/// Event log columns: time, x (row-major site index), j (0-based axis),
/// sign_or_amount (+-1 for exclusion, signed energy for KMP).
void write_event_log(const std::filesystem::path& path, const CurrentLedger& ledger);

/// One row per grid point: cell-centre coordinates u0[,u1,u2], then value(s).
void write_scalar_field(const std::filesystem::path& path, const ScalarField& f);
/// Face-centre coordinates of axis-0 faces are not shared across axes, so the
/// vector layout is one row per (cell, axis): cell coordinates, j, value.
void write_vector_field(const std::filesystem::path& path, const VectorField& w);

/// Densities: k, t, dt, cell index, value (dt of the last row block is 0).
/// Currents: k, t, dt, cell index, j, value. Both carry "# grid d=.. M=.." and
/// "# time_grid steps=.. horizon=.." comments.
void write_path(const std::filesystem::path& densities, const std::filesystem::path& currents,
                const PathDiscretization& path);
PathDiscretization read_path(const std::filesystem::path& densities, const std::filesystem::path& currents);

}  // namespace fluctlab
