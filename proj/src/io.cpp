#include "fluctlab/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fluctlab/error.hpp"

#ifndef FLUCTLAB_VERSION
#define FLUCTLAB_VERSION "unknown"
#endif

namespace fluctlab {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, bool& ok) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  ok = r.ec == std::errc() && r.ptr == t.data() + t.size() && !t.empty();
  return v;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& source) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}:{}: {}", source, e.line(), e.message()), source, e.line());
  }
  Config cfg;
  cfg.source_ = source;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      cfg.given_[name] = node.data();
    } else {
      for (const auto& [key, leaf] : node) cfg.given_[name + "." + key] = leaf.data();
    }
  }
  // Line numbers for value diagnostics.
  std::string section;
  unsigned long lineno = 0;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = trim(t.substr(0, eq));
    cfg.lines_[section.empty() ? key : section + "." + key] = lineno;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path.string()), path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

template <class T>
T Config::typed(const std::string& key, T fallback, const char* kind) {
  const auto it = given_.find(key);
  if (it == given_.end()) {
    if constexpr (std::is_same_v<T, double>)
      resolved_[key] = fmt::format("{:.17g}", fallback);
    else
      resolved_[key] = fmt::format("{}", fallback);
    return fallback;
  }
  const std::string t = trim(it->second);
  T v{};
  bool ok = false;
  if constexpr (std::is_same_v<T, double>) {
    v = parse_double(t, ok);
  } else {
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    ok = r.ec == std::errc() && r.ptr == t.data() + t.size() && !t.empty();
  }
  if (!ok) {
    const auto ln = lines_.count(key) ? lines_.at(key) : 0;
    throw ConfigError(fmt::format("{}:{}: key '{}' expects {}, got '{}'", source_, ln, key, kind, t), source_, ln);
  }
  resolved_[key] = t;
  return v;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  const auto it = given_.find(key);
  const std::string v = it == given_.end() ? fallback : trim(it->second);
  resolved_[key] = v;
  return v;
}

double Config::get_double(const std::string& key, double fallback) { return typed<double>(key, fallback, "a number"); }
int Config::get_int(const std::string& key, int fallback) { return typed<int>(key, fallback, "an integer"); }
std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) {
  return typed<std::uint64_t>(key, fallback, "a non-negative integer");
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const auto it = given_.find(key);
  if (it == given_.end()) {
    resolved_[key] = fallback ? "true" : "false";
    return fallback;
  }
  const std::string t = trim(it->second);
  bool v;
  if (t == "true" || t == "1" || t == "yes")
    v = true;
  else if (t == "false" || t == "0" || t == "no")
    v = false;
  else {
    const auto ln = lines_.count(key) ? lines_.at(key) : 0;
    throw ConfigError(fmt::format("{}:{}: key '{}' expects true/false, got '{}'", source_, ln, key, t), source_, ln);
  }
  resolved_[key] = v ? "true" : "false";
  return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  const auto it = given_.find(key);
  if (it == given_.end()) {
    std::string s;
    for (std::size_t i = 0; i < fallback.size(); ++i) s += (i ? " " : "") + fmt::format("{:.17g}", fallback[i]);
    resolved_[key] = s;
    return fallback;
  }
  std::vector<double> out;
  std::istringstream in(it->second);
  for (std::string tok; in >> tok;) {
    bool ok = false;
    const double v = parse_double(tok, ok);
    if (!ok) {
      const auto ln = lines_.count(key) ? lines_.at(key) : 0;
      throw ConfigError(fmt::format("{}:{}: key '{}' expects numbers, got '{}'", source_, ln, key, tok), source_, ln);
    }
    out.push_back(v);
  }
  resolved_[key] = trim(it->second);
  return out;
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : given_)
    if (!resolved_.count(k) && k.rfind("manifest.", 0) != 0) out.push_back(k);
  return out;
}

ScalarFunction ProfileSpec::function() const {
  if (kind == "constant") {
    const double c = m;
    return [c](const Point&) { return c; };
  }
  if (kind == "cosine") {
    const double c = m, a = amplitude;
    const int k = frequency;
    return [c, a, k](const Point& u) { return c + a * std::cos(2.0 * std::numbers::pi * k * u[0]); };
  }
  if (kind == "step") {
    const double lo = low, hi = high, w = width;
    return [lo, hi, w](const Point& u) { return u[0] < w ? hi : lo; };
  }
  throw InvalidArgument("unknown profile kind '" + kind + "' (constant | cosine | step)");
}

DriftField FieldSpec::build(int dim) const {
  if (kind == "none") return DriftField::zero(dim);
  if (kind == "constant") return DriftField::constant(dim, E);
  if (kind == "sine") {
    const double a = amplitude;
    const int k = frequency;
    return DriftField::stationary(
        dim, [a, k](const Point& u) { return Point{a * std::sin(2.0 * std::numbers::pi * k * u[0]), 0.0, 0.0}; },
        std::fabs(a));
  }
  throw InvalidArgument("unknown field kind '" + kind + "' (none | constant | sine)");
}

ExperimentConfig ExperimentConfig::from(Config& cfg) {
  ExperimentConfig e;
  e.model_label = cfg.get_string("run.model", "ssep");
  e.model = parse_model(e.model_label);
  e.d = cfg.get_int("run.d", 1);
  e.N = cfg.get_int("run.N", 100);
  e.M = cfg.get_int("run.M", 64);
  e.T = cfg.get_double("run.T", 0.05);
  e.dt = cfg.get_double("run.dt", 0.0);
  e.seed = cfg.get_u64("run.seed", 1);
  e.out = cfg.get_string("run.out", "out");
  e.profile.kind = cfg.get_string("profile.kind", "constant");
  e.profile.m = cfg.get_double("profile.m", 0.5);
  if (e.profile.kind == "cosine") {
    e.profile.amplitude = cfg.get_double("profile.amplitude", 0.25);
    e.profile.frequency = cfg.get_int("profile.frequency", 1);
  } else if (e.profile.kind == "step") {
    e.profile.low = cfg.get_double("profile.low", 0.0);
    e.profile.high = cfg.get_double("profile.high", 1.0);
    e.profile.width = cfg.get_double("profile.width", 0.5);
  }
  e.field.kind = cfg.get_string("field.kind", e.model_label == "wasep" ? "sine" : "none");
  if (e.field.kind == "constant") {
    const auto E = cfg.get_doubles("field.E", {1.0});
    for (std::size_t i = 0; i < std::min<std::size_t>(3, E.size()); ++i) e.field.E[i] = E[i];
  } else if (e.field.kind == "sine") {
    e.field.amplitude = cfg.get_double("field.amplitude", 2.0);
    e.field.frequency = cfg.get_int("field.frequency", 1);
  }
  require(e.d >= 1 && e.d <= 3, "run.d must be 1, 2 or 3");
  require(e.N >= 2 && e.M >= 2, "run.N and run.M must be at least 2");
  require(e.T > 0, "run.T must be positive");
  return e;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
                     const std::vector<std::string>& comments)
    : out_(path), columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot write " + path.string());
  out_ << kCsvSchema << '\n';
  for (const auto& c : comments) out_ << "# " << c << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
  require(values.size() == columns_, "CsvWriter: row width does not match the header");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << cell(values[i]);
  out_ << '\n';
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidArgument("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  bool ok = false;
  const double v = parse_double(rows.at(row).at(column(name)), ok);
  if (!ok) throw InvalidArgument(fmt::format("CSV row {} column '{}' is not a number", row, name));
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvSchema)
    throw InvalidArgument(path.string() + ": missing or unsupported schema line (expected '" + kCsvSchema + "')");
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(trim(line.substr(1)));
      continue;
    }
    auto cells = split(line, ',');
    if (!header) {
      t.columns = cells;
      header = true;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw InvalidArgument(fmt::format("{}: row with {} cells, header has {}", path.string(), cells.size(),
                                        t.columns.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!header) throw InvalidArgument(path.string() + ": no header line");
  return t;
}

std::string code_version() { return FLUCTLAB_VERSION; }

void write_manifest(const std::filesystem::path& dir, const std::string& subcommand, const Config& cfg) {
  std::ofstream out(dir / "manifest.ini");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << "[manifest]\n";
  out << "version = " << code_version() << '\n';
  out << "subcommand = " << subcommand << '\n';
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  for (const auto& [k, v] : cfg.resolved()) {
    const auto dot = k.find('.');
    if (dot == std::string::npos)
      sections[""].emplace_back(k, v);
    else
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
  }
  for (const auto& [name, entries] : sections) {
    if (name == "manifest") continue;
    out << '\n';
    if (!name.empty()) out << '[' << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  }
}

void write_event_log(const std::filesystem::path& path, const CurrentLedger& ledger) {
  require(ledger.has_log, "write_event_log: ledger has no event log");
  CsvWriter csv(path, {"time", "x", "j", "sign_or_amount"},
                {fmt::format("grid d={} N={}", ledger.grid.dim(), ledger.grid.side())});
  for (const auto& e : ledger.events) csv.row(e.time, e.site, static_cast<int>(e.direction), e.amount);
}

namespace {
std::vector<std::string> coord_columns(int d) {
  std::vector<std::string> c;
  for (int a = 0; a < d; ++a) c.push_back(fmt::format("u{}", a));
  return c;
}
}  // namespace

void write_scalar_field(const std::filesystem::path& path, const ScalarField& f) {
  const TorusGrid& g = f.grid;
  auto cols = coord_columns(g.dim());
  cols.push_back("value");
  CsvWriter csv(path, cols, {fmt::format("grid d={} M={}", g.dim(), g.side())});
  std::vector<double> row(cols.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point c = g.center(i);
    for (int a = 0; a < g.dim(); ++a) row[a] = c[a];
    row.back() = f[i];
    csv.row_values(row);
  }
}

void write_vector_field(const std::filesystem::path& path, const VectorField& w) {
  const TorusGrid& g = w.grid;
  auto cols = coord_columns(g.dim());
  cols.push_back("j");
  cols.push_back("value");
  CsvWriter csv(path, cols, {fmt::format("grid d={} M={}", g.dim(), g.side()), "value is the flux through the +e_j face"});
  std::vector<double> row(cols.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point c = g.center(i);
    for (int j = 0; j < g.dim(); ++j) {
      for (int a = 0; a < g.dim(); ++a) row[a] = c[a];
      row[g.dim()] = j;
      row.back() = w[j][i];
      csv.row_values(row);
    }
  }
}

void write_path(const std::filesystem::path& densities, const std::filesystem::path& currents,
                const PathDiscretization& path) {
  const TorusGrid& g = path.grid();
  const std::vector<std::string> comments{fmt::format("grid d={} M={}", g.dim(), g.side()),
                                          fmt::format("time_grid steps={} horizon={:.17g}", path.steps(),
                                                      path.horizon())};
  const auto times = path.time.times();
  {
    CsvWriter csv(densities, {"k", "t", "dt", "cell", "value"}, comments);
    for (std::size_t k = 0; k < path.densities.size(); ++k) {
      const double dt = k < path.steps() ? path.time.step(k) : 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) csv.row(k, times[k], dt, i, path.densities[k][i]);
    }
  }
  CsvWriter csv(currents, {"k", "t", "dt", "cell", "j", "value"}, comments);
  for (std::size_t k = 0; k < path.steps(); ++k)
    for (std::size_t i = 0; i < g.size(); ++i)
      for (int j = 0; j < g.dim(); ++j) csv.row(k, times[k], path.time.step(k), i, j, path.currents[k][j][i]);
}

namespace {
TorusGrid grid_from_comments(const CsvTable& t, const std::filesystem::path& p) {
  for (const auto& c : t.comments) {
    int d = 0, M = 0;
    if (std::sscanf(c.c_str(), "grid d=%d M=%d", &d, &M) == 2) return TorusGrid(d, M);
  }
  throw InvalidArgument(p.string() + ": missing '# grid d=.. M=..' line");
}
}  // namespace

PathDiscretization read_path(const std::filesystem::path& densities, const std::filesystem::path& currents) {
  const CsvTable dt = read_csv(densities);
  const CsvTable ct = read_csv(currents);
  const TorusGrid g = grid_from_comments(dt, densities);
  if (!(grid_from_comments(ct, currents) == g)) throw InvalidArgument("read_path: density and current grids differ");
  const std::size_t n = g.size();
  if (dt.rows.size() % n != 0 || dt.rows.size() < n) throw InvalidArgument("read_path: ragged density file");
  const std::size_t K = dt.rows.size() / n - 1;
  if (ct.rows.size() != K * n * static_cast<std::size_t>(g.dim()))
    throw InvalidArgument("read_path: current file does not match the density time grid");
  PathDiscretization path;
  path.densities.assign(K + 1, ScalarField(g));
  path.currents.assign(K, VectorField(g));
  path.time.steps.assign(K, 0.0);
  const std::size_t ck = dt.column("k"), ci = dt.column("cell");
  auto as_index = [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); };
  for (std::size_t r = 0; r < dt.rows.size(); ++r) {
    const std::size_t k = as_index(dt.rows[r][ck]), i = as_index(dt.rows[r][ci]);
    if (k > K || i >= n) throw InvalidArgument("read_path: density index out of range");
    path.densities[k][i] = dt.number(r, "value");
    if (k < K) path.time.steps[k] = dt.number(r, "dt");
  }
  const std::size_t qk = ct.column("k"), qi = ct.column("cell"), qj = ct.column("j");
  for (std::size_t r = 0; r < ct.rows.size(); ++r) {
    const std::size_t k = as_index(ct.rows[r][qk]), i = as_index(ct.rows[r][qi]);
    const int j = std::stoi(ct.rows[r][qj]);
    if (k >= K || i >= n || j < 0 || j >= g.dim()) throw InvalidArgument("read_path: current index out of range");
    path.currents[k][j][i] = ct.number(r, "value");
  }
  for (double s : path.time.steps)
    if (!(s > 0)) throw InvalidArgument("read_path: non-positive time step");
  return path;
}

}  // namespace fluctlab
