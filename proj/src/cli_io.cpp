#include "sgls/cli_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace sgls {

// --- small text helpers ----------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> to_integer(std::string_view s) {
  long long v = 0;
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? sep : "") + items[i];
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const std::map<std::string, std::vector<std::string>>& accepted_keys() {
  static const std::map<std::string, std::vector<std::string>> keys{
      {"basis", {"L", "K", "nodes_per_dim"}},
      {"grid", {"dims", "nx", "ny", "dx", "dy", "origin", "boundary"}},
      {"run", {"form", "cfl", "t_end", "snapshot_every", "mode", "samples", "seed", "nodes", "norm_floor"}},
      {"phi0", {"type", "normal", "offset", "center", "radius", "amplitude", "wavenumber"}},
      {"velocity", {"mode.<k>"}},
      {"quantile", {"epsilon", "p", "N_cdf", "surrogate"}},
  };
  return keys;
}

struct Entry {
  std::string value;
  int line = 0;
};

struct Parser {
  std::map<std::string, std::map<std::string, Entry>> sections;
  std::map<std::string, int> section_lines;
  std::vector<ConfigIssue> issues;

  void issue(const std::string& section, const std::string& key, int line, const std::string& msg) {
    issues.push_back({section, key, line, msg});
  }

  const Entry* find(const std::string& section, const std::string& key) const {
    auto s = sections.find(section);
    if (s == sections.end()) return nullptr;
    auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  template <class T>
  void number(const std::string& section, const std::string& key, T& out) {
    const Entry* e = find(section, key);
    if (!e) return;
    if constexpr (std::is_floating_point_v<T>) {
      if (auto v = to_double(e->value))
        out = *v;
      else
        issue(section, key, e->line, "expected a number, got '" + e->value + "'");
    } else {
      auto v = to_integer(e->value);
      if (!v || *v < 0 || static_cast<unsigned long long>(*v) > static_cast<unsigned long long>(std::numeric_limits<T>::max()))
        issue(section, key, e->line, "expected a nonnegative integer, got '" + e->value + "'");
      else
        out = static_cast<T>(*v);
    }
  }

  void pair(const std::string& section, const std::string& key, std::array<double, 2>& out, bool allow_single = false) {
    const Entry* e = find(section, key);
    if (!e) return;
    const auto items = split_list(e->value);
    if (items.size() != 2 && !(allow_single && items.size() == 1)) {
      issue(section, key, e->line, "expected two numbers, got '" + e->value + "'");
      return;
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto v = to_double(items[i]);
      if (!v) {
        issue(section, key, e->line, "expected a number, got '" + items[i] + "'");
        return;
      }
      out[i] = *v;
    }
    if (items.size() == 1) out[1] = 0.0;
  }

  template <class E>
  void choice(const std::string& section, const std::string& key, E& out,
              const std::vector<std::pair<std::string, E>>& options) {
    const Entry* e = find(section, key);
    if (!e) return;
    std::vector<std::string> names;
    for (const auto& [name, value] : options) {
      if (e->value == name) {
        out = value;
        return;
      }
      names.push_back(name);
    }
    issue(section, key, e->line, "expected one of " + join(names, " | ") + ", got '" + e->value + "'");
  }

  void range(const std::string& section, const std::string& key, bool ok, const std::string& what) {
    if (ok) return;
    const Entry* e = find(section, key);
    const int line = e ? e->line : (section_lines.count(section) ? section_lines.at(section) : 0);
    issue(section, key, line, key + " out of range: " + what);
  }
};

std::vector<double> read_numbers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    auto v = to_double(tok);
    if (!v) throw Error(ErrorKind::Format, path.string() + ": not a number: '" + tok + "'");
    out.push_back(*v);
  }
  return out;
}

void check_velocity_invertible(const RunConfig& cfg, Parser& p) {
  const Grid grid = make_grid(cfg);
  const auto basis = make_basis(cfg);
  const GpcAlgebra alg(basis);
  const VelocitySpec spec = make_velocity(cfg);
  std::vector<std::size_t> bad;
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const GpcVector v = spec.at(grid.center(c), alg.size());
    const Eigen::VectorXd ev = symmetric_eigen(alg.p_matrix(v)).values;
    if (ev.cwiseAbs().minCoeff() <= kVelocityInvertibility) bad.push_back(c);
  }
  if (bad.empty()) return;
  const Entry* e = p.find("velocity", "mode.0");
  p.issue("velocity", "mode.0", e ? e->line : p.section_lines["velocity"],
          std::string(cfg.run.form == Form::conservative ? "conservative" : "capacity") +
              " form needs an invertible velocity operator P(v), singular in " + std::to_string(bad.size()) +
              " cells (first: " + std::to_string(bad.front()) + ")");
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(ErrorKind::Config,
            [&] {
              std::string msg;
              for (std::size_t i = 0; i < issues.size(); ++i) {
                const auto& is = issues[i];
                msg += (i ? "; " : "") + std::string("line ") + std::to_string(is.line) + ": [" + is.section + "]" +
                       (is.key.empty() ? "" : " " + is.key) + ": " + is.message;
              }
              return msg;
            }()),
      issues_(std::move(issues)) {}

const std::vector<std::string>& accepted_sections() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, keys] : accepted_keys()) out.push_back(name);
    return out;
  }();
  return names;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  Parser p;
  RunConfig cfg;
  cfg.base_dir = base_dir;

  // Tokenize.
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  bool skipping = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        p.issue(section, "", line_no, "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!accepted_keys().count(section)) {
        p.issue(section, "", line_no,
                "unknown section [" + section + "]; accepted sections: " + join(accepted_sections()));
        skipping = true;
        continue;
      }
      skipping = false;
      if (p.section_lines.count(section)) p.issue(section, "", line_no, "section repeated");
      p.section_lines[section] = line_no;
      p.sections[section];
      continue;
    }
    if (skipping) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      p.issue(section, "", line_no, "expected key = value, got '" + line + "'");
      continue;
    }
    if (section.empty()) {
      p.issue("", trim(line.substr(0, eq)), line_no, "key outside of any section");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = accepted_keys().at(section);
    const bool velocity_key = section == "velocity" && key.rfind("mode.", 0) == 0 && to_integer(key.substr(5));
    if (!velocity_key && std::find(keys.begin(), keys.end(), key) == keys.end()) {
      p.issue(section, key, line_no, "unknown key; accepted keys: " + join(keys));
      continue;
    }
    auto& sec = p.sections[section];
    if (sec.count(key)) {
      p.issue(section, key, line_no, "duplicate key (first on line " + std::to_string(sec[key].line) + ")");
      continue;
    }
    sec[key] = {value, line_no};
  }

  // [basis]
  p.number("basis", "L", cfg.basis.L);
  p.number("basis", "K", cfg.basis.K);
  p.number("basis", "nodes_per_dim", cfg.basis.nodes_per_dim);
  p.range("basis", "L", cfg.basis.L >= 1 && cfg.basis.L <= 4, "need 1 <= L <= 4");
  p.range("basis", "K", cfg.basis.K >= 0 && cfg.basis.K <= 12, "need 0 <= K <= 12");
  p.range("basis", "nodes_per_dim",
          cfg.basis.nodes_per_dim == 0 || cfg.basis.nodes_per_dim >= GpcBasis::min_nodes(cfg.basis.K),
          "need 0 (default) or at least " + std::to_string(GpcBasis::min_nodes(cfg.basis.K)) + " nodes for K = " +
              std::to_string(cfg.basis.K));

  // [grid]
  p.number("grid", "nx", cfg.grid.nx);
  p.number("grid", "ny", cfg.grid.ny);
  const bool dims_given = p.find("grid", "dims") != nullptr;
  p.number("grid", "dims", cfg.grid.dims);
  if (!dims_given) cfg.grid.dims = (p.find("grid", "ny") && cfg.grid.ny > 1) ? 2 : 1;
  if (cfg.grid.dims == 1 && !p.find("grid", "ny")) cfg.grid.ny = 1;
  p.number("grid", "dx", cfg.grid.dx);
  cfg.grid.dy = cfg.grid.dx;
  p.number("grid", "dy", cfg.grid.dy);
  cfg.grid.origin = {0.5 * cfg.grid.dx, cfg.grid.dims == 2 ? 0.5 * cfg.grid.dy : 0.0};
  cfg.grid.origin_set = p.find("grid", "origin") != nullptr;
  p.pair("grid", "origin", cfg.grid.origin, cfg.grid.dims == 1);
  p.choice<Boundary>("grid", "boundary", cfg.grid.boundary,
                     {{"outflow", Boundary::outflow}, {"periodic", Boundary::periodic}});
  p.range("grid", "dims", cfg.grid.dims == 1 || cfg.grid.dims == 2, "need 1 or 2");
  p.range("grid", "nx", cfg.grid.nx >= 3, "need nx >= 3");
  if (cfg.grid.dims == 2)
    p.range("grid", "ny", cfg.grid.ny >= 3, "need ny >= 3 in 2D");
  else
    p.range("grid", "ny", cfg.grid.ny == 1, "1D grids have ny = 1");
  p.range("grid", "dx", cfg.grid.dx > 0.0, "need dx > 0");
  p.range("grid", "dy", cfg.grid.dy > 0.0, "need dy > 0");

  // [run]
  p.choice<Form>("run", "form", cfg.run.form, {{"conservative", Form::conservative}, {"capacity", Form::capacity}});
  p.number("run", "cfl", cfg.run.cfl);
  p.number("run", "t_end", cfg.run.t_end);
  p.number("run", "snapshot_every", cfg.run.snapshot_every);
  p.choice<RunMode>("run", "mode", cfg.run.mode,
                    {{"intrusive", RunMode::intrusive}, {"mc", RunMode::mc}, {"collocation", RunMode::collocation}});
  p.number("run", "samples", cfg.run.samples);
  p.number("run", "seed", cfg.run.seed);
  p.number("run", "nodes", cfg.run.nodes);
  if (const Entry* e = p.find("run", "norm_floor")) {
    if (e->value == "off") {
      cfg.run.norm_floor = 0.0;
    } else if (e->value == "on") {
      cfg.run.norm_floor = kDefaultNormFloor;
    } else if (auto v = to_double(e->value)) {
      cfg.run.norm_floor = *v;
      p.range("run", "norm_floor", *v > 0.0, "need off, on or a positive value");
    } else {
      p.issue("run", "norm_floor", e->line, "expected off, on or a positive number, got '" + e->value + "'");
    }
  }
  p.range("run", "cfl", cfg.run.cfl > 0.0 && cfg.run.cfl < 1.0, "need 0 < cfl < 1");
  p.range("run", "t_end", cfg.run.t_end >= 0.0, "need t_end >= 0");
  p.range("run", "samples", cfg.run.samples >= 1, "need samples >= 1");
  p.range("run", "nodes", cfg.run.nodes >= 1 && cfg.run.nodes <= 64, "need 1 <= nodes <= 64");

  // [phi0]
  if (const Entry* e = p.find("phi0", "type")) {
    cfg.phi0.type = e->value;
    if (e->value != "plane" && e->value != "circle" && e->value != "sine")
      p.issue("phi0", "type", e->line, "expected one of plane | circle | sine, got '" + e->value + "'");
  } else {
    p.issue("phi0", "type", p.section_lines.count("phi0") ? p.section_lines["phi0"] : 0, "missing initial condition type");
  }
  p.pair("phi0", "normal", cfg.phi0.normal, true);
  p.number("phi0", "offset", cfg.phi0.offset);
  p.pair("phi0", "center", cfg.phi0.center, true);
  p.number("phi0", "radius", cfg.phi0.radius);
  p.number("phi0", "amplitude", cfg.phi0.amplitude);
  p.number("phi0", "wavenumber", cfg.phi0.wavenumber);
  if (cfg.phi0.type == "circle") p.range("phi0", "radius", cfg.phi0.radius > 0.0, "need radius > 0");

  // [velocity]
  if (auto it = p.sections.find("velocity"); it != p.sections.end()) {
    const std::size_t n_modes = MultiIndexSet::cardinality(std::max(cfg.basis.L, 1), std::max(cfg.basis.K, 0));
    std::map<long long, VelocityModeConfig> modes;
    for (const auto& [key, entry] : it->second) {
      const long long k = *to_integer(key.substr(5));
      if (k < 0 || static_cast<std::size_t>(k) >= n_modes) {
        p.issue("velocity", key, entry.line, "mode index out of range: basis has " + std::to_string(n_modes) + " modes");
        continue;
      }
      const auto items = split_list(entry.value);
      VelocityModeConfig m;
      if (items.empty()) {
        p.issue("velocity", key, entry.line, "empty mode description");
        continue;
      }
      m.kind = items[0];
      static const std::map<std::string, std::pair<std::size_t, std::size_t>> arity{
          {"constant", {1, 1}}, {"affine", {2, 3}}, {"gaussian", {4, 5}}};
      if (m.kind == "tabulated") {
        if (items.size() != 2) {
          p.issue("velocity", key, entry.line, "expected 'tabulated <path>'");
          continue;
        }
        m.path = items[1];
      } else if (auto a = arity.find(m.kind); a != arity.end()) {
        const std::size_t n = items.size() - 1;
        if (n < a->second.first || n > a->second.second) {
          p.issue("velocity", key, entry.line,
                  m.kind + " takes " + std::to_string(a->second.first) +
                      (a->second.first == a->second.second ? "" : "-" + std::to_string(a->second.second)) +
                      " parameters, got " + std::to_string(n));
          continue;
        }
        bool ok = true;
        for (std::size_t i = 1; i < items.size(); ++i) {
          auto v = to_double(items[i]);
          if (!v) {
            p.issue("velocity", key, entry.line, "expected a number, got '" + items[i] + "'");
            ok = false;
            break;
          }
          m.params.push_back(*v);
        }
        if (!ok) continue;
        // Canonical parameter lists.
        if (m.kind == "affine" && m.params.size() == 2) m.params.push_back(0.0);
        if (m.kind == "gaussian" && m.params.size() == 4) m.params.push_back(0.0);
        if (m.kind == "gaussian" && !(m.params[3] > 0.0)) {
          p.issue("velocity", key, entry.line, "gaussian width must be positive");
          continue;
        }
      } else {
        p.issue("velocity", key, entry.line,
                "unknown velocity family '" + m.kind + "'; expected constant | affine | gaussian | tabulated");
        continue;
      }
      modes[k] = m;
    }
    if (!modes.empty()) {
      cfg.velocity.assign(static_cast<std::size_t>(modes.rbegin()->first) + 1, VelocityModeConfig{"constant", {0.0}, {}});
      for (auto& [k, m] : modes) cfg.velocity[static_cast<std::size_t>(k)] = m;
    }
  }
  if (cfg.velocity.empty())
    p.issue("velocity", "mode.0", p.section_lines.count("velocity") ? p.section_lines["velocity"] : 0,
            "no velocity modes given");

  // [quantile]
  p.number("quantile", "epsilon", cfg.quantile.epsilon);
  p.number("quantile", "p", cfg.quantile.p);
  p.number("quantile", "N_cdf", cfg.quantile.n_cdf);
  p.choice<Surrogate>("quantile", "surrogate", cfg.quantile.surrogate,
                      {{"pointwise", Surrogate::pointwise}, {"galerkin", Surrogate::galerkin}});
  p.range("quantile", "epsilon", cfg.quantile.epsilon >= 0.0, "need epsilon >= 0");
  p.range("quantile", "p", cfg.quantile.p > 0.0 && cfg.quantile.p <= 1.0, "need 0 < p <= 1");
  p.range("quantile", "N_cdf", cfg.quantile.n_cdf >= 2, "need N_cdf >= 2");

  // Combinations that only make sense once the pieces are valid.
  if (p.issues.empty() && cfg.run.mode == RunMode::intrusive) {
    try {
      check_velocity_invertible(cfg, p);
    } catch (const Error& e) {
      p.issue("velocity", "", p.section_lines.count("velocity") ? p.section_lines["velocity"] : 0, e.what());
    }
  }

  if (!p.issues.empty()) throw ConfigError(std::move(p.issues));
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[basis]\n";
  os << "L = " << cfg.basis.L << "\n";
  os << "K = " << cfg.basis.K << "\n";
  os << "nodes_per_dim = " << cfg.basis.nodes_per_dim << "\n\n";
  os << "[grid]\n";
  os << "dims = " << cfg.grid.dims << "\n";
  os << "nx = " << cfg.grid.nx << "\n";
  os << "ny = " << cfg.grid.ny << "\n";
  os << "dx = " << fmt(cfg.grid.dx) << "\n";
  os << "dy = " << fmt(cfg.grid.dy) << "\n";
  os << "origin = " << fmt(cfg.grid.origin[0]) << ", " << fmt(cfg.grid.origin[1]) << "\n";
  os << "boundary = " << (cfg.grid.boundary == Boundary::periodic ? "periodic" : "outflow") << "\n\n";
  os << "[run]\n";
  os << "form = " << (cfg.run.form == Form::conservative ? "conservative" : "capacity") << "\n";
  os << "cfl = " << fmt(cfg.run.cfl) << "\n";
  os << "t_end = " << fmt(cfg.run.t_end) << "\n";
  os << "snapshot_every = " << cfg.run.snapshot_every << "\n";
  os << "mode = " << (cfg.run.mode == RunMode::intrusive ? "intrusive" : cfg.run.mode == RunMode::mc ? "mc" : "collocation")
     << "\n";
  os << "samples = " << cfg.run.samples << "\n";
  os << "seed = " << cfg.run.seed << "\n";
  os << "nodes = " << cfg.run.nodes << "\n";
  os << "norm_floor = " << (cfg.run.norm_floor > 0.0 ? fmt(cfg.run.norm_floor) : std::string("off")) << "\n\n";
  os << "[phi0]\n";
  os << "type = " << cfg.phi0.type << "\n";
  if (cfg.phi0.type == "plane") {
    os << "normal = " << fmt(cfg.phi0.normal[0]) << ", " << fmt(cfg.phi0.normal[1]) << "\n";
    os << "offset = " << fmt(cfg.phi0.offset) << "\n";
  } else if (cfg.phi0.type == "circle") {
    os << "center = " << fmt(cfg.phi0.center[0]) << ", " << fmt(cfg.phi0.center[1]) << "\n";
    os << "radius = " << fmt(cfg.phi0.radius) << "\n";
  } else {
    os << "amplitude = " << fmt(cfg.phi0.amplitude) << "\n";
    os << "wavenumber = " << fmt(cfg.phi0.wavenumber) << "\n";
  }
  os << "\n[velocity]\n";
  for (std::size_t k = 0; k < cfg.velocity.size(); ++k) {
    const auto& m = cfg.velocity[k];
    os << "mode." << k << " = " << m.kind;
    if (m.kind == "tabulated")
      os << " " << m.path;
    else
      for (double v : m.params) os << " " << fmt(v);
    os << "\n";
  }
  os << "\n[quantile]\n";
  os << "epsilon = " << fmt(cfg.quantile.epsilon) << "\n";
  os << "p = " << fmt(cfg.quantile.p) << "\n";
  os << "N_cdf = " << cfg.quantile.n_cdf << "\n";
  os << "surrogate = " << (cfg.quantile.surrogate == Surrogate::pointwise ? "pointwise" : "galerkin") << "\n";
  return os.str();
}

std::string config_hash(const RunConfig& cfg) { return hex64(fnv1a(serialize(cfg))); }

Grid make_grid(const RunConfig& cfg) {
  const auto& g = cfg.grid;
  if (g.dims == 1) return Grid::line(g.nx, g.dx, g.origin[0], g.boundary);
  return Grid::plane(g.nx, g.ny, g.dx, g.dy, g.origin[0], g.origin[1], g.boundary);
}

std::shared_ptr<const GpcBasis> make_basis(const RunConfig& cfg) {
  if (cfg.basis.nodes_per_dim > 0) return GpcBasis::build(cfg.basis.L, cfg.basis.K, cfg.basis.nodes_per_dim);
  return GpcBasis::build(cfg.basis.L, cfg.basis.K);
}

VelocitySpec make_velocity(const RunConfig& cfg) {
  std::vector<ModeFunction> modes;
  for (const auto& m : cfg.velocity) {
    const auto& a = m.params;
    if (m.kind == "constant") {
      modes.emplace_back(ConstantMode{a.at(0)});
    } else if (m.kind == "affine") {
      modes.emplace_back(AffineMode{a.at(0), a.at(1), a.at(2)});
    } else if (m.kind == "gaussian") {
      modes.emplace_back(GaussianBumpMode{a.at(0), a.at(1), a.at(2), a.at(3), a.at(4)});
    } else if (m.kind == "tabulated") {
      std::filesystem::path path = m.path;
      if (path.is_relative()) path = cfg.base_dir / path;
      modes.emplace_back(TabulatedMode(make_grid(cfg), read_numbers(path)));
    } else {
      throw Error(ErrorKind::Config, "unknown velocity family '" + m.kind + "'");
    }
  }
  return VelocitySpec(std::move(modes));
}

InitialCondition make_initial_condition(const RunConfig& cfg) {
  const Phi0Config c = cfg.phi0;
  if (c.type == "plane") {
    return {[c](Point p) { return c.normal[0] * p.x + c.normal[1] * p.y + c.offset; },
            [c](Point) { return std::array<double, 2>{c.normal[0], c.normal[1]}; }};
  }
  if (c.type == "circle") {
    return {[c](Point p) { return c.radius - std::hypot(p.x - c.center[0], p.y - c.center[1]); },
            [c](Point p) {
              const double r = std::hypot(p.x - c.center[0], p.y - c.center[1]);
              if (r == 0.0) return std::array<double, 2>{0.0, 0.0};
              return std::array<double, 2>{-(p.x - c.center[0]) / r, -(p.y - c.center[1]) / r};
            }};
  }
  if (c.type == "sine") {
    const double w = 2.0 * std::numbers::pi * c.wavenumber;
    return {[c, w](Point p) { return p.x + c.amplitude * std::sin(w * p.x); },
            [c, w](Point p) { return std::array<double, 2>{1.0 + c.amplitude * w * std::cos(w * p.x), 0.0}; }};
  }
  throw Error(ErrorKind::Config, "unknown initial condition '" + c.type + "'");
}

SolverOptions make_solver_options(const RunConfig& cfg) {
  return {cfg.run.form, cfg.run.cfl, cfg.run.norm_floor};
}

CdfOptions make_cdf_options(const RunConfig& cfg) { return {cfg.quantile.surrogate, cfg.quantile.n_cdf}; }

// --- snapshots -------------------------------------------------------------

FieldSnapshot to_field_snapshot(const Snapshot& snap, const Grid& grid) {
  FieldSnapshot out;
  out.t = snap.t;
  out.nx = static_cast<std::uint32_t>(grid.nx);
  out.ny = static_cast<std::uint32_t>(grid.ny);
  out.modes = static_cast<std::uint32_t>(snap.phi.modes());
  out.components = static_cast<std::uint32_t>(1 + grid.dims);
  out.payload.assign(static_cast<std::size_t>(out.nx) * out.ny * out.modes * out.components, 0.0);
  for (std::uint32_t ix = 0; ix < out.nx; ++ix)
    for (std::uint32_t iy = 0; iy < out.ny; ++iy) {
      const std::size_t c = grid.index(static_cast<int>(ix), static_cast<int>(iy));
      for (std::uint32_t k = 0; k < out.modes; ++k) {
        out.at(ix, iy, k, 0) = snap.phi.cell(c)(k);
        out.at(ix, iy, k, 1) = snap.u1.cell(c)(k);
        if (grid.dims == 2) out.at(ix, iy, k, 2) = snap.u2.cell(c)(k);
      }
    }
  return out;
}

CoeffField phi_field(const FieldSnapshot& snap) {
  CoeffField out(static_cast<std::size_t>(snap.nx) * snap.ny, snap.modes);
  for (std::uint32_t ix = 0; ix < snap.nx; ++ix)
    for (std::uint32_t iy = 0; iy < snap.ny; ++iy)
      for (std::uint32_t k = 0; k < snap.modes; ++k)
        out.cell(static_cast<std::size_t>(iy) * snap.nx + ix)(k) = snap.at(ix, iy, k, 0);
  return out;
}

namespace {

constexpr char kMagic[4] = {'S', 'G', 'L', 'S'};

bool needs_swap(Endianness order) {
  return (order == Endianness::little) != (std::endian::native == std::endian::little);
}

template <class T>
void put(std::ostream& os, T v, Endianness order) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if (needs_swap(order)) std::reverse(bytes, bytes + sizeof(T));
  os.write(bytes, sizeof(T));
}

template <class T>
T get(std::istream& is, Endianness order, const char* what) {
  char bytes[sizeof(T)];
  if (!is.read(bytes, sizeof(T))) throw Error(ErrorKind::Format, std::string("snapshot: truncated header (") + what + ")");
  if (needs_swap(order)) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void write_snapshot(std::ostream& os, const FieldSnapshot& snap, Endianness order) {
  const std::size_t expected = static_cast<std::size_t>(snap.nx) * snap.ny * snap.modes * snap.components;
  if (snap.payload.size() != expected)
    throw Error(ErrorKind::Format, "snapshot: payload length " + std::to_string(snap.payload.size()) +
                                       " does not match layout " + std::to_string(expected));
  for (double v : snap.payload)
    if (!std::isfinite(v)) throw Error(ErrorKind::Format, "snapshot: payload contains non-finite values");
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kSnapshotVersion, order);
  const auto byte = static_cast<char>(order);
  os.write(&byte, 1);
  put<std::uint32_t>(os, snap.nx, order);
  put<std::uint32_t>(os, snap.ny, order);
  put<std::uint32_t>(os, snap.modes, order);
  put<std::uint32_t>(os, snap.components, order);
  put<double>(os, snap.t, order);
  for (double v : snap.payload) put<double>(os, v, order);
  if (!os) throw Error(ErrorKind::Io, "snapshot: write failed");
}

void write_snapshot(const std::filesystem::path& path, const FieldSnapshot& snap, Endianness order) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_snapshot(out, snap, order);
}

FieldSnapshot read_snapshot(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::Format, "snapshot: bad magic (not an SGLS file)");
  // The version field precedes the endianness byte, so peek both orders.
  char vbytes[4];
  if (!is.read(vbytes, 4)) throw Error(ErrorKind::Format, "snapshot: truncated header (version)");
  char order_byte;
  if (!is.read(&order_byte, 1)) throw Error(ErrorKind::Format, "snapshot: truncated header (endianness)");
  if (order_byte != 0 && order_byte != 1)
    throw Error(ErrorKind::Format, "snapshot: invalid endianness byte " + std::to_string(static_cast<int>(order_byte)));
  const auto order = static_cast<Endianness>(order_byte);
  if (needs_swap(order)) std::reverse(vbytes, vbytes + 4);
  std::uint32_t version;
  std::memcpy(&version, vbytes, 4);
  if (version != kSnapshotVersion)
    throw Error(ErrorKind::Format, "snapshot: unsupported format version " + std::to_string(version));

  FieldSnapshot snap;
  snap.nx = get<std::uint32_t>(is, order, "nx");
  snap.ny = get<std::uint32_t>(is, order, "ny");
  snap.modes = get<std::uint32_t>(is, order, "modes");
  snap.components = get<std::uint32_t>(is, order, "components");
  snap.t = get<double>(is, order, "t");
  const std::size_t expected = static_cast<std::size_t>(snap.nx) * snap.ny * snap.modes * snap.components;
  if (expected == 0 || expected > (std::size_t{1} << 34))
    throw Error(ErrorKind::Format, "snapshot: implausible layout");
  std::vector<char> bytes(expected * 8);
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  const auto got = static_cast<std::size_t>(is.gcount());
  if (got != bytes.size())
    throw Error(ErrorKind::Format, "snapshot: size mismatch, expected " + std::to_string(bytes.size()) +
                                       " payload bytes, found " + std::to_string(got));
  if (is.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::Format, "snapshot: size mismatch, trailing bytes after payload");
  snap.payload.resize(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    char* b = bytes.data() + 8 * i;
    if (needs_swap(order)) std::reverse(b, b + 8);
    std::memcpy(&snap.payload[i], b, 8);
    if (!std::isfinite(snap.payload[i])) throw Error(ErrorKind::Format, "snapshot: non-finite payload value");
  }
  return snap;
}

FieldSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open snapshot " + path.string());
  return read_snapshot(in);
}

// --- text exports ----------------------------------------------------------

void export_band(std::ostream& os, const QuantileBand& band, const Grid& grid, const std::string& hash) {
  os << "# sgls quantile band\n";
  os << "# epsilon = " << fmt(band.epsilon) << "\n";
  os << "# p = " << fmt(band.p) << "\n";
  os << "# t = " << fmt(band.t) << "\n";
  os << "# config_hash = " << hash << "\n";
  os << "# columns: x y cdf in_band\n";
  for (std::size_t c = 0; c < band.mask.size(); ++c) {
    const Point p = grid.center(c);
    os << fmt(p.x) << ' ' << fmt(p.y) << ' ' << fmt(band.cdf[c]) << ' ' << (band.mask[c] ? 1 : 0) << '\n';
  }
}

void export_band(const std::filesystem::path& path, const QuantileBand& band, const Grid& grid,
                 const std::string& hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  export_band(out, band, grid, hash);
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void export_csv_1d(std::ostream& os, const FieldSnapshot& snap, const Grid& grid) {
  os << "x";
  for (std::uint32_t k = 0; k < snap.modes; ++k) os << ",phi_" << k;
  os << "\n";
  for (std::uint32_t ix = 0; ix < snap.nx; ++ix) {
    os << fmt(grid.center(static_cast<int>(ix), 0).x);
    for (std::uint32_t k = 0; k < snap.modes; ++k) os << ',' << fmt(snap.at(ix, 0, k, 0));
    os << "\n";
  }
}

void write_manifest(const std::filesystem::path& path, const ManifestInfo& info) {
  nlohmann::ordered_json j;
  j["format"] = "sgls-manifest";
  j["manifest_version"] = 1;
  j["config_hash"] = info.config_hash;
  j["basis_fingerprint"] = hex64(info.basis_fingerprint);
  j["seed"] = info.seed;
  j["command"] = info.command;
  j["versions"] = {{"sgls", kVersion},
                   {"snapshot_format", kSnapshotVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["outputs"] = info.outputs;
  j["config"] = info.config_text;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

ManifestInfo read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    ManifestInfo info;
    info.config_hash = j.at("config_hash").get<std::string>();
    info.basis_fingerprint = std::stoull(j.at("basis_fingerprint").get<std::string>(), nullptr, 16);
    info.seed = j.at("seed").get<std::uint64_t>();
    info.command = j.value("command", "");
    info.config_text = j.at("config").get<std::string>();
    info.outputs = j.value("outputs", std::vector<std::string>{});
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "manifest " + path.string() + ": " + e.what());
  }
}

}  // namespace sgls
