#include "haarsim/config.hpp"

#include "haarsim/errors.hpp"
#include "haarsim/verification_harness.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace haarsim {

namespace {

using LineMap = std::map<std::string, std::size_t>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back({});
  return out;
}

/// Thrown by value parsers; rethrown as ConfigError with line and key.
struct BadValue {
  std::string what;
};

double to_double(const std::string& s) {
  if (s.empty()) throw BadValue{"expected a number, got an empty value"};
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw BadValue{"expected a number, got '" + s + "'"};
  }
  return v;
}

int to_int(const std::string& s) {
  if (s.empty()) throw BadValue{"expected an integer, got an empty value"};
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE || v < -1000000000L || v > 1000000000L) {
    throw BadValue{"expected an integer, got '" + s + "'"};
  }
  return static_cast<int>(v);
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

std::string to_word(const std::string& s) {
  if (s.empty()) throw BadValue{"expected a name, got an empty value"};
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == ',' || ch == ';') {
      throw BadValue{"expected a single name, got '" + s + "'"};
    }
  }
  return s;
}

std::string to_path(const std::string& s) { return s; }

template <typename T, typename F>
std::vector<T> to_list(const std::string& s, F item) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(item(part));
  return out;
}

std::vector<std::vector<double>> to_points(const std::string& s) {
  std::vector<std::vector<double>> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ';')) out.push_back(to_list<double>(part, to_double));
  return out;
}

std::string num(double x) { return format_number(x); }

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f, const char* sep = ", ") {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += f(v[i]);
  }
  return s;
}

std::string emit_points(const std::vector<std::vector<double>>& p) {
  return join(p, [](const std::vector<double>& q) { return join(q, num); }, "; ");
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::string(const RunConfig&)> emit;
};

#define HAARSIM_NUM(sec, name)                                                   \
  Field{sec, #name, [](RunConfig& c, const std::string& v) { c.name = to_double(v); }, \
        [](const RunConfig& c) { return num(c.name); }}
#define HAARSIM_INT(sec, name)                                                   \
  Field{sec, #name, [](RunConfig& c, const std::string& v) { c.name = to_int(v); },   \
        [](const RunConfig& c) { return std::to_string(c.name); }}
#define HAARSIM_BOOL(sec, name)                                                  \
  Field{sec, #name, [](RunConfig& c, const std::string& v) { c.name = to_bool(v); },  \
        [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }}
#define HAARSIM_WORD(sec, name)                                                  \
  Field{sec, #name, [](RunConfig& c, const std::string& v) { c.name = to_word(v); },  \
        [](const RunConfig& c) { return c.name; }}
#define HAARSIM_NUMS(sec, name)                                                       \
  Field{sec, #name,                                                                   \
        [](RunConfig& c, const std::string& v) { c.name = to_list<double>(v, to_double); }, \
        [](const RunConfig& c) { return join(c.name, num); }}
#define HAARSIM_INTS(sec, name)                                                       \
  Field{sec, #name,                                                                   \
        [](RunConfig& c, const std::string& v) { c.name = to_list<int>(v, to_int); },       \
        [](const RunConfig& c) {                                                      \
          return join(c.name, [](int x) { return std::to_string(x); });               \
        }}
#define HAARSIM_STIM(medium)                                                                   \
  Field{"problem", "stim_" #medium,                                                            \
        [](RunConfig& c, const std::string& v) { c.stim_##medium.kind = to_word(v); },         \
        [](const RunConfig& c) { return c.stim_##medium.kind; }},                              \
      Field{"problem", "stim_" #medium "_amplitude",                                           \
            [](RunConfig& c, const std::string& v) { c.stim_##medium.amplitude = to_double(v); }, \
            [](const RunConfig& c) { return num(c.stim_##medium.amplitude); }},                \
      Field{"problem", "stim_" #medium "_lo",                                                  \
            [](RunConfig& c, const std::string& v) {                                           \
              c.stim_##medium.lo = to_list<double>(v, to_double);                              \
            },                                                                                 \
            [](const RunConfig& c) { return join(c.stim_##medium.lo, num); }},                 \
      Field{"problem", "stim_" #medium "_hi",                                                  \
            [](RunConfig& c, const std::string& v) {                                           \
              c.stim_##medium.hi = to_list<double>(v, to_double);                              \
            },                                                                                 \
            [](const RunConfig& c) { return join(c.stim_##medium.hi, num); }},                 \
      Field{"problem", "stim_" #medium "_window",                                              \
            [](RunConfig& c, const std::string& v) {                                           \
              c.stim_##medium.window = to_list<double>(v, to_double);                          \
            },                                                                                 \
            [](const RunConfig& c) { return join(c.stim_##medium.window, num); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      HAARSIM_INT("problem", dim),
      HAARSIM_NUMS("problem", domain_lo),
      HAARSIM_NUMS("problem", domain_hi),
      HAARSIM_NUM("problem", cm),
      HAARSIM_NUM("problem", t_final),
      HAARSIM_WORD("problem", conductivity),
      HAARSIM_NUM("problem", sigma_il),
      HAARSIM_NUM("problem", sigma_it),
      HAARSIM_NUM("problem", sigma_el),
      HAARSIM_NUM("problem", sigma_et),
      HAARSIM_NUMS("problem", poly_intra),
      HAARSIM_NUMS("problem", poly_extra),
      HAARSIM_WORD("problem", ionic),
      HAARSIM_NUM("problem", ionic_a),
      HAARSIM_NUMS("problem", gate_coupling),
      HAARSIM_NUMS("problem", gate_c1),
      HAARSIM_NUMS("problem", gate_c2),
      HAARSIM_STIM(intra),
      HAARSIM_STIM(extra),
      HAARSIM_WORD("problem", v0),
      HAARSIM_NUM("problem", v0_value),
      HAARSIM_NUM("problem", v0_amplitude),
      HAARSIM_INTS("problem", v0_modes),
      HAARSIM_NUMS("problem", w0_value),
      HAARSIM_INTS("numerics", levels),
      HAARSIM_NUM("numerics", dt),
      HAARSIM_NUM("numerics", gmres_tol),
      HAARSIM_INT("numerics", gmres_restart),
      HAARSIM_INT("numerics", gmres_max_iters),
      HAARSIM_BOOL("numerics", warm_start),
      HAARSIM_BOOL("numerics", preconditioned),
      HAARSIM_WORD("numerics", anchor),
      HAARSIM_INT("numerics", anchor_index),
      HAARSIM_BOOL("numerics", allow_large),
      HAARSIM_NUMS("numerics", sweep_dts),
      HAARSIM_NUM("numerics", dt_ref),
      HAARSIM_INTS("numerics", ref_levels),
      HAARSIM_INTS("numerics", sweep_levels),
      HAARSIM_WORD("numerics", decay_function),
      HAARSIM_INT("numerics", decay_level),
      Field{"outputs", "mode",
            [](RunConfig& c, const std::string& v) {
              try {
                c.mode = parse_mode(v);
              } catch (const std::exception& e) {
                throw BadValue{e.what()};
              }
            },
            [](const RunConfig& c) { return to_string(c.mode); }},
      HAARSIM_INT("outputs", snapshot_every),
      Field{"outputs", "probes",
            [](RunConfig& c, const std::string& v) { c.probes = to_points(v); },
            [](const RunConfig& c) { return emit_points(c.probes); }},
      Field{"outputs", "directory",
            [](RunConfig& c, const std::string& v) { c.directory = to_path(v); },
            [](const RunConfig& c) { return c.directory; }},
  };
  return f;
}

#undef HAARSIM_NUM
#undef HAARSIM_INT
#undef HAARSIM_BOOL
#undef HAARSIM_WORD
#undef HAARSIM_NUMS
#undef HAARSIM_INTS
#undef HAARSIM_STIM

int level_limit(int dim) { return dim == 1 ? 7 : dim == 2 ? 5 : 3; }

void validate_with_lines(const RunConfig& c, const LineMap& lines) {
  auto fail = [&](const std::string& key, const std::string& what) {
    const auto it = lines.find(key);
    const std::size_t line = it == lines.end() ? 0 : it->second;
    std::string msg = line ? "line " + std::to_string(line) + ": " : std::string();
    throw ConfigError(msg + "key '" + key + "': " + what, line, key);
  };
  static const std::set<std::string> conductivities = {"example-closure", "example3-conductivity",
                                                       "constant", "polynomial"};
  static const std::set<std::string> stimuli = {"zero", "constant", "box"};
  static const std::set<std::string> initials = {"constant", "cosine"};
  static const std::set<std::string> anchors = {"point", "zero-mean"};
  static const std::set<std::string> decays = {"abs-diff", "sum", "constant"};

  if (c.dim < 1 || c.dim > 3) fail("dim", "must be 1, 2 or 3");
  const auto d = static_cast<std::size_t>(c.dim);
  if (c.domain_lo.size() < d) fail("domain_lo", "needs one value per axis");
  if (c.domain_hi.size() < d) fail("domain_hi", "needs one value per axis");
  for (std::size_t a = 0; a < d; ++a) {
    if (!(c.domain_hi[a] > c.domain_lo[a])) fail("domain_hi", "must exceed domain_lo on every axis");
  }
  if (!(c.cm > 0.0)) fail("cm", "membrane capacitance must be positive");
  if (!(c.t_final >= 0.0)) fail("t_final", "final time must be non-negative");
  if (!conductivities.count(c.conductivity)) fail("conductivity", "unknown preset '" + c.conductivity + "'");
  for (auto [key, v] : {std::pair{"sigma_il", c.sigma_il}, std::pair{"sigma_it", c.sigma_it},
                        std::pair{"sigma_el", c.sigma_el}, std::pair{"sigma_et", c.sigma_et}}) {
    if (!(v >= 0.0)) fail(key, "conductivity must be non-negative");
  }
  if (c.ionic != "fhn-cubic") fail("ionic", "unknown preset '" + c.ionic + "'");
  if (c.gate_coupling.empty()) fail("gate_coupling", "at least one gating component is required");
  if (c.gate_c1.size() != c.gate_coupling.size()) fail("gate_c1", "must match gate_coupling in length");
  if (c.gate_c2.size() != c.gate_coupling.size()) fail("gate_c2", "must match gate_coupling in length");
  if (c.w0_value.size() != c.gate_coupling.size()) fail("w0_value", "needs one value per gating component");
  for (auto [name, s] : {std::pair{std::string("stim_intra"), &c.stim_intra},
                         std::pair{std::string("stim_extra"), &c.stim_extra}}) {
    if (!stimuli.count(s->kind)) fail(name, "unknown preset '" + s->kind + "'");
    if (s->lo.size() < d) fail(name + "_lo", "needs one value per axis");
    if (s->hi.size() < d) fail(name + "_hi", "needs one value per axis");
    if (s->window.size() != 2) fail(name + "_window", "needs exactly two times");
  }
  if (!initials.count(c.v0)) fail("v0", "unknown preset '" + c.v0 + "'");
  if (c.v0_modes.size() < d) fail("v0_modes", "needs one mode per axis");
  for (int m : c.v0_modes) {
    if (m < 0) fail("v0_modes", "modes must be non-negative");
  }

  auto check_levels = [&](const std::vector<int>& ls, const char* key, bool allow_empty) {
    if (ls.empty() && allow_empty) return;
    if (ls.size() != 1 && ls.size() != d) fail(key, "give one level or one per axis");
    for (int j : ls) {
      if (j < 0) fail(key, "levels must be non-negative");
      if (!c.allow_large && j > level_limit(c.dim)) {
        fail(key, "level " + std::to_string(j) + " exceeds the guard rail " +
                      std::to_string(level_limit(c.dim)) + " for dim " + std::to_string(c.dim) +
                      " (set allow_large = true to override)");
      }
    }
  };
  check_levels(c.levels, "levels", false);
  check_levels(c.ref_levels, "ref_levels", true);
  for (int j : c.sweep_levels) check_levels({j}, "sweep_levels", false);
  for (std::size_t i = 0; i + 1 < c.sweep_levels.size(); ++i) {
    if (!(c.sweep_levels[i] < c.sweep_levels[i + 1])) fail("sweep_levels", "must be strictly increasing");
  }
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) fail("dt", "time step must be positive");
  if (!(c.gmres_tol > 0.0)) fail("gmres_tol", "tolerance must be positive");
  if (c.gmres_restart < 1) fail("gmres_restart", "must be at least 1");
  if (c.gmres_max_iters < 1) fail("gmres_max_iters", "must be at least 1");
  if (!anchors.count(c.anchor)) fail("anchor", "unknown anchor mode '" + c.anchor + "'");
  if (c.anchor_index < 0) fail("anchor_index", "must be non-negative");
  for (double dt : c.sweep_dts) {
    if (!(dt > 0.0)) fail("sweep_dts", "time steps must be positive");
  }
  if (!(c.dt_ref >= 0.0)) fail("dt_ref", "must be non-negative (0 selects the default)");
  if (!decays.count(c.decay_function)) fail("decay_function", "unknown function '" + c.decay_function + "'");
  if (c.decay_level < 1 || c.decay_level > 8) fail("decay_level", "must be in 1..8");
  if (c.snapshot_every < 0) fail("snapshot_every", "must be non-negative");
  for (const auto& p : c.probes) {
    if (p.size() < d) fail("probes", "each probe needs one coordinate per axis");
    for (std::size_t a = 0; a < d; ++a) {
      if (p[a] < c.domain_lo[a] || p[a] > c.domain_hi[a]) fail("probes", "probe outside the domain");
    }
  }
}

}  // namespace

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::simulate: return "simulate";
    case RunMode::error_table: return "error-table";
    case RunMode::grid_validation: return "grid-validation";
    case RunMode::temporal_order: return "temporal-order";
    case RunMode::coeff_decay: return "coeff-decay";
  }
  return "simulate";
}

RunMode parse_mode(const std::string& s) {
  for (RunMode m : {RunMode::simulate, RunMode::error_table, RunMode::grid_validation,
                    RunMode::temporal_order, RunMode::coeff_decay}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'", 0, "mode");
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  LineMap lines;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header", lineno);
      section = trim(line.substr(1, line.size() - 2));
      if (section != "problem" && section != "numerics" && section != "outputs") {
        throw ConfigError("line " + std::to_string(lineno) + ": unknown section '" + section + "'", lineno, section);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'", lineno);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return key == f.key; });
    if (it == fs.end()) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'", lineno, key);
    }
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' appears before any section", lineno, key);
    }
    if (section != it->section) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' belongs in [" +
                            it->section + "], not [" + section + "]",
                        lineno, key);
    }
    if (lines.count(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'", lineno, key);
    }
    try {
      it->parse(c, value);
    } catch (const BadValue& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "': " + e.what, lineno, key);
    }
    lines[key] = lineno;
  }
  for (const char* req : {"dim", "t_final", "levels", "dt"}) {
    if (!lines.count(req)) throw ConfigError(std::string("missing required key '") + req + "'", 0, req);
  }
  validate_with_lines(c, lines);
  return c;
}

std::string emit_config(const RunConfig& c) {
  std::ostringstream os;
  for (const char* sec : {"problem", "numerics", "outputs"}) {
    os << '[' << sec << "]\n";
    for (const auto& f : fields()) {
      if (std::string(f.section) == sec) os << f.key << " = " << f.emit(c) << '\n';
    }
    if (std::string(sec) != "outputs") os << '\n';
  }
  return os.str();
}

void validate_config(const RunConfig& c) { validate_with_lines(c, {}); }

BidomainProblem to_problem(const RunConfig& c) {
  validate_config(c);
  BidomainProblem p;
  p.domain.dim = c.dim;
  for (int a = 0; a < c.dim; ++a) {
    p.domain.lo[a] = c.domain_lo[a];
    p.domain.hi[a] = c.domain_hi[a];
  }
  p.cm = c.cm;
  p.t_final = c.t_final;

  if (c.conductivity == "example3-conductivity") {
    p.conductivity = example3_conductivity();
  } else if (c.conductivity == "constant") {
    p.conductivity.intra_l = ScalarField::constant(c.sigma_il);
    p.conductivity.intra_t = ScalarField::constant(c.sigma_it);
    p.conductivity.extra_l = ScalarField::constant(c.sigma_el);
    p.conductivity.extra_t = ScalarField::constant(c.sigma_et);
  } else if (c.conductivity == "polynomial") {
    p.conductivity.intra_l = ScalarField::polynomial(0, c.poly_intra);
    p.conductivity.extra_l = ScalarField::polynomial(0, c.poly_extra);
    p.conductivity.intra_t = ScalarField::constant(c.sigma_it);
    p.conductivity.extra_t = ScalarField::constant(c.sigma_et);
  }

  p.ionic.a = c.ionic_a;
  p.ionic.gates.clear();
  for (std::size_t k = 0; k < c.gate_coupling.size(); ++k) {
    p.ionic.gates.push_back(GateParams{c.gate_coupling[k], c.gate_c1[k], c.gate_c2[k]});
  }

  auto stim = [&](const StimulusSpec& s) -> StimulusField {
    if (s.kind == "constant") return stimulus::Constant{s.amplitude};
    if (s.kind == "box") {
      stimulus::Box b;
      b.amplitude = s.amplitude;
      for (int a = 0; a < c.dim; ++a) {
        b.lo[a] = s.lo[a];
        b.hi[a] = s.hi[a];
      }
      b.t_start = s.window[0];
      b.t_end = s.window[1];
      return b;
    }
    return stimulus::Zero{};
  };
  p.stimulus.intra = stim(c.stim_intra);
  p.stimulus.extra = stim(c.stim_extra);

  if (c.v0 == "cosine") {
    initial::Cosine cos;
    cos.base = c.v0_value;
    cos.amplitude = c.v0_amplitude;
    cos.modes = {0, 0, 0};
    for (int a = 0; a < c.dim; ++a) cos.modes[a] = c.v0_modes[a];
    p.v0 = cos;
  } else {
    p.v0 = initial::Constant{c.v0_value};
  }
  p.w0.clear();
  for (double w : c.w0_value) p.w0.push_back(initial::Constant{w});
  p.validate();
  return p;
}

SteppingConfig to_stepping(const RunConfig& c) {
  SteppingConfig s;
  s.dt = c.dt;
  s.gmres.tol = c.gmres_tol;
  s.gmres.restart = c.gmres_restart;
  s.gmres.max_iters = c.gmres_max_iters;
  s.gmres.warm_start = c.warm_start;
  s.preconditioned = c.preconditioned;
  s.anchor = c.anchor == "zero-mean" ? AnchorMode::zero_mean : AnchorMode::point;
  s.anchor_index = static_cast<std::size_t>(c.anchor_index);
  s.snapshot_every = static_cast<std::size_t>(c.snapshot_every);
  return s;
}

std::vector<Point> probe_points(const RunConfig& c) {
  std::vector<Point> out;
  if (c.probes.empty()) {
    // Table abscissae, placed on the diagonal in 2D and 3D.
    for (const Point& p : default_probes_1d()) {
      Point q{0.0, 0.0, 0.0};
      for (int a = 0; a < c.dim; ++a) q[a] = c.domain_lo[a] + p[0] * (c.domain_hi[a] - c.domain_lo[a]);
      out.push_back(q);
    }
    return out;
  }
  for (const auto& v : c.probes) {
    Point q{0.0, 0.0, 0.0};
    for (int a = 0; a < c.dim; ++a) q[a] = v[a];
    out.push_back(q);
  }
  return out;
}

std::string describe_presets() {
  std::ostringstream os;
  os << "conductivity presets (key: conductivity)\n"
     << "  example-closure        D_i = D_e = 1.2e-3 on every axis\n"
     << "  example3-conductivity  d11 = 1.2e-3 (longitudinal), d22 = d33 = 2.5562e-4 (transverse),\n"
     << "                         both media\n"
     << "  constant               sigma_il, sigma_it, sigma_el, sigma_et (default 1.2e-3 each)\n"
     << "  polynomial             longitudinal fields are polynomials in x: poly_intra, poly_extra\n"
     << "                         (ascending coefficients, default 0, 1, -1 i.e. x(1-x));\n"
     << "                         transverse fields use sigma_it, sigma_et\n"
     << "ionic presets (key: ionic)\n"
     << "  fhn-cubic              f = v(v - a)(1 - v) - sum_k coupling_k w_k, g_k = c1_k v - c2_k w_k\n"
     << "                         ionic_a = 0.1, gate_coupling = 1, gate_c1 = 1, gate_c2 = 2\n"
     << "stimulus presets (keys: stim_intra, stim_extra)\n"
     << "  zero                   no applied current (default)\n"
     << "  constant               stim_*_amplitude everywhere, at all times\n"
     << "  box                    stim_*_amplitude inside [stim_*_lo, stim_*_hi] during stim_*_window\n"
     << "initial-data presets (key: v0; gating uses w0_value per component)\n"
     << "  constant               v0_value (default 0.2)\n"
     << "  cosine                 v0_value + v0_amplitude * prod_a cos(v0_modes[a] pi x_a)\n"
     << "u_e anchor modes (key: anchor)\n"
     << "  point                  u_e = 0 at collocation point anchor_index (default 0)\n"
     << "  zero-mean              u_e has zero mean over the collocation points\n"
     << "coefficient-decay functions (key: decay_function)\n"
     << "  abs-diff               |x - y| (default)\n"
     << "  sum                    x + y\n"
     << "  constant               1\n";
  return os.str();
}

}  // namespace haarsim
