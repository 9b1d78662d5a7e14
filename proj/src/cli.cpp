#include "haarsim/cli.hpp"

#include "haarsim/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#ifndef HAARSIM_VERSION
#define HAARSIM_VERSION "0.0.0"
#endif

namespace haarsim {

namespace fs = std::filesystem;

namespace {

/// Collects output files so the manifest can list exactly what was written.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  void write(const std::string& name, const std::string& content) {
    write_atomic(root_ / name, content);
    records_.push_back(FileRecord{name, content.size(), sha256_hex(content)});
  }
  const std::vector<FileRecord>& records() const { return records_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::vector<FileRecord> records_;
};

std::string coord_header(int dim) {
  static const char* names[] = {"x", "y", "z"};
  std::string h;
  for (int a = 0; a < dim; ++a) h += std::string(names[a]) + ",";
  return h;
}

std::string snapshot_csv(const CollocationStepper& st, const BidomainState& s) {
  std::ostringstream os;
  os << coord_header(st.dim()) << "v,ue";
  if (s.w.size() == 1) {
    os << ",w";
  } else {
    for (std::size_t k = 0; k < s.w.size(); ++k) os << ",w" << k + 1;
  }
  os << '\n';
  for (std::size_t p = 0; p < st.points(); ++p) {
    const Point x = st.point(p);
    const auto i = static_cast<Eigen::Index>(p);
    for (int a = 0; a < st.dim(); ++a) os << format_number(x[a]) << ',';
    os << format_number(s.v[i]) << ',' << format_number(s.ue[i]);
    for (const auto& w : s.w) os << ',' << format_number(w[i]);
    os << '\n';
  }
  return os.str();
}

std::string plot_csv(const CollocationStepper& st, const Eigen::VectorXd& f, const char* name) {
  std::ostringstream os;
  os << coord_header(st.dim()) << name << '\n';
  for (std::size_t p = 0; p < st.points(); ++p) {
    const Point x = st.point(p);
    for (int a = 0; a < st.dim(); ++a) os << format_number(x[a]) << ',';
    os << format_number(f[static_cast<Eigen::Index>(p)]) << '\n';
  }
  return os.str();
}

std::string pad_step(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%07zu", s);
  return buf;
}

std::function<double(double, double)> decay_function(const std::string& name) {
  if (name == "sum") return [](double x, double y) { return x + y; };
  if (name == "constant") return [](double, double) { return 1.0; };
  return [](double x, double y) { return std::abs(x - y); };
}

/// True when the config text sets `mode` itself (keys are unique across sections).
bool sets_mode(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = line.substr(0, line.find('#'));
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t\r") + 1);
    if (key == "mode") return true;
  }
  return false;
}

// Six significant digits for human-readable summaries.
std::string brief(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string describe(const ConvergenceReport& r) {
  std::ostringstream os;
  os << r.parameter << " sweep:";
  for (std::size_t i = 0; i < r.errors.size(); ++i) {
    os << ' ' << brief(r.sweep[i]) << "->" << r.errors[i];
  }
  os << "; fitted slope " << r.fitted_order;
  if (!r.note.empty()) os << " (" << r.note << ")";
  return os.str();
}

void run_simulate(const RunConfig& cfg, const BidomainProblem& problem, OutputDir& out,
                  RunManifest& m) {
  CollocationStepper st(problem, cfg.levels, to_stepping(cfg));
  const Trajectory tr = st.run();
  for (const auto& s : tr.snapshots) {
    out.write("snapshot_" + pad_step(s.step) + ".csv", snapshot_csv(st, s));
  }
  const BidomainState& last = tr.snapshots.back();
  out.write("plot_v.csv", plot_csv(st, last.v, "v"));
  out.write("plot_ue.csv", plot_csv(st, last.ue, "ue"));

  std::ostringstream diag;
  diag << "step,t,gating_iterations,vue_iterations,vue_relative_residual\n";
  for (const auto& d : tr.diagnostics) {
    StepRecord r;
    r.step = d.step;
    for (const auto& g : d.gating) r.gating_iterations += g.iterations;
    if (d.vue) {
      r.vue_iterations = d.vue->iterations;
      r.vue_residual = d.vue->final_relative_residual;
    }
    m.steps.push_back(r);
    diag << r.step << ',' << format_number(st.time_at(r.step)) << ',' << r.gating_iterations << ','
         << r.vue_iterations << ',' << format_number(r.vue_residual) << '\n';
  }
  out.write("diagnostics.csv", diag.str());
  m.solver.add(tr);
  m.summary.push_back("simulated " + std::to_string(tr.diagnostics.size()) + " steps on " +
                      std::to_string(st.points()) + " collocation points");
  if (tr.failed) {
    m.failure_step = tr.failure_step;
    m.failure_message = tr.failure_message;
    m.exit_code = exit_solver;
  }
}

void run_error_table(const RunConfig& cfg, const BidomainProblem& problem, const ExecuteOptions& opt,
                     OutputDir& out, RunManifest& m) {
  const SteppingConfig base = to_stepping(cfg);
  const std::vector<double>& dts = cfg.sweep_dts;
  if (dts.empty()) throw ConfigError("key 'sweep_dts': error-table needs at least one dt", 0, "sweep_dts");
  const double dt_ref = cfg.dt_ref > 0.0 ? cfg.dt_ref : *std::min_element(dts.begin(), dts.end()) / 10.0;
  const std::vector<int> ref_levels = cfg.ref_levels.empty() ? cfg.levels : cfg.ref_levels;

  std::vector<FieldSet> runs(dts.size());
  FieldSet reference;
  std::vector<SolverSummary> sums(dts.size() + 1);
  parallel_for(dts.size() + 1, opt.jobs, [&](std::size_t i) {
    if (i == dts.size()) {
      const Trajectory tr = reference_run(problem, ref_levels, dt_ref, base, dts);
      SteppingConfig c = base;
      c.dt = dt_ref;
      reference = final_fields(CollocationStepper(problem, ref_levels, c), tr);
      sums[i].add(tr);
      return;
    }
    SteppingConfig c = base;
    c.dt = dts[i];
    c.snapshot_every = 0;
    CollocationStepper st(problem, cfg.levels, c);
    const Trajectory tr = st.run();
    if (tr.failed) throw StepError(tr.failure_message, tr.failure_step);
    runs[i] = final_fields(st, tr);
    sums[i].add(tr);
  });
  for (const auto& s : sums) m.solver.merge(s);

  const std::vector<Point> probes = opt.seed_probes ? *opt.seed_probes : probe_points(cfg);
  const ErrorReport rep = error_table(runs, dts, reference, probes);
  out.write("error_table_v.csv", error_table_csv(rep, TableField::v));
  out.write("error_table_ue.csv", error_table_csv(rep, TableField::ue));
  out.write("error_norms.csv", norm_table_csv(rep));

  if (dts.size() < 3) {
    m.summary.push_back("fewer than three time steps: no trend check");
    return;
  }
  const ConvergenceReport trend = temporal_order(dts, [&](double dt) {
    const auto i = static_cast<std::size_t>(std::find(dts.begin(), dts.end(), dt) - dts.begin());
    return rep.norms[i].linf_v;
  });
  out.write("temporal_trend.csv", convergence_csv(trend));
  m.summary.push_back("L-infinity v errors against dt_ref = " + brief(dt_ref) + ": " +
                      describe(trend));
  m.check_passed = trend.passed;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_atomic(const fs::path& p, const std::string& content) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::vector<Point> parse_probe_list(const std::string& s, int dim) {
  RunConfig probe_cfg;
  std::string text = "[problem]\ndim = " + std::to_string(dim) +
                     "\nt_final = 0\n[numerics]\nlevels = 0\ndt = 1\n[outputs]\nprobes = " + s + "\n";
  try {
    probe_cfg = parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("--seed-probes: ") + e.what(), 0, "seed-probes");
  }
  if (probe_cfg.probes.empty()) throw ConfigError("--seed-probes: no probe points given", 0, "seed-probes");
  return probe_points(probe_cfg);
}

std::string manifest_json(const RunManifest& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["tool"] = "haarsim";
  j["tool_version"] = m.tool_version;
  j["mode"] = m.mode;
  j["exit_code"] = m.exit_code;
  j["duration_seconds"] = m.duration_seconds;
  if (m.check_passed) j["check_passed"] = *m.check_passed;
  if (m.failure_step) j["failure"] = {{"step", *m.failure_step}, {"message", m.failure_message}};
  else if (!m.failure_message.empty()) j["failure"] = {{"message", m.failure_message}};
  j["summary"] = m.summary;
  j["solver"] = {{"solves", m.solver.solves},
                 {"max_iterations", m.solver.max_iterations},
                 {"max_relative_residual", m.solver.max_residual},
                 {"all_converged", m.solver.all_converged}};
  ordered_json steps = ordered_json::array();
  for (const auto& s : m.steps) {
    steps.push_back({{"step", s.step},
                     {"gating_iterations", s.gating_iterations},
                     {"vue_iterations", s.vue_iterations},
                     {"vue_relative_residual", s.vue_residual}});
  }
  j["steps"] = steps;
  auto files = [](const std::vector<FileRecord>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& f : v) a.push_back({{"name", f.name}, {"bytes", f.bytes}, {"sha256", f.sha256}});
    return a;
  };
  j["files"] = files(m.files);
  j["other_files"] = files(m.other_files);
  j["config"] = m.config_echo;
  return j.dump(2) + "\n";
}

RunManifest execute(const RunConfig& cfg, const ExecuteOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  RunManifest m;
  m.tool_version = HAARSIM_VERSION;
  m.mode = to_string(cfg.mode);
  m.config_echo = emit_config(cfg);
  OutputDir out(opt.out_dir);

  try {
    const BidomainProblem problem = to_problem(cfg);
    switch (cfg.mode) {
      case RunMode::simulate:
        run_simulate(cfg, problem, out, m);
        break;
      case RunMode::error_table:
        run_error_table(cfg, problem, opt, out, m);
        break;
      case RunMode::grid_validation: {
        const ConvergenceReport r = grid_validation(problem, cfg.sweep_levels, to_stepping(cfg), opt.jobs);
        out.write("grid_validation.csv", convergence_csv(r));
        m.solver = r.solver;
        m.summary.push_back("X-norm errors against J = " + std::to_string(cfg.sweep_levels.back()) +
                            ": " + describe(r));
        m.summary.push_back(r.selected ? "smallest level within 2x of the finest compared: J = " +
                                             brief(*r.selected)
                                       : std::string("no level within 2x of the finest compared"));
        m.check_passed = r.passed;
        break;
      }
      case RunMode::temporal_order: {
        const ConvergenceReport r =
            temporal_order(problem, cfg.levels, cfg.sweep_dts, to_stepping(cfg), cfg.dt_ref, opt.jobs);
        out.write("temporal_order.csv", convergence_csv(r));
        m.solver = r.solver;
        m.summary.push_back("L-infinity v errors: " + describe(r));
        m.check_passed = r.passed;
        break;
      }
      case RunMode::coeff_decay: {
        const ConvergenceReport r =
            coefficient_decay_check(decay_function(cfg.decay_function), cfg.decay_level);
        out.write("coeff_decay.csv", convergence_csv(r));
        m.summary.push_back("max |<f, h x h>| per level: " + describe(r));
        m.check_passed = r.passed;
        break;
      }
    }
    if (m.exit_code == exit_ok && m.check_passed && !*m.check_passed) m.exit_code = exit_check;
  } catch (const ConfigError& e) {
    m.exit_code = exit_config;
    m.failure_message = e.what();
  } catch (const DomainError& e) {
    m.exit_code = exit_config;
    m.failure_message = e.what();
  } catch (const StepError& e) {
    m.exit_code = exit_solver;
    m.failure_step = e.step();
    m.failure_message = e.what();
  } catch (const AssemblyError& e) {
    m.exit_code = exit_solver;
    m.failure_message = e.what();
  } catch (const NumericalError& e) {
    m.exit_code = exit_solver;
    m.failure_message = e.what();
  }

  m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.files = out.records();
  std::set<std::string> ours;
  for (const auto& f : m.files) ours.insert(f.name);
  for (const auto& entry : fs::directory_iterator(out.root())) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name == "manifest.json" || ours.count(name)) continue;
    m.other_files.push_back(FileRecord{name, entry.file_size(), sha256_file(entry.path())});
  }
  std::sort(m.other_files.begin(), m.other_files.end(),
            [](const FileRecord& a, const FileRecord& b) { return a.name < b.name; });
  write_atomic(out.root() / "manifest.json", manifest_json(m));

  if (opt.log) {
    auto paint = [&](const char* code, const std::string& s) {
      return opt.color ? std::string("\033[") + code + "m" + s + "\033[0m" : s;
    };
    for (const auto& line : m.summary) *opt.log << line << '\n';
    if (m.check_passed) {
      *opt.log << (*m.check_passed ? paint("32", "PASS") : paint("31", "FAIL")) << ' ' << m.mode << '\n';
    }
    if (!m.failure_message.empty()) *opt.log << paint("31", "error: ") << m.failure_message << '\n';
  }
  return m;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Haar wavelet collocation solver for the degenerate bidomain system"};
  app.set_version_flag("--version", std::string(HAARSIM_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = 1;
  std::string seed_probes;

  std::vector<std::pair<CLI::App*, RunMode>> modes;
  for (RunMode mode : {RunMode::simulate, RunMode::error_table, RunMode::grid_validation,
                       RunMode::temporal_order, RunMode::coeff_decay}) {
    CLI::App* sub = app.add_subcommand(to_string(mode), "run in " + to_string(mode) + " mode");
    sub->add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--jobs", jobs, "parallel simulations in sweeps")->check(CLI::PositiveNumber);
    sub->add_option("--seed-probes", seed_probes, "probe points 'x[,y[,z]]; ...' overriding the config");
    modes.emplace_back(sub, mode);
  }
  CLI::App* presets = app.add_subcommand("presets", "list conductivity, ionic, stimulus and anchor presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  if (presets->parsed()) {
    std::cout << describe_presets();
    return exit_ok;
  }

  const bool color = std::getenv("NO_COLOR") == nullptr && isatty(fileno(stderr));
  auto error = [&](const std::string& msg) {
    std::cerr << (color ? "\033[31merror:\033[0m " : "error: ") << msg << '\n';
  };

  RunMode mode = RunMode::simulate;
  for (const auto& [sub, m] : modes) {
    if (sub->parsed()) mode = m;
  }

  RunConfig cfg;
  ExecuteOptions opt;
  try {
    std::ifstream in(config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    cfg = parse_config(ss.str());
    if (sets_mode(ss.str()) && cfg.mode != mode) {
      throw ConfigError("config sets mode = " + to_string(cfg.mode) + " but the command is " +
                            to_string(mode),
                        0, "mode");
    }
    cfg.mode = mode;
    if (!seed_probes.empty()) opt.seed_probes = parse_probe_list(seed_probes, cfg.dim);
  } catch (const ConfigError& e) {
    error(std::string("config: ") + e.what());
    return exit_config;
  }
  opt.out_dir = out_dir;
  opt.jobs = jobs;
  opt.log = &std::cerr;
  opt.color = color;
  try {
    const RunManifest m = execute(cfg, opt);
    return m.exit_code;
  } catch (const std::exception& e) {
    error(e.what());
    return exit_solver;
  }
}

}  // namespace haarsim
