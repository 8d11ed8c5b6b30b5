#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>

#include "harness.hpp"
#include "stirlab/correlations.hpp"
#include "stirlab/ctmc_engine.hpp"
#include "stirlab/discrete_profile.hpp"
#include "stirlab/exact_oracle.hpp"
#include "stirlab/fluctuations.hpp"
#include "stirlab/hydro_macro.hpp"
#include "stirlab/walk_kernels.hpp"

#ifndef STIRLAB_VERSION
#define STIRLAB_VERSION "0.0.0"
#endif

namespace stirlab::harness {

namespace fs = std::filesystem;

std::string version_string() { return STIRLAB_VERSION; }

unsigned effective_threads(unsigned configured) {
  if (const char* env = std::getenv("STIRRINGLAB_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw ConfigError("STIRRINGLAB_THREADS must be a non-negative integer");
    return static_cast<unsigned>(v);
  }
  return configured;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

void write_manifest(const std::string& out_dir, const ManifestInfo& info) {
  std::ofstream out(fs::path(out_dir) / "manifest.txt");
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  out << "# schema=manifest/v1\n";
  out << "command=" << info.command << '\n';
  out << "version=" << version_string() << '\n';
  out << "config_sha256=" << sha256_hex(info.config_text) << '\n';
  out << "master_seed=" << info.master_seed << '\n';
  out << "threads=" << info.threads << '\n';
  out << "argv=";
  for (std::size_t i = 0; i < info.argv.size(); ++i) out << (i ? " " : "") << info.argv[i];
  out << '\n';
  out << "outputs=";
  for (std::size_t i = 0; i < info.outputs.size(); ++i) out << (i ? "," : "") << info.outputs[i];
  out << '\n';
  out << "wall_seconds=" << info.wall_seconds << '\n';
  out << "written_at=" << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << '\n';
  out << "# config follows\n" << info.config_text;
  if (!info.config_text.empty() && info.config_text.back() != '\n') out << '\n';
}

namespace {

// Keys shared by the study commands.
const std::set<std::string> kModelKeys{"model.N", "model.N_list", "model.K", "model.j", "model.u0",
                                       "model.u0_args"};
const std::set<std::string> kRunKeys{"run.t_end", "run.snapshot_times", "run.M", "run.master_seed",
                                     "run.threads", "run.dense", "run.block_size"};

std::set<std::string> keys(std::initializer_list<std::set<std::string>> groups,
                           std::initializer_list<std::string> study) {
  std::set<std::string> all;
  for (const auto& g : groups) all.insert(g.begin(), g.end());
  all.insert(study.begin(), study.end());
  return all;
}

struct Model {
  int k;
  double j;
  InitialProfile u0;
};

Model read_model(const ExperimentConfig& cfg) {
  const auto k = cfg.get_int("model.K");
  const double j = cfg.get_double("model.j");
  std::vector<double> args;
  if (cfg.has("model.u0_args")) args = cfg.get_doubles("model.u0_args");
  try {
    auto u0 = make_profile(cfg.get_string("model.u0"), args);
    u0.validate();
    if (k < 1) throw ConfigError("key model.K: must be >= 1");
    if (j < 0.0) throw ConfigError("key model.j: must be >= 0");
    return {static_cast<int>(k), j, u0};
  } catch (const DomainError& e) {
    throw ConfigError(std::string("key model.u0: ") + e.what());
  }
}

int read_n(const ExperimentConfig& cfg) {
  const auto n = cfg.get_int("model.N");
  if (n < 1) throw ConfigError("key model.N: must be >= 1");
  return static_cast<int>(n);
}

std::vector<int> read_n_list(const ExperimentConfig& cfg) {
  auto ns = cfg.has("model.N_list") ? cfg.get_ints("model.N_list") : std::vector<int>{read_n(cfg)};
  if (ns.empty()) throw ConfigError("key model.N_list: empty");
  for (int n : ns) {
    if (n < 1) throw ConfigError("key model.N_list: entries must be >= 1");
  }
  if (!std::is_sorted(ns.begin(), ns.end())) throw ConfigError("key model.N_list: must be ascending");
  return ns;
}

ModelParams params_for(int n, const Model& m) {
  try {
    return ModelParams(n, m.k, m.j);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("model block: ") + e.what());
  }
}

std::vector<double> time_grid(const ExperimentConfig& cfg, const std::string& key) {
  auto ts = cfg.get_doubles(key);
  for (double t : ts) {
    if (!(t >= 0.0)) throw ConfigError("key " + key + ": times must be >= 0");
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ts;
}

std::vector<double> with_zero(std::vector<double> ts) {
  if (ts.empty() || ts.front() != 0.0) ts.insert(ts.begin(), 0.0);
  return ts;
}

EngineOptions read_engine(const ExperimentConfig& cfg, unsigned& threads_out) {
  EngineOptions eo;
  const auto threads = cfg.get_int("run.threads", 0);
  if (threads < 0) throw ConfigError("key run.threads: must be >= 0");
  eo.threads = effective_threads(static_cast<unsigned>(threads));
  eo.dense = cfg.get_bool("run.dense", false);
  const auto block = cfg.get_int("run.block_size", 64);
  if (block < 1) throw ConfigError("key run.block_size: must be >= 1");
  eo.block_size = static_cast<std::size_t>(block);
  threads_out = resolve_threads(eo.threads);
  return eo;
}

std::uint64_t read_seed(const ExperimentConfig& cfg) {
  const auto s = cfg.get_int("run.master_seed");
  if (s < 0) throw ConfigError("key run.master_seed: must be >= 0");
  return static_cast<std::uint64_t>(s);
}

std::size_t read_m(const ExperimentConfig& cfg, long long fallback = -1) {
  const auto m = fallback < 0 ? cfg.get_int("run.M") : cfg.get_int("run.M", fallback);
  if (m < 0) throw ConfigError("key run.M: must be >= 0");
  return static_cast<std::size_t>(m);
}

SitePattern read_pattern(const ExperimentConfig& cfg, const std::string& key) {
  try {
    return SitePattern::parse(cfg.get_string(key));
  } catch (const DomainError& e) {
    throw ConfigError("key " + key + ": " + e.what());
  }
}

StudyTemplate read_study(const ExperimentConfig& cfg, const Model& m, unsigned& threads) {
  StudyTemplate st;
  st.k = m.k;
  st.j = m.j;
  st.u0 = m.u0;
  st.master_seed = read_seed(cfg);
  st.engine = read_engine(cfg, threads);
  st.replicates = read_m(cfg, 0);
  st.pilot_replicates = static_cast<std::size_t>(cfg.get_int("study.pilot_M", 20'000));
  st.min_replicates = static_cast<std::size_t>(cfg.get_int("study.min_M", 1'000));
  st.max_replicates = static_cast<std::size_t>(cfg.get_int("study.max_M", 2'000'000));
  st.band_low = cfg.get_double("study.band_low", st.band_low);
  st.band_high = cfg.get_double("study.band_high", st.band_high);
  return st;
}

std::string join(const fs::path& dir, const std::string& name) { return (dir / name).string(); }

template <class Write>
void emit(const fs::path& dir, const std::string& name, std::vector<std::string>& outputs,
          Write&& write) {
  std::ofstream out(dir / name);
  if (!out) throw std::runtime_error("cannot write " + join(dir, name));
  write(out);
  outputs.push_back(name);
}

// ---------------------------------------------------------------------------

void cmd_simulate(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys, kRunKeys}, {"study.write_snapshots"}));
  const Model m = read_model(cfg);
  SimulationPlan plan{params_for(read_n(cfg), m), cfg.get_double("run.t_end"),
                      time_grid(cfg, "run.snapshot_times"), read_seed(cfg), read_m(cfg)};
  const bool snapshots = cfg.get_bool("study.write_snapshots", true);
  EngineOptions eo = read_engine(cfg, info.threads);
  try {
    plan.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("run block: ") + e.what());
  }
  info.master_seed = plan.master_seed;

  const int sites = plan.params.num_sites();
  std::vector<MomentAccumulator> means(plan.snapshot_times.size() * sites);
  std::ofstream snap;
  if (snapshots) {
    snap.open(dir / "snapshots.csv");
    write_snapshot_csv_header(snap);
    info.outputs.push_back("snapshots.csv");
  }
  simulate(
      plan, product_sampler(m.u0),
      [&](const TrajectoryRecord& r) {
        if (snapshots) write_snapshot_csv_rows(snap, r);
        for (std::size_t g = 0; g < r.snapshots.size(); ++g) {
          for (int i = 0; i < sites; ++i) means[g * sites + i].add(r.snapshots[g].config.raw()[i]);
        }
      },
      eo);
  emit(dir, "site_means.csv", info.outputs, [&](std::ostream& o) {
    o << "# schema=site_means/v1\nt,x,mean,stderr,samples\n";
    o.precision(17);
    for (std::size_t g = 0; g < plan.snapshot_times.size(); ++g) {
      for (int i = 0; i < sites; ++i) {
        const auto e = means[g * sites + i].estimate();
        o << plan.snapshot_times[g] << ',' << i - plan.params.n() << ',' << e.mean << ','
          << e.std_error << ',' << e.samples << '\n';
      }
    }
  });
}

void cmd_profile(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys}, {"run.snapshot_times", "study.integrator", "study.tolerance",
                                        "study.dt_scale"}));
  const Model m = read_model(cfg);
  const auto ns = read_n_list(cfg);
  const auto grid = with_zero(time_grid(cfg, "run.snapshot_times"));
  ProfileSolverOptions opt;
  try {
    opt.integrator = parse_integrator(cfg.get_string("study.integrator", "imex"));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("key study.integrator: ") + e.what());
  }
  opt.tolerance = cfg.get_double("study.tolerance", opt.tolerance);
  opt.dt_scale = cfg.get_double("study.dt_scale", opt.dt_scale);
  std::vector<ModelParams> params;
  for (int n : ns) params.push_back(params_for(n, m));

  std::ostringstream grad;
  grad << "# schema=gradient/v1\nN,t,sup_gradient\n";
  grad.precision(17);
  for (const auto& p : params) {
    const auto prof = solve_rho_eps(p, m.u0, grid, opt);
    emit(dir, "profile_N" + std::to_string(p.n()) + ".csv", info.outputs,
         [&](std::ostream& o) { write_profile_csv(o, prof); });
    const auto g = discrete_gradient_stats(prof);
    for (std::size_t i = 0; i < g.size(); ++i) grad << p.n() << ',' << grid[i] << ',' << g[i] << '\n';
  }
  emit(dir, "gradient.csv", info.outputs, [&](std::ostream& o) { o << grad.str(); });
}

void cmd_hydro(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys}, {"run.snapshot_times", "study.method", "study.mesh_nodes",
                                        "study.dt", "study.time_nodes"}));
  const Model m = read_model(cfg);
  const auto grid = with_zero(time_grid(cfg, "run.snapshot_times"));
  const std::string method = cfg.get_string("study.method", "robin");
  if (method != "robin" && method != "integral" && method != "both") {
    throw ConfigError("key study.method: expected robin, integral or both");
  }
  RobinOptions ro;
  ro.mesh_nodes = static_cast<int>(cfg.get_int("study.mesh_nodes", ro.mesh_nodes));
  ro.dt = cfg.get_double("study.dt", 0.0);
  IntegralFormOptions io;
  io.mesh_nodes = ro.mesh_nodes;
  io.time_nodes = static_cast<int>(cfg.get_int("study.time_nodes", io.time_nodes));
  std::vector<int> ns;
  if (cfg.has("model.N_list") || cfg.has("model.N")) ns = read_n_list(cfg);
  for (int n : ns) params_for(n, m);

  std::optional<MacroSolution> robin, integral;
  if (method != "integral") {
    robin = solve_robin(m.u0, m.k, m.j, grid, ro);
    emit(dir, "macro.csv", info.outputs, [&](std::ostream& o) { write_macro_csv(o, *robin); });
  }
  if (method != "robin") {
    integral = solve_integral_form(m.u0, m.k, m.j, grid, io);
    emit(dir, "macro_integral.csv", info.outputs,
         [&](std::ostream& o) { write_macro_csv(o, *integral); });
  }
  if (robin && integral) {
    emit(dir, "solver_difference.csv", info.outputs, [&](std::ostream& o) {
      o << "# schema=solver_difference/v1\nt,sup_difference\n";
      o.precision(17);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double d = 0.0;
        const auto a = robin->slice(g);
        const auto b = integral->slice(g);
        for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
        o << grid[g] << ',' << d << '\n';
      }
    });
  }
  if (!ns.empty()) {
    const MacroSolution& macro = robin ? *robin : *integral;
    emit(dir, "hydro_convergence.csv", info.outputs, [&](std::ostream& o) {
      o << "# schema=hydro_convergence/v1\nN,t,sup_error\n";
      o.precision(17);
      for (int n : ns) {
        const auto prof = solve_rho_eps(params_for(n, m), m.u0, grid);
        for (std::size_t g = 0; g < grid.size(); ++g) {
          double e = 0.0;
          for (Site x = -n; x <= n; ++x) {
            e = std::max(e, std::abs(prof.at(g, x) - macro.value(g, static_cast<double>(x) / n)));
          }
          o << n << ',' << grid[g] << ',' << e << '\n';
        }
      }
    });
  }
}

void emit_scaling(const fs::path& dir, ManifestInfo& info, const ScalingReport& r) {
  emit(dir, "scaling.csv", info.outputs, [&](std::ostream& o) { write_scaling_csv(o, r); });
  emit(dir, "summary.csv", info.outputs, [&](std::ostream& o) {
    const ScalingReport one[] = {r};
    write_scaling_summary_csv(o, one);
  });
}

const std::set<std::string> kStudyBudgetKeys{"study.pilot_M", "study.min_M", "study.max_M",
                                             "study.band_low", "study.band_high"};

void cmd_vstudy(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info, bool gradient) {
  auto allowed = keys({kModelKeys, kRunKeys, kStudyBudgetKeys}, {"study.pattern", "study.t"});
  cfg.require_known(allowed);
  const Model m = read_model(cfg);
  const auto ns = read_n_list(cfg);
  for (int n : ns) params_for(n, m);
  const auto pattern = read_pattern(cfg, "study.pattern");
  const double t = cfg.get_double("study.t");
  if (!(t > 0.0)) throw ConfigError("key study.t: must be > 0");
  const auto st = read_study(cfg, m, info.threads);
  info.master_seed = st.master_seed;
  const auto report =
      gradient ? gradient_v_study(pattern, t, ns, st) : scaling_study(pattern, t, ns, st);
  emit_scaling(dir, info, report);
}

void cmd_stdecay(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys, kRunKeys, kStudyBudgetKeys},
                         {"study.y_pattern", "study.x_pattern", "study.s", "study.gaps",
                          "study.plateau_gap"}));
  const Model m = read_model(cfg);
  const auto y = read_pattern(cfg, "study.y_pattern");
  const auto x = read_pattern(cfg, "study.x_pattern");
  const double s = cfg.get_double("study.s");
  if (!(s > 0.0)) throw ConfigError("key study.s: must be > 0");
  const auto st = read_study(cfg, m, info.threads);
  info.master_seed = st.master_seed;
  std::optional<std::vector<double>> gaps;
  if (cfg.has("study.gaps")) {
    gaps = cfg.get_doubles("study.gaps");
    for (double g : *gaps) {
      if (!(g > 0.0)) throw ConfigError("key study.gaps: gaps must be positive");
    }
  }
  std::optional<double> plateau;
  if (cfg.has("study.plateau_gap")) plateau = cfg.get_double("study.plateau_gap");
  if (!gaps && !plateau) throw ConfigError("missing key study.gaps (or study.plateau_gap)");
  const auto ns = read_n_list(cfg);
  for (int n : ns) params_for(n, m);
  if (gaps) {
    const auto report = spacetime_decay_study(y, s, x, *gaps, ns.back(), st);
    emit(dir, "decay.csv", info.outputs, [&](std::ostream& o) { write_decay_csv(o, report); });
  }
  if (plateau) emit_scaling(dir, info, spacetime_scaling_study(y, s, x, *plateau, ns, st));
}

std::vector<FieldItem> read_functions(const ExperimentConfig& cfg, const MacroSolution& macro) {
  if (cfg.has("study.registry")) {
    std::ifstream in(cfg.get_string("study.registry"));
    if (!in) throw ConfigError("key study.registry: cannot open " + cfg.get_string("study.registry"));
    return parse_test_function_registry(in, &macro);
  }
  // Inline registry: "id = spec; id = spec".
  std::string text = cfg.get_string("study.functions");
  std::replace(text.begin(), text.end(), ';', '\n');
  std::istringstream in(text);
  return parse_test_function_registry(in, &macro);
}

// "H@0.5,G@0.25; H@0.5,H@0.5".
std::vector<FieldPair> read_pairs(const ExperimentConfig& cfg, const std::vector<FieldItem>& items) {
  std::vector<FieldPair> pairs;
  std::stringstream all(cfg.get_string("study.pairs"));
  std::string entry;
  auto index_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].id == id) return i;
    }
    throw ConfigError("key study.pairs: unknown test function '" + id + "'");
  };
  auto side = [&](std::string v) {
    v.erase(std::remove_if(v.begin(), v.end(), ::isspace), v.end());
    const auto at = v.find('@');
    if (at == std::string::npos) throw ConfigError("key study.pairs: expected id@time in '" + v + "'");
    try {
      return std::pair{index_of(v.substr(0, at)), std::stod(v.substr(at + 1))};
    } catch (const std::invalid_argument&) {
      throw ConfigError("key study.pairs: bad time in '" + v + "'");
    }
  };
  while (std::getline(all, entry, ';')) {
    if (entry.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = entry.find(',');
    if (comma == std::string::npos) throw ConfigError("key study.pairs: expected 'H@t,G@s'");
    auto [h, t] = side(entry.substr(0, comma));
    auto [g, s] = side(entry.substr(comma + 1));
    if (s > t) {
      std::swap(h, g);
      std::swap(s, t);
    }
    pairs.push_back({h, t, g, s});
  }
  if (pairs.empty()) throw ConfigError("key study.pairs: no pairs");
  return pairs;
}

void cmd_field(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys, kRunKeys},
                         {"study.functions", "study.registry", "study.pairs", "study.mesh_nodes",
                          "study.boundary_weight", "study.domain", "study.clock",
                          "study.macro_slices"}));
  const Model m = read_model(cfg);
  const auto params = params_for(read_n(cfg), m);
  const auto seed = read_seed(cfg);
  const std::size_t reps = read_m(cfg);
  EngineOptions eo = read_engine(cfg, info.threads);
  info.master_seed = seed;
  OuOracleOptions oo;
  const auto weight = cfg.get_string("study.boundary_weight", "half");
  if (weight == "half") {
    oo.boundary_weight = BoundaryWeight::Half;
  } else if (weight == "full") {
    oo.boundary_weight = BoundaryWeight::Full;
  } else {
    throw ConfigError("key study.boundary_weight: expected half or full");
  }
  const auto domain = cfg.get_string("study.domain", "full");
  if (domain == "full") {
    oo.domain = OracleDomain::Full;
  } else if (domain == "unit") {
    oo.domain = OracleDomain::Unit;
  } else {
    throw ConfigError("key study.domain: expected full or unit");
  }
  const auto clock = cfg.get_string("study.clock", "backward");
  if (clock == "backward") {
    oo.clock = SemigroupClock::Backward;
  } else if (clock == "forward") {
    oo.clock = SemigroupClock::Forward;
  } else {
    throw ConfigError("key study.clock: expected backward or forward");
  }
  RobinOptions ro;
  ro.mesh_nodes = static_cast<int>(cfg.get_int("study.mesh_nodes", ro.mesh_nodes));
  const auto slices = cfg.get_int("study.macro_slices", 128);
  if (slices < 1) throw ConfigError("key study.macro_slices: must be >= 1");
  if (!cfg.has("study.functions") && !cfg.has("study.registry")) {
    throw ConfigError("missing key study.functions (or study.registry)");
  }
  cfg.get_string("study.pairs");

  // The blends need the macroscopic solution, so pairs are parsed after it.
  double t_max = 0.0;
  {
    std::stringstream all(cfg.get_string("study.pairs"));
    std::string entry;
    while (std::getline(all, entry, ';')) {
      std::stringstream sides(entry);
      std::string side;
      while (std::getline(sides, side, ',')) {
        const auto at = side.find('@');
        if (at == std::string::npos) continue;
        try {
          t_max = std::max(t_max, std::stod(side.substr(at + 1)));
        } catch (const std::exception&) {
          throw ConfigError("key study.pairs: bad time in '" + side + "'");
        }
      }
    }
  }
  if (!(t_max > 0.0)) throw ConfigError("key study.pairs: needs a positive time");
  std::vector<double> grid;
  const int steps = static_cast<int>(std::ceil(t_max * slices));
  for (int i = 0; i <= steps; ++i) grid.push_back(std::min(t_max, static_cast<double>(i) / slices));
  const auto macro = solve_robin(m.u0, m.k, m.j, grid, ro);
  const auto items = read_functions(cfg, macro);
  const auto pairs = read_pairs(cfg, items);

  std::vector<double> times{0.0};
  for (const auto& p : pairs) {
    times.push_back(p.t);
    times.push_back(p.s);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  SimulationPlan plan{params, times.back(), times, seed, reps};
  auto rows = empirical_field_covariance(plan, product_sampler(m.u0),
                                         solve_rho_eps(params, m.u0, times), items, pairs, eo);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& p = pairs[i];
    const auto o = ou_covariance_oracle(items[p.h_index].h, p.t, items[p.g_index].h, p.s, macro, m.u0, oo);
    rows[i].oracle = o.value;
    rows[i].zscore = (rows[i].empirical - o.value) / rows[i].std_error;
  }
  emit(dir, "covariance.csv", info.outputs, [&](std::ostream& o) { write_covariance_csv(o, rows); });
}

void cmd_oracle(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known(keys({kModelKeys}, {"study.times", "study.patterns"}));
  const Model m = read_model(cfg);
  const auto params = params_for(read_n(cfg), m);
  const auto times = with_zero(time_grid(cfg, "study.times"));
  std::vector<SitePattern> patterns;
  {
    std::stringstream all(cfg.get_string("study.patterns", ""));
    std::string p;
    while (std::getline(all, p, ';')) {
      if (p.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        patterns.push_back(SitePattern::parse(p.substr(p.find_first_not_of(" \t"))));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("key study.patterns: ") + e.what());
      }
    }
  }
  const auto gen = build_generator(params);
  const auto init = product_distribution(params, m.u0);
  const auto centering = solve_rho_eps(params, m.u0, times);
  std::vector<GoldenValue> rows;
  for (std::size_t g = 0; g < times.size(); ++g) {
    const auto law = exact_distribution(gen, init, times[g]);
    const auto means = exact_site_means(gen, law);
    for (Site x = -params.n(); x <= params.n(); ++x) {
      rows.push_back({params.num_sites(), m.k, m.j, times[g], {x}, "none", means[x + params.n()]});
    }
    for (const auto& pat : patterns) {
      const auto sites = pat.sites(params.n());
      std::vector<double> c;
      for (Site x : sites) c.push_back(centering.at(g, x));
      rows.push_back({params.num_sites(), m.k, m.j, times[g], sites, "rho_eps",
                      expect_centered_product(gen, law, sites, c)});
    }
  }
  emit(dir, "golden.csv", info.outputs, [&](std::ostream& o) { write_golden_csv(o, rows); });
}

void cmd_kernels(const ExperimentConfig& cfg, const fs::path& dir, ManifestInfo& info) {
  cfg.require_known({"model.N_list", "study.t_grid", "study.window_exponent", "study.liggett_N",
                     "study.write_tables"});
  const auto ns = cfg.get_ints("model.N_list");
  const auto ts = cfg.get_doubles("study.t_grid");
  for (double t : ts) {
    if (!(t > 0.0)) throw ConfigError("key study.t_grid: times must be > 0");
  }
  KernelBoundOptions ko;
  ko.window_exponent = cfg.get_double("study.window_exponent", 0.5);
  std::vector<int> liggett_ns;
  if (cfg.has("study.liggett_N")) liggett_ns = cfg.get_ints("study.liggett_N");
  const bool tables = cfg.get_bool("study.write_tables", false);

  emit(dir, "kernel_agreement.csv", info.outputs, [&](std::ostream& o) {
    o << "# schema=kernel_agreement/v1\nN,t,max_difference,tail_bound\n";
    for (int n : ns) {
      for (double t : ts) {
        const auto a = reflected_kernel(t, n);
        const auto b = image_sum_kernel(t, n);
        double d = 0.0;
        for (std::size_t i = 0; i < a.data().size(); ++i) {
          d = std::max(d, std::abs(a.data()[i] - b.table.data()[i]));
        }
        o << n << ',' << t << ',' << d << ',' << b.tail_bound << '\n';
        if (tables) {
          emit(dir, "kernel_N" + std::to_string(n) + "_t" + std::to_string(t) + ".csv",
               info.outputs, [&](std::ostream& k) { write_kernel_csv(k, a); });
        }
      }
    }
  });
  emit(dir, "kernel_bounds.csv", info.outputs, [&](std::ostream& o) {
    write_kernel_bounds_csv(o, check_kernel_bounds(ns, ts, ko));
  });
  if (!liggett_ns.empty()) {
    emit(dir, "liggett.csv", info.outputs, [&](std::ostream& o) {
      o << "# schema=liggett/v1\nN,particles,t,pairs,min_slack,holds\n";
      for (int n : liggett_ns) {
        for (int k : {1, 2, 3}) {
          for (double t : ts) {
            const auto r = check_liggett(ModelParams(n, 1, 0.0), t, k);
            o << n << ',' << k << ',' << t << ',' << r.pairs_checked << ',' << r.min_slack << ','
              << r.holds << '\n';
          }
        }
      }
    });
  }
}

}  // namespace

void run_command(const std::string& command, const ExperimentConfig& config,
                 const std::string& out_dir, const std::vector<std::string>& argv) {
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  ManifestInfo info;
  info.command = command;
  info.config_text = config.text();
  info.argv = argv;
  const auto start = std::chrono::steady_clock::now();
  if (command == "simulate") {
    cmd_simulate(config, dir, info);
  } else if (command == "profile") {
    cmd_profile(config, dir, info);
  } else if (command == "hydro") {
    cmd_hydro(config, dir, info);
  } else if (command == "vstudy") {
    cmd_vstudy(config, dir, info, false);
  } else if (command == "gradstudy") {
    cmd_vstudy(config, dir, info, true);
  } else if (command == "stdecay") {
    cmd_stdecay(config, dir, info);
  } else if (command == "field") {
    cmd_field(config, dir, info);
  } else if (command == "oracle") {
    cmd_oracle(config, dir, info);
  } else if (command == "kernels") {
    cmd_kernels(config, dir, info);
  } else {
    throw ConfigError("unknown command " + command);
  }
  info.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(out_dir, info);
}

int main_entry(int argc, char** argv, bool accept_only) {
  CLI::App app{accept_only ? "stirlab acceptance suite" : "stirlab experiment runner"};
  app.set_version_flag("--version", version_string());
  std::vector<std::string> args(argv, argv + argc);

  std::string suite = "primary";
  std::vector<int> only;
  std::string accept_out;
  int accept_threads = 0;
  auto add_accept_options = [&](CLI::App* a) {
    a->add_option("--suite", suite, "acceptance suite")->check(CLI::IsMember({"primary"}));
    a->add_option("--only", only, "criterion ids to run")->delimiter(',');
    a->add_option("--out", accept_out, "directory for acceptance CSVs");
    a->add_option("--threads", accept_threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
  };

  std::string config_path, out_dir = "out";
  std::vector<std::pair<std::string, CLI::App*>> studies;
  CLI::App* accept = nullptr;
  if (accept_only) {
    add_accept_options(&app);
  } else {
    app.require_subcommand(1);
    for (const char* name : {"simulate", "profile", "hydro", "vstudy", "stdecay", "gradstudy",
                             "field", "oracle", "kernels"}) {
      auto* sub = app.add_subcommand(name, std::string("run the ") + name + " study");
      sub->add_option("-c,--config", config_path, "experiment config file")->required();
      sub->add_option("-o,--out", out_dir, "output directory");
      studies.emplace_back(name, sub);
    }
    accept = app.add_subcommand("accept", "run the acceptance suite");
    add_accept_options(accept);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (accept_only || (accept && accept->parsed())) {
      AcceptanceOptions opt;
      opt.only.insert(only.begin(), only.end());
      opt.threads = effective_threads(static_cast<unsigned>(accept_threads));
      opt.out_dir = accept_out;
      const auto results = run_acceptance(opt, std::cout);
      int passed = 0;
      for (const auto& r : results) passed += r.pass;
      std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
      return acceptance_exit_code(results);
    }
    for (const auto& [name, sub] : studies) {
      if (!sub->parsed()) continue;
      const auto cfg = ExperimentConfig::load(config_path);
      run_command(name, cfg, out_dir, args);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return kExitCapacity;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAssertion;
  }
}

}  // namespace stirlab::harness
