#include <gsl/gsl_cdf.h>
#include <gsl/gsl_fit.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "harness.hpp"
#include "stirlab/correlations.hpp"
#include "stirlab/ctmc_engine.hpp"
#include "stirlab/discrete_profile.hpp"
#include "stirlab/exact_oracle.hpp"
#include "stirlab/fluctuations.hpp"
#include "stirlab/hydro_macro.hpp"
#include "stirlab/walk_kernels.hpp"

namespace stirlab::harness {

namespace {

constexpr std::uint64_t kSeedBase = 0x5eed'2026'0000ULL;

std::uint64_t seed_for(int criterion) { return kSeedBase + static_cast<std::uint64_t>(criterion); }

InitialProfile ramp_profile() { return linear_profile(0.25, 0.25); }

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

class Artifacts {
 public:
  explicit Artifacts(std::string dir) : dir_(std::move(dir)) {
    if (!dir_.empty()) std::filesystem::create_directories(dir_);
  }
  // Calls `write` with an open stream when artifacts are enabled.
  void emit(const std::string& name, const std::function<void(std::ostream&)>& write) const {
    if (dir_.empty()) return;
    std::ofstream out(std::filesystem::path(dir_) / name);
    write(out);
  }

 private:
  std::string dir_;
};

// ---------------------------------------------------------------------------
// 1. Engine against the exact law on a 32-state system.

struct StateHistogram {
  std::map<double, std::vector<std::uint64_t>> counts;
  std::map<double, std::vector<MomentAccumulator>> site_means;
};

StateHistogram tiny_histogram(unsigned threads) {
  const ModelParams p(2, 2, 1.0);
  const std::vector<double> times{0.1, 0.5};
  SimulationPlan plan{p, 0.5, times, seed_for(1), 100'000};
  StateHistogram h;
  for (double t : times) {
    h.counts[t].assign(std::size_t{1} << p.num_sites(), 0);
    h.site_means[t].resize(p.num_sites());
  }
  EngineOptions eo;
  eo.threads = threads;
  simulate(
      plan, product_sampler(constant_profile(0.5)),
      [&](const TrajectoryRecord& r) {
        for (double t : times) {
          const auto& c = r.at(t);
          ++h.counts[t][state_of(c)];
          for (int i = 0; i < p.num_sites(); ++i) h.site_means[t][i].add(c.raw()[i]);
        }
      },
      eo);
  return h;
}

CriterionResult criterion_engine(unsigned threads, const Artifacts& art) {
  CriterionResult res{1, "oracle equivalence (engine exactness)", false, false, {}, 0.0};
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, constant_profile(0.5));
  const auto h = tiny_histogram(threads);
  bool ok = true;
  std::ostringstream detail;
  std::ostringstream csv;
  csv << "# schema=engine_check/v1\nt,chi2,dof,p_value,max_site_z\n";
  for (const auto& [t, counts] : h.counts) {
    const auto exact = exact_distribution(gen, init, t);
    double m = 0.0;
    for (auto c : counts) m += static_cast<double>(c);
    double chi2 = 0.0;
    int bins = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      const double e = exact[s] * m;
      if (e <= 0.0) {
        if (counts[s] > 0) ok = false;
        continue;
      }
      ++bins;
      const double d = static_cast<double>(counts[s]) - e;
      chi2 += d * d / e;
    }
    const double pv = gsl_cdf_chisq_Q(chi2, bins - 1);
    const auto means = exact_site_means(gen, exact);
    double max_z = 0.0;
    for (int i = 0; i < p.num_sites(); ++i) {
      const auto est = h.site_means.at(t)[i].estimate();
      max_z = std::max(max_z, std::abs(est.mean - means[i]) / est.std_error);
    }
    ok = ok && pv > 1e-3 && max_z <= 3.0;
    detail << "t=" << t << " p=" << fmt(pv) << " max|z|=" << fmt(max_z, 3) << "; ";
    csv << t << ',' << chi2 << ',' << bins - 1 << ',' << pv << ',' << max_z << '\n';
  }
  art.emit("c01_engine.csv", [&](std::ostream& o) { o << csv.str(); });
  res.pass = ok;
  res.detail = detail.str() + "need p>1e-3, |z|<=3";
  return res;
}

// ---------------------------------------------------------------------------
// 2. Forward equation for the exact site means.

CriterionResult criterion_kolmogorov(const Artifacts& art) {
  CriterionResult res{2, "Kolmogorov consistency of exact means", false, false, {}, 0.0};
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, constant_profile(0.5));
  const double delta = 1e-4;
  const double n2 = static_cast<double>(p.n()) * p.n();
  double worst = 0.0;
  std::ostringstream csv;
  csv << "# schema=kolmogorov/v1\nt,x,lhs,rhs,residual\n";
  for (double t : {0.1, 0.5}) {
    const auto lo = exact_site_means(gen, exact_distribution(gen, init, t - delta));
    const auto hi = exact_site_means(gen, exact_distribution(gen, init, t + delta));
    const auto law = exact_distribution(gen, init, t);
    const auto rho = exact_site_means(gen, law);
    const auto dp = exact_boundary_expectations(gen, law, true);
    const auto dm = exact_boundary_expectations(gen, law, false);
    const int m = p.num_sites();
    for (int i = 0; i < m; ++i) {
      double lap = 0.0;
      if (i > 0) lap += rho[i - 1] - rho[i];
      if (i < m - 1) lap += rho[i + 1] - rho[i];
      const double rhs = 0.5 * n2 * lap + 0.5 * p.j() * p.n() * (dp[i] - dm[i]);
      const double lhs = (hi[i] - lo[i]) / (2.0 * delta);
      worst = std::max(worst, std::abs(lhs - rhs));
      csv << t << ',' << i - p.n() << ',' << lhs << ',' << rhs << ',' << lhs - rhs << '\n';
    }
  }
  art.emit("c02_kolmogorov.csv", [&](std::ostream& o) { o << csv.str(); });
  res.pass = worst < 1e-3;
  res.detail = "max residual " + fmt(worst, 3) + " (need < 1e-3)";
  return res;
}

// ---------------------------------------------------------------------------
// 3. Discrete profile against the macroscopic solution.

CriterionResult criterion_hydro(const Artifacts& art) {
  CriterionResult res{3, "hydrodynamic convergence", false, false, {}, 0.0};
  const auto u0 = ramp_profile();
  const std::vector<double> grid{0.0, 0.5};
  const auto macro = solve_robin(u0, 2, 1.0, grid);
  const std::size_t ti = macro.time_index(0.5);
  std::vector<double> errors;
  std::ostringstream csv;
  csv << "# schema=hydro_convergence/v1\nN,t,sup_error\n";
  for (int n : {16, 32, 64, 128}) {
    const ModelParams p(n, 2, 1.0);
    const auto prof = solve_rho_eps(p, u0, grid);
    const auto slice = prof.at_time(0.5);
    double e = 0.0;
    for (Site x = -n; x <= n; ++x) {
      e = std::max(e, std::abs(slice[x + n] - macro.value(ti, static_cast<double>(x) / n)));
    }
    errors.push_back(e);
    csv << n << ",0.5," << e << '\n';
  }
  art.emit("c03_hydro.csv", [&](std::ostream& o) { o << csv.str(); });
  bool decreasing = true;
  for (std::size_t i = 1; i < errors.size(); ++i) decreasing = decreasing && errors[i] < errors[i - 1];
  const double ratio = errors.back() / errors.front();
  res.pass = decreasing && ratio < 0.35;
  std::ostringstream d;
  d << "e(N)=";
  for (double e : errors) d << fmt(e, 3) << ' ';
  d << "ratio " << fmt(ratio, 3) << " (need strictly decreasing, < 0.35)";
  res.detail = d.str();
  return res;
}

// ---------------------------------------------------------------------------
// 4. Robin solver against the integral form.

CriterionResult criterion_cross_solver(const Artifacts& art) {
  CriterionResult res{4, "cross-solver PDE agreement", false, false, {}, 0.0};
  const auto u0 = ramp_profile();
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  const auto robin = solve_robin(u0, 2, 1.0, grid);
  const auto integral = solve_integral_form(u0, 2, 1.0, grid);
  double worst = 0.0;
  std::ostringstream csv;
  csv << "# schema=cross_solver/v1\nt,sup_difference\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto a = robin.slice(g);
    const auto b = integral.slice(g);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    worst = std::max(worst, d);
    csv << grid[g] << ',' << d << '\n';
  }
  art.emit("c04_cross_solver.csv", [&](std::ostream& o) { o << csv.str(); });
  res.pass = worst <= 1e-4;
  res.detail = "sup difference " + fmt(worst, 3) + " (need <= 1e-4)";
  return res;
}

// ---------------------------------------------------------------------------
// 5 and 7. Correlation scaling studies.

StudyTemplate ramp_study(std::uint64_t seed, unsigned threads) {
  StudyTemplate st;
  st.k = 2;
  st.j = 1.0;
  st.u0 = ramp_profile();
  st.master_seed = seed;
  st.engine.threads = threads;
  return st;
}

std::string describe(const ScalingReport& r) {
  std::ostringstream d;
  for (const auto& row : r.rows) {
    d << "N=" << row.n << ":" << fmt(row.estimate.mean, 3) << "+-" << fmt(row.estimate.std_error, 2)
      << (row.signal_starved ? "(starved) " : " ");
  }
  d << "M=" << r.budget << ' ';
  if (r.fitted) {
    d << "slope " << fmt(r.slope, 3) << " [" << fmt(r.ci_low, 3) << ", " << fmt(r.ci_high, 3) << "]";
  } else {
    d << "no fit";
  }
  return d.str();
}

void emit_scaling(const Artifacts& art, const std::string& name, const ScalingReport& r) {
  art.emit(name, [&](std::ostream& o) {
    write_scaling_csv(o, r);
    const ScalingReport one[] = {r};
    write_scaling_summary_csv(o, one);
  });
}

CriterionResult criterion_v2_scaling(unsigned threads, const Artifacts& art) {
  CriterionResult res{5, "v2 boundary-pair scaling", false, false, {}, 0.0};
  const std::vector<int> ns{16, 32, 64};
  const auto report = scaling_study(SitePattern::parse("right:-1,0"), 0.5, ns,
                                    ramp_study(seed_for(5), threads));
  emit_scaling(art, "c05_v2_scaling.csv", report);
  res.pass = report.pass;
  res.starved = !report.fitted;
  res.detail = describe(report) + " (need slope in [0.6, 1.4])";
  return res;
}

CriterionResult criterion_plateau(unsigned threads, const Artifacts& art) {
  CriterionResult res{7, "space-time plateau", false, false, {}, 0.0};
  const double s = 0.05;
  // Tiny system: two-time estimator against the exact two-time moment.
  const ModelParams tiny(2, 2, 1.0);
  const auto u0 = ramp_profile();
  const std::vector<double> rs{0.1, 0.3, 1.05};
  std::vector<double> times{0.0, s};
  times.insert(times.end(), rs.begin(), rs.end());
  SimulationPlan plan{tiny, rs.back(), times, seed_for(7), 100'000};
  const auto centering = solve_rho_eps(tiny, u0, times);
  const auto gen = build_generator(tiny);
  const auto init = product_distribution(tiny, u0);
  std::vector<Functional> fs;
  std::vector<double> oracle;
  for (double r : rs) {
    const VQuery q = SpaceTimeQuery{{2}, s, {2}, r};
    fs.push_back(v_functional(q, centering));
    oracle.push_back(oracle_v(q, gen, init, centering));
  }
  EngineOptions eo;
  eo.threads = threads;
  const auto est = estimate_moments(plan, product_sampler(u0), fs, eo);
  bool tiny_ok = true;
  std::ostringstream d;
  std::ostringstream csv;
  csv << "# schema=two_time_check/v1\ns,r,estimate,stderr,oracle,z\n";
  double max_z = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double z = std::abs(est[i].mean - oracle[i]) / est[i].std_error;
    max_z = std::max(max_z, z);
    tiny_ok = tiny_ok && z <= 3.0;
    csv << s << ',' << rs[i] << ',' << est[i].mean << ',' << est[i].std_error << ',' << oracle[i]
        << ',' << z << '\n';
  }
  art.emit("c07_two_time_tiny.csv", [&](std::ostream& o) { o << csv.str(); });
  d << "tiny max|z|=" << fmt(max_z, 3) << "; ";

  StudyTemplate st = ramp_study(seed_for(7) + 1, threads);
  st.band_low = 0.6;
  st.band_high = std::numeric_limits<double>::infinity();
  const std::vector<int> ns{16, 32, 64};
  const auto pattern = SitePattern::parse("right:0");
  const auto report = spacetime_scaling_study(pattern, s, pattern, 1.0, ns, st);
  emit_scaling(art, "c07_plateau_scaling.csv", report);
  res.pass = tiny_ok && report.pass;
  res.starved = tiny_ok && !report.fitted;
  res.detail = d.str() + describe(report) + " (need tiny |z|<=3, slope >= 0.6)";
  return res;
}

// ---------------------------------------------------------------------------
// 6. Gradient of the discrete profile.

CriterionResult criterion_gradient(const Artifacts& art) {
  CriterionResult res{6, "discrete gradient scaling", false, false, {}, 0.0};
  const auto u0 = ramp_profile();
  const std::vector<double> grid{0.0, 0.5};
  std::vector<double> xs, ys;
  std::ostringstream csv;
  csv << "# schema=gradient_scaling/v1\nN,epsilon,sup_gradient\n";
  for (int n : {16, 32, 64, 128}) {
    const ModelParams p(n, 2, 1.0);
    const auto g = discrete_gradient_stats(solve_rho_eps(p, u0, grid));
    xs.push_back(std::log(1.0 / n));
    ys.push_back(std::log(g[1]));
    csv << n << ',' << 1.0 / n << ',' << g[1] << '\n';
  }
  double c0, c1, cov00, cov01, cov11, sumsq;
  gsl_fit_linear(xs.data(), 1, ys.data(), 1, xs.size(), &c0, &c1, &cov00, &cov01, &cov11, &sumsq);
  art.emit("c06_gradient.csv", [&](std::ostream& o) { o << csv.str() << "# slope=" << c1 << '\n'; });
  res.pass = c1 >= 0.6 && c1 <= 1.1;
  res.detail = "slope " + fmt(c1, 4) + " (need in [0.6, 1.1])";
  return res;
}

// ---------------------------------------------------------------------------
// 8. Dynkin martingale and its quadratic variation.

struct DynkinStats {
  std::vector<MomentAccumulator> mart, qv;
  double max_jump_excess = -std::numeric_limits<double>::infinity();
  double max_drift_mismatch = 0.0;
};

DynkinStats dynkin_stats(unsigned threads, const std::vector<TestFunction>& hs,
                         const ModelParams& p, double t, std::size_t m) {
  SimulationPlan plan{p, t, {0.0, t}, seed_for(8), m};
  EngineOptions eo;
  eo.threads = threads;
  eo.dense = true;
  DynkinStats st;
  st.mart.resize(hs.size());
  st.qv.resize(hs.size());
  simulate(
      plan, product_sampler(ramp_profile()),
      [&](const TrajectoryRecord& r) {
        for (std::size_t i = 0; i < hs.size(); ++i) {
          const auto d = dynkin_residual(r, p, hs[i], t);
          st.mart[i].add(d.martingale);
          st.qv[i].add(d.martingale * d.martingale - d.qv_integral);
          st.max_jump_excess = std::max(st.max_jump_excess, d.max_jump - d.jump_bound);
          const double scale = std::max(1.0, std::abs(d.drift_integral));
          st.max_drift_mismatch =
              std::max(st.max_drift_mismatch, std::abs(d.drift_integral - d.generator_integral) / scale);
        }
      },
      eo);
  return st;
}

std::vector<TestFunction> dynkin_functions(const MacroSolution& macro) {
  return {make_test_function("bump"), make_test_function("linear+blend", &macro)};
}

MacroSolution ramp_macro(double t_end, int slices_per_unit) {
  std::vector<double> grid;
  const int n = static_cast<int>(std::ceil(t_end * slices_per_unit));
  for (int i = 0; i <= n; ++i) grid.push_back(std::min(t_end, static_cast<double>(i) / slices_per_unit));
  return solve_robin(ramp_profile(), 2, 1.0, grid);
}

CriterionResult criterion_dynkin(unsigned threads, const Artifacts& art) {
  CriterionResult res{8, "Dynkin martingale and quadratic variation", false, false, {}, 0.0};
  const ModelParams p(4, 2, 1.0);
  const double t = 0.5;
  const auto macro = ramp_macro(t, 128);
  const auto hs = dynkin_functions(macro);
  const auto st = dynkin_stats(threads, hs, p, t, 10'000);
  bool ok = st.max_jump_excess <= 1e-12 && st.max_drift_mismatch <= 1e-9;
  std::ostringstream d, csv;
  csv << "# schema=dynkin/v1\nH,mean_M,se_M,mean_M2_minus_QV,se\n";
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const auto a = st.mart[i].estimate();
    const auto b = st.qv[i].estimate();
    const double za = std::abs(a.mean) / a.std_error;
    const double zb = std::abs(b.mean) / b.std_error;
    ok = ok && za <= 3.0 && zb <= 3.0;
    d << hs[i].name() << ": |z_M|=" << fmt(za, 3) << " |z_QV|=" << fmt(zb, 3) << "; ";
    csv << hs[i].name() << ',' << a.mean << ',' << a.std_error << ',' << b.mean << ','
        << b.std_error << '\n';
  }
  art.emit("c08_dynkin.csv", [&](std::ostream& o) { o << csv.str(); });
  d << "jump excess " << fmt(st.max_jump_excess, 3) << ", drift mismatch "
    << fmt(st.max_drift_mismatch, 3) << " (need |z|<=3)";
  res.pass = ok;
  res.detail = d.str();
  return res;
}

// ---------------------------------------------------------------------------
// 9. Field variance against the Ornstein-Uhlenbeck oracle.

CriterionResult criterion_ou(unsigned threads, const Artifacts& art) {
  CriterionResult res{9, "OU covariance", false, false, {}, 0.0};
  const double t = 0.5;
  const ModelParams p(50, 2, 1.0);
  const auto u0 = ramp_profile();
  const auto macro = ramp_macro(t, 128);
  const std::vector<FieldItem> items{{"linear+blend", make_test_function("linear+blend", &macro)}};
  const std::vector<FieldPair> pairs{{0, t, 0, t}};
  const std::vector<double> times{0.0, t};
  SimulationPlan plan{p, t, times, seed_for(9), 10'000};
  EngineOptions eo;
  eo.threads = threads;
  auto rows = empirical_field_covariance(plan, product_sampler(u0), solve_rho_eps(p, u0, times),
                                         items, pairs, eo);
  const auto oracle = ou_covariance_oracle(items[0].h, t, items[0].h, t, macro, u0);
  auto& row = rows[0];
  row.oracle = oracle.value;
  row.zscore = (row.empirical - row.oracle) / row.std_error;
  art.emit("c09_ou.csv", [&](std::ostream& o) { write_covariance_csv(o, rows); });
  const double gap = std::abs(row.empirical - oracle.value);
  const double allowed = std::max(3.0 * row.std_error, 0.12 * std::abs(oracle.value));
  res.pass = oracle.accepted && gap <= allowed;
  res.detail = "empirical " + fmt(row.empirical, 5) + "+-" + fmt(row.std_error, 2) + " oracle " +
               fmt(oracle.value, 5) + " (refinement change " + fmt(oracle.relative_change, 2) +
               "); |diff| " + fmt(gap, 3) + " <= " + fmt(allowed, 3) + " needed";
  return res;
}

// ---------------------------------------------------------------------------
// 10. Walk kernels, Liggett's inequality and the kernel bounds.

CriterionResult criterion_kernels(const Artifacts& art) {
  CriterionResult res{10, "kernel suite", false, false, {}, 0.0};
  const std::vector<int> ns{10, 25, 50, 100};
  const std::vector<double> ts{0.01, 0.05, 0.1, 0.25, 0.5, 1.0};
  double worst_diff = 0.0, worst_tail = 0.0;
  std::ostringstream agree;
  agree << "# schema=kernel_agreement/v1\nN,t,max_difference,tail_bound\n";
  for (int n : ns) {
    for (double t : ts) {
      const auto a = reflected_kernel(t, n);
      const auto b = image_sum_kernel(t, n);
      double d = 0.0;
      for (std::size_t i = 0; i < a.data().size(); ++i) {
        d = std::max(d, std::abs(a.data()[i] - b.table.data()[i]));
      }
      worst_diff = std::max(worst_diff, d);
      worst_tail = std::max(worst_tail, b.tail_bound);
      agree << n << ',' << t << ',' << d << ',' << b.tail_bound << '\n';
    }
  }
  art.emit("c10_kernel_agreement.csv", [&](std::ostream& o) { o << agree.str(); });

  double min_slack = std::numeric_limits<double>::infinity();
  bool liggett = true;
  std::ostringstream lig;
  lig << "# schema=liggett/v1\nN,particles,t,pairs,min_slack,holds\n";
  for (int n : {2, 3, 4}) {
    for (int k : {2, 3}) {
      for (double t : {0.02, 0.1, 0.5}) {
        const auto rep = check_liggett(ModelParams(n, 1, 0.0), t, k);
        min_slack = std::min(min_slack, rep.min_slack);
        liggett = liggett && rep.holds;
        lig << n << ',' << k << ',' << t << ',' << rep.pairs_checked << ',' << rep.min_slack << ','
            << rep.holds << '\n';
      }
    }
  }
  art.emit("c10_liggett.csv", [&](std::ostream& o) { o << lig.str(); });

  KernelBoundOptions window;
  window.window_exponent = 0.5;
  const auto rows = check_kernel_bounds(ns, ts, window);
  double worst_ratio = 0.0;
  for (const auto& r : rows) worst_ratio = std::max(worst_ratio, r.max_ratio);
  const auto full = check_kernel_bounds(ns, ts);
  art.emit("c10_kernel_bounds.csv", [&](std::ostream& o) {
    o << "# window |x-y| <= sqrt(lambda)\n";
    write_kernel_bounds_csv(o, rows);
    o << "# full grid (reported, not asserted)\n";
    write_kernel_bounds_csv(o, full);
  });
  const double c = 3.0;
  res.pass = worst_diff <= 1e-8 && worst_tail <= 1e-8 && liggett && worst_ratio <= c;
  res.detail = "kernel diff " + fmt(worst_diff, 3) + ", tail " + fmt(worst_tail, 3) +
               ", Liggett min slack " + fmt(min_slack, 3) + ", bound ratio " +
               fmt(worst_ratio, 4) + " (need <= 1e-8, >= -1e-10, <= 3.0)";
  return res;
}

// ---------------------------------------------------------------------------
// 11. Thread-count independence of every reducer.

bool same(const MomentEstimate& a, const MomentEstimate& b) {
  return a.mean == b.mean && a.std_error == b.std_error && a.samples == b.samples;
}

CriterionResult criterion_reproducibility(unsigned threads) {
  CriterionResult res{11, "reproducibility across thread counts", false, false, {}, 0.0};
  const unsigned a = 1;
  const unsigned b = std::max(3u, threads);
  std::vector<std::string> mismatches;

  // Histogram and site means (criterion 1 workload).
  const auto h1 = tiny_histogram(a);
  const auto h2 = tiny_histogram(b);
  if (h1.counts != h2.counts) mismatches.push_back("state counts");
  for (const auto& [t, acc] : h1.site_means) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (!same(acc[i].estimate(), h2.site_means.at(t)[i].estimate())) {
        mismatches.push_back("site means");
        break;
      }
    }
  }

  // Dynkin reducer (criterion 8 workload, fewer replicates).
  const ModelParams p(4, 2, 1.0);
  const auto macro = ramp_macro(0.5, 128);
  const auto hs = dynkin_functions(macro);
  const auto d1 = dynkin_stats(a, hs, p, 0.5, 2'000);
  const auto d2 = dynkin_stats(b, hs, p, 0.5, 2'000);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!same(d1.mart[i].estimate(), d2.mart[i].estimate()) ||
        !same(d1.qv[i].estimate(), d2.qv[i].estimate())) {
      mismatches.push_back("dynkin moments");
      break;
    }
  }

  // Covariance reducer.
  const ModelParams pf(10, 2, 1.0);
  const std::vector<double> times{0.0, 0.25, 0.5};
  SimulationPlan plan{pf, 0.5, times, seed_for(11), 500};
  const auto centering = solve_rho_eps(pf, ramp_profile(), times);
  const std::vector<FieldItem> items{{"bump", make_test_function("bump")}};
  const std::vector<FieldPair> pairs{{0, 0.5, 0, 0.25}, {0, 0.5, 0, 0.5}};
  EngineOptions e1, e2;
  e1.threads = a;
  e2.threads = b;
  const auto c1 = empirical_field_covariance(plan, product_sampler(ramp_profile()), centering, items, pairs, e1);
  const auto c2 = empirical_field_covariance(plan, product_sampler(ramp_profile()), centering, items, pairs, e2);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    if (c1[i].empirical != c2[i].empirical || c1[i].std_error != c2[i].std_error) {
      mismatches.push_back("field covariance");
      break;
    }
  }

  // Scaling study with the budgeter (pilot, estimates and the fit).
  StudyTemplate s1 = ramp_study(seed_for(11), a);
  s1.pilot_replicates = 2'000;
  s1.max_replicates = 4'000;
  StudyTemplate s2 = s1;
  s2.engine.threads = b;
  const std::vector<int> ns{4, 6, 8};
  const auto pattern = SitePattern::parse("right:-1,0");
  const auto r1 = scaling_study(pattern, 0.25, ns, s1);
  const auto r2 = scaling_study(pattern, 0.25, ns, s2);
  bool scaling_same = r1.budget == r2.budget && r1.rows.size() == r2.rows.size() &&
                      r1.slope == r2.slope && r1.slope_se == r2.slope_se;
  for (std::size_t i = 0; scaling_same && i < r1.rows.size(); ++i) {
    scaling_same = same(r1.rows[i].estimate, r2.rows[i].estimate);
  }
  if (!scaling_same) mismatches.push_back("scaling study");

  res.pass = mismatches.empty();
  std::ostringstream d;
  d << "threads " << a << " vs " << b << ", tolerance 0 ulp for every reducer";
  for (const auto& m : mismatches) d << "; mismatch in " << m;
  res.detail = d.str();
  return res;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options, std::ostream& out) {
  const Artifacts art(options.out_dir);
  const unsigned threads = options.threads;
  const std::vector<std::pair<int, std::function<CriterionResult()>>> suite{
      {1, [&] { return criterion_engine(threads, art); }},
      {2, [&] { return criterion_kolmogorov(art); }},
      {3, [&] { return criterion_hydro(art); }},
      {4, [&] { return criterion_cross_solver(art); }},
      {5, [&] { return criterion_v2_scaling(threads, art); }},
      {6, [&] { return criterion_gradient(art); }},
      {7, [&] { return criterion_plateau(threads, art); }},
      {8, [&] { return criterion_dynkin(threads, art); }},
      {9, [&] { return criterion_ou(threads, art); }},
      {10, [&] { return criterion_kernels(art); }},
      {11, [&] { return criterion_reproducibility(threads); }},
  };
  std::vector<CriterionResult> results;
  for (const auto& [id, run] : suite) {
    if (!options.only.empty() && !options.only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = run();
    } catch (const std::exception& e) {
      r = {id, "criterion " + std::to_string(id), false, false, std::string("error: ") + e.what(), 0.0};
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << (r.pass ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail
        << (r.starved ? " [signal-starved]" : "") << " (" << fmt(r.seconds, 3) << " s)"
        << std::endl;
    results.push_back(r);
  }
  art.emit("acceptance.csv", [&](std::ostream& o) {
    o << "# schema=acceptance/v1\nid,name,pass,starved,seconds,detail\n";
    for (const auto& r : results) {
      o << r.id << ",\"" << r.name << "\"," << r.pass << ',' << r.starved << ',' << r.seconds
        << ",\"" << r.detail << "\"\n";
    }
  });
  return results;
}

int acceptance_exit_code(const std::vector<CriterionResult>& results) {
  bool any_hard = false, any_starved = false;
  for (const auto& r : results) {
    if (r.pass) continue;
    if (r.starved) {
      any_starved = true;
    } else {
      any_hard = true;
    }
  }
  if (any_hard) return kExitAssertion;
  if (any_starved) return kExitStarved;
  return kExitOk;
}

}  // namespace stirlab::harness
