#include "stirlab/fluctuations.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <utility>

#include "stirlab/moments.hpp"

namespace stirlab {

namespace {

// H(eps x, t) at every site, index 0 = site -N.
std::vector<double> lattice_values(const TestFunction& h, const ModelParams& params, double t) {
  std::vector<double> v(params.num_sites());
  const double eps = params.epsilon();
  for (int i = 0; i < params.num_sites(); ++i) v[i] = h((params.first_site() + i) * eps, t);
  return v;
}

double weighted_sum(std::span<const std::uint8_t> occ, std::span<const double> hv) {
  CompensatedSum s;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (occ[i]) s.add(hv[i]);
  }
  return s.value();
}

// Drift without the d_s H part, from lattice values.
double drift_from_values(const Configuration& config, const ModelParams& params,
                         std::span<const double> hv) {
  const auto occ = config.raw();
  const int m = params.num_sites();
  const double eps = params.epsilon();
  CompensatedSum bulk;
  for (int i = 0; i < m; ++i) {
    if (!occ[i]) continue;
    double lap = 0.0;
    if (i > 0) lap += hv[i - 1] - hv[i];
    if (i < m - 1) lap += hv[i + 1] - hv[i];
    bulk.add(lap);
  }
  double boundary = 0.0;
  for (Site x = params.i_plus().first; x <= params.i_plus().last; ++x) {
    boundary += hv[x + params.n()] * d_plus(config, params, x);
  }
  for (Site x = params.i_minus().first; x <= params.i_minus().last; ++x) {
    boundary -= hv[x + params.n()] * d_minus(config, params, x);
  }
  return std::sqrt(eps) * 0.5 / (eps * eps) * bulk.value() +
         params.j() / (2.0 * std::sqrt(eps)) * boundary;
}

double gamma_from_values(const Configuration& config, const ModelParams& params,
                         std::span<const double> hv) {
  const auto occ = config.raw();
  const double eps = params.epsilon();
  CompensatedSum bulk;
  for (int i = 0; i + 1 < params.num_sites(); ++i) {
    if (occ[i] == occ[i + 1]) continue;
    const double g = (hv[i + 1] - hv[i]) / eps;
    bulk.add(g * g);
  }
  double boundary = 0.0;
  for (Site x = params.i_plus().first; x <= params.i_plus().last; ++x) {
    const double hx = hv[x + params.n()];
    boundary += hx * hx * d_plus(config, params, x);
  }
  for (Site x = params.i_minus().first; x <= params.i_minus().last; ++x) {
    const double hx = hv[x + params.n()];
    boundary += hx * hx * d_minus(config, params, x);
  }
  return 0.5 * eps * bulk.value() + 0.5 * params.j() * boundary;
}

// sum over the event catalog of rate * (Z after - Z before).
double generator_from_values(const Configuration& config, const ModelParams& params,
                             std::span<const double> hv) {
  const double root = std::sqrt(params.epsilon());
  CompensatedSum s;
  for (const auto& re : event_rates(config, params)) {
    const int i = re.event.site + params.n();
    double jump = 0.0;
    switch (re.event.type) {
      case EventType::Exchange:
        jump = (config.raw()[i] - config.raw()[i + 1]) * (hv[i + 1] - hv[i]);
        break;
      case EventType::BirthRight: jump = hv[i]; break;
      case EventType::DeathLeft: jump = -hv[i]; break;
    }
    s.add(re.rate * root * jump);
  }
  return s.value();
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

double raw_field(const Configuration& config, const TestFunction& h, double t) {
  const double eps = 1.0 / config.n();
  CompensatedSum s;
  const auto occ = config.raw();
  for (int i = 0; i < config.num_sites(); ++i) {
    if (occ[i]) s.add(h((i - config.n()) * eps, t));
  }
  return std::sqrt(eps) * s.value();
}

double field_value(const Configuration& config, const TestFunction& h, double t,
                   std::span<const double> centering) {
  if (static_cast<int>(centering.size()) != config.num_sites()) {
    throw DomainError("centering profile does not match the lattice");
  }
  const double eps = 1.0 / config.n();
  CompensatedSum s;
  const auto occ = config.raw();
  for (int i = 0; i < config.num_sites(); ++i) {
    s.add(h((i - config.n()) * eps, t) * (occ[i] - centering[i]));
  }
  return std::sqrt(eps) * s.value();
}

double dynkin_drift(const Configuration& config, const ModelParams& params, const TestFunction& h,
                    double s) {
  const auto hv = lattice_values(h, params, s);
  double ds = 0.0;
  const double eps = params.epsilon();
  for (int i = 0; i < params.num_sites(); ++i) {
    if (config.raw()[i]) ds += h.dt((params.first_site() + i) * eps, s);
  }
  return drift_from_values(config, params, hv) + std::sqrt(eps) * ds;
}

double carre_du_champ(const Configuration& config, const ModelParams& params,
                      const TestFunction& h, double s) {
  return gamma_from_values(config, params, lattice_values(h, params, s));
}

DynkinResult dynkin_residual(const TrajectoryRecord& record, const ModelParams& params,
                             const TestFunction& h, double t) {
  if (!record.initial) throw DomainError("dynkin_residual needs a dense trajectory record");
  if (record.initial->n() != params.n()) throw DomainError("record does not match the model");
  if (!(t >= 0.0)) throw DomainError("dynkin_residual: negative time");
  const double root = std::sqrt(params.epsilon());
  const bool stat = h.time_independent();

  Configuration config = *record.initial;
  DynkinResult out;
  std::vector<double> ha = lattice_values(h, params, 0.0);
  out.z_0 = root * weighted_sum(config.raw(), ha);
  out.jump_bound = 2.0 * root * sup_abs(ha);
  CompensatedSum drift, gen, qv;

  // Integrates over [a, b] with the configuration held fixed; ha holds H at a
  // and is advanced to b.
  auto integrate = [&](double a, double b) {
    if (b <= a) return;
    const double len = b - a;
    if (stat) {
      drift.add(len * drift_from_values(config, params, ha));
      gen.add(len * generator_from_values(config, params, ha));
      qv.add(len * gamma_from_values(config, params, ha));
      return;
    }
    const auto hm = lattice_values(h, params, 0.5 * (a + b));
    const auto hb = lattice_values(h, params, b);
    auto simpson = [&](auto&& f) {
      return len / 6.0 * (f(ha) + 4.0 * f(hm) + f(hb));
    };
    // The d_s H part integrates exactly: sqrt(eps) sum eta (H(b) - H(a)).
    const double ds = root * (weighted_sum(config.raw(), hb) - weighted_sum(config.raw(), ha));
    drift.add(simpson([&](const auto& v) { return drift_from_values(config, params, v); }) + ds);
    gen.add(simpson([&](const auto& v) { return generator_from_values(config, params, v); }) + ds);
    qv.add(simpson([&](const auto& v) { return gamma_from_values(config, params, v); }));
    ha = hb;
    out.jump_bound = std::max(out.jump_bound, 2.0 * root * sup_abs(ha));
  };

  double now = 0.0;
  for (const auto& te : record.events) {
    if (te.time > t) break;
    integrate(now, te.time);
    now = te.time;
    const double before = root * weighted_sum(config.raw(), ha);
    apply_event_unchecked(config, te.event);
    const double after = root * weighted_sum(config.raw(), ha);
    out.max_jump = std::max(out.max_jump, std::abs(after - before));
  }
  integrate(now, t);

  out.z_t = root * weighted_sum(config.raw(), stat ? ha : lattice_values(h, params, t));
  out.drift_integral = drift.value();
  out.generator_integral = gen.value();
  out.qv_integral = qv.value();
  out.martingale = out.z_t - out.z_0 - out.drift_integral;
  return out;
}

JackknifeCovariance jackknife_covariance(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size()) throw DomainError("jackknife_covariance: length mismatch");
  if (n < 3) throw DomainError("jackknife_covariance needs at least 3 samples");
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < n; ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double nd = static_cast<double>(n);
  const double mx = sx.value() / nd, my = sy.value() / nd;
  CompensatedSum sxy;
  for (std::size_t i = 0; i < n; ++i) sxy.add((x[i] - mx) * (y[i] - my));
  const double cov = sxy.value() / (nd - 1.0);
  // Leave-one-out covariances of the centered data in closed form.
  CompensatedSum sum_loo;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (x[i] - mx) * (y[i] - my);
    loo[i] = (sxy.value() - p - p / (nd - 1.0)) / (nd - 2.0);
    sum_loo.add(loo[i]);
  }
  const double mean_loo = sum_loo.value() / nd;
  CompensatedSum dev;
  for (double v : loo) dev.add((v - mean_loo) * (v - mean_loo));
  return {cov, std::sqrt((nd - 1.0) / nd * dev.value())};
}

std::vector<CovarianceRow> empirical_field_covariance(const SimulationPlan& plan,
                                                      const InitialSampler& sampler,
                                                      const DiscreteProfileGrid& centering,
                                                      std::span<const FieldItem> items,
                                                      std::span<const FieldPair> pairs,
                                                      const EngineOptions& options) {
  plan.validate();
  if (plan.n_replicates < 100) {
    throw DomainError("empirical_field_covariance needs at least 100 replicates");
  }
  if (!(centering.params() == plan.params)) {
    throw DomainError("centering grid does not match the plan's model");
  }
  // Distinct (item, time) fields, each needed once per replicate.
  std::map<std::pair<std::size_t, double>, std::size_t> slot;
  std::vector<std::pair<std::size_t, double>> fields;
  for (const auto& p : pairs) {
    if (p.h_index >= items.size() || p.g_index >= items.size()) {
      throw DomainError("field pair refers to an unknown test function");
    }
    if (!(p.s <= p.t)) throw DomainError("field pair needs s <= t");
    for (auto key : {std::pair{p.h_index, p.t}, std::pair{p.g_index, p.s}}) {
      if (slot.count(key)) continue;
      centering.time_index(key.second);
      if (!std::binary_search(plan.snapshot_times.begin(), plan.snapshot_times.end(), key.second)) {
        throw DomainError("field time is not a snapshot time of the plan");
      }
      slot.emplace(key, fields.size());
      fields.push_back(key);
    }
  }
  std::vector<std::vector<double>> samples(fields.size());
  for (auto& s : samples) s.reserve(plan.n_replicates);
  simulate(
      plan, sampler,
      [&](const TrajectoryRecord& record) {
        for (std::size_t f = 0; f < fields.size(); ++f) {
          const auto [item, t] = fields[f];
          samples[f].push_back(
              field_value(record.at(t), items[item].h, t, centering.at_time(t)));
        }
      },
      options);

  std::vector<CovarianceRow> rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : pairs) {
    const auto& x = samples[slot.at({p.h_index, p.t})];
    const auto& y = samples[slot.at({p.g_index, p.s})];
    const auto jk = jackknife_covariance(x, y);
    rows.push_back({items[p.h_index].id, p.t, items[p.g_index].id, p.s, jk.value, jk.std_error,
                    nan, nan, x.size()});
  }
  return rows;
}

namespace {

struct OracleGrid {
  int lo;  // first mesh node of the integration domain
  int hi;  // last mesh node
};

// Trapezoid rule of f_i g_i w_i on nodes [lo, hi].
double trapezoid(std::span<const double> f, std::span<const double> g, std::span<const double> w,
                 OracleGrid dom, double h) {
  CompensatedSum s;
  for (int i = dom.lo; i <= dom.hi; ++i) {
    const double wt = (i == dom.lo || i == dom.hi) ? 0.5 : 1.0;
    s.add(wt * f[i] * g[i] * w[i]);
  }
  return h * s.value();
}

// int chi(rho) F' G' with differences on the intervals and chi at the midpoints.
double staggered_energy(std::span<const double> f, std::span<const double> g,
                        std::span<const double> rho, OracleGrid dom, double h) {
  CompensatedSum s;
  for (int i = dom.lo; i < dom.hi; ++i) {
    const double r = 0.5 * (rho[i] + rho[i + 1]);
    s.add(r * (1.0 - r) * (f[i + 1] - f[i]) * (g[i + 1] - g[i]));
  }
  return s.value() / h;
}

}  // namespace

OuOracleResult ou_covariance_oracle(const TestFunction& h, double t, const TestFunction& g,
                                    double s, const MacroSolution& macro,
                                    const InitialProfile& u0, const OuOracleOptions& options) {
  if (!(s >= 0.0 && s <= t)) throw DomainError("ou_covariance_oracle needs 0 <= s <= t");
  if (t > macro.t_max() + 1e-12) throw DomainError("macro solution does not reach t");
  if (options.intervals_per_unit_time < 4) throw DomainError("too few r intervals");
  const double th[] = {t};
  const double sg[] = {s};
  if (!check_test_function(h, macro, th, options.membership_tolerance).passes) {
    throw DomainError("H violates the linearized boundary conditions at t");
  }
  if (!check_test_function(g, macro, sg, options.membership_tolerance).passes) {
    throw DomainError("G violates the linearized boundary conditions at s");
  }
  const Mesh& mesh = macro.mesh();
  const double dx = mesh.h();
  OracleGrid dom{0, mesh.intervals()};
  if (options.domain == OracleDomain::Unit) {
    if (mesh.intervals() % 2 != 0) throw DomainError("unit domain needs a mesh node at 0");
    dom.lo = mesh.intervals() / 2;
  }
  const int k = macro.k();
  const double j = macro.j();
  const double weight = options.boundary_weight == BoundaryWeight::Half ? 0.5 : 1.0;

  // Base grid: an even number of Simpson intervals at the requested density;
  // r_i = i s / n_r on the doubled grid, the base grid is every other point.
  int n_base = std::max(2, static_cast<int>(std::ceil(s * options.intervals_per_unit_time)));
  n_base += n_base % 2;
  const int n_r = 2 * n_base;
  std::vector<double> r(n_r + 1);
  for (int i = 0; i <= n_r; ++i) r[i] = s * i / n_r;
  r[n_r] = s;

  // Semigroup times sigma = T - r_i in ascending order, preceded by 0.
  auto run = [&](const TestFunction& f, double datum) {
    std::vector<double> grid{0.0};
    for (int i = n_r; i >= 0; --i) {
      const double sigma = datum - r[i];
      if (sigma > grid.back()) grid.push_back(sigma);
    }
    SemigroupOptions so;
    so.clock = options.clock;
    so.t_ref = datum;
    so.datum_time = datum;
    so.dt = options.semigroup_dt;
    auto surface = semigroup_T(f, grid, macro, so);
    // Re-index by r: element i is T_{datum - r_i} f.
    std::vector<std::vector<double>> by_r(n_r + 1);
    for (int i = 0; i <= n_r; ++i) {
      const double sigma = datum - r[i];
      auto it = std::lower_bound(grid.begin(), grid.end(), sigma - 1e-13);
      by_r[i] = surface.values[static_cast<std::size_t>(it - grid.begin())];
    }
    return by_r;
  };
  const auto th_r = run(h, t);
  const auto tg_r = run(g, s);

  std::vector<double> chi0(mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i) {
    const double v = u0(mesh.node(i));
    chi0[i] = v * (1.0 - v);
  }
  OuOracleResult out;
  out.sigma_term = trapezoid(th_r[0], tg_r[0], chi0, dom, dx);

  std::vector<double> f(n_r + 1);
  for (int i = 0; i <= n_r; ++i) {
    const auto rho = macro.profile_at(r[i]);
    const auto& a = th_r[i];
    const auto& b = tg_r[i];
    const int last = mesh.intervals();
    double val = staggered_energy(a, b, rho, dom, dx);
    const double right = std::clamp(macro.right(r[i]), 0.0, 1.0);
    val += weight * dtilde_plus(right, k, j) * a[last] * b[last];
    if (options.domain == OracleDomain::Full) {
      const double left = std::clamp(macro.left(r[i]), 0.0, 1.0);
      val += weight * dtilde_minus(left, k, j) * a[0] * b[0];
    }
    f[i] = val;
  }
  auto simpson = [&](int stride) {
    if (s == 0.0) return 0.0;
    const double step = s * stride / n_r;
    CompensatedSum acc;
    for (int i = 0; i <= n_r; i += stride) {
      const int idx = i / stride;
      const double w = (i == 0 || i == n_r) ? 1.0 : (idx % 2 ? 4.0 : 2.0);
      acc.add(w * f[i]);
    }
    return step / 3.0 * acc.value();
  };
  out.integral_term = simpson(1);
  out.value = out.sigma_term + out.integral_term;
  out.coarse_value = out.sigma_term + simpson(2);
  const double scale = std::max(std::abs(out.value), 1e-300);
  out.relative_change = out.value == out.coarse_value ? 0.0 : std::abs(out.value - out.coarse_value) / scale;
  out.accepted = !options.refinement_check || out.relative_change < options.refinement_tolerance;
  return out;
}

TestFunction make_test_function(const std::string& spec, const MacroSolution* macro) {
  std::string base = spec;
  std::optional<double> blend;
  if (const auto pos = spec.find("+blend"); pos != std::string::npos) {
    base = spec.substr(0, pos);
    const std::string rest = spec.substr(pos + 6);
    double width = 0.25;
    if (!rest.empty()) {
      if (rest[0] != ':') throw ConfigError("bad blend suffix in '" + spec + "'");
      try {
        width = std::stod(rest.substr(1));
      } catch (const std::exception&) {
        throw ConfigError("bad blend width in '" + spec + "'");
      }
    }
    blend = width;
  }
  std::string name = base;
  std::vector<double> args;
  if (const auto colon = base.find(':'); colon != std::string::npos) {
    name = base.substr(0, colon);
    std::stringstream ss(base.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        args.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ConfigError("bad test-function argument in '" + spec + "'");
      }
    }
  }
  auto need = [&](std::size_t n) {
    if (args.size() != n) throw ConfigError("test function '" + spec + "' takes " + std::to_string(n) + " arguments");
  };
  constexpr double pi = std::numbers::pi;
  std::optional<TestFunction> shape;
  if (name == "cos") {
    need(1);
    const double w = args[0] * pi / 2.0;
    shape = TestFunction::stationary(
        spec, [w](double u) { return std::cos(w * (u + 1.0)); },
        [w](double u) { return -w * std::sin(w * (u + 1.0)); },
        [w](double u) { return -w * w * std::cos(w * (u + 1.0)); });
  } else if (name == "bump") {
    need(0);
    shape = TestFunction::stationary(
        spec, [](double u) { return (1.0 - u * u) * (1.0 - u * u); },
        [](double u) { return -4.0 * u * (1.0 - u * u); },
        [](double u) { return 12.0 * u * u - 4.0; });
  } else if (name == "one") {
    need(0);
    shape = TestFunction::stationary(
        spec, [](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
  } else if (name == "linear") {
    need(0);
    shape = TestFunction::stationary(
        spec, [](double u) { return u; }, [](double) { return 1.0; }, [](double) { return 0.0; });
  } else if (name == "gauss") {
    need(2);
    const double c = args[0], w = args[1];
    if (!(w > 0.0)) throw ConfigError("gauss width must be positive");
    auto e = [c, w](double u) { return std::exp(-(u - c) * (u - c) / (w * w)); };
    shape = TestFunction::stationary(
        spec, e, [c, w, e](double u) { return -2.0 * (u - c) / (w * w) * e(u); },
        [c, w, e](double u) {
          const double z = (u - c) / (w * w);
          return (4.0 * z * z - 2.0 / (w * w)) * e(u);
        });
  } else {
    throw ConfigError("unknown test function '" + name + "'");
  }
  if (!blend) return *shape;
  if (!macro) throw ConfigError("'" + spec + "' needs a macroscopic solution for the blend");
  auto blended = boundary_blend(*shape, *macro, *blend);
  return TestFunction(spec, [blended](double u, double t) { return blended(u, t); },
                      [blended](double u, double t) { return blended.du(u, t); },
                      [blended](double u, double t) { return blended.duu(u, t); },
                      [blended](double u, double t) { return blended.dt(u, t); });
}

std::vector<FieldItem> parse_test_function_registry(std::istream& in, const MacroSolution* macro) {
  std::vector<FieldItem> items;
  std::string line;
  int number = 0;
  auto trim = [](std::string v) {
    const auto b = v.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string{};
    const auto e = v.find_last_not_of(" \t\r");
    return v.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("test-function registry line " + std::to_string(number) + ": expected 'id = spec'");
    }
    const std::string id = trim(line.substr(0, eq));
    const std::string spec = trim(line.substr(eq + 1));
    if (id.empty() || spec.empty()) {
      throw ConfigError("test-function registry line " + std::to_string(number) + ": empty id or spec");
    }
    for (const auto& it : items) {
      if (it.id == id) throw ConfigError("duplicate test-function id '" + id + "'");
    }
    items.push_back({id, make_test_function(spec, macro)});
  }
  return items;
}

void write_covariance_csv(std::ostream& out, std::span<const CovarianceRow> rows) {
  out << "# schema=covariance/v1\n";
  out << "H_id,t,G_id,s,empirical,stderr,oracle,zscore,samples\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.h_id << ',' << r.t << ',' << r.g_id << ',' << r.s << ',' << r.empirical << ','
        << r.std_error << ',' << r.oracle << ',' << r.zscore << ',' << r.samples << '\n';
  }
}

}  // namespace stirlab
