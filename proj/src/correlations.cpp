#include "stirlab/correlations.hpp"

#include <gsl/gsl_fit.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

namespace {

constexpr std::uint64_t kPilotSalt = 0x9e3779b97f4a7c15ULL;

void check_group(const std::vector<Site>& sites, const ModelParams& params) {
  std::set<Site> seen;
  for (Site x : sites) {
    if (!params.contains(x)) throw DomainError("site " + std::to_string(x) + " outside the lattice");
    if (!seen.insert(x).second) throw DomainError("duplicate site " + std::to_string(x));
  }
}

std::vector<double> centering_values(const DiscreteProfileGrid& grid, const std::vector<Site>& sites,
                                     double t) {
  const auto slice = grid.at_time(t);
  std::vector<double> c;
  for (Site x : sites) c.push_back(slice[x + grid.params().n()]);
  return c;
}

double centered_product(const Configuration& config, const std::vector<Site>& sites,
                        const std::vector<double>& c) {
  double p = 1.0;
  for (std::size_t i = 0; i < sites.size(); ++i) p *= config(sites[i]) - c[i];
  return p;
}

void require_snapshot(const SimulationPlan& plan, double t) {
  if (std::find(plan.snapshot_times.begin(), plan.snapshot_times.end(), t) ==
      plan.snapshot_times.end()) {
    std::ostringstream msg;
    msg << "time " << t << " is not on the snapshot grid";
    throw DomainError(msg.str());
  }
}

std::vector<double> query_times(const VQuery& query) {
  if (const auto* q = std::get_if<SpaceQuery>(&query)) return {q->t};
  const auto& q = std::get<SpaceTimeQuery>(query);
  return {q.s, q.r};
}

bool query_is_empty(const VQuery& query) {
  if (const auto* q = std::get_if<SpaceQuery>(&query)) return q->sites.empty();
  const auto& q = std::get<SpaceTimeQuery>(query);
  return q.y_sites.empty() && q.x_sites.empty();
}

// Plan sampling at the given times (plus 0) with the study's seed.
SimulationPlan make_plan(int n, const StudyTemplate& study, std::vector<double> times,
                         std::size_t replicates, std::uint64_t seed) {
  times.push_back(0.0);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  SimulationPlan plan{ModelParams(n, study.k, study.j), times.back(), times, seed, replicates};
  plan.validate();
  return plan;
}

DiscreteProfileGrid centering_for(const SimulationPlan& plan, const StudyTemplate& study) {
  return solve_rho_eps(plan.params, study.u0, plan.snapshot_times);
}

bool starved(const MomentEstimate& e) { return std::abs(e.mean) < 3.0 * e.std_error; }

std::vector<int> ascending(std::span<const int> n_list) {
  std::vector<int> ns(n_list.begin(), n_list.end());
  if (ns.empty()) throw DomainError("empty N list");
  if (!std::is_sorted(ns.begin(), ns.end())) throw DomainError("N list must be ascending");
  return ns;
}

// Generic scaling driver: `make` builds the functional and the query times for a given N.
template <class Make>
ScalingReport run_scaling(std::string label, std::span<const int> n_list,
                          const StudyTemplate& study, Make&& make) {
  const auto ns = ascending(n_list);
  ScalingReport report;
  report.label = std::move(label);
  report.band_low = study.band_low;
  report.band_high = study.band_high;
  const InitialSampler sampler = product_sampler(study.u0);

  std::size_t m = study.replicates;
  if (m == 0) {
    const auto [times, functional_for] = make(ns.front());
    const SimulationPlan pilot =
        make_plan(ns.front(), study, times, study.pilot_replicates, study.master_seed ^ kPilotSalt);
    const auto centering = centering_for(pilot, study);
    m = budget_replicates(functional_for(centering), pilot, sampler, 1.0 / ns.front(),
                          1.0 / ns.back(), study, report.calibration_c, report.predicted_signal);
  }
  report.budget = m;

  for (int n : ns) {
    const auto [times, functional_for] = make(n);
    const SimulationPlan plan = make_plan(n, study, times, m, study.master_seed);
    const auto centering = centering_for(plan, study);
    const auto est = estimate_moments(plan, sampler, {functional_for(centering)}, study.engine);
    report.rows.push_back({n, 1.0 / n, est[0], starved(est[0])});
  }
  fit_scaling(report);
  return report;
}

}  // namespace

void validate_query(const VQuery& query, const ModelParams& params) {
  if (const auto* q = std::get_if<SpaceQuery>(&query)) {
    check_group(q->sites, params);
    if (!(q->t >= 0.0)) throw DomainError("query time must be >= 0");
    return;
  }
  const auto& q = std::get<SpaceTimeQuery>(query);
  check_group(q.y_sites, params);
  check_group(q.x_sites, params);
  if (!(q.s > 0.0 && q.s < q.r)) throw DomainError("space-time query needs 0 < s < r");
}

Functional v_functional(const VQuery& query, const DiscreteProfileGrid& centering) {
  validate_query(query, centering.params());
  if (const auto* q = std::get_if<SpaceQuery>(&query)) {
    auto c = centering_values(centering, q->sites, q->t);
    return [sites = q->sites, c = std::move(c), t = q->t](const TrajectoryRecord& rec) {
      return centered_product(rec.at(t), sites, c);
    };
  }
  const auto& q = std::get<SpaceTimeQuery>(query);
  auto cy = centering_values(centering, q.y_sites, q.s);
  auto cx = centering_values(centering, q.x_sites, q.r);
  return [q, cy = std::move(cy), cx = std::move(cx)](const TrajectoryRecord& rec) {
    return centered_product(rec.at(q.s), q.y_sites, cy) *
           centered_product(rec.at(q.r), q.x_sites, cx);
  };
}

double oracle_v(const VQuery& query, const GeneratorMatrix& gen, std::span<const double> initial,
                const DiscreteProfileGrid& centering) {
  validate_query(query, gen.params());
  if (const auto* q = std::get_if<SpaceQuery>(&query)) {
    const auto c = centering_values(centering, q->sites, q->t);
    return exact_moment(gen, initial, q->t, q->sites, c);
  }
  const auto& q = std::get<SpaceTimeQuery>(query);
  const auto cy = centering_values(centering, q.y_sites, q.s);
  const auto cx = centering_values(centering, q.x_sites, q.r);
  return exact_two_time_moment(gen, initial, q.s, q.y_sites, cy, q.r, q.x_sites, cx);
}

MomentEstimate estimate_v(const VQuery& query, const SimulationPlan& plan,
                          const InitialSampler& sampler, const DiscreteProfileGrid& centering,
                          const EngineOptions& options) {
  plan.validate();
  validate_query(query, plan.params);
  for (double t : query_times(query)) {
    require_snapshot(plan, t);
    centering.time_index(t);
  }
  if (query_is_empty(query)) return {1.0, 0.0, plan.n_replicates};
  return estimate_moments(plan, sampler, {v_functional(query, centering)}, options)[0];
}

std::vector<Site> SitePattern::sites(int n) const {
  const int base = anchor == Anchor::Right ? n : anchor == Anchor::Left ? -n : 0;
  std::vector<Site> out;
  for (int off : offsets) out.push_back(base + off);
  return out;
}

std::string SitePattern::label() const {
  std::ostringstream out;
  out << (anchor == Anchor::Right ? "right" : anchor == Anchor::Left ? "left" : "bulk") << ':';
  for (std::size_t i = 0; i < offsets.size(); ++i) out << (i ? ";" : "") << offsets[i];
  return out.str();
}

SitePattern SitePattern::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("site pattern '" + text + "' lacks an anchor");
  SitePattern p;
  const std::string anchor = text.substr(0, colon);
  if (anchor == "right") p.anchor = Anchor::Right;
  else if (anchor == "left") p.anchor = Anchor::Left;
  else if (anchor == "bulk") p.anchor = Anchor::Bulk;
  else throw ConfigError("unknown site anchor '" + anchor + "'");
  std::string rest = text.substr(colon + 1);
  std::replace(rest.begin(), rest.end(), ';', ',');
  std::istringstream in(rest);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      p.offsets.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad site offset '" + item + "' in pattern '" + text + "'");
    }
  }
  return p;
}

void fit_scaling(ScalingReport& report) {
  std::vector<double> x, y, w;
  for (const auto& row : report.rows) {
    if (row.signal_starved || row.estimate.std_error <= 0.0) continue;
    const double v = std::abs(row.estimate.mean);
    x.push_back(std::log(row.epsilon));
    y.push_back(std::log(v));
    const double sigma = row.estimate.std_error / v;
    w.push_back(1.0 / (sigma * sigma));
  }
  report.fitted = x.size() >= 2;
  if (!report.fitted) {
    report.pass = false;
    return;
  }
  double c0, c1, cov00, cov01, cov11, chisq;
  gsl_fit_wlinear(x.data(), 1, w.data(), 1, y.data(), 1, x.size(), &c0, &c1, &cov00, &cov01,
                  &cov11, &chisq);
  report.slope = c1;
  report.slope_se = std::sqrt(cov11);
  report.ci_low = c1 - 1.96 * report.slope_se;
  report.ci_high = c1 + 1.96 * report.slope_se;
  report.pass = c1 >= report.band_low && c1 <= report.band_high;
}

std::size_t budget_replicates(const Functional& pilot, const SimulationPlan& pilot_plan,
                              const InitialSampler& sampler, double eps_smallest,
                              double eps_target, const StudyTemplate& study, double& c_out,
                              double& signal_out) {
  const auto est = estimate_moments(pilot_plan, sampler, {pilot}, study.engine)[0];
  const double spread = est.std_error * std::sqrt(static_cast<double>(est.samples));
  c_out = std::abs(est.mean) / eps_smallest;
  signal_out = c_out * eps_target;
  if (starved(est) || signal_out <= 0.0) return study.max_replicates;
  // 3 SE <= 0.3 signal, i.e. SE <= signal / 10.
  const double m = std::ceil(std::pow(10.0 * spread / signal_out, 2));
  return static_cast<std::size_t>(
      std::clamp(m, static_cast<double>(study.min_replicates), static_cast<double>(study.max_replicates)));
}

ScalingReport scaling_study(const SitePattern& pattern, double t, std::span<const int> n_list,
                            const StudyTemplate& study) {
  return run_scaling("v:" + pattern.label(), n_list, study, [&](int n) {
    const VQuery query = SpaceQuery{pattern.sites(n), t};
    return std::pair{std::vector<double>{t}, [query](const DiscreteProfileGrid& c) {
                       return v_functional(query, c);
                     }};
  });
}

DecayReport spacetime_decay_study(const SitePattern& y, double s, const SitePattern& x,
                                  std::span<const double> gaps, int n,
                                  const StudyTemplate& study) {
  if (gaps.empty()) throw DomainError("no gaps given");
  std::vector<double> times{s};
  for (double g : gaps) {
    if (!(g > 0.0)) throw DomainError("gaps must be positive");
    times.push_back(s + g);
  }
  const std::size_t m = study.replicates > 0 ? study.replicates : study.pilot_replicates;
  const SimulationPlan plan = make_plan(n, study, times, m, study.master_seed);
  const auto centering = centering_for(plan, study);
  std::vector<Functional> fs;
  for (double g : gaps) {
    fs.push_back(v_functional(SpaceTimeQuery{y.sites(n), s, x.sites(n), s + g}, centering));
  }
  const auto est = estimate_moments(plan, product_sampler(study.u0), fs, study.engine);
  DecayReport report;
  report.label = "st:" + y.label() + "|" + x.label();
  report.n = n;
  report.s = s;
  for (std::size_t i = 0; i < gaps.size(); ++i) report.rows.push_back({gaps[i], est[i], starved(est[i])});
  report.non_increasing = true;
  for (std::size_t i = 2; i + 1 < report.rows.size(); ++i) {
    const auto& a = report.rows[i].estimate;
    const auto& b = report.rows[i + 1].estimate;
    const double slack = 2.0 * std::hypot(a.std_error, b.std_error);
    if (std::abs(b.mean) > std::abs(a.mean) + slack) report.non_increasing = false;
  }
  return report;
}

ScalingReport spacetime_scaling_study(const SitePattern& y, double s, const SitePattern& x,
                                      double gap, std::span<const int> n_list,
                                      const StudyTemplate& study) {
  std::ostringstream label;
  label << "st:" << y.label() << "|" << x.label() << "@gap=" << gap;
  return run_scaling(label.str(), n_list, study, [&](int n) {
    const VQuery query = SpaceTimeQuery{y.sites(n), s, x.sites(n), s + gap};
    return std::pair{std::vector<double>{s, s + gap}, [query](const DiscreteProfileGrid& c) {
                       return v_functional(query, c);
                     }};
  });
}

ScalingReport gradient_v_study(const SitePattern& pattern, double t, std::span<const int> n_list,
                               const StudyTemplate& study) {
  if (pattern.offsets.empty()) throw DomainError("gradient study needs at least one site");
  SitePattern shifted = pattern;
  shifted.offsets[0] += 1;
  return run_scaling("dv:" + pattern.label(), n_list, study, [&, shifted](int n) {
    const VQuery a = SpaceQuery{pattern.sites(n), t};
    const VQuery b = SpaceQuery{shifted.sites(n), t};
    return std::pair{std::vector<double>{t}, [a, b](const DiscreteProfileGrid& c) -> Functional {
                       auto fa = v_functional(a, c);
                       auto fb = v_functional(b, c);
                       return [fa, fb](const TrajectoryRecord& r) { return fa(r) - fb(r); };
                     }};
  });
}

void write_scaling_csv(std::ostream& out, const ScalingReport& report) {
  out << "# schema=scaling/v1\n";
  out << "N,epsilon,value,stderr,samples,signal_starved\n";
  out.precision(12);
  for (const auto& row : report.rows) {
    out << row.n << ',' << row.epsilon << ',' << row.estimate.mean << ','
        << row.estimate.std_error << ',' << row.estimate.samples << ','
        << (row.signal_starved ? 1 : 0) << '\n';
  }
}

void write_scaling_summary_csv(std::ostream& out, std::span<const ScalingReport> reports) {
  out << "# schema=scaling_summary/v1\n";
  out << "label,slope,slope_se,ci_low,ci_high,band_low,band_high,budget,pass\n";
  out.precision(8);
  for (const auto& r : reports) {
    out << r.label << ',' << r.slope << ',' << r.slope_se << ',' << r.ci_low << ',' << r.ci_high
        << ',' << r.band_low << ',' << r.band_high << ',' << r.budget << ',' << (r.pass ? 1 : 0)
        << '\n';
  }
}

void write_decay_csv(std::ostream& out, const DecayReport& report) {
  out << "# schema=decay/v1\n";
  out << "N,s,gap,value,stderr,samples,signal_starved\n";
  out.precision(12);
  for (const auto& row : report.rows) {
    out << report.n << ',' << report.s << ',' << row.gap << ',' << row.estimate.mean << ','
        << row.estimate.std_error << ',' << row.estimate.samples << ','
        << (row.signal_starved ? 1 : 0) << '\n';
  }
}

}  // namespace stirlab
