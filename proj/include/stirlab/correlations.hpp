#pragma once

// Monte Carlo v-functions (expectations of products of centered occupations
// at one or two times) and their scaling in eps.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stirlab/ctmc_engine.hpp"
#include "stirlab/discrete_profile.hpp"
#include "stirlab/exact_oracle.hpp"

namespace stirlab {

struct SpaceQuery {
  std::vector<Site> sites;
  double t;
};

// Sites y at time s and x at time r, s < r.
struct SpaceTimeQuery {
  std::vector<Site> y_sites;
  double s;
  std::vector<Site> x_sites;
  double r;
};

using VQuery = std::variant<SpaceQuery, SpaceTimeQuery>;

// Throws DomainError on duplicate sites, out-of-lattice sites or s >= r.
void validate_query(const VQuery& query, const ModelParams& params);

// prod (eta(x) - rho_eps(x, t)) over the query, read from a trajectory.
Functional v_functional(const VQuery& query, const DiscreteProfileGrid& centering);

// The v-function with the same centering computed exactly (tiny lattices).
double oracle_v(const VQuery& query, const GeneratorMatrix& gen,
                std::span<const double> initial, const DiscreteProfileGrid& centering);

// Requires every query time on the plan's snapshot grid and on the centering
// grid. An empty site list returns exactly 1 with zero error.
MomentEstimate estimate_v(const VQuery& query, const SimulationPlan& plan,
                          const InitialSampler& sampler, const DiscreteProfileGrid& centering,
                          const EngineOptions& options = {});

// Site tuple given relative to the right end (N + offset), the left end
// (-N + offset) or the centre (offset).
struct SitePattern {
  enum class Anchor { Left, Right, Bulk };
  Anchor anchor = Anchor::Right;
  std::vector<int> offsets;

  std::vector<Site> sites(int n) const;
  std::string label() const;

  // "right:-1,0", "left:0,1", "bulk:0,1".
  static SitePattern parse(const std::string& text);
};

struct StudyTemplate {
  int k = 2;
  double j = 1.0;
  InitialProfile u0 = linear_profile(0.25, 0.25);
  std::uint64_t master_seed = 1;
  EngineOptions engine;
  std::size_t replicates = 0;  // fixed M; 0 = use the budgeter
  std::size_t pilot_replicates = 20'000;
  std::size_t min_replicates = 1'000;
  std::size_t max_replicates = 2'000'000;
  double band_low = 0.6;
  double band_high = 1.4;
};

struct ScalingRow {
  int n;
  double epsilon;
  MomentEstimate estimate;
  bool signal_starved;  // |value| < 3 SE
};

struct ScalingReport {
  std::string label;
  std::vector<ScalingRow> rows;
  std::size_t budget = 0;         // replicates per N
  double calibration_c = 0.0;     // |v| / eps at the smallest N (pilot)
  double predicted_signal = 0.0;  // c * eps at the largest N
  bool fitted = false;            // at least two usable rows
  double slope = 0.0;
  double slope_se = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% normal interval
  double band_low = 0.0, band_high = 0.0;
  bool pass = false;
};

// Weighted least squares of log|v| on log eps with weights |v|^2 / SE^2
// (delta method) over the rows that are not signal-starved.
void fit_scaling(ScalingReport& report);

// Replicate budget: run a pilot at the smallest N, set c = |v|/eps there and
// choose M with 3 SE <= 0.3 c eps_min_of_list using the pilot's spread.
std::size_t budget_replicates(const Functional& pilot, const SimulationPlan& pilot_plan,
                              const InitialSampler& sampler, double eps_smallest,
                              double eps_target, const StudyTemplate& study, double& c_out,
                              double& signal_out);

ScalingReport scaling_study(const SitePattern& pattern, double t, std::span<const int> n_list,
                            const StudyTemplate& study);

struct DecayRow {
  double gap;
  MomentEstimate estimate;
  bool signal_starved;
};

struct DecayReport {
  std::string label;
  int n = 0;
  double s = 0.0;
  std::vector<DecayRow> rows;
  bool non_increasing = false;  // beyond the two smallest gaps, within 2 SE
};

// Space-time v at fixed N and s for r = s + gap, all gaps from one set of
// trajectories.
DecayReport spacetime_decay_study(const SitePattern& y, double s, const SitePattern& x,
                                  std::span<const double> gaps, int n,
                                  const StudyTemplate& study);

// Plateau scaling: the space-time v at a single gap across N.
ScalingReport spacetime_scaling_study(const SitePattern& y, double s, const SitePattern& x,
                                      double gap, std::span<const int> n_list,
                                      const StudyTemplate& study);

// Scaling of |v(x, t) - v(x + e_1, t)| estimated from paired differences.
ScalingReport gradient_v_study(const SitePattern& pattern, double t, std::span<const int> n_list,
                               const StudyTemplate& study);

// "# schema=scaling/v1" (N,epsilon,value,stderr,samples,signal_starved) plus
// "# schema=scaling_summary/v1" (label,slope,slope_se,ci_low,ci_high,band_low,band_high,budget,pass).
void write_scaling_csv(std::ostream& out, const ScalingReport& report);
void write_scaling_summary_csv(std::ostream& out, std::span<const ScalingReport> reports);
void write_decay_csv(std::ostream& out, const DecayReport& report);

}  // namespace stirlab
