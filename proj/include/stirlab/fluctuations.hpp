#pragma once

// Density fluctuation field, its pathwise Dynkin martingale, empirical field
// covariances and the Ornstein-Uhlenbeck limit covariance.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stirlab/ctmc_engine.hpp"
#include "stirlab/discrete_profile.hpp"
#include "stirlab/hydro_macro.hpp"

namespace stirlab {

// sqrt(eps) sum_x H(eps x, t) (eta(x) - centering[x + N]).
double field_value(const Configuration& config, const TestFunction& h, double t,
                   std::span<const double> centering);

// sqrt(eps) sum_x H(eps x, t) eta(x).
double raw_field(const Configuration& config, const TestFunction& h, double t);

struct DynkinResult {
  double martingale = 0.0;      // Z_t - Z_0 - drift_integral
  double z_t = 0.0, z_0 = 0.0;
  double drift_integral = 0.0;  // closed-form drift
  double generator_integral = 0.0;  // same integral from the event catalog, sum rate * jump
  double qv_integral = 0.0;     // int_0^t Gamma_s ds
  double max_jump = 0.0;
  double jump_bound = 0.0;      // 2 sqrt(eps) sup |H|
};

// Pathwise martingale of the raw field up to time t. The record must be in
// dense mode (initial configuration and every event); throws DomainError
// otherwise. Time-independent H is integrated exactly between events, a
// time-dependent one by Simpson's rule on each inter-event interval.
DynkinResult dynkin_residual(const TrajectoryRecord& record, const ModelParams& params,
                             const TestFunction& h, double t);

// The closed-form drift and carre du champ at one configuration and time.
double dynkin_drift(const Configuration& config, const ModelParams& params, const TestFunction& h,
                    double s);
double carre_du_champ(const Configuration& config, const ModelParams& params,
                      const TestFunction& h, double s);

struct FieldItem {
  std::string id;
  TestFunction h;
};

struct FieldPair {
  std::size_t h_index;
  double t;
  std::size_t g_index;
  double s;
};

struct CovarianceRow {
  std::string h_id;
  double t;
  std::string g_id;
  double s;
  double empirical;
  double std_error;  // jackknife
  double oracle;     // NaN until filled in
  double zscore;     // NaN until filled in
  std::size_t samples;
};

// Unbiased sample covariance of (Y_t(H), Y_s(G)) over replicates with
// jackknife standard errors. Fields are centered by rho_eps from `centering`.
// Refuses fewer than 100 replicates.
std::vector<CovarianceRow> empirical_field_covariance(const SimulationPlan& plan,
                                                      const InitialSampler& sampler,
                                                      const DiscreteProfileGrid& centering,
                                                      std::span<const FieldItem> items,
                                                      std::span<const FieldPair> pairs,
                                                      const EngineOptions& options = {});

// Sample covariance and its jackknife standard error.
struct JackknifeCovariance {
  double value;
  double std_error;
};
JackknifeCovariance jackknife_covariance(std::span<const double> x, std::span<const double> y);

enum class BoundaryWeight { Half, Full };
// Full integrates over [-1, 1]; Unit over [0, 1] with only the right boundary term.
enum class OracleDomain { Full, Unit };

struct OuOracleOptions {
  BoundaryWeight boundary_weight = BoundaryWeight::Half;
  OracleDomain domain = OracleDomain::Full;
  SemigroupClock clock = SemigroupClock::Backward;
  int intervals_per_unit_time = 64;  // Simpson intervals in r (rounded up to even), then doubled
  bool refinement_check = true;
  double refinement_tolerance = 0.003;
  double membership_tolerance = 1e-6;
  double semigroup_dt = 0.0;  // 0 = mesh spacing
};

struct OuOracleResult {
  double value = 0.0;
  double sigma_term = 0.0;
  double integral_term = 0.0;
  double coarse_value = 0.0;     // base r grid; `value` uses the doubled grid
  double relative_change = 0.0;  // |value - coarse_value| / |value|
  bool accepted = true;
};

// sigma(T_t H, T_s G) + int_0^s <T_{t-r} H, T_{s-r} G>_{rho_r} dr for s <= t,
// sigma(F, G) = int chi(u0) F G, chi(u) = u (1 - u), and
// <F, G>_rho = int chi(rho) F' G' + w [Dtilde_+(rho(1)) F(1) G(1) + Dtilde_-(rho(-1)) F(-1) G(-1)].
// Throws DomainError if H (at t) or G (at s) violates the boundary conditions.
OuOracleResult ou_covariance_oracle(const TestFunction& h, double t, const TestFunction& g,
                                    double s, const MacroSolution& macro,
                                    const InitialProfile& u0, const OuOracleOptions& options = {});

// Test functions by name: "cos:k" (cos(k pi (u+1)/2), Neumann), "bump" ((1-u^2)^2,
// compatible with every boundary law), "one", "linear", "gauss:c,w"
// (exp(-(u-c)^2/w^2)). A "+blend" or "+blend:width" suffix applies
// boundary_blend against `macro`, which must then be given.
TestFunction make_test_function(const std::string& spec, const MacroSolution* macro = nullptr);

// Registry text: one "id = spec" per line, '#' comments.
std::vector<FieldItem> parse_test_function_registry(std::istream& in, const MacroSolution* macro);

// "# schema=covariance/v1" (H_id,t,G_id,s,empirical,stderr,oracle,zscore,samples).
void write_covariance_csv(std::ostream& out, std::span<const CovarianceRow> rows);

}  // namespace stirlab
