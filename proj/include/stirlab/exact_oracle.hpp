#pragma once

// Brute-force ground truth on tiny lattices: the full generator matrix of the
// accelerated process, exact transient laws by uniformization, and exact
// one- and two-time moments.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "stirlab/core_model.hpp"
#include "stirlab/initial_profile.hpp"

namespace stirlab {

using StateIndex = std::uint32_t;

// Bit i of a state index is eta(-N + i).
StateIndex state_of(const Configuration& config);
Configuration configuration_of(StateIndex state, int n);

// Sparse rate matrix Q of the accelerated generator: Q[s][s'] is the rate of
// s -> s', the diagonal is minus the row sum. Hard cap 2N+1 <= 15.
class GeneratorMatrix {
 public:
  static constexpr int kMaxSites = 15;

  const ModelParams& params() const { return params_; }
  std::size_t dim() const { return exit_rate_.size(); }

  // Off-diagonal transitions out of `state`.
  struct Transition {
    StateIndex target;
    double rate;
  };
  std::span<const Transition> transitions(StateIndex state) const;
  double exit_rate(StateIndex state) const { return exit_rate_[state]; }
  double max_exit_rate() const { return max_exit_rate_; }

  // Dense entry Q[from][to] (diagonal included).
  double entry(StateIndex from, StateIndex to) const;

  // out = in * Q (row vector times matrix); forward Kolmogorov direction.
  void left_multiply(std::span<const double> in, std::span<double> out) const;

 private:
  friend GeneratorMatrix build_generator(const ModelParams& params);
  explicit GeneratorMatrix(const ModelParams& params) : params_(params) {}

  ModelParams params_;
  std::vector<std::size_t> row_start_;
  std::vector<Transition> transitions_;
  std::vector<double> exit_rate_;
  double max_exit_rate_ = 0.0;
};

// Matrix of L_eps = eps^-2 (L_0 + eps L_{b,-} + eps L_{b,+}) built from the
// generator formula itself (all bonds, boundary products by bit masks).
// Throws CapacityError when 2N+1 > 15.
GeneratorMatrix build_generator(const ModelParams& params);

using Distribution = std::vector<double>;

// Product Bernoulli law with P(eta(x)=1) = u0(eps x).
Distribution product_distribution(const ModelParams& params, const InitialProfile& u0);
Distribution point_distribution(const ModelParams& params, StateIndex state);

struct UniformizationOptions {
  double tail_tolerance = 1e-15;  // Poisson tail mass dropped per slab
  double max_slab_intensity = 32.0;  // Lambda * slab length
  std::size_t dense_dim_limit = 1024;  // allow dense squaring below this size
};

// pi_0 exp(tQ) by uniformization with a rigorous truncation bound. Also
// valid for signed vectors (the map is linear). Throws DomainError for t < 0.
Distribution exact_distribution(const GeneratorMatrix& gen, std::span<const double> initial,
                                double t, const UniformizationOptions& options = {});

// Unique stationary law (null left vector of Q) by dense LU; dim <= 4096.
Distribution stationary_distribution(const GeneratorMatrix& gen);

// E[prod_i (eta(x_i) - c_i)] under `dist`. Empty site list gives 1.
double expect_centered_product(const GeneratorMatrix& gen, std::span<const double> dist,
                               std::span<const Site> sites, std::span<const double> centering);

// E[prod_i (eta_t(x_i) - c_i)] starting from pi_0. Duplicate sites throw.
double exact_moment(const GeneratorMatrix& gen, std::span<const double> initial, double t,
                    std::span<const Site> sites, std::span<const double> centering);

// E[prod_j (eta_s(y_j) - a_j) prod_i (eta_r(x_i) - b_i)] for s <= r, by
// propagating the weighted law from s to r.
double exact_two_time_moment(const GeneratorMatrix& gen, std::span<const double> initial,
                             double s, std::span<const Site> y_sites,
                             std::span<const double> y_centering, double r,
                             std::span<const Site> x_sites, std::span<const double> x_centering);

// Exact single-site means rho_t^eps(x), x = -N..N.
std::vector<double> exact_site_means(const GeneratorMatrix& gen, std::span<const double> dist);

// Exact E[D_+ eta(x)] for x in I_+ and E[D_- eta(x)] for x in I_- under `dist`
// (zero elsewhere), indexed by x + N.
std::vector<double> exact_boundary_expectations(const GeneratorMatrix& gen,
                                                std::span<const double> dist, bool plus);

struct GoldenValue {
  int n_sites;
  int k;
  double j;
  double t;
  std::vector<Site> sites;
  std::string centering_mode;
  double value;
};

// "# schema=golden/v1" then (n_sites,K,j,t,sites,centering_mode,value); sites
// are ';'-separated.
void write_golden_csv(std::ostream& out, std::span<const GoldenValue> rows);

}  // namespace stirlab
