#include "stirlab/exact_oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

namespace {

int bit_of(const ModelParams& params, Site x) { return x + params.n(); }

void check_sites(const ModelParams& params, std::span<const Site> sites,
                 std::span<const double> centering) {
  if (sites.size() != centering.size()) {
    throw DomainError("site list and centering have different lengths");
  }
  std::set<Site> seen;
  for (Site x : sites) {
    if (!params.contains(x)) {
      throw DomainError("site " + std::to_string(x) + " outside the lattice");
    }
    if (!seen.insert(x).second) {
      throw DomainError("duplicate site " + std::to_string(x) + " in moment query");
    }
  }
}

// Weights prod_i (bit(x_i) - c_i) for every state.
std::vector<double> product_weights(const GeneratorMatrix& gen, std::span<const Site> sites,
                                    std::span<const double> centering) {
  std::vector<double> w(gen.dim(), 1.0);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const StateIndex mask = StateIndex{1} << bit_of(gen.params(), sites[i]);
    for (StateIndex s = 0; s < w.size(); ++s) {
      w[s] *= ((s & mask) ? 1.0 : 0.0) - centering[i];
    }
  }
  return w;
}

void require_finite_time(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) {
    throw DomainError("time must be finite and >= 0, got " + std::to_string(t));
  }
}

// Poisson(a) weights up to the point where the remaining tail mass is below
// `tail`; a <= max_slab_intensity keeps exp(-a) well inside double range.
std::vector<double> poisson_weights(double a, double tail) {
  std::vector<double> w;
  double term = std::exp(-a);
  for (int k = 0;; ++k) {
    if (k > 0) term *= a / k;
    w.push_back(term);
    // Past the mode the terms decrease at least geometrically with ratio
    // a/(k+1), so the tail after k is at most term * r / (1 - r).
    if (k + 1 > a) {
      const double r = a / (k + 1);
      if (term * r / (1.0 - r) < tail) break;
    }
  }
  return w;
}

// One uniformization slab of length tau applied to a row vector.
void uniformization_slab(const GeneratorMatrix& gen, double lambda, double tau, double tail,
                         std::vector<double>& v) {
  const auto weights = poisson_weights(lambda * tau, tail);
  std::vector<double> term = v;
  std::vector<double> next(v.size());
  std::vector<double> acc(v.size(), 0.0);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (std::size_t s = 0; s < v.size(); ++s) acc[s] += weights[k] * term[s];
    if (k + 1 == weights.size()) break;
    // term <- term * (I + Q / lambda)
    gen.left_multiply(term, next);
    for (std::size_t s = 0; s < v.size(); ++s) term[s] += next[s] / lambda;
  }
  v.swap(acc);
}

}  // namespace

StateIndex state_of(const Configuration& config) {
  if (config.num_sites() > GeneratorMatrix::kMaxSites) {
    throw CapacityError("configuration too large for the exact oracle");
  }
  StateIndex s = 0;
  const auto raw = config.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i]) s |= StateIndex{1} << i;
  }
  return s;
}

Configuration configuration_of(StateIndex state, int n) {
  Configuration config(n);
  auto raw = config.raw();
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = (state >> i) & 1u;
  return config;
}

std::span<const GeneratorMatrix::Transition> GeneratorMatrix::transitions(StateIndex state) const {
  return {transitions_.data() + row_start_[state], row_start_[state + 1] - row_start_[state]};
}

double GeneratorMatrix::entry(StateIndex from, StateIndex to) const {
  if (from == to) return -exit_rate_[from];
  double total = 0.0;
  for (const auto& tr : transitions(from)) {
    if (tr.target == to) total += tr.rate;
  }
  return total;
}

void GeneratorMatrix::left_multiply(std::span<const double> in, std::span<double> out) const {
  const std::size_t n = dim();
  for (std::size_t s = 0; s < n; ++s) out[s] = -exit_rate_[s] * in[s];
  for (std::size_t s = 0; s < n; ++s) {
    const double mass = in[s];
    if (mass == 0.0) continue;
    for (std::size_t e = row_start_[s]; e < row_start_[s + 1]; ++e) {
      out[transitions_[e].target] += mass * transitions_[e].rate;
    }
  }
}

GeneratorMatrix build_generator(const ModelParams& params) {
  const int sites = params.num_sites();
  if (sites > GeneratorMatrix::kMaxSites) {
    throw CapacityError("exact oracle needs 2N+1 <= " +
                        std::to_string(GeneratorMatrix::kMaxSites) + ", got " +
                        std::to_string(sites));
  }
  GeneratorMatrix gen(params);
  const StateIndex dim = StateIndex{1} << sites;
  const double eps = params.epsilon();
  // eps^-2 L_0: each bond at rate 1/2; eps^-2 * eps L_b: each boundary term at rate j/2.
  const double bond = 0.5 / (eps * eps);
  const double boundary = 0.5 * params.j() / eps;
  const StateIndex all = dim - 1;

  gen.row_start_.reserve(dim + 1);
  gen.exit_rate_.assign(dim, 0.0);
  for (StateIndex s = 0; s < dim; ++s) {
    gen.row_start_.push_back(gen.transitions_.size());
    double exit = 0.0;
    for (int b = 0; b + 1 < sites; ++b) {
      const StateIndex pair = StateIndex{3} << b;
      const StateIndex target = ((s & pair) == 0 || (s & pair) == pair) ? s : (s ^ pair);
      if (target != s) {
        gen.transitions_.push_back({target, bond});
        exit += bond;
      }
    }
    if (params.j() > 0.0) {
      // D_+ eta(x) = 1 iff x is empty and every site to its right is occupied.
      for (Site x = params.i_plus().first; x <= params.i_plus().last; ++x) {
        const int i = bit_of(params, x);
        const StateIndex above = all & ~((StateIndex{2} << i) - 1);
        if (!(s & (StateIndex{1} << i)) && (s & above) == above) {
          gen.transitions_.push_back({s | (StateIndex{1} << i), boundary});
          exit += boundary;
        }
      }
      // D_- eta(x) = 1 iff x is occupied and every site to its left is empty.
      for (Site x = params.i_minus().first; x <= params.i_minus().last; ++x) {
        const int i = bit_of(params, x);
        const StateIndex below = (StateIndex{1} << i) - 1;
        if ((s & (StateIndex{1} << i)) && (s & below) == 0) {
          gen.transitions_.push_back({s & ~(StateIndex{1} << i), boundary});
          exit += boundary;
        }
      }
    }
    gen.exit_rate_[s] = exit;
    gen.max_exit_rate_ = std::max(gen.max_exit_rate_, exit);
  }
  gen.row_start_.push_back(gen.transitions_.size());
  return gen;
}

Distribution product_distribution(const ModelParams& params, const InitialProfile& u0) {
  const int sites = params.num_sites();
  if (sites > GeneratorMatrix::kMaxSites) throw CapacityError("lattice too large for the oracle");
  std::vector<double> p(sites);
  for (int i = 0; i < sites; ++i) {
    p[i] = u0(params.epsilon() * (i - params.n()));
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw DomainError("initial profile outside [0, 1]");
  }
  Distribution dist(std::size_t{1} << sites);
  for (StateIndex s = 0; s < dist.size(); ++s) {
    double w = 1.0;
    for (int i = 0; i < sites; ++i) w *= ((s >> i) & 1u) ? p[i] : 1.0 - p[i];
    dist[s] = w;
  }
  return dist;
}

Distribution point_distribution(const ModelParams& params, StateIndex state) {
  const int sites = params.num_sites();
  if (sites > GeneratorMatrix::kMaxSites) throw CapacityError("lattice too large for the oracle");
  Distribution dist(std::size_t{1} << sites, 0.0);
  if (state >= dist.size()) throw DomainError("state index out of range");
  dist[state] = 1.0;
  return dist;
}

Distribution exact_distribution(const GeneratorMatrix& gen, std::span<const double> initial,
                                double t, const UniformizationOptions& options) {
  require_finite_time(t);
  if (initial.size() != gen.dim()) throw DomainError("initial vector has the wrong dimension");
  std::vector<double> v(initial.begin(), initial.end());
  const double lambda = gen.max_exit_rate();
  if (t == 0.0 || lambda == 0.0) return v;

  const double total = lambda * t;
  const auto slabs = static_cast<std::uint64_t>(std::ceil(total / options.max_slab_intensity));
  const double tau = t / static_cast<double>(slabs);

  if (slabs <= 64 || gen.dim() > options.dense_dim_limit) {
    for (std::uint64_t i = 0; i < slabs; ++i) {
      uniformization_slab(gen, lambda, tau, options.tail_tolerance, v);
    }
    return v;
  }

  // Long horizons on small state spaces: build the slab transition matrix
  // column-free (row by row) and raise it to the number of slabs by squaring.
  const std::size_t dim = gen.dim();
  Eigen::MatrixXd slab(dim, dim);
  for (std::size_t s = 0; s < dim; ++s) {
    std::vector<double> row(dim, 0.0);
    row[s] = 1.0;
    uniformization_slab(gen, lambda, tau, options.tail_tolerance, row);
    for (std::size_t c = 0; c < dim; ++c) slab(s, c) = row[c];
  }
  Eigen::RowVectorXd x = Eigen::Map<const Eigen::RowVectorXd>(v.data(), dim);
  std::uint64_t remaining = slabs;
  Eigen::MatrixXd power = slab;
  while (remaining > 0) {
    if (remaining & 1u) x = x * power;
    remaining >>= 1;
    if (remaining > 0) power = power * power;
  }
  for (std::size_t s = 0; s < dim; ++s) v[s] = x(s);
  return v;
}

Distribution stationary_distribution(const GeneratorMatrix& gen) {
  const std::size_t dim = gen.dim();
  if (dim > 4096) throw CapacityError("stationary solve limited to 4096 states");
  // Solve pi Q = 0 with sum(pi) = 1: transpose, replace the last equation.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (StateIndex s = 0; s < dim; ++s) {
    a(s, s) -= gen.exit_rate(s);
    for (const auto& tr : gen.transitions(s)) a(tr.target, s) += tr.rate;
  }
  a.row(dim - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  rhs(dim - 1) = 1.0;
  const Eigen::VectorXd pi = a.fullPivLu().solve(rhs);
  return {pi.data(), pi.data() + dim};
}

double expect_centered_product(const GeneratorMatrix& gen, std::span<const double> dist,
                               std::span<const Site> sites, std::span<const double> centering) {
  check_sites(gen.params(), sites, centering);
  if (dist.size() != gen.dim()) throw DomainError("distribution has the wrong dimension");
  if (sites.empty()) {
    double total = 0.0;
    for (double p : dist) total += p;
    return total;
  }
  const auto w = product_weights(gen, sites, centering);
  double total = 0.0;
  for (std::size_t s = 0; s < dist.size(); ++s) total += dist[s] * w[s];
  return total;
}

double exact_moment(const GeneratorMatrix& gen, std::span<const double> initial, double t,
                    std::span<const Site> sites, std::span<const double> centering) {
  check_sites(gen.params(), sites, centering);
  if (sites.empty()) return 1.0;
  const auto dist = exact_distribution(gen, initial, t);
  return expect_centered_product(gen, dist, sites, centering);
}

double exact_two_time_moment(const GeneratorMatrix& gen, std::span<const double> initial,
                             double s, std::span<const Site> y_sites,
                             std::span<const double> y_centering, double r,
                             std::span<const Site> x_sites, std::span<const double> x_centering) {
  check_sites(gen.params(), y_sites, y_centering);
  check_sites(gen.params(), x_sites, x_centering);
  require_finite_time(s);
  if (r < s) throw DomainError("two-time moment needs s <= r");
  auto weighted = exact_distribution(gen, initial, s);
  const auto wy = product_weights(gen, y_sites, y_centering);
  for (std::size_t i = 0; i < weighted.size(); ++i) weighted[i] *= wy[i];
  const auto later = exact_distribution(gen, weighted, r - s);
  const auto wx = product_weights(gen, x_sites, x_centering);
  double total = 0.0;
  for (std::size_t i = 0; i < later.size(); ++i) total += later[i] * wx[i];
  return total;
}

std::vector<double> exact_site_means(const GeneratorMatrix& gen, std::span<const double> dist) {
  const int sites = gen.params().num_sites();
  std::vector<double> mean(sites, 0.0);
  for (StateIndex s = 0; s < dist.size(); ++s) {
    for (int i = 0; i < sites; ++i) {
      if ((s >> i) & 1u) mean[i] += dist[s];
    }
  }
  return mean;
}

std::vector<double> exact_boundary_expectations(const GeneratorMatrix& gen,
                                                std::span<const double> dist, bool plus) {
  const ModelParams& params = gen.params();
  std::vector<double> out(params.num_sites(), 0.0);
  const SiteRange window = plus ? params.i_plus() : params.i_minus();
  for (StateIndex s = 0; s < dist.size(); ++s) {
    if (dist[s] == 0.0) continue;
    const Configuration config = configuration_of(s, params.n());
    for (Site x = window.first; x <= window.last; ++x) {
      const int d = plus ? d_plus(config, params, x) : d_minus(config, params, x);
      if (d) out[x + params.n()] += dist[s];
    }
  }
  return out;
}

void write_golden_csv(std::ostream& out, std::span<const GoldenValue> rows) {
  out << "# schema=golden/v1\n";
  out << "n_sites,K,j,t,sites,centering_mode,value\n";
  out.precision(17);
  for (const auto& row : rows) {
    std::ostringstream sites;
    for (std::size_t i = 0; i < row.sites.size(); ++i) {
      if (i) sites << ';';
      sites << row.sites[i];
    }
    out << row.n_sites << ',' << row.k << ',' << row.j << ',' << row.t << ',' << sites.str()
        << ',' << row.centering_mode << ',' << row.value << '\n';
  }
}

}  // namespace stirlab
