#include "stirlab/core_model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace stirlab {

ModelParams::ModelParams(int n, int k_window, double j_rate) : n_(n), k_(k_window), j_(j_rate) {
  if (n < 1) throw DomainError("ModelParams: N must be >= 1");
  if (k_window < 1 || k_window > n) {
    throw DomainError("ModelParams: window size K must satisfy 1 <= K <= N");
  }
  if (!(j_rate >= 0.0)) throw DomainError("ModelParams: boundary rate j must be >= 0");
  // I_+ and I_- are disjoint: 2K <= 2N < 2N+1.
}

Configuration::Configuration(int n, std::uint8_t fill) : n_(n) {
  if (n < 1) throw DomainError("Configuration: N must be >= 1");
  if (fill > 1) throw DomainError("Configuration: occupancy must be 0 or 1");
  occ_.assign(static_cast<std::size_t>(2 * n + 1), fill);
}

Configuration Configuration::from_string(std::string_view text) {
  if (text.size() < 3 || text.size() % 2 == 0) {
    throw DomainError("Configuration: text form must have odd length 2N+1 >= 3");
  }
  Configuration config(static_cast<int>(text.size() / 2));
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '0' && text[i] != '1') {
      throw DomainError("Configuration: text form may only contain '0' and '1'");
    }
    config.occ_[i] = static_cast<std::uint8_t>(text[i] - '0');
  }
  return config;
}

std::string Configuration::to_string() const {
  std::string out(occ_.size(), '0');
  for (std::size_t i = 0; i < occ_.size(); ++i) out[i] = occ_[i] ? '1' : '0';
  return out;
}

void Configuration::set(Site x, std::uint8_t value) {
  if (x < -n_ || x > n_) throw DomainError("Configuration::set: site outside lattice");
  if (value > 1) throw DomainError("Configuration::set: occupancy must be 0 or 1");
  occ_[index(x)] = value;
}

int Configuration::particle_count() const {
  return std::accumulate(occ_.begin(), occ_.end(), 0);
}

namespace {

void check_same_lattice(const Configuration& config, const ModelParams& params) {
  if (config.n() != params.n()) {
    throw DomainError("configuration and parameters disagree on N");
  }
}

// Generic D_+ / D_- over any indexable profile (0-based, index 0 = site -N).
template <class Value, class Profile>
Value d_plus_impl(const Profile& u, const ModelParams& params, Site x) {
  if (!params.i_plus().contains(x)) throw DomainError("d_plus: site outside I_+");
  const int n = params.n();
  Value out = Value(1) - Value(u[static_cast<std::size_t>(x + n)]);
  for (Site y = x + 1; y <= n; ++y) out *= Value(u[static_cast<std::size_t>(y + n)]);
  return out;
}

template <class Value, class Profile>
Value d_minus_impl(const Profile& u, const ModelParams& params, Site x) {
  if (!params.i_minus().contains(x)) throw DomainError("d_minus: site outside I_-");
  const int n = params.n();
  Value out = Value(u[static_cast<std::size_t>(x + n)]);
  for (Site y = x - 1; y >= -n; --y) out *= Value(1) - Value(u[static_cast<std::size_t>(y + n)]);
  return out;
}

}  // namespace

int d_plus(const Configuration& config, const ModelParams& params, Site x) {
  check_same_lattice(config, params);
  return d_plus_impl<int>(config.raw(), params, x);
}

int d_minus(const Configuration& config, const ModelParams& params, Site x) {
  check_same_lattice(config, params);
  return d_minus_impl<int>(config.raw(), params, x);
}

double d_plus(std::span<const double> profile, const ModelParams& params, Site x) {
  if (static_cast<int>(profile.size()) != params.num_sites()) {
    throw DomainError("d_plus: profile length must be 2N+1");
  }
  return d_plus_impl<double>(profile, params, x);
}

double d_minus(std::span<const double> profile, const ModelParams& params, Site x) {
  if (static_cast<int>(profile.size()) != params.num_sites()) {
    throw DomainError("d_minus: profile length must be 2N+1");
  }
  return d_minus_impl<double>(profile, params, x);
}

std::optional<Site> birth_site(const Configuration& config, const ModelParams& params) {
  check_same_lattice(config, params);
  const SiteRange window = params.i_plus();
  for (Site y = window.last; y >= window.first; --y) {
    if (config(y) == 0) return y;
  }
  return std::nullopt;
}

std::optional<Site> death_site(const Configuration& config, const ModelParams& params) {
  check_same_lattice(config, params);
  const SiteRange window = params.i_minus();
  for (Site z = window.first; z <= window.last; ++z) {
    if (config(z) == 1) return z;
  }
  return std::nullopt;
}

std::vector<RatedEvent> event_rates(const Configuration& config, const ModelParams& params,
                                    bool skip_concordant) {
  check_same_lattice(config, params);
  std::vector<RatedEvent> out;
  const double bond_rate = params.bond_rate();
  for (Site x = params.first_site(); x < params.last_site(); ++x) {
    if (!skip_concordant || config(x) != config(x + 1)) {
      out.push_back({Event::exchange(x), bond_rate});
    }
  }
  if (params.j() > 0.0) {
    if (auto y = birth_site(config, params)) out.push_back({Event::birth(*y), params.boundary_rate()});
    if (auto z = death_site(config, params)) out.push_back({Event::death(*z), params.boundary_rate()});
  }
  return out;
}

double total_rate(const Configuration& config, const ModelParams& params, bool skip_concordant) {
  double total = 0.0;
  for (const auto& e : event_rates(config, params, skip_concordant)) total += e.rate;
  return total;
}

bool is_legal(const Configuration& config, const ModelParams& params, const Event& event) {
  check_same_lattice(config, params);
  switch (event.type) {
    case EventType::Exchange:
      return event.site >= params.first_site() && event.site < params.last_site();
    case EventType::BirthRight:
      return params.i_plus().contains(event.site) && d_plus(config, params, event.site) == 1;
    case EventType::DeathLeft:
      return params.i_minus().contains(event.site) && d_minus(config, params, event.site) == 1;
  }
  return false;
}

void apply_event_unchecked(Configuration& config, const Event& event) {
  auto occ = config.raw();
  const auto i = static_cast<std::size_t>(event.site + config.n());
  switch (event.type) {
    case EventType::Exchange:
      std::swap(occ[i], occ[i + 1]);
      break;
    case EventType::BirthRight:
      occ[i] = 1;
      break;
    case EventType::DeathLeft:
      occ[i] = 0;
      break;
  }
}

Configuration apply_event(const Configuration& config, const ModelParams& params,
                          const Event& event) {
  if (!is_legal(config, params, event)) {
    std::ostringstream msg;
    msg << "apply_event: illegal event (type " << static_cast<int>(event.type) << ", site "
        << event.site << ") for configuration " << config.to_string();
    throw ContractViolation(msg.str());
  }
  Configuration out = config;
  apply_event_unchecked(out, event);
  return out;
}

}  // namespace stirlab
