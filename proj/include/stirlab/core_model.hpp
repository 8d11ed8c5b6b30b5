#pragma once

// Lattice, configurations, boundary window operators and the event catalog of
// the stirring process with window-K birth (right) and death (left).
//
// All public functions speak signed site coordinates x in {-N, ..., N}.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stirlab/errors.hpp"

namespace stirlab {

using Site = int;

// Closed interval of sites [first, last].
struct SiteRange {
  Site first;
  Site last;

  bool contains(Site x) const { return x >= first && x <= last; }
  int size() const { return last - first + 1; }
};

class ModelParams {
 public:
  // Requires 1 <= k_window <= n and j_rate >= 0. j = 0 gives pure stirring.
  ModelParams(int n, int k_window, double j_rate);

  int n() const { return n_; }
  int k() const { return k_; }
  double j() const { return j_; }
  double epsilon() const { return 1.0 / static_cast<double>(n_); }

  int num_sites() const { return 2 * n_ + 1; }
  int num_bonds() const { return 2 * n_; }
  Site first_site() const { return -n_; }
  Site last_site() const { return n_; }
  bool contains(Site x) const { return x >= -n_ && x <= n_; }

  // I_+ = [N-K+1, N] (births), I_- = [-N, -N+K-1] (deaths).
  SiteRange i_plus() const { return {n_ - k_ + 1, n_}; }
  SiteRange i_minus() const { return {-n_, -n_ + k_ - 1}; }

  // Rates on the macroscopic clock: N^2/2 per bond, jN/2 per boundary mechanism.
  double bond_rate() const { return 0.5 * static_cast<double>(n_) * n_; }
  double boundary_rate() const { return 0.5 * j_ * n_; }

  bool operator==(const ModelParams&) const = default;

 private:
  int n_;
  int k_;
  double j_;
};

// Occupancy vector eta in {0,1}^{2N+1}.
class Configuration {
 public:
  explicit Configuration(int n, std::uint8_t fill = 0);

  // Parses the text form: 2N+1 characters of '0'/'1', leftmost = site -N.
  static Configuration from_string(std::string_view text);
  std::string to_string() const;

  int n() const { return n_; }
  int num_sites() const { return static_cast<int>(occ_.size()); }

  std::uint8_t operator()(Site x) const { return occ_[index(x)]; }
  void set(Site x, std::uint8_t value);
  int particle_count() const;

  // Zero-based storage (index 0 is site -N).
  std::span<const std::uint8_t> raw() const { return occ_; }
  std::span<std::uint8_t> raw() { return occ_; }

  bool operator==(const Configuration&) const = default;

 private:
  std::size_t index(Site x) const { return static_cast<std::size_t>(x + n_); }

  int n_;
  std::vector<std::uint8_t> occ_;
};

enum class EventType : std::uint8_t { Exchange, BirthRight, DeathLeft };

// Exchange{site = x} swaps eta(x) and eta(x+1); BirthRight / DeathLeft flip the
// single site `site`.
struct Event {
  EventType type;
  Site site;

  static Event exchange(Site bond) { return {EventType::Exchange, bond}; }
  static Event birth(Site y) { return {EventType::BirthRight, y}; }
  static Event death(Site z) { return {EventType::DeathLeft, z}; }

  bool operator==(const Event&) const = default;
};

struct RatedEvent {
  Event event;
  double rate;
};

// D_+ eta(x) = (1 - eta(x)) eta(x+1) ... eta(N), x in I_+.
int d_plus(const Configuration& config, const ModelParams& params, Site x);
// D_- eta(x) = eta(x) (1 - eta(x-1)) ... (1 - eta(-N)), x in I_-.
int d_minus(const Configuration& config, const ModelParams& params, Site x);

// The same product formulas applied to a real-valued profile; `profile[i]` is
// the value at site -N + i.
double d_plus(std::span<const double> profile, const ModelParams& params, Site x);
double d_minus(std::span<const double> profile, const ModelParams& params, Site x);

// The unique y in I_+ with D_+ eta(y) = 1 (first empty site scanning leftwards
// from N), or nothing when the window is full.
std::optional<Site> birth_site(const Configuration& config, const ModelParams& params);
// The unique z in I_- with D_- eta(z) = 1 (first occupied site scanning
// rightwards from -N), or nothing when the window is empty.
std::optional<Site> death_site(const Configuration& config, const ModelParams& params);

// Event catalog with macroscopic rates. With skip_concordant (the default)
// only bonds with eta(x) != eta(x+1) are listed; swapping equal occupancies is
// the identity so the law is unchanged.
std::vector<RatedEvent> event_rates(const Configuration& config, const ModelParams& params,
                                    bool skip_concordant = true);

double total_rate(const Configuration& config, const ModelParams& params,
                  bool skip_concordant = true);

bool is_legal(const Configuration& config, const ModelParams& params, const Event& event);

// Throws ContractViolation for illegal events.
Configuration apply_event(const Configuration& config, const ModelParams& params,
                          const Event& event);

// Applies the event's effect without the legality check: swap for Exchange,
// eta(y) = 1 for BirthRight, eta(z) = 0 for DeathLeft.
void apply_event_unchecked(Configuration& config, const Event& event);

}  // namespace stirlab
