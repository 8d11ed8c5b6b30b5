#include "stirlab/ctmc_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace stirlab {

void SimulationPlan::validate() const {
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("plan: t_end must be finite and >= 0");
  if (n_replicates == 0) throw DomainError("plan: n_replicates must be positive");
  for (std::size_t i = 0; i < snapshot_times.size(); ++i) {
    const double s = snapshot_times[i];
    if (!(s >= 0.0 && s <= t_end)) throw DomainError("plan: snapshot time outside [0, t_end]");
    if (i > 0 && !(s > snapshot_times[i - 1])) {
      throw DomainError("plan: snapshot times must be sorted and unique");
    }
  }
}

const Configuration& TrajectoryRecord::at(double time) const {
  for (const auto& s : snapshots) {
    if (s.time == time) return s.config;
  }
  std::ostringstream msg;
  msg << "trajectory has no snapshot at time " << time;
  throw DomainError(msg.str());
}

Configuration sample_initial(const ModelParams& params, const InitialProfile& u0, Rng& rng) {
  Configuration config(params.n());
  const double eps = params.epsilon();
  for (Site x = params.first_site(); x <= params.last_site(); ++x) {
    const double p = u0(eps * x);
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("sample_initial: u0 outside [0, 1]");
    config.set(x, uniform01(rng) < p ? 1 : 0);
  }
  return config;
}

InitialSampler product_sampler(InitialProfile u0) {
  return [u0 = std::move(u0)](const ModelParams& params, Rng& rng) {
    return sample_initial(params, u0, rng);
  };
}

InitialSampler fixed_sampler(Configuration config) {
  return [config = std::move(config)](const ModelParams&, Rng&) { return config; };
}

namespace {

// Hot-loop state: occupancies plus the set of discordant bonds, kept as a
// dense list with back-pointers so that insertion, removal and uniform
// selection are O(1).
class ProcessState {
 public:
  ProcessState(const ModelParams& params, const Configuration& initial, bool skip_concordant)
      : n_(params.n()),
        k_(params.k()),
        sites_(params.num_sites()),
        skip_concordant_(skip_concordant),
        bond_rate_(params.bond_rate()),
        boundary_rate_(params.j() > 0.0 ? params.boundary_rate() : 0.0),
        occ_(initial.raw().begin(), initial.raw().end()),
        pos_(static_cast<std::size_t>(sites_ - 1), -1) {
    bonds_.reserve(static_cast<std::size_t>(sites_ - 1));
    for (int b = 0; b < sites_ - 1; ++b) {
      if (occ_[b] != occ_[b + 1]) insert(b);
    }
    refresh_boundary();
  }

  double total_rate() const {
    const double n_bonds = skip_concordant_ ? static_cast<double>(bonds_.size())
                                            : static_cast<double>(sites_ - 1);
    return n_bonds * bond_rate_ + boundary_rate_ * ((birth_ >= 0) + (death_ >= 0));
  }

  // Chooses an event proportionally to its rate given u in [0, 1).
  Event select(double u, double rate) const {
    double r = u * rate;
    const std::size_t n_bonds = skip_concordant_ ? bonds_.size() : static_cast<std::size_t>(sites_ - 1);
    const double bond_total = static_cast<double>(n_bonds) * bond_rate_;
    const bool any_boundary = boundary_rate_ > 0.0 && (birth_ >= 0 || death_ >= 0);
    if (n_bonds > 0 && (r < bond_total || !any_boundary)) {
      auto idx = static_cast<std::size_t>(r / bond_rate_);
      if (idx >= n_bonds) idx = n_bonds - 1;
      const int b = skip_concordant_ ? bonds_[idx] : static_cast<int>(idx);
      return Event::exchange(b - n_);
    }
    r -= bond_total;
    if (birth_ >= 0 && (r < boundary_rate_ || death_ < 0)) return Event::birth(birth_ - n_);
    return Event::death(death_ - n_);
  }

  void apply(const Event& e) {
    const int i = e.site + n_;
    switch (e.type) {
      case EventType::Exchange:
        if (occ_[i] == occ_[i + 1]) return;
        std::swap(occ_[i], occ_[i + 1]);
        if (i > 0) toggle(i - 1);
        if (i + 1 < sites_ - 1) toggle(i + 1);
        if (i + 1 >= sites_ - k_ || i < k_) refresh_boundary();
        break;
      case EventType::BirthRight:
      case EventType::DeathLeft:
        occ_[i] ^= 1;
        if (i > 0) toggle(i - 1);
        if (i < sites_ - 1) toggle(i);
        refresh_boundary();
        break;
    }
  }

  void write_to(Configuration& config) const {
    std::copy(occ_.begin(), occ_.end(), config.raw().begin());
  }

 private:
  void insert(int b) {
    pos_[b] = static_cast<int>(bonds_.size());
    bonds_.push_back(b);
  }
  void erase(int b) {
    const int p = pos_[b];
    const int last = bonds_.back();
    bonds_[p] = last;
    pos_[last] = p;
    bonds_.pop_back();
    pos_[b] = -1;
  }
  void toggle(int b) {
    if (pos_[b] >= 0) {
      erase(b);
    } else {
      insert(b);
    }
  }
  void refresh_boundary() {
    birth_ = -1;
    for (int i = sites_ - 1; i >= sites_ - k_; --i) {
      if (occ_[i] == 0) {
        birth_ = i;
        break;
      }
    }
    death_ = -1;
    for (int i = 0; i < k_; ++i) {
      if (occ_[i] == 1) {
        death_ = i;
        break;
      }
    }
  }

  int n_;
  int k_;
  int sites_;
  bool skip_concordant_;
  double bond_rate_;
  double boundary_rate_;
  std::vector<std::uint8_t> occ_;
  std::vector<int> bonds_;
  std::vector<int> pos_;
  int birth_ = -1;  // zero-based index, -1 if none
  int death_ = -1;
};

}  // namespace

TrajectoryRecord run_replicate(const SimulationPlan& plan, const InitialSampler& sampler,
                               std::uint64_t replicate_id, const EngineOptions& options) {
  TrajectoryRecord record;
  record.replicate_id = replicate_id;
  record.rng_stream_id = replicate_stream_seed(plan.master_seed, replicate_id);
  Rng rng(record.rng_stream_id);

  const ModelParams& params = plan.params;
  Configuration current = sampler(params, rng);
  if (current.n() != params.n()) throw DomainError("initial sampler returned wrong lattice size");
  if (options.dense) record.initial = current;

  ProcessState state(params, current, options.skip_concordant);
  record.snapshots.reserve(plan.snapshot_times.size());
  std::size_t next_snapshot = 0;
  const auto& snaps = plan.snapshot_times;

  double t = 0.0;
  std::uint64_t events = 0;
  while (true) {
    const double rate = state.total_rate();
    const double u_time = uniform_open01(rng);
    const double u_pick = uniform01(rng);
    t = rate > 0.0 ? t - std::log(u_time) / rate : std::numeric_limits<double>::infinity();
    while (next_snapshot < snaps.size() && snaps[next_snapshot] < t) {
      state.write_to(current);
      record.snapshots.push_back({snaps[next_snapshot], current});
      ++next_snapshot;
    }
    if (t > plan.t_end) break;
    const Event e = state.select(u_pick, rate);
    state.apply(e);
    if (options.dense) record.events.push_back({t, e});
    if (++events > options.event_cap) {
      std::ostringstream msg;
      msg << "event budget of " << options.event_cap << " events exceeded in replicate "
          << replicate_id;
      throw CapacityError(msg.str());
    }
  }
  record.event_count = events;
  return record;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

void parallel_blocks(std::size_t n_blocks, unsigned threads,
                     const std::function<void(std::size_t)>& body) {
  threads = std::min<unsigned>(resolve_threads(threads),
                               static_cast<unsigned>(std::max<std::size_t>(n_blocks, 1)));
  if (threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t b = next.fetch_add(1);
      if (b >= n_blocks) return;
      try {
        body(b);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

std::size_t block_count(const SimulationPlan& plan, const EngineOptions& options) {
  const std::size_t bs = std::max<std::size_t>(options.block_size, 1);
  return (plan.n_replicates + bs - 1) / bs;
}

}  // namespace

void simulate(const SimulationPlan& plan, const InitialSampler& sampler,
              const std::function<void(const TrajectoryRecord&)>& sink,
              const EngineOptions& options) {
  plan.validate();
  const std::size_t bs = std::max<std::size_t>(options.block_size, 1);
  const std::size_t n_blocks = block_count(plan, options);

  std::mutex mutex;
  std::map<std::size_t, std::vector<TrajectoryRecord>> finished;
  std::size_t next_emit = 0;

  parallel_blocks(n_blocks, options.threads, [&](std::size_t b) {
    std::vector<TrajectoryRecord> records;
    const std::size_t begin = b * bs;
    const std::size_t end = std::min(plan.n_replicates, begin + bs);
    for (std::size_t r = begin; r < end; ++r) records.push_back(run_replicate(plan, sampler, r, options));
    std::lock_guard lock(mutex);
    finished.emplace(b, std::move(records));
    while (!finished.empty() && finished.begin()->first == next_emit) {
      for (const auto& rec : finished.begin()->second) sink(rec);
      finished.erase(finished.begin());
      ++next_emit;
    }
  });
}

std::vector<MomentAccumulator> accumulate_moments(const SimulationPlan& plan,
                                                  const InitialSampler& sampler,
                                                  const std::vector<Functional>& functionals,
                                                  const EngineOptions& options) {
  plan.validate();
  const std::size_t bs = std::max<std::size_t>(options.block_size, 1);
  const std::size_t n_blocks = block_count(plan, options);
  std::vector<std::vector<MomentAccumulator>> per_block(
      n_blocks, std::vector<MomentAccumulator>(functionals.size()));

  parallel_blocks(n_blocks, options.threads, [&](std::size_t b) {
    auto& acc = per_block[b];
    const std::size_t begin = b * bs;
    const std::size_t end = std::min(plan.n_replicates, begin + bs);
    for (std::size_t r = begin; r < end; ++r) {
      const TrajectoryRecord rec = run_replicate(plan, sampler, r, options);
      for (std::size_t f = 0; f < functionals.size(); ++f) acc[f].add(functionals[f](rec));
    }
  });

  std::vector<MomentAccumulator> total(functionals.size());
  for (const auto& block : per_block) {
    for (std::size_t f = 0; f < functionals.size(); ++f) total[f].merge(block[f]);
  }
  return total;
}

std::vector<MomentEstimate> estimate_moments(const SimulationPlan& plan,
                                             const InitialSampler& sampler,
                                             const std::vector<Functional>& functionals,
                                             const EngineOptions& options) {
  const auto acc = accumulate_moments(plan, sampler, functionals, options);
  std::vector<MomentEstimate> out;
  out.reserve(acc.size());
  for (const auto& a : acc) out.push_back(a.estimate());
  return out;
}

void write_snapshot_csv_header(std::ostream& out) {
  out << "# schema=snapshots/v1\n"
      << "replicate_id,time,config\n";
}

void write_snapshot_csv_rows(std::ostream& out, const TrajectoryRecord& record) {
  const auto old_precision = out.precision(17);
  for (const auto& s : record.snapshots) {
    out << record.replicate_id << ',' << s.time << ',' << s.config.to_string() << '\n';
  }
  out.precision(old_precision);
}

void write_moment_csv(std::ostream& out, const std::vector<MomentEstimate>& estimates) {
  const auto old_precision = out.precision(17);
  out << "# schema=moments/v1\n"
      << "functional_id,mean,stderr,samples\n";
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    out << i << ',' << estimates[i].mean << ',' << estimates[i].std_error << ','
        << estimates[i].samples << '\n';
  }
  out.precision(old_precision);
}

}  // namespace stirlab
