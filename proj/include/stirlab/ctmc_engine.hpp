#pragma once

// Exact (Gillespie) simulation of the accelerated stirring process with
// boundary birth/death on the macroscopic clock, with seeded, thread-count
// independent replication.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "stirlab/core_model.hpp"
#include "stirlab/initial_profile.hpp"
#include "stirlab/moments.hpp"
#include "stirlab/rng.hpp"

namespace stirlab {

struct SimulationPlan {
  ModelParams params;
  double t_end = 0.0;
  std::vector<double> snapshot_times;  // sorted, unique, within [0, t_end]
  std::uint64_t master_seed = 0;
  std::size_t n_replicates = 1;

  // Throws DomainError when the invariants above are violated.
  void validate() const;
};

struct Snapshot {
  double time;
  Configuration config;
};

struct TimedEvent {
  double time;
  Event event;
};

struct TrajectoryRecord {
  std::uint64_t replicate_id = 0;
  std::uint64_t rng_stream_id = 0;  // replicate_stream_seed(master_seed, replicate_id)
  std::uint64_t event_count = 0;
  std::vector<Snapshot> snapshots;

  // Dense mode only: the time-0 configuration and every event with its time.
  std::optional<Configuration> initial;
  std::vector<TimedEvent> events;

  // Snapshot whose time equals `time` exactly; throws DomainError otherwise.
  const Configuration& at(double time) const;
};

struct EngineOptions {
  unsigned threads = 1;  // 0 = hardware concurrency
  bool dense = false;    // record every event (needed for pathwise martingales)
  std::uint64_t event_cap = 10'000'000'000ULL;
  bool skip_concordant = true;  // debugging opt-out: false simulates no-op swaps too
  std::size_t block_size = 64;  // replicates per reduction block (fixed, not per thread)
};

using InitialSampler = std::function<Configuration(const ModelParams&, Rng&)>;

// Product Bernoulli measure with P(eta(x) = 1) = u0(eps x).
Configuration sample_initial(const ModelParams& params, const InitialProfile& u0, Rng& rng);
InitialSampler product_sampler(InitialProfile u0);
InitialSampler fixed_sampler(Configuration config);

// Runs replicate `replicate_id` of `plan` on its own RNG stream.
TrajectoryRecord run_replicate(const SimulationPlan& plan, const InitialSampler& sampler,
                               std::uint64_t replicate_id, const EngineOptions& options = {});

// Runs all replicates; `sink` is called once per replicate, serialized and in
// replicate order, whatever the thread count.
void simulate(const SimulationPlan& plan, const InitialSampler& sampler,
              const std::function<void(const TrajectoryRecord&)>& sink,
              const EngineOptions& options = {});

using Functional = std::function<double(const TrajectoryRecord&)>;

// Streaming mean and standard error of each functional over the replicates.
std::vector<MomentEstimate> estimate_moments(const SimulationPlan& plan,
                                             const InitialSampler& sampler,
                                             const std::vector<Functional>& functionals,
                                             const EngineOptions& options = {});

// Lower level: runs replicate blocks in parallel and hands each finished
// block's accumulators back in block order.
std::vector<MomentAccumulator> accumulate_moments(
    const SimulationPlan& plan, const InitialSampler& sampler,
    const std::vector<Functional>& functionals, const EngineOptions& options = {});

// Deterministic parallel loop over blocks [0, n_blocks). Exceptions thrown by
// `body` are rethrown on the calling thread.
void parallel_blocks(std::size_t n_blocks, unsigned threads,
                     const std::function<void(std::size_t block)>& body);

unsigned resolve_threads(unsigned requested);

// CSV writers ("# schema=snapshots/v1" and "# schema=moments/v1").
void write_snapshot_csv_header(std::ostream& out);
void write_snapshot_csv_rows(std::ostream& out, const TrajectoryRecord& record);
void write_moment_csv(std::ostream& out, const std::vector<MomentEstimate>& estimates);

}  // namespace stirlab
