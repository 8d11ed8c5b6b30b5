#include <doctest.h>

#include <gsl/gsl_cdf.h>

#include <cmath>
#include <map>

#include "stirlab/ctmc_engine.hpp"
#include "stirlab/exact_oracle.hpp"

using namespace stirlab;

TEST_CASE("plan validation") {
  SimulationPlan plan{ModelParams(2, 1, 1.0), 1.0, {0.0, 0.5, 1.0}, 1, 10};
  CHECK_NOTHROW(plan.validate());
  plan.snapshot_times = {0.5, 0.2};
  CHECK_THROWS_AS(plan.validate(), DomainError);
  plan.snapshot_times = {1.5};
  CHECK_THROWS_AS(plan.validate(), DomainError);
  plan.snapshot_times = {0.5};
  plan.n_replicates = 0;
  CHECK_THROWS_AS(plan.validate(), DomainError);
}

TEST_CASE("snapshot lookup needs an exact grid time") {
  SimulationPlan plan{ModelParams(2, 1, 1.0), 0.5, {0.0, 0.5}, 1, 1};
  const auto r = run_replicate(plan, product_sampler(constant_profile(0.5)), 0);
  CHECK(r.snapshots.size() == 2);
  CHECK_NOTHROW(r.at(0.5));
  CHECK_THROWS_AS(r.at(0.25), DomainError);
}

TEST_CASE("empirical law matches the exact law (chi-square)") {
  const ModelParams p(1, 1, 1.0);
  const double t = 0.3;
  SimulationPlan plan{p, t, {t}, 42, 20'000};
  std::vector<double> counts(8, 0.0);
  simulate(plan, product_sampler(linear_profile(0.5, 0.3)),
           [&](const TrajectoryRecord& r) { counts[state_of(r.at(t))] += 1.0; });
  const auto gen = build_generator(p);
  const auto exact = exact_distribution(gen, product_distribution(p, linear_profile(0.5, 0.3)), t);
  double chi2 = 0.0;
  for (std::size_t s = 0; s < 8; ++s) {
    const double e = exact[s] * 20'000;
    chi2 += (counts[s] - e) * (counts[s] - e) / e;
  }
  CHECK(gsl_cdf_chisq_Q(chi2, 7) > 1e-3);
}

TEST_CASE("simulating concordant swaps does not change the law") {
  const ModelParams p(1, 1, 1.0);
  const double t = 0.3;
  SimulationPlan plan{p, t, {t}, 7, 20'000};
  EngineOptions eo;
  eo.skip_concordant = false;
  std::vector<double> counts(8, 0.0);
  simulate(
      plan, product_sampler(constant_profile(0.5)),
      [&](const TrajectoryRecord& r) { counts[state_of(r.at(t))] += 1.0; }, eo);
  const auto gen = build_generator(p);
  const auto exact = exact_distribution(gen, product_distribution(p, constant_profile(0.5)), t);
  double chi2 = 0.0;
  for (std::size_t s = 0; s < 8; ++s) {
    const double e = exact[s] * 20'000;
    chi2 += (counts[s] - e) * (counts[s] - e) / e;
  }
  CHECK(gsl_cdf_chisq_Q(chi2, 7) > 1e-3);
}

TEST_CASE("first holding time is exponential with the total exit rate") {
  const ModelParams p(3, 2, 1.0);
  const auto start = Configuration::from_string("0110010");
  const double rate = total_rate(start, p);
  SimulationPlan plan{p, 5.0 / rate * 10.0, {}, 3, 20'000};
  EngineOptions eo;
  eo.dense = true;
  MomentAccumulator first;
  simulate(
      plan, fixed_sampler(start),
      [&](const TrajectoryRecord& r) {
        REQUIRE_FALSE(r.events.empty());
        first.add(r.events.front().time);
      },
      eo);
  const auto est = first.estimate();
  CHECK(std::abs(est.mean - 1.0 / rate) <= 4.0 * est.std_error);
}

TEST_CASE("pure stirring conserves the particle number along every path") {
  const ModelParams p(5, 2, 0.0);
  SimulationPlan plan{p, 0.5, {0.25, 0.5}, 9, 50};
  EngineOptions eo;
  eo.dense = true;
  simulate(
      plan, product_sampler(linear_profile(0.5, 0.4)),
      [&](const TrajectoryRecord& r) {
        const int n0 = r.initial->particle_count();
        Configuration c = *r.initial;
        for (const auto& e : r.events) {
          CHECK(e.event.type == EventType::Exchange);
          apply_event_unchecked(c, e.event);
        }
        CHECK(c.particle_count() == n0);
        CHECK(r.at(0.5) == c);
      },
      eo);
}

TEST_CASE("dense records replay to the snapshots") {
  const ModelParams p(4, 2, 1.0);
  SimulationPlan plan{p, 0.4, {0.1, 0.4}, 5, 20};
  EngineOptions eo;
  eo.dense = true;
  simulate(
      plan, product_sampler(constant_profile(0.3)),
      [&](const TrajectoryRecord& r) {
        Configuration c = *r.initial;
        std::size_t next = 0;
        double last = 0.0;
        for (const auto& e : r.events) {
          CHECK(e.time >= last);
          last = e.time;
          while (next < plan.snapshot_times.size() && plan.snapshot_times[next] < e.time) {
            CHECK(r.at(plan.snapshot_times[next]) == c);
            ++next;
          }
          c = apply_event(c, p, e.event);
        }
        for (; next < plan.snapshot_times.size(); ++next) CHECK(r.at(plan.snapshot_times[next]) == c);
        CHECK(r.event_count == r.events.size());
      },
      eo);
}

TEST_CASE("results do not depend on the thread count") {
  const ModelParams p(6, 2, 1.0);
  SimulationPlan plan{p, 0.2, {0.1, 0.2}, 11, 300};
  std::vector<Functional> fs{
      [](const TrajectoryRecord& r) { return static_cast<double>(r.at(0.2).particle_count()); },
      [](const TrajectoryRecord& r) { return static_cast<double>(r.at(0.1)(6)); }};
  EngineOptions one, four;
  one.threads = 1;
  four.threads = 4;
  four.block_size = 7;
  one.block_size = 7;
  const auto a = estimate_moments(plan, product_sampler(constant_profile(0.5)), fs, one);
  const auto b = estimate_moments(plan, product_sampler(constant_profile(0.5)), fs, four);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    CHECK(a[i].mean == b[i].mean);
    CHECK(a[i].std_error == b[i].std_error);
  }
  std::vector<std::string> first, second;
  simulate(plan, product_sampler(constant_profile(0.5)),
           [&](const TrajectoryRecord& r) { first.push_back(r.at(0.2).to_string()); }, one);
  simulate(plan, product_sampler(constant_profile(0.5)),
           [&](const TrajectoryRecord& r) { second.push_back(r.at(0.2).to_string()); }, four);
  CHECK(first == second);
}

TEST_CASE("replicate streams are independent of the replicate count") {
  const ModelParams p(3, 1, 1.0);
  SimulationPlan small{p, 0.3, {0.3}, 99, 5};
  SimulationPlan large = small;
  large.n_replicates = 50;
  const auto a = run_replicate(small, product_sampler(constant_profile(0.5)), 4);
  const auto b = run_replicate(large, product_sampler(constant_profile(0.5)), 4);
  CHECK(a.at(0.3) == b.at(0.3));
  CHECK(a.rng_stream_id == replicate_stream_seed(99, 4));
}

TEST_CASE("event cap raises a capacity error") {
  SimulationPlan plan{ModelParams(10, 2, 1.0), 1.0, {1.0}, 1, 1};
  EngineOptions eo;
  eo.event_cap = 10;
  CHECK_THROWS_AS(run_replicate(plan, product_sampler(constant_profile(0.5)), 0, eo), CapacityError);
}
