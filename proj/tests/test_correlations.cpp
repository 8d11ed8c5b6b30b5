#include <doctest.h>

#include <cmath>

#include "stirlab/correlations.hpp"

using namespace stirlab;

namespace {

struct TinySetup {
  ModelParams params{2, 2, 1.0};
  InitialProfile u0 = linear_profile(0.25, 0.25);
  std::vector<double> grid{0.0, 0.2, 0.5};
  DiscreteProfileGrid centering = solve_rho_eps(params, u0, grid);
  GeneratorMatrix gen = build_generator(params);
  Distribution init = product_distribution(params, u0);
};

}  // namespace

TEST_CASE("site patterns") {
  CHECK(SitePattern::parse("right:-1,0").sites(5) == std::vector<Site>{4, 5});
  CHECK(SitePattern::parse("left:0,1").sites(5) == std::vector<Site>{-5, -4});
  CHECK(SitePattern::parse("bulk:0,2").sites(5) == std::vector<Site>{0, 2});
  CHECK(SitePattern::parse("right:-1,0").label() == "right:-1;0");
  CHECK_THROWS(SitePattern::parse("middle:0"));
  CHECK_THROWS(SitePattern::parse("right:x"));
}

TEST_CASE("query validation") {
  const ModelParams p(3, 2, 1.0);
  CHECK_NOTHROW(validate_query(SpaceQuery{{2, 3}, 0.5}, p));
  CHECK_THROWS_AS(validate_query(SpaceQuery{{2, 2}, 0.5}, p), DomainError);
  CHECK_THROWS_AS(validate_query(SpaceQuery{{4}, 0.5}, p), DomainError);
  CHECK_THROWS_AS(validate_query(SpaceTimeQuery{{1}, 0.5, {2}, 0.5}, p), DomainError);
  CHECK_THROWS_AS(validate_query(SpaceTimeQuery{{1}, 0.6, {2}, 0.5}, p), DomainError);
}

TEST_CASE("empty query is exactly one") {
  TinySetup s;
  SimulationPlan plan{s.params, 0.5, {0.5}, 3, 10};
  const auto est = estimate_v(SpaceQuery{{}, 0.5}, plan, product_sampler(s.u0), s.centering);
  CHECK(est.mean == 1.0);
  CHECK(est.std_error == 0.0);
}

TEST_CASE("Monte Carlo v matches the exact oracle") {
  TinySetup s;
  SimulationPlan plan{s.params, 0.5, {0.0, 0.2, 0.5}, 11, 40'000};
  const VQuery space = SpaceQuery{{1, 2}, 0.5};
  const VQuery spacetime = SpaceTimeQuery{{2}, 0.2, {1}, 0.5};
  for (const auto& q : {space, spacetime}) {
    const auto est = estimate_v(q, plan, product_sampler(s.u0), s.centering);
    const double exact = oracle_v(q, s.gen, s.init, s.centering);
    CHECK(std::abs(est.mean - exact) < 3.0 * est.std_error);
  }
}

TEST_CASE("standard errors are honest") {
  TinySetup s;
  const VQuery q = SpaceQuery{{1, 2}, 0.5};
  const double exact = oracle_v(q, s.gen, s.init, s.centering);
  int inside = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SimulationPlan plan{s.params, 0.5, {0.5}, seed, 2'000};
    const auto est = estimate_v(q, plan, product_sampler(s.u0), s.centering);
    if (std::abs(est.mean - exact) < 2.0 * est.std_error) ++inside;
  }
  CHECK(inside >= 45);
}

TEST_CASE("v is symmetric in the site order") {
  TinySetup s;
  const double a = oracle_v(SpaceQuery{{-1, 1, 2}, 0.5}, s.gen, s.init, s.centering);
  const double b = oracle_v(SpaceQuery{{2, -1, 1}, 0.5}, s.gen, s.init, s.centering);
  CHECK(a == doctest::Approx(b).epsilon(1e-13));
}

TEST_CASE("product equilibrium has no correlations") {
  const ModelParams p(2, 2, 0.0);
  const auto u0 = constant_profile(0.5);
  const std::vector<double> grid{0.0, 0.5};
  const auto centering = solve_rho_eps(p, u0, grid);
  const auto gen = build_generator(p);
  const VQuery q = SpaceQuery{{0, 1}, 0.5};
  CHECK(std::abs(oracle_v(q, gen, product_distribution(p, u0), centering)) < 1e-12);
  SimulationPlan plan{p, 0.5, {0.5}, 5, 20'000};
  const auto est = estimate_v(q, plan, product_sampler(u0), centering);
  CHECK(std::abs(est.mean) < 5.0 * est.std_error);
}

TEST_CASE("scaling fit recovers a known exponent") {
  ScalingReport r;
  r.band_low = 0.6;
  r.band_high = 1.4;
  for (int n : {16, 32, 64}) {
    const double eps = 1.0 / n;
    const double v = 0.3 * eps;
    r.rows.push_back({n, eps, {v, 0.01 * v, 1000}, false});
  }
  // A starved row far off the line must be ignored.
  r.rows.push_back({128, 1.0 / 128, {0.5, 1.0, 1000}, true});
  fit_scaling(r);
  CHECK(r.fitted);
  CHECK(r.slope == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.pass);
  CHECK(r.ci_low <= 1.0);
  CHECK(r.ci_high >= 1.0);

  ScalingReport lone;
  lone.rows.push_back({16, 1.0 / 16, {0.1, 0.001, 10}, false});
  fit_scaling(lone);
  CHECK_FALSE(lone.fitted);
  CHECK_FALSE(lone.pass);
}
