#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stirlab/core_model.hpp"

using namespace stirlab;

TEST_CASE("model parameters validate their ranges") {
  CHECK_THROWS_AS(ModelParams(0, 1, 1.0), DomainError);
  CHECK_THROWS_AS(ModelParams(3, 0, 1.0), DomainError);
  CHECK_THROWS_AS(ModelParams(3, 4, 1.0), DomainError);
  CHECK_THROWS_AS(ModelParams(3, 2, -0.1), DomainError);
  const ModelParams p(5, 2, 1.5);
  CHECK(p.num_sites() == 11);
  CHECK(p.i_plus().first == 4);
  CHECK(p.i_plus().last == 5);
  CHECK(p.i_minus().first == -5);
  CHECK(p.i_minus().last == -4);
  CHECK(p.bond_rate() == doctest::Approx(12.5));
  CHECK(p.boundary_rate() == doctest::Approx(3.75));
}

TEST_CASE("configuration text form round-trips") {
  const auto c = Configuration::from_string("10110");
  CHECK(c.n() == 2);
  CHECK(c(-2) == 1);
  CHECK(c(-1) == 0);
  CHECK(c(2) == 0);
  CHECK(c.particle_count() == 3);
  CHECK(c.to_string() == "10110");
  CHECK_THROWS_AS(Configuration::from_string("1011"), DomainError);
  CHECK_THROWS_AS(Configuration::from_string("10a10"), DomainError);
}

TEST_CASE("window operators pick the first empty and first occupied sites") {
  const ModelParams p(3, 3, 1.0);
  // Sites -3..3.
  auto c = Configuration::from_string("0010101");
  CHECK(birth_site(c, p) == 2);
  CHECK(death_site(c, p) == -1);
  CHECK(d_plus(c, p, 2) == 1);
  CHECK(d_plus(c, p, 1) == 0);
  CHECK(d_minus(c, p, -1) == 1);
  CHECK(d_minus(c, p, -2) == 0);
  CHECK_THROWS_AS(d_plus(c, p, -3), DomainError);

  const auto full = Configuration(3, 1);
  CHECK_FALSE(birth_site(full, p).has_value());
  CHECK(death_site(full, p) == -3);
  const auto empty = Configuration(3, 0);
  CHECK(birth_site(empty, p) == 3);
  CHECK_FALSE(death_site(empty, p).has_value());
}

TEST_CASE("at most one birth and one death site carry weight") {
  const ModelParams p(3, 3, 1.0);
  for (unsigned s = 0; s < (1u << 7); ++s) {
    Configuration c(3);
    for (int i = 0; i < 7; ++i) c.set(i - 3, (s >> i) & 1u);
    int plus = 0, minus = 0;
    for (Site x = 1; x <= 3; ++x) plus += d_plus(c, p, x);
    for (Site x = -3; x <= -1; ++x) minus += d_minus(c, p, x);
    CHECK(plus <= 1);
    CHECK(minus <= 1);
  }
}

TEST_CASE("profile window products") {
  const ModelParams p(2, 2, 1.0);
  const std::vector<double> rho{0.1, 0.2, 0.3, 0.4, 0.5};
  CHECK(d_plus(rho, p, 2) == doctest::Approx(0.5));
  CHECK(d_plus(rho, p, 1) == doctest::Approx(0.6 * 0.5));
  CHECK(d_minus(rho, p, -2) == doctest::Approx(0.1));
  CHECK(d_minus(rho, p, -1) == doctest::Approx(0.2 * 0.9));
}

TEST_CASE("event catalog rates") {
  const ModelParams p(2, 2, 2.0);
  const auto c = Configuration::from_string("11010");
  const auto events = event_rates(c, p);
  double bonds = 0.0, birth = 0.0, death = 0.0;
  for (const auto& e : events) {
    if (e.event.type == EventType::Exchange) bonds += e.rate;
    if (e.event.type == EventType::BirthRight) {
      CHECK(e.event.site == 2);
      birth += e.rate;
    }
    if (e.event.type == EventType::DeathLeft) {
      CHECK(e.event.site == -2);
      death += e.rate;
    }
  }
  // Discordant bonds: (-1,0), (0,1), (1,2).
  CHECK(bonds == doctest::Approx(3 * p.bond_rate()));
  CHECK(birth == doctest::Approx(p.boundary_rate()));
  CHECK(death == doctest::Approx(p.boundary_rate()));
  CHECK(total_rate(c, p) == doctest::Approx(bonds + birth + death));
  CHECK(total_rate(c, p, false) == doctest::Approx(4 * p.bond_rate() + birth + death));
}

TEST_CASE("pure stirring has no boundary events") {
  const ModelParams p(3, 2, 0.0);
  const auto c = Configuration::from_string("0110100");
  for (const auto& e : event_rates(c, p)) CHECK(e.event.type == EventType::Exchange);
}

TEST_CASE("fully occupied lattice: the only move is a death at the left end") {
  const ModelParams p(3, 2, 1.0);
  const Configuration c(3, 1);
  const auto events = event_rates(c, p);
  REQUIRE(events.size() == 1);
  CHECK(events[0].event == Event::death(-3));
}

TEST_CASE("applying events") {
  const ModelParams p(2, 2, 1.0);
  const auto c = Configuration::from_string("10010");
  CHECK(apply_event(c, p, Event::exchange(-2)).to_string() == "01010");
  CHECK(apply_event(c, p, Event::birth(2)).to_string() == "10011");
  CHECK(apply_event(c, p, Event::death(-2)).to_string() == "00010");
  CHECK_THROWS_AS(apply_event(c, p, Event::birth(1)), ContractViolation);
  CHECK_THROWS_AS(apply_event(c, p, Event::death(-1)), ContractViolation);
  CHECK_THROWS_AS(apply_event(c, p, Event::exchange(2)), ContractViolation);
}
