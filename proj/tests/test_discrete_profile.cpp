#include <doctest.h>

#include <cmath>
#include <numeric>

#include "stirlab/discrete_profile.hpp"
#include "stirlab/exact_oracle.hpp"

using namespace stirlab;

TEST_CASE("j = 0 keeps a constant profile fixed") {
  const ModelParams p(6, 2, 0.0);
  const std::vector<double> grid{0.0, 0.3, 1.0};
  const auto sol = solve_rho_eps(p, constant_profile(0.37), grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (double v : sol.slice(i)) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
  }
}

TEST_CASE("right-hand side conserves mass up to boundary fluxes") {
  const ModelParams p(5, 3, 1.7);
  std::vector<double> rho(p.num_sites());
  for (int i = 0; i < p.num_sites(); ++i) rho[i] = 0.1 + 0.8 * std::sin(0.3 * i) * std::sin(0.3 * i);
  std::vector<double> out(rho.size());
  profile_rhs(p, rho, out);
  double flux = 0.0;
  for (Site x = p.i_plus().first; x <= p.i_plus().last; ++x) flux += d_plus(std::span<const double>(rho), p, x);
  for (Site x = p.i_minus().first; x <= p.i_minus().last; ++x) flux -= d_minus(std::span<const double>(rho), p, x);
  flux *= 0.5 * p.j() * p.n();
  CHECK(std::accumulate(out.begin(), out.end(), 0.0) == doctest::Approx(flux).epsilon(1e-12));
}

TEST_CASE("K = 1 profile equals the exact site means") {
  // With a single boundary site the mean equations close on rho_eps.
  const ModelParams p(2, 1, 1.3);
  const std::vector<double> grid{0.0, 0.1, 0.5, 2.0};
  const auto u0 = linear_profile(0.25, 0.25);
  const auto sol = solve_rho_eps(p, u0, grid);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, u0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto means = exact_site_means(gen, exact_distribution(gen, init, grid[i]));
    for (Site x = -2; x <= 2; ++x) CHECK(std::abs(sol.at(i, x) - means[x + 2]) < 1e-7);
  }
}

TEST_CASE("IMEX and RK4 agree") {
  const ModelParams p(8, 2, 1.0);
  const std::vector<double> grid{0.0, 0.05, 0.5};
  const auto u0 = cosine_profile(0.5, 0.3);
  ProfileSolverOptions rk;
  rk.integrator = Integrator::Rk4;
  const auto a = solve_rho_eps(p, u0, grid);
  const auto b = solve_rho_eps(p, u0, grid, rk);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (Site x = -8; x <= 8; ++x) {
      CHECK(std::abs(a.at(i, x) - b.at(i, x)) < 1e-6);
      CHECK(a.at(i, x) >= 0.0);
      CHECK(a.at(i, x) <= 1.0);
    }
  }
  CHECK(parse_integrator("rk4") == Integrator::Rk4);
  CHECK_THROWS(parse_integrator("euler"));
}

TEST_CASE("grid lookup is exact") {
  const ModelParams p(3, 1, 1.0);
  const std::vector<double> grid{0.0, 0.25};
  const auto sol = solve_rho_eps(p, constant_profile(0.5), grid);
  CHECK(sol.time_index(0.25) == 1);
  CHECK_THROWS_AS(sol.time_index(0.2), DomainError);
  CHECK(discrete_gradient_stats(sol).size() == grid.size());
}
