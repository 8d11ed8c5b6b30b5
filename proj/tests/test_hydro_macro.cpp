#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stirlab/fluctuations.hpp"
#include "stirlab/hydro_macro.hpp"

using namespace stirlab;

namespace {

double trapezoid(std::span<const double> v, double h) {
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return s * h;
}

}  // namespace

TEST_CASE("boundary rate functions") {
  CHECK(dtilde_plus(0.5, 2, 1.0) == doctest::Approx(0.75));
  CHECK(dtilde_minus(0.5, 2, 1.0) == doctest::Approx(0.75));
  CHECK(dtilde_plus(0.2, 3, 2.0) == doctest::Approx(2.0 * (1.0 - 0.008)));
  CHECK(dtilde_minus(0.2, 3, 2.0) == doctest::Approx(2.0 * (1.0 - 0.512)));
  const double h = 1e-6;
  for (double r : {0.1, 0.5, 0.9}) {
    CHECK(dtilde_plus_prime(r, 3, 1.5) ==
          doctest::Approx((dtilde_plus(r + h, 3, 1.5) - dtilde_plus(r - h, 3, 1.5)) / (2 * h)).epsilon(1e-6));
    CHECK(dtilde_minus_prime(r, 3, 1.5) ==
          doctest::Approx((dtilde_minus(r + h, 3, 1.5) - dtilde_minus(r - h, 3, 1.5)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("K = 1 relaxes to the linear steady state") {
  const double j = 1.0;
  const std::vector<double> grid{0.0, 60.0};
  const auto sol = solve_robin(constant_profile(0.2), 1, j, grid);
  const double b = j / (2.0 * (1.0 + j));
  for (double u : {-1.0, -0.5, 0.0, 0.5, 1.0}) CHECK(std::abs(sol.value(1, u) - (0.5 + b * u)) < 1e-4);
}

TEST_CASE("mass changes by the boundary fluxes") {
  const int k = 2;
  const double j = 1.0;
  const std::vector<double> grid{0.0, 0.5, 0.51};
  const auto sol = solve_robin(linear_profile(0.25, 0.25), k, j, grid);
  const double h = sol.mesh().h();
  const double rate = (trapezoid(sol.slice(2), h) - trapezoid(sol.slice(1), h)) / 0.01;
  const double tm = 0.505;
  const double flux = 0.5 * (dtilde_plus(sol.right(tm), k, j) - dtilde_minus(sol.left(tm), k, j));
  CHECK(std::abs(rate - flux) < 1e-3 * std::abs(flux) + 1e-4);
}

TEST_CASE("Robin and integral forms agree") {
  const std::vector<double> grid{0.0, 0.1, 0.5};
  const auto u0 = linear_profile(0.25, 0.25);
  const auto a = solve_robin(u0, 2, 1.0, grid);
  const auto b = solve_integral_form(u0, 2, 1.0, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    for (double u : {-1.0, -0.3, 0.4, 1.0}) CHECK(std::abs(a.value(i, u) - b.value(i, u)) < 1e-4);
  }
}

TEST_CASE("boundary-compatible test functions") {
  const std::vector<double> grid{0.0, 0.25, 0.5};
  const auto macro = solve_robin(linear_profile(0.25, 0.25), 2, 1.0, grid);
  CHECK(check_test_function(make_test_function("linear+blend", &macro), macro, grid).passes);
  CHECK(check_test_function(make_test_function("bump"), macro, grid).passes);
  CHECK_FALSE(check_test_function(make_test_function("linear"), macro, grid).passes);
  CHECK_THROWS(make_test_function("linear+blend"));
}

TEST_CASE("semigroup is linear") {
  const std::vector<double> grid{0.0, 0.5};
  const auto macro = solve_robin(linear_profile(0.25, 0.25), 2, 1.0, grid);
  const Mesh& mesh = macro.mesh();
  std::vector<double> f(mesh.nodes()), g(mesh.nodes()), fg(mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i) {
    const double u = mesh.node(i);
    f[i] = std::cos(u);
    g[i] = u * u * u;
    fg[i] = 2.0 * f[i] - 3.0 * g[i];
  }
  const std::vector<double> s{0.0, 0.2, 0.5};
  SemigroupOptions opt;
  const auto tf = semigroup_T(f, s, macro, opt);
  const auto tg = semigroup_T(g, s, macro, opt);
  const auto tfg = semigroup_T(fg, s, macro, opt);
  for (std::size_t k = 0; k < s.size(); ++k) {
    for (int i = 0; i < mesh.nodes(); ++i) {
      CHECK(std::abs(tfg.values[k][i] - (2.0 * tf.values[k][i] - 3.0 * tg.values[k][i])) < 1e-12);
    }
  }
}

TEST_CASE("j = 0 semigroup damps the first Neumann mode") {
  const std::vector<double> grid{0.0, 1.0};
  const auto macro = solve_robin(constant_profile(0.5), 2, 0.0, grid);
  const auto h = make_test_function("cos:1");
  const std::vector<double> s{0.0, 0.4};
  const auto surf = semigroup_T(h, s, macro);
  const double decay = std::exp(-std::numbers::pi * std::numbers::pi / 8.0 * 0.4);
  for (int i = 0; i < surf.mesh.nodes(); i += 20) {
    CHECK(std::abs(surf.values[1][i] - decay * h(surf.mesh.node(i), 0.0)) < 1e-4);
  }
}
