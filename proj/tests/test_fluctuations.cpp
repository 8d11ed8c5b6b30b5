#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "stirlab/exact_oracle.hpp"
#include "stirlab/fluctuations.hpp"

using namespace stirlab;

namespace {

TestFunction zero_function() {
  return TestFunction::stationary(
      "zero", [](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; });
}

std::vector<double> half_profile(const ModelParams& p) { return std::vector<double>(p.num_sites(), 0.5); }

}  // namespace

TEST_CASE("field is linear in H and bounded") {
  const ModelParams p(4, 2, 1.0);
  const auto c = Configuration::from_string("101100111");
  const auto centering = half_profile(p);
  const auto f = make_test_function("cos:1");
  const auto g = make_test_function("bump");
  const auto fg = TestFunction::stationary(
      "f+2g", [&](double u) { return f(u, 0) + 2.0 * g(u, 0); }, [](double) { return 0.0; },
      [](double) { return 0.0; });
  CHECK(field_value(c, zero_function(), 0.0, centering) == 0.0);
  CHECK(field_value(c, fg, 0.0, centering) ==
        doctest::Approx(field_value(c, f, 0.0, centering) + 2.0 * field_value(c, g, 0.0, centering)));
  double bound = 0.0;
  for (Site x = -4; x <= 4; ++x) bound += 0.5 * std::abs(f(x / 4.0, 0.0));
  CHECK(std::abs(field_value(c, f, 0.0, centering)) <= bound / 2.0 + 1e-15);
}

TEST_CASE("closed system with constant H has a null martingale") {
  const ModelParams p(5, 2, 0.0);
  SimulationPlan plan{p, 0.4, {0.4}, 9, 5};
  EngineOptions eo;
  eo.dense = true;
  for (std::uint64_t id = 0; id < 5; ++id) {
    const auto rec = run_replicate(plan, product_sampler(constant_profile(0.5)), id, eo);
    const auto d = dynkin_residual(rec, p, make_test_function("one"), 0.4);
    CHECK(std::abs(d.martingale) < 1e-12);
    CHECK(d.max_jump < 1e-12);
    CHECK(d.qv_integral < 1e-12);
  }
}

TEST_CASE("martingale has mean zero and variance equal to the compensator") {
  const ModelParams p(4, 2, 1.0);
  SimulationPlan plan{p, 0.5, {0.5}, 21, 10'000};
  EngineOptions eo;
  eo.dense = true;
  const auto h = make_test_function("gauss:0.5,0.4");
  MomentAccumulator m, m2, qv;
  double worst_jump = 0.0;
  double worst_mismatch = 0.0;
  simulate(
      plan, product_sampler(linear_profile(0.25, 0.25)),
      [&](const TrajectoryRecord& rec) {
        const auto d = dynkin_residual(rec, p, h, 0.5);
        m.add(d.martingale);
        m2.add(d.martingale * d.martingale);
        qv.add(d.qv_integral);
        worst_jump = std::max(worst_jump, d.max_jump / d.jump_bound);
        worst_mismatch = std::max(worst_mismatch, std::abs(d.drift_integral - d.generator_integral));
      },
      eo);
  const auto em = m.estimate();
  const auto em2 = m2.estimate();
  const auto eqv = qv.estimate();
  CHECK(std::abs(em.mean) < 3.0 * em.std_error);
  CHECK(std::abs(em2.mean - eqv.mean) < 3.0 * std::hypot(em2.std_error, eqv.std_error));
  CHECK(worst_jump <= 1.0);
  CHECK(worst_mismatch < 1e-10);
}

TEST_CASE("dynkin needs a dense record") {
  const ModelParams p(3, 1, 1.0);
  SimulationPlan plan{p, 0.1, {0.1}, 1, 1};
  const auto rec = run_replicate(plan, product_sampler(constant_profile(0.5)), 0);
  CHECK_THROWS_AS(dynkin_residual(rec, p, make_test_function("bump"), 0.1), DomainError);
}

TEST_CASE("jackknife covariance") {
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(std::sin(1.3 * i));
    y.push_back(std::cos(0.7 * i) + 0.5 * x.back());
  }
  const double n = static_cast<double>(x.size());
  auto cov = [](std::span<const double> a, std::span<const double> b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= a.size();
    mb /= b.size();
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / (a.size() - 1.0);
  };
  std::vector<double> loo;
  for (std::size_t k = 0; k < x.size(); ++k) {
    std::vector<double> xa, ya;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != k) { xa.push_back(x[i]); ya.push_back(y[i]); }
    }
    loo.push_back(cov(xa, ya));
  }
  double mean = 0;
  for (double v : loo) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : loo) ss += (v - mean) * (v - mean);
  const auto jk = jackknife_covariance(x, y);
  CHECK(jk.value == doctest::Approx(cov(x, y)).epsilon(1e-12));
  CHECK(jk.std_error == doctest::Approx(std::sqrt((n - 1.0) / n * ss)).epsilon(1e-9));
}

TEST_CASE("empirical covariance refuses small samples") {
  const ModelParams p(2, 2, 1.0);
  const auto u0 = linear_profile(0.25, 0.25);
  const std::vector<double> grid{0.0, 0.5};
  const auto centering = solve_rho_eps(p, u0, grid);
  const std::vector<FieldItem> items{{"b", make_test_function("bump")}};
  const std::vector<FieldPair> pairs{{0, 0.5, 0, 0.5}};
  SimulationPlan plan{p, 0.5, {0.5}, 1, 99};
  CHECK_THROWS_AS(empirical_field_covariance(plan, product_sampler(u0), centering, items, pairs), DomainError);
}

TEST_CASE("empirical covariance matches exact two-point correlations") {
  const ModelParams p(2, 2, 1.0);
  const auto u0 = linear_profile(0.25, 0.25);
  const double t = 0.5;
  const std::vector<double> grid{0.0, t};
  const auto centering = solve_rho_eps(p, u0, grid);
  const auto h = make_test_function("gauss:0.3,0.8");
  const std::vector<FieldItem> items{{"g", h}};
  const std::vector<FieldPair> pairs{{0, t, 0, t}};
  SimulationPlan plan{p, t, {t}, 17, 20'000};
  const auto rows = empirical_field_covariance(plan, product_sampler(u0), centering, items, pairs);
  REQUIRE(rows.size() == 1);

  const auto gen = build_generator(p);
  const auto law = exact_distribution(gen, product_distribution(p, u0), t);
  const auto means = exact_site_means(gen, law);
  double exact = 0.0;
  for (Site x = -2; x <= 2; ++x) {
    for (Site y = -2; y <= 2; ++y) {
      double c;
      if (x == y) {
        c = means[x + 2] * (1.0 - means[x + 2]);
      } else {
        const std::vector<Site> s{x, y};
        const std::vector<double> m{means[x + 2], means[y + 2]};
        c = expect_centered_product(gen, law, s, m);
      }
      exact += 0.5 * h(x / 2.0, t) * h(y / 2.0, t) * c;
    }
  }
  CHECK(std::abs(rows[0].empirical - exact) < 4.0 * rows[0].std_error);
  CHECK(rows[0].samples == 20'000);
}

TEST_CASE("OU oracle: equilibrium closed forms") {
  const std::vector<double> grid{0.0, 0.3, 0.8};
  const auto u0 = constant_profile(0.5);
  const auto macro = solve_robin(u0, 2, 0.0, grid);
  const auto h = make_test_function("cos:1");
  const auto same = ou_covariance_oracle(h, 0.3, h, 0.3, macro, u0);
  CHECK(std::abs(same.value - 0.25) < 1e-6);
  const auto lag = ou_covariance_oracle(h, 0.8, h, 0.3, macro, u0);
  CHECK(std::abs(lag.value - 0.25 * std::exp(-std::numbers::pi * std::numbers::pi / 8.0 * 0.5)) < 1e-6);
  CHECK(lag.accepted);
  CHECK(ou_covariance_oracle(zero_function(), 0.8, h, 0.3, macro, u0).value == 0.0);
}

TEST_CASE("OU oracle: symmetry and membership") {
  const std::vector<double> grid{0.0, 0.25, 0.5};
  const auto u0 = linear_profile(0.25, 0.25);
  const auto macro = solve_robin(u0, 2, 1.0, grid);
  const auto a = make_test_function("bump");
  const auto b = make_test_function("linear+blend", &macro);
  const double ab = ou_covariance_oracle(a, 0.5, b, 0.5, macro, u0).value;
  const double ba = ou_covariance_oracle(b, 0.5, a, 0.5, macro, u0).value;
  CHECK(ab == doctest::Approx(ba).epsilon(1e-6));
  CHECK_THROWS_AS(ou_covariance_oracle(make_test_function("linear"), 0.5, a, 0.25, macro, u0), DomainError);
}

TEST_CASE("test function registry") {
  std::istringstream in("# fields\na = bump\nb = cos:2   \n\n");
  const auto items = parse_test_function_registry(in, nullptr);
  REQUIRE(items.size() == 2);
  CHECK(items[0].id == "a");
  CHECK(items[1].h(-1.0, 0.0) == doctest::Approx(1.0));
  std::istringstream bad("a = wobble\n");
  CHECK_THROWS(parse_test_function_registry(bad, nullptr));
  CHECK_THROWS(make_test_function("cos"));
}

TEST_CASE("covariance CSV schema") {
  std::ostringstream out;
  const std::vector<CovarianceRow> rows{{"a", 0.5, "b", 0.25, 0.1, 0.01, 0.11, -1.0, 100}};
  write_covariance_csv(out, rows);
  const auto text = out.str();
  CHECK(text.rfind("# schema=covariance/v1\nH_id,t,G_id,s,empirical,stderr,oracle,zscore,samples\n", 0) == 0);
}
