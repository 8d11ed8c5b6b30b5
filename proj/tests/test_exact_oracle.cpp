#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stirlab/exact_oracle.hpp"

using namespace stirlab;

namespace {

// Independent generator: dense matrix assembled from the core event catalog.
Eigen::MatrixXd dense_generator(const ModelParams& p) {
  const int dim = 1 << p.num_sites();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < dim; ++s) {
    const auto c = configuration_of(static_cast<StateIndex>(s), p.n());
    for (const auto& e : event_rates(c, p)) {
      const auto target = state_of(apply_event(c, p, e.event));
      q(s, target) += e.rate;
      q(s, s) -= e.rate;
    }
  }
  return q;
}

double sup_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("state index round trip") {
  const auto c = Configuration::from_string("1001101");
  CHECK(configuration_of(state_of(c), 3) == c);
  CHECK(state_of(Configuration::from_string("100")) == 1u);
}

TEST_CASE("generator matches the event catalog") {
  const ModelParams p(2, 2, 1.3);
  const auto gen = build_generator(p);
  const auto q = dense_generator(p);
  for (StateIndex s = 0; s < gen.dim(); ++s) {
    double row = 0.0;
    for (StateIndex t = 0; t < gen.dim(); ++t) {
      CHECK(gen.entry(s, t) == doctest::Approx(q(s, t)).epsilon(1e-14));
      row += gen.entry(s, t);
    }
    CHECK(std::abs(row) < 1e-10);
  }
}

TEST_CASE("capacity limit") {
  CHECK_NOTHROW(build_generator(ModelParams(7, 2, 1.0)));
  CHECK_THROWS_AS(build_generator(ModelParams(8, 2, 1.0)), CapacityError);
}

TEST_CASE("uniformization matches a dense matrix exponential") {
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, linear_profile(0.25, 0.25));
  const Eigen::MatrixXd q = dense_generator(p);
  for (double t : {0.01, 0.3, 2.0}) {
    const Eigen::RowVectorXd pi0 = Eigen::Map<const Eigen::RowVectorXd>(init.data(), init.size());
    const Eigen::RowVectorXd ref = pi0 * (q * t).exp();
    const auto got = exact_distribution(gen, init, t);
    for (Eigen::Index i = 0; i < ref.size(); ++i) CHECK(std::abs(got[i] - ref(i)) < 1e-12);
  }
}

TEST_CASE("semigroup property and mass conservation") {
  const ModelParams p(2, 1, 0.7);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, constant_profile(0.4));
  const auto direct = exact_distribution(gen, init, 0.9);
  const auto split = exact_distribution(gen, exact_distribution(gen, init, 0.35), 0.55);
  CHECK(sup_diff(direct, split) < 1e-13);
  CHECK(std::accumulate(direct.begin(), direct.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK_THROWS_AS(exact_distribution(gen, init, -1.0), DomainError);
}

TEST_CASE("long-time law equals the stationary law") {
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto stat = stationary_distribution(gen);
  const auto late = exact_distribution(gen, point_distribution(p, 0), 1e6);
  CHECK(sup_diff(stat, late) < 1e-10);
  // Stationarity: pi Q = 0.
  std::vector<double> flux(gen.dim());
  gen.left_multiply(stat, flux);
  for (double f : flux) CHECK(std::abs(f) < 1e-10);
}

TEST_CASE("moment conventions") {
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, constant_profile(0.5));
  CHECK(exact_moment(gen, init, 0.3, {}, {}) == 1.0);
  const std::vector<Site> dup{1, 1};
  const std::vector<double> c{0.0, 0.0};
  CHECK_THROWS_AS(exact_moment(gen, init, 0.3, dup, c), DomainError);
  // Product initial law with exact centering: centered moments vanish at t = 0.
  const std::vector<Site> pair{-1, 2};
  const std::vector<double> half{0.5, 0.5};
  CHECK(std::abs(exact_moment(gen, init, 0.0, pair, half)) < 1e-15);
}

TEST_CASE("two-time moment at equal times reduces to the one-time moment") {
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, linear_profile(0.25, 0.25));
  const std::vector<Site> y{2};
  const std::vector<Site> x{1};
  const std::vector<double> a{0.3};
  const std::vector<double> b{0.4};
  const std::vector<Site> both{2, 1};
  const std::vector<double> ab{0.3, 0.4};
  CHECK(exact_two_time_moment(gen, init, 0.4, y, a, 0.4, x, b) ==
        doctest::Approx(exact_moment(gen, init, 0.4, both, ab)).epsilon(1e-13));
}

TEST_CASE("boundary expectations follow the window products") {
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto law = point_distribution(p, state_of(Configuration::from_string("10101")));
  const auto plus = exact_boundary_expectations(gen, law, true);
  const auto minus = exact_boundary_expectations(gen, law, false);
  CHECK(plus[3] == 1.0);  // site 1 empty, site 2 occupied
  CHECK(plus[4] == 0.0);
  CHECK(minus[0] == 1.0);
  CHECK(minus[1] == 0.0);
}

TEST_CASE("frozen exact values") {
  // Frozen from a dense matrix exponential of the generator.
  const ModelParams p(2, 2, 1.0);
  const auto gen = build_generator(p);
  const auto init = product_distribution(p, linear_profile(0.25, 0.25));
  std::ifstream in(STIRLAB_TEST_DATA "/golden_exact_n2.csv");
  REQUIRE(in.good());
  std::string line;
  int checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("t,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    REQUIRE(f.size() == 3);
    const double t = std::stod(f[0]);
    const int x = std::stoi(f[1]);
    const auto means = exact_site_means(gen, exact_distribution(gen, init, t));
    CHECK(means[x + 2] == doctest::Approx(std::stod(f[2])).epsilon(1e-12));
    ++checked;
  }
  CHECK(checked == 15);
}
