#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <Eigen/Dense>
#include <cmath>

#include "stirlab/walk_kernels.hpp"

using namespace stirlab;

namespace {

double sup_diff(const KernelTable& a, const KernelTable& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace

TEST_CASE("reflection map folds the line onto the lattice") {
  const int n = 3;
  for (long long x = -3; x <= 3; ++x) CHECK(reflection_map(x, n) == x);
  CHECK(reflection_map(4, n) == 3);
  CHECK(reflection_map(5, n) == 2);
  CHECK(reflection_map(-4, n) == -3);
  CHECK(reflection_map(-5, n) == -2);
  // Period 2(2N+1).
  for (long long x = -40; x <= 40; ++x) CHECK(reflection_map(x + 14, n) == reflection_map(x, n));
}

TEST_CASE("kernel is stochastic and symmetric") {
  const auto k = reflected_kernel(0.2, 6);
  for (Site x = -6; x <= 6; ++x) {
    double row = 0.0;
    for (Site y = -6; y <= 6; ++y) {
      row += k(x, y);
      CHECK(k(x, y) == doctest::Approx(k(y, x)).epsilon(1e-12));
      CHECK(k(x, y) >= -1e-15);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("Chapman-Kolmogorov") {
  const int n = 5;
  const auto a = reflected_kernel(0.07, n);
  const auto b = reflected_kernel(0.13, n);
  const auto ab = reflected_kernel(0.2, n);
  for (Site x = -n; x <= n; ++x) {
    for (Site y = -n; y <= n; ++y) {
      double s = 0.0;
      for (Site z = -n; z <= n; ++z) s += a(x, z) * b(z, y);
      CHECK(std::abs(s - ab(x, y)) < 1e-13);
    }
  }
}

TEST_CASE("N = 3 kernel equals the matrix exponential of the walk generator") {
  const int n = 3;
  const int m = 2 * n + 1;
  const double rate = 0.5 * n * n;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) {
    q(i, i + 1) += rate;
    q(i + 1, i) += rate;
    q(i, i) -= rate;
    q(i + 1, i + 1) -= rate;
  }
  for (double t : {0.01, 0.1, 1.0}) {
    const Eigen::MatrixXd p = (q * t).exp();
    const auto k = reflected_kernel(t, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) CHECK(std::abs(k(i - n, j - n) - p(i, j)) < 1e-13);
    }
  }
}

TEST_CASE("image sum agrees with the spectral kernel") {
  // lambda = 31.25, 62.5, 100 once broke the Bessel evaluation.
  for (auto [n, t] : {std::pair{25, 0.05}, std::pair{25, 0.1}, std::pair{10, 1.0}, std::pair{7, 0.3}}) {
    const auto img = image_sum_kernel(t, n);
    CHECK(sup_diff(img.table, reflected_kernel(t, n)) < 1e-12);
    CHECK(img.tail_bound < 1e-20);
  }
}

TEST_CASE("free walk kernel sums to one") {
  double s = 0.0;
  for (long long d = -200; d <= 200; ++d) s += free_walk_kernel(9.0, d);
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(free_walk_kernel(0.0, 1), DomainError);
}

TEST_CASE("kernel bounds hold with c = 3 on the sqrt(lambda) window") {
  KernelBoundOptions window;
  window.window_exponent = 0.5;
  const std::vector<int> ns{10, 20};
  const std::vector<double> ts{0.01, 0.1, 1.0};
  const auto rows = check_kernel_bounds(ns, ts, window);
  CHECK(rows.size() == 2 * ns.size() * ts.size());
  for (const auto& r : rows) CHECK(r.max_ratio <= 3.0);
}

TEST_CASE("Liggett's inequality") {
  for (int k : {1, 2, 3}) {
    const auto r = check_liggett(ModelParams(3, 1, 0.0), 0.1, k);
    CHECK(r.holds);
    CHECK(r.min_slack >= -1e-10);
    if (k == 1) CHECK(r.max_equality_gap < 1e-12);
  }
  CHECK_THROWS(check_liggett(ModelParams(5, 1, 0.0), 0.1, 2));
}
