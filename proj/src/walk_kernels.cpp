#include "stirlab/walk_kernels.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_bessel.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "stirlab/errors.hpp"
#include "stirlab/exact_oracle.hpp"

namespace stirlab {

namespace {

void require_positive_time(double t, const char* what) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw DomainError(std::string(what) + ": time must be > 0, got " + std::to_string(t));
  }
}

void require_lattice(int n) {
  if (n < 1) throw DomainError("N must be >= 1");
}

// e^{-lambda} I_k(lambda) for k = 0..k_max. The array routine zeroes its whole
// output when the top order underflows, so orders are evaluated one by one;
// they decrease in k, so everything past the first underflow is zero.
std::vector<double> scaled_bessel(double lambda, int k_max) {
  std::vector<double> out(static_cast<std::size_t>(k_max) + 1, 0.0);
  gsl_error_handler_t* old = gsl_set_error_handler_off();
  for (int k = 0; k <= k_max; ++k) {
    gsl_sf_result r;
    const int status = gsl_sf_bessel_In_scaled_e(k, lambda, &r);
    if (status == GSL_EUNDRFLW || (status == GSL_SUCCESS && r.val == 0.0)) break;
    if (status != GSL_SUCCESS) {
      gsl_set_error_handler(old);
      throw ConvergenceError(std::string("modified Bessel evaluation failed: ") +
                             gsl_strerror(status));
    }
    out[static_cast<std::size_t>(k)] = r.val;
  }
  gsl_set_error_handler(old);
  return out;
}

}  // namespace

KernelTable::KernelTable(double t, int n, std::vector<double> p)
    : t_(t), n_(n), p_(std::move(p)) {
  if (p_.size() != static_cast<std::size_t>(num_sites()) * num_sites()) {
    throw DomainError("kernel table has the wrong size");
  }
}

Site reflection_map(long long x, int n) {
  require_lattice(n);
  const long long nn = n;
  if (x >= -nn && x <= nn) return static_cast<Site>(x);
  if (x < -nn) return -reflection_map(-x, n);
  // x = N + j(2N+1) + k with j >= 0, 1 <= k <= 2N+1; fold onto N + j(2N+1) - (k-1).
  const long long period = 2 * nn + 1;
  const long long j = (x - nn - 1) / period;
  const long long k = x - nn - j * period;
  return reflection_map(nn + j * period - (k - 1), n);
}

KernelTable reflected_kernel(double t, int n) {
  require_positive_time(t, "reflected_kernel");
  require_lattice(n);
  const int s = 2 * n + 1;
  const double eps_inv2 = static_cast<double>(n) * n;
  const double pi = std::numbers::pi;
  // Eigenpairs of (eps^-2/2) Delta_reflecting: phi_k(i) = cos(pi k (i + 1/2) / S),
  // mu_k = -eps^-2 (1 - cos(pi k / S)).
  std::vector<double> decay(s);
  std::vector<double> phi(static_cast<std::size_t>(s) * s);
  for (int k = 0; k < s; ++k) {
    decay[k] = std::exp(-eps_inv2 * (1.0 - std::cos(pi * k / s)) * t);
    for (int i = 0; i < s; ++i) phi[static_cast<std::size_t>(k) * s + i] = std::cos(pi * k * (i + 0.5) / s);
  }
  std::vector<double> p(static_cast<std::size_t>(s) * s);
  for (int a = 0; a < s; ++a) {
    for (int b = a; b < s; ++b) {
      double sum = 0.0;
      for (int k = s - 1; k >= 1; --k) {
        sum += decay[k] * phi[static_cast<std::size_t>(k) * s + a] * phi[static_cast<std::size_t>(k) * s + b];
      }
      const double value = (1.0 + 2.0 * sum) / s;
      p[static_cast<std::size_t>(a) * s + b] = value;
      p[static_cast<std::size_t>(b) * s + a] = value;
    }
  }
  return {t, n, std::move(p)};
}

double free_walk_kernel(double lambda, long long d) {
  if (!(lambda > 0.0)) throw DomainError("free_walk_kernel: lambda must be > 0");
  const int k = static_cast<int>(std::llabs(d));
  return gsl_sf_bessel_In_scaled(k, lambda);
}

ImageSumResult image_sum_kernel(double t, int n) {
  require_positive_time(t, "image_sum_kernel");
  require_lattice(n);
  const int s = 2 * n + 1;
  const double lambda = static_cast<double>(n) * n * t;
  const long long window =
      static_cast<long long>(std::ceil(12.0 * std::sqrt(lambda))) + 2LL * s;
  const auto q = scaled_bessel(lambda, static_cast<int>(window));

  std::vector<double> p(static_cast<std::size_t>(s) * s, 0.0);
  for (int a = 0; a < s; ++a) {
    const long long x = a - n;
    double* row = p.data() + static_cast<std::size_t>(a) * s;
    for (long long d = -window; d <= window; ++d) {
      row[reflection_map(x + d, n) + n] += q[static_cast<std::size_t>(std::llabs(d))];
    }
  }
  // Free walk = difference of two Poisson(lambda/2) counts; Chernoff bound on
  // P(|X| >= w + 1) with theta = asinh((w+1)/lambda).
  const double w1 = static_cast<double>(window + 1);
  const double theta = std::asinh(w1 / lambda);
  const double exponent = lambda * (std::cosh(theta) - 1.0) - theta * w1;
  return {KernelTable(t, n, std::move(p)), 2.0 * std::exp(exponent)};
}

double gaussian_kernel(double t_microscopic, double x, double y) {
  require_positive_time(t_microscopic, "gaussian_kernel");
  const double d = x - y;
  return std::exp(-d * d / (2.0 * t_microscopic)) /
         std::sqrt(2.0 * std::numbers::pi * t_microscopic);
}

std::vector<KernelBoundRow> check_kernel_bounds(std::span<const int> n_list,
                                                std::span<const double> t_grid,
                                                const KernelBoundOptions& options) {
  std::vector<KernelBoundRow> rows;
  for (int n : n_list) {
    for (double t : t_grid) {
      const KernelTable p = reflected_kernel(t, n);
      const double lambda = static_cast<double>(n) * n * t;
      const double reach = options.window_exponent > 0.0
                               ? std::pow(lambda, options.window_exponent)
                               : std::numeric_limits<double>::infinity();
      KernelBoundRow value{"value", n, t, 0.0, 0, 0};
      KernelBoundRow gradient{"gradient", n, t, 0.0, 0, 0};
      for (Site x = -n; x <= n; ++x) {
        for (Site y = -n; y <= n; ++y) {
          if (std::abs(x - y) > reach) continue;
          const double g = gaussian_kernel(lambda, x, y);
          const double r = p(x, y) / g;
          if (r > value.max_ratio) {
            value.max_ratio = r;
            value.argmax_x = x;
            value.argmax_y = y;
          }
          if (x < n) {
            const double rg = std::sqrt(lambda) * std::abs(p(x, y) - p(x + 1, y)) / g;
            if (rg > gradient.max_ratio) {
              gradient.max_ratio = rg;
              gradient.argmax_x = x;
              gradient.argmax_y = y;
            }
          }
        }
      }
      rows.push_back(value);
      rows.push_back(gradient);
    }
  }
  return rows;
}

LiggettReport check_liggett(const ModelParams& params, double t, int n_particles) {
  require_positive_time(t, "check_liggett");
  if (params.num_sites() > 9) throw CapacityError("Liggett check limited to 2N+1 <= 9");
  if (n_particles < 1 || n_particles > 3 || n_particles > params.num_sites()) {
    throw DomainError("Liggett check needs 1 <= n_particles <= 3");
  }
  const ModelParams stirring(params.n(), params.k(), 0.0);
  const GeneratorMatrix gen = build_generator(stirring);
  const KernelTable p = reflected_kernel(t, params.n());
  const int sites = params.num_sites();

  std::vector<StateIndex> sector;
  for (StateIndex s = 0; s < gen.dim(); ++s) {
    if (std::popcount(s) == n_particles) sector.push_back(s);
  }
  auto members = [&](StateIndex s) {
    std::vector<Site> out;
    for (int i = 0; i < sites; ++i) {
      if ((s >> i) & 1u) out.push_back(i - params.n());
    }
    return out;
  };

  LiggettReport report{n_particles, params.n(), t, 0, std::numeric_limits<double>::infinity(),
                       0.0, true};
  for (StateIndex from : sector) {
    const auto law = exact_distribution(gen, point_distribution(stirring, from), t);
    const auto xs = members(from);
    for (StateIndex to : sector) {
      const auto ys = members(to);
      double bound = 1.0;
      for (Site x : xs) {
        double row = 0.0;
        for (Site y : ys) row += p(x, y);
        bound *= row;
      }
      const double slack = bound - law[to];
      report.min_slack = std::min(report.min_slack, slack);
      if (n_particles == 1) report.max_equality_gap = std::max(report.max_equality_gap, std::abs(slack));
      ++report.pairs_checked;
    }
  }
  report.holds = report.min_slack >= -1e-10;
  return report;
}

void write_kernel_csv(std::ostream& out, const KernelTable& table) {
  out << "# schema=kernel/v1\n";
  out << "t,x,y,p\n";
  out.precision(17);
  for (Site x = -table.n(); x <= table.n(); ++x) {
    for (Site y = -table.n(); y <= table.n(); ++y) {
      out << table.t() << ',' << x << ',' << y << ',' << table(x, y) << '\n';
    }
  }
}

void write_kernel_bounds_csv(std::ostream& out, std::span<const KernelBoundRow> rows) {
  out << "# schema=kernel_bounds/v1\n";
  out << "kind,N,t,max_ratio,argmax_x,argmax_y\n";
  out.precision(12);
  for (const auto& r : rows) {
    out << r.kind << ',' << r.n << ',' << r.t << ',' << r.max_ratio << ',' << r.argmax_x << ','
        << r.argmax_y << '\n';
  }
}

}  // namespace stirlab
