#pragma once

// A single continuous-time random walk on {-N..N} with reflection at the ends
// (rate eps^-2/2 per direction on the macroscopic clock): exact kernels, the
// free-walk image construction, Gaussian comparison kernels and numerical
// checks of the kernel bounds and of Liggett's inequality.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stirlab/core_model.hpp"

namespace stirlab {

// P_t(x, y) for x, y in {-N..N}; row-major, index (x + N) * (2N+1) + (y + N).
class KernelTable {
 public:
  KernelTable(double t, int n, std::vector<double> p);

  double t() const { return t_; }
  int n() const { return n_; }
  int num_sites() const { return 2 * n_ + 1; }
  double operator()(Site x, Site y) const {
    return p_[static_cast<std::size_t>(x + n_) * num_sites() + (y + n_)];
  }
  std::span<const double> data() const { return p_; }

 private:
  double t_;
  int n_;
  std::vector<double> p_;
};

// Folds Z onto {-N..N}: identity inside, odd extension to the left and the
// period-2(2N+1) folding to the right.
Site reflection_map(long long x, int n);

// Spectral evaluation in the cosine eigenbasis of the reflecting Laplacian.
KernelTable reflected_kernel(double t, int n);

struct ImageSumResult {
  KernelTable table;
  double tail_bound;  // Chernoff bound on the free-walk mass outside the window
};

// Sums the free-walk kernel e^{-lambda} I_{|x-y|}(lambda), lambda = eps^-2 t,
// over all y in the window |y - x| <= 12 sqrt(lambda) + 2(2N+1) with
// reflection_map(y) as the target.
ImageSumResult image_sum_kernel(double t, int n);

// Free (unreflected) walk kernel on Z with microscopic intensity lambda.
double free_walk_kernel(double lambda, long long d);

// Gaussian density with variance t_microscopic evaluated at x - y.
double gaussian_kernel(double t_microscopic, double x, double y);

struct KernelBoundRow {
  std::string kind;  // "value" or "gradient"
  int n;
  double t;
  double max_ratio;
  Site argmax_x;
  Site argmax_y;
};

struct KernelBoundOptions {
  // Restrict to |x - y| <= lambda^window_exponent (lambda = eps^-2 t); a
  // non-positive exponent scans the full grid.
  double window_exponent = 0.0;
};

// For each (N, t): max of P_t(x,y)/G(x,y) and of
// sqrt(lambda) |P_t(x,y) - P_t(x+1,y)| / G(x,y) with G = G_lambda.
std::vector<KernelBoundRow> check_kernel_bounds(std::span<const int> n_list,
                                                std::span<const double> t_grid,
                                                const KernelBoundOptions& options = {});

struct LiggettReport {
  int n_particles;
  int n;
  double t;
  std::size_t pairs_checked;
  double min_slack;  // min over (X, Y) of bound - probability
  double max_equality_gap;  // n = 1 only: max |bound - probability|
  bool holds;
};

// Exhaustive check of P(X -> Y) <= prod_i sum_j P_t(x_i, y_j) for the j = 0
// stirring process with n_particles particles. Requires 2N+1 <= 9.
LiggettReport check_liggett(const ModelParams& params, double t, int n_particles);

// "# schema=kernel/v1" (t,x,y,p) and "# schema=kernel_bounds/v1".
void write_kernel_csv(std::ostream& out, const KernelTable& table);
void write_kernel_bounds_csv(std::ostream& out, std::span<const KernelBoundRow> rows);

}  // namespace stirlab
