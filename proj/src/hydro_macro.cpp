#include "stirlab/hydro_macro.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

namespace {

constexpr double kRhoSlack = 1e-9;

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

void check_rho(double rho) {
  if (!(rho >= -kRhoSlack && rho <= 1.0 + kRhoSlack)) {
    std::ostringstream msg;
    msg << "density " << rho << " outside [0, 1]";
    throw DomainError(msg.str());
  }
}

void check_rates(int k, double j) {
  if (k < 1) throw DomainError("K must be >= 1");
  if (!(j >= 0.0)) throw DomainError("j must be >= 0");
}

void validate_time_grid(std::span<const double> t_grid) {
  if (t_grid.empty() || t_grid[0] != 0.0) throw DomainError("time grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must be strictly increasing");
  }
}

// Flux data d_u phi at the two ends as functions of the end value and time.
struct FluxLaw {
  std::function<double(double, double)> left, left_prime, right, right_prime;
};

// Solves the tridiagonal system (sub, diag, sup) x = rhs in place of rhs.
void thomas(std::vector<double>& sub, std::vector<double>& diag, std::vector<double>& sup,
            std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
}

// F(phi, s): 1/2 phi'' with the flux conditions folded in through ghost nodes.
void flux_operator(std::span<const double> phi, double s, double h, const FluxLaw& law,
                   std::vector<double>& out) {
  const std::size_t m = phi.size() - 1;
  const double h2 = h * h;
  out.resize(phi.size());
  out[0] = (phi[1] - phi[0]) / h2 - law.left(phi[0], s) / h;
  for (std::size_t i = 1; i < m; ++i) out[i] = 0.5 * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) / h2;
  out[m] = (phi[m - 1] - phi[m]) / h2 + law.right(phi[m], s) / h;
}

class ThetaStepper {
 public:
  ThetaStepper(double h, FluxLaw law, double newton_tolerance)
      : h_(h), law_(std::move(law)), tol_(newton_tolerance) {}

  // phi(s0) -> phi(s1) with the theta scheme (theta = 1/2 Crank-Nicolson,
  // theta = 1 implicit Euler), Newton on the end nonlinearity.
  void step(std::vector<double>& phi, double s0, double s1, double theta) {
    const double dt = s1 - s0;
    const std::size_t n = phi.size();
    const std::size_t m = n - 1;
    const double h2 = h_ * h_;
    rhs_ = phi;
    if (theta < 1.0) {
      flux_operator(phi, s0, h_, law_, f_);
      for (std::size_t i = 0; i < n; ++i) rhs_[i] += (1.0 - theta) * dt * f_[i];
    }
    std::vector<double> x = phi;
    for (int iter = 0; iter < 60; ++iter) {
      flux_operator(x, s1, h_, law_, f_);
      sub_.assign(n, 0.0);
      diag_.assign(n, 0.0);
      sup_.assign(n, 0.0);
      res_.resize(n);
      for (std::size_t i = 0; i < n; ++i) res_[i] = -(x[i] - theta * dt * f_[i] - rhs_[i]);
      const double c = theta * dt;
      diag_[0] = 1.0 + c * (1.0 / h2 + law_.left_prime(x[0], s1) / h_);
      sup_[0] = -c / h2;
      for (std::size_t i = 1; i < m; ++i) {
        sub_[i] = -c * 0.5 / h2;
        diag_[i] = 1.0 + c / h2;
        sup_[i] = -c * 0.5 / h2;
      }
      sub_[m] = -c / h2;
      diag_[m] = 1.0 + c * (1.0 / h2 - law_.right_prime(x[m], s1) / h_);
      thomas(sub_, diag_, sup_, res_);
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += res_[i];
        change = std::max(change, std::abs(res_[i]));
      }
      if (change <= tol_) {
        phi.swap(x);
        return;
      }
    }
    throw ConvergenceError("Newton iteration on the boundary nonlinearity did not converge");
  }

 private:
  double h_;
  FluxLaw law_;
  double tol_;
  std::vector<double> rhs_, f_, sub_, diag_, sup_, res_;
};

struct MarchResult {
  std::vector<std::vector<double>> slices;
  std::vector<double> trace_times, left, right;
};

// Marches phi over the output grid with nominal step dt; the very first step
// is replaced by `startup` implicit Euler substeps.
MarchResult march(std::vector<double> phi, std::span<const double> grid, double dt,
                  int startup, double refine_window, ThetaStepper& stepper) {
  MarchResult out;
  out.slices.push_back(phi);
  out.trace_times.push_back(grid[0]);
  out.left.push_back(phi.front());
  out.right.push_back(phi.back());
  bool first = true;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double span = grid[g] - grid[g - 1];
    // Inside the initial layer the step grows linearly from dt/8 to dt.
    const double elapsed = grid[g - 1] - grid[0];
    const double local_dt =
        elapsed < refine_window ? dt * std::max(0.125, elapsed / refine_window) : dt;
    const auto steps =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / local_dt - 1e-9)));
    const double h = span / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      const double s0 = grid[g - 1] + h * k;
      const double s1 = k + 1 == steps ? grid[g] : s0 + h;
      if (first && startup > 0) {
        for (int sub = 0; sub < startup; ++sub) {
          const double a = s0 + (s1 - s0) * sub / startup;
          const double b = sub + 1 == startup ? s1 : s0 + (s1 - s0) * (sub + 1) / startup;
          stepper.step(phi, a, b, 1.0);
        }
      } else {
        stepper.step(phi, s0, s1, 0.5);
      }
      first = false;
      out.trace_times.push_back(s1);
      out.left.push_back(phi.front());
      out.right.push_back(phi.back());
    }
    out.slices.push_back(phi);
  }
  return out;
}

std::vector<double> sample_profile(const InitialProfile& u0, const Mesh& mesh) {
  std::vector<double> v(mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i) v[i] = u0(mesh.node(i));
  return v;
}

// ---- integral form -------------------------------------------------------

constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Antiderivatives in s of s^{-1/2} e^{-c/s} and s^{1/2} e^{-c/s}, zero at s = 0.
double f0(double s, double c) {
  if (s <= 0.0) return 0.0;
  if (c == 0.0) return 2.0 * std::sqrt(s);
  return 2.0 * std::sqrt(s) * std::exp(-c / s) -
         2.0 * std::sqrt(std::numbers::pi * c) * std::erfc(std::sqrt(c / s));
}

double f1(double s, double c) {
  if (s <= 0.0) return 0.0;
  return 2.0 / 3.0 * s * std::sqrt(s) * std::exp(-c / s) - 2.0 / 3.0 * c * f0(s, c);
}

// Offsets d = x - y - 4m of the images of boundary point y as seen from x,
// restricted to |d| <= reach. P_s(x, y) = 2 sum g_s(d) for y = +-1.
std::vector<double> boundary_images(double x, double y, double reach) {
  std::vector<double> out;
  const int m_max = static_cast<int>(std::ceil((reach + 2.0) / 4.0)) + 1;
  for (int m = -m_max; m <= m_max; ++m) {
    const double d = x - y - 4.0 * m;
    if (std::abs(d) <= reach) out.push_back(d);
  }
  return out;
}

// Coefficients W_i with int_0^{tau_n} P_{tau_n - sigma}(x, y) g(sigma) dsigma =
// sum_i W_i g(tau_i) for g piecewise linear on the nodes tau_0..tau_n.
void boundary_weights(std::span<const double> tau, std::size_t n, double x, double y,
                      double reach, std::vector<double>& w) {
  w.assign(n + 1, 0.0);
  if (n == 0) return;
  const auto images = boundary_images(x, y, reach);
  // F at s_i = tau_n - tau_i; I0/I1 over [s_{i+1}, s_i].
  std::vector<double> big0(n + 1, 0.0), big1(n + 1, 0.0);
  for (double d : images) {
    const double c = 0.5 * d * d;
    for (std::size_t i = 0; i <= n; ++i) {
      const double s = tau[n] - tau[i];
      big0[i] += f0(s, c);
      big1[i] += f1(s, c);
    }
  }
  const double scale = 2.0 * kInvSqrt2Pi;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = tau[n] - tau[i + 1];
    const double b = tau[n] - tau[i];
    const double i0 = scale * (big0[i] - big0[i + 1]);
    const double i1 = scale * (big1[i] - big1[i + 1]);
    const double toward_b = (i1 - a * i0) / (b - a);  // coefficient of g(tau_i)
    w[i] += toward_b;
    w[i + 1] += i0 - toward_b;
  }
}

class GaussLegendre {
 public:
  explicit GaussLegendre(int points) : table_(gsl_integration_glfixed_table_alloc(points)) {
    if (!table_) throw DomainError("Gauss-Legendre table allocation failed");
    nodes_.resize(points);
    weights_.resize(points);
    for (int i = 0; i < points; ++i) {
      gsl_integration_glfixed_point(-1.0, 1.0, i, &nodes_[i], &weights_[i], table_.get());
    }
  }
  template <class F>
  double integrate(double a, double b, int panels, F&& f) const {
    double total = 0.0;
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = a + width * p;
      const double mid = lo + 0.5 * width;
      double part = 0.0;
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        part += weights_[i] * f(mid + 0.5 * width * nodes_[i]);
      }
      total += 0.5 * width * part;
    }
    return total;
  }

 private:
  struct Free {
    void operator()(gsl_integration_glfixed_table* t) const { gsl_integration_glfixed_table_free(t); }
  };
  std::unique_ptr<gsl_integration_glfixed_table, Free> table_;
  std::vector<double> nodes_, weights_;
};

// int_{-1}^{1} P_t(x, r) u0(r) dr.
double free_propagation(const InitialProfile& u0, double t, double x, const GaussLegendre& gl) {
  if (t == 0.0) return u0(x);
  const double w = 12.0 * std::sqrt(t);
  const double a = std::max(-1.0, x - w);
  const double b = std::min(1.0, x + w);
  const double panel = std::min(0.25, 0.5 * std::sqrt(t));
  const int panels = std::max(1, static_cast<int>(std::ceil((b - a) / panel)));
  return gl.integrate(a, b, panels, [&](double r) { return neumann_kernel(t, x, r) * u0(r); });
}

}  // namespace

double dtilde_plus(double rho, int k, double j) {
  check_rho(rho);
  check_rates(k, j);
  return j * (1.0 - ipow(rho, k));
}

double dtilde_minus(double rho, int k, double j) {
  check_rho(rho);
  check_rates(k, j);
  return j * (1.0 - ipow(1.0 - rho, k));
}

double dtilde_plus_prime(double rho, int k, double j) {
  check_rho(rho);
  check_rates(k, j);
  return -j * k * ipow(rho, k - 1);
}

double dtilde_minus_prime(double rho, int k, double j) {
  check_rho(rho);
  check_rates(k, j);
  return j * k * ipow(1.0 - rho, k - 1);
}

Mesh::Mesh(int nodes) : nodes_(nodes) {
  if (nodes < 3) throw DomainError("mesh needs at least 3 nodes");
}

MacroSolution::MacroSolution(Mesh mesh, int k, double j, std::vector<double> times,
                             std::vector<std::vector<double>> values,
                             std::vector<double> trace_times, std::vector<double> trace_left,
                             std::vector<double> trace_right)
    : mesh_(mesh),
      k_(k),
      j_(j),
      times_(std::move(times)),
      values_(std::move(values)),
      trace_times_(std::move(trace_times)),
      trace_left_(std::move(trace_left)),
      trace_right_(std::move(trace_right)) {}

std::size_t MacroSolution::time_index(double t) const {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (std::abs(times_[i] - t) <= 1e-12) return i;
  }
  std::ostringstream msg;
  msg << "time " << t << " is not on the macro grid";
  throw DomainError(msg.str());
}

std::vector<double> MacroSolution::profile_at(double t) const {
  if (t < times_.front() - 1e-12 || t > times_.back() + 1e-12) {
    throw DomainError("profile_at: time outside the solved range");
  }
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-12);
  const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
  if (std::abs(times_[hi] - t) <= 1e-12 || hi == 0) return values_[hi];
  const std::size_t lo = hi - 1;
  const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
  std::vector<double> out(values_[lo].size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - w) * values_[lo][i] + w * values_[hi][i];
  return out;
}

double MacroSolution::value(std::size_t time_index, double u) const {
  const auto& v = values_.at(time_index);
  const double pos = std::clamp((u + 1.0) / mesh_.h(), 0.0, static_cast<double>(mesh_.intervals()));
  const int i = std::min(static_cast<int>(pos), mesh_.intervals() - 1);
  const double w = pos - i;
  return (1.0 - w) * v[i] + w * v[i + 1];
}

double MacroSolution::trace(const std::vector<double>& v, double t) const {
  if (t < trace_times_.front() - 1e-12 || t > trace_times_.back() + 1e-12) {
    throw DomainError("boundary trace requested outside the solved range");
  }
  const auto it = std::lower_bound(trace_times_.begin(), trace_times_.end(), t);
  if (it == trace_times_.begin()) return v.front();
  if (it == trace_times_.end()) return v.back();
  const std::size_t hi = static_cast<std::size_t>(it - trace_times_.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - trace_times_[lo]) / (trace_times_[hi] - trace_times_[lo]);
  return (1.0 - w) * v[lo] + w * v[hi];
}

double MacroSolution::left(double t) const { return trace(trace_left_, t); }
double MacroSolution::right(double t) const { return trace(trace_right_, t); }

MacroSolution solve_robin(const InitialProfile& u0, int k, double j,
                          std::span<const double> t_grid, const RobinOptions& options) {
  check_rates(k, j);
  validate_time_grid(t_grid);
  u0.validate();
  const Mesh mesh(options.mesh_nodes);
  if (mesh.h() * mesh.h() > options.spatial_tolerance) {
    std::ostringstream msg;
    msg << "mesh with " << mesh.nodes() << " nodes is too coarse: h^2 = " << mesh.h() * mesh.h()
        << " exceeds the spatial tolerance " << options.spatial_tolerance;
    throw DomainError(msg.str());
  }
  // Unchecked rates inside the solver: Newton iterates may graze the range.
  FluxLaw law{
      [k, j](double v, double) { return j * (1.0 - ipow(1.0 - v, k)); },
      [k, j](double v, double) { return j * k * ipow(1.0 - v, k - 1); },
      [k, j](double v, double) { return j * (1.0 - ipow(v, k)); },
      [k, j](double v, double) { return -j * k * ipow(v, k - 1); },
  };
  ThetaStepper stepper(mesh.h(), law, options.newton_tolerance);
  const double dt = options.dt > 0.0 ? options.dt : mesh.h();
  auto result = march(sample_profile(u0, mesh), t_grid, dt, options.startup_substeps,
                      options.refine_window, stepper);
  for (std::size_t g = 0; g < result.slices.size(); ++g) {
    for (double v : result.slices[g]) {
      if (!(v >= -1e-6 && v <= 1.0 + 1e-6)) {
        std::ostringstream msg;
        msg << "Robin solution left [0, 1] at t = " << t_grid[g] << ": " << v;
        throw ConvergenceError(msg.str());
      }
    }
  }
  return {mesh,
          k,
          j,
          {t_grid.begin(), t_grid.end()},
          std::move(result.slices),
          std::move(result.trace_times),
          std::move(result.left),
          std::move(result.right)};
}

double neumann_kernel(double t, double x, double r) {
  if (!(t > 0.0)) throw DomainError("neumann_kernel: t must be > 0");
  const double reach = 12.0 * std::sqrt(t) + 4.0;
  const int m_max = static_cast<int>(std::ceil(reach / 4.0)) + 1;
  double total = 0.0;
  for (int m = -m_max; m <= m_max; ++m) {
    const double d1 = x - r - 4.0 * m;
    const double d2 = x + r - 2.0 - 4.0 * m;
    total += std::exp(-d1 * d1 / (2.0 * t)) + std::exp(-d2 * d2 / (2.0 * t));
  }
  return total * kInvSqrt2Pi / std::sqrt(t);
}

MacroSolution solve_integral_form(const InitialProfile& u0, int k, double j,
                                  std::span<const double> t_grid,
                                  const IntegralFormOptions& options) {
  check_rates(k, j);
  validate_time_grid(t_grid);
  u0.validate();
  const Mesh mesh(options.mesh_nodes);
  const double t_end = t_grid.back();
  const GaussLegendre gl(options.quadrature_points);
  // Images farther than this carry kernel mass below exp(-46) over [0, t_end].
  const double reach = std::sqrt(92.0 * std::max(t_end, 1e-12)) + 4.0;

  for (int attempt = 0; attempt <= options.max_refinements; ++attempt) {
    const int base = options.time_nodes << attempt;
    std::vector<double> tau;
    for (int i = 0; i <= base; ++i) {
      const double q = static_cast<double>(i) / base;
      tau.push_back(t_end * q * q);
    }
    tau.insert(tau.end(), t_grid.begin(), t_grid.end());
    std::sort(tau.begin(), tau.end());
    tau.erase(std::unique(tau.begin(), tau.end(),
                          [&](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, t_end); }),
              tau.end());
    const std::size_t nodes = tau.size();

    std::vector<double> rho_l(nodes), rho_r(nodes), g_l(nodes), g_r(nodes);
    rho_l[0] = u0(-1.0);
    rho_r[0] = u0(1.0);
    auto flux_r = [k](double b) { return 1.0 - ipow(std::clamp(b, 0.0, 1.0), k); };
    auto flux_l = [k](double b) { return 1.0 - ipow(1.0 - std::clamp(b, 0.0, 1.0), k); };
    g_l[0] = flux_l(rho_l[0]);
    g_r[0] = flux_r(rho_r[0]);

    bool contracted = true;
    std::vector<double> w_rr, w_rl, w_lr, w_ll;  // w_xy: evaluated at x, source y
    for (std::size_t n = 1; n < nodes && contracted; ++n) {
      boundary_weights(tau, n, 1.0, 1.0, reach, w_rr);
      boundary_weights(tau, n, 1.0, -1.0, reach, w_rl);
      boundary_weights(tau, n, -1.0, 1.0, reach, w_lr);
      boundary_weights(tau, n, -1.0, -1.0, reach, w_ll);
      const double q = 0.5 * j * k *
                       std::max(std::abs(w_rr[n]) + std::abs(w_rl[n]), std::abs(w_lr[n]) + std::abs(w_ll[n]));
      if (q > 0.5) {
        contracted = false;
        break;
      }
      double known_r = free_propagation(u0, tau[n], 1.0, gl);
      double known_l = free_propagation(u0, tau[n], -1.0, gl);
      for (std::size_t i = 0; i < n; ++i) {
        known_r += 0.5 * j * (w_rr[i] * g_r[i] - w_rl[i] * g_l[i]);
        known_l += 0.5 * j * (w_lr[i] * g_r[i] - w_ll[i] * g_l[i]);
      }
      double br = rho_r[n - 1];
      double bl = rho_l[n - 1];
      bool converged = false;
      for (int it = 0; it < options.max_picard_iterations; ++it) {
        const double nr = known_r + 0.5 * j * (w_rr[n] * flux_r(br) - w_rl[n] * flux_l(bl));
        const double nl = known_l + 0.5 * j * (w_lr[n] * flux_r(br) - w_ll[n] * flux_l(bl));
        const double change = std::max(std::abs(nr - br), std::abs(nl - bl));
        br = nr;
        bl = nl;
        if (change < options.picard_tolerance) {
          converged = true;
          break;
        }
      }
      if (!converged) throw ConvergenceError("Picard iteration did not converge");
      rho_r[n] = br;
      rho_l[n] = bl;
      g_r[n] = flux_r(br);
      g_l[n] = flux_l(bl);
    }
    if (!contracted) continue;

    // Interior reconstruction at the output times.
    std::vector<std::vector<double>> values;
    std::vector<double> w_r, w_l;
    for (double t : t_grid) {
      const auto n = static_cast<std::size_t>(
          std::find_if(tau.begin(), tau.end(), [&](double v) { return std::abs(v - t) <= 1e-12 * std::max(1.0, t_end); }) -
          tau.begin());
      std::vector<double> slice(mesh.nodes());
      for (int i = 0; i < mesh.nodes(); ++i) {
        const double x = mesh.node(i);
        double v = free_propagation(u0, t, x, gl);
        if (n > 0) {
          boundary_weights(tau, n, x, 1.0, reach, w_r);
          boundary_weights(tau, n, x, -1.0, reach, w_l);
          for (std::size_t q = 0; q <= n; ++q) v += 0.5 * j * (w_r[q] * g_r[q] - w_l[q] * g_l[q]);
        }
        slice[i] = v;
      }
      values.push_back(std::move(slice));
    }
    return {mesh, k, j, {t_grid.begin(), t_grid.end()}, std::move(values), tau, rho_l, rho_r};
  }
  throw ConvergenceError("Picard slabs failed to contract after the maximal number of refinements");
}

TestFunction::TestFunction(std::string name, Fn value, Fn du, Fn duu, Fn dt)
    : name_(std::move(name)),
      value_(std::move(value)),
      du_(std::move(du)),
      duu_(std::move(duu)),
      dt_(std::move(dt)) {}

TestFunction TestFunction::stationary(std::string name, std::function<double(double)> f,
                                      std::function<double(double)> df,
                                      std::function<double(double)> d2f) {
  TestFunction h{std::move(name), [f](double u, double) { return f(u); },
                 [df](double u, double) { return df(u); },
                 [d2f](double u, double) { return d2f(u); }, [](double, double) { return 0.0; }};
  h.time_independent_ = true;
  return h;
}

std::vector<double> TestFunction::sample(const Mesh& mesh, double t) const {
  std::vector<double> v(mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i) v[i] = value_(mesh.node(i), t);
  return v;
}

TestFunction boundary_blend(const TestFunction& shape, const MacroSolution& macro, double width) {
  if (!(width > 0.0 && width <= 1.0)) throw DomainError("blend width must lie in (0, 1]");
  const int k = macro.k();
  const double j = macro.j();
  const double t_max = macro.t_max();
  // Coefficients at time t; alpha multiplies phi_-, beta multiplies phi_+.
  auto alpha = [=](double t) {
    const double a = dtilde_minus_prime(macro.left(std::clamp(t, 0.0, t_max)), k, j);
    return a * shape(-1.0, t) - shape.du(-1.0, t);
  };
  auto beta = [=](double t) {
    const double b = dtilde_plus_prime(macro.right(std::clamp(t, 0.0, t_max)), k, j);
    return b * shape(1.0, t) - shape.du(1.0, t);
  };
  auto rate = [t_max](const std::function<double(double)>& f, double t) {
    const double d = 1e-4;
    const double lo = std::max(0.0, t - d);
    const double hi = std::min(t_max, t + d);
    return (f(hi) - f(lo)) / (hi - lo);
  };
  // phi_-(u) = z q^3 with z = u + 1, q = 1 - z/w; phi_+(u) = -z q^3 with z = 1 - u.
  auto bump = [width](double z, int order) {
    if (z >= width) return 0.0;
    const double q = 1.0 - z / width;
    switch (order) {
      case 0: return z * q * q * q;
      case 1: return q * q * q - 3.0 * (z / width) * q * q;
      default: return -6.0 * q * q / width + 6.0 * z * q / (width * width);
    }
  };
  std::function<double(double)> alpha_fn = alpha;
  std::function<double(double)> beta_fn = beta;
  return TestFunction(
      shape.name() + "+blend",
      [=](double u, double t) {
        return shape(u, t) + alpha(t) * bump(u + 1.0, 0) - beta(t) * bump(1.0 - u, 0);
      },
      [=](double u, double t) {
        return shape.du(u, t) + alpha(t) * bump(u + 1.0, 1) + beta(t) * bump(1.0 - u, 1);
      },
      [=](double u, double t) {
        return shape.duu(u, t) + alpha(t) * bump(u + 1.0, 2) - beta(t) * bump(1.0 - u, 2);
      },
      [=](double u, double t) {
        return shape.dt(u, t) + rate(alpha_fn, t) * bump(u + 1.0, 0) -
               rate(beta_fn, t) * bump(1.0 - u, 0);
      });
}

TestFunctionCheck check_test_function(const TestFunction& h, const MacroSolution& macro,
                                      std::span<const double> t_grid, double tolerance) {
  TestFunctionCheck check{true, 0.0, {}};
  for (double t : t_grid) {
    const double a = dtilde_minus_prime(macro.left(t), macro.k(), macro.j());
    const double b = dtilde_plus_prime(macro.right(t), macro.k(), macro.j());
    const TestFunctionResidual r{t, h.du(-1.0, t) - a * h(-1.0, t), h.du(1.0, t) - b * h(1.0, t)};
    check.max_residual = std::max({check.max_residual, std::abs(r.left), std::abs(r.right)});
    check.residuals.push_back(r);
  }
  check.passes = check.max_residual <= tolerance;
  return check;
}

std::size_t SemigroupSurface::index(double s) const {
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    if (std::abs(s_grid[i] - s) <= 1e-12) return i;
  }
  std::ostringstream msg;
  msg << "s = " << s << " is not on the semigroup grid";
  throw DomainError(msg.str());
}

SemigroupSurface semigroup_T(std::span<const double> initial, std::span<const double> s_grid,
                             const MacroSolution& macro, const SemigroupOptions& options) {
  validate_time_grid(s_grid);
  const Mesh mesh = macro.mesh();
  if (static_cast<int>(initial.size()) != mesh.nodes()) {
    throw DomainError("initial datum does not match the macro mesh");
  }
  const double s_max = s_grid.back();
  const bool backward = options.clock == SemigroupClock::Backward;
  if (backward) {
    if (options.t_ref > macro.t_max() + 1e-12 || s_max > options.t_ref + 1e-12) {
      throw DomainError("backward clock needs s <= t_ref <= macro horizon");
    }
  } else if (s_max > macro.t_max() + 1e-12) {
    throw DomainError("macro solution does not cover the semigroup horizon");
  }
  const int k = macro.k();
  const double j = macro.j();
  auto clock = [backward, t_ref = options.t_ref, t_max = macro.t_max()](double s) {
    return std::clamp(backward ? t_ref - s : s, 0.0, t_max);
  };
  auto a = [&macro, clock, k, j](double s) {
    return dtilde_minus_prime(std::clamp(macro.left(clock(s)), 0.0, 1.0), k, j);
  };
  auto b = [&macro, clock, k, j](double s) {
    return dtilde_plus_prime(std::clamp(macro.right(clock(s)), 0.0, 1.0), k, j);
  };
  FluxLaw law{
      [a](double v, double s) { return a(s) * v; },
      [a](double, double s) { return a(s); },
      [b](double v, double s) { return b(s) * v; },
      [b](double, double s) { return b(s); },
  };
  ThetaStepper stepper(mesh.h(), law, 1e-15);
  const double dt = options.dt > 0.0 ? options.dt : mesh.h();
  auto result = march({initial.begin(), initial.end()}, s_grid, dt, options.startup_substeps,
                      options.refine_window, stepper);
  return {mesh, {s_grid.begin(), s_grid.end()}, std::move(result.slices)};
}

SemigroupSurface semigroup_T(const TestFunction& h, std::span<const double> s_grid,
                             const MacroSolution& macro, const SemigroupOptions& options) {
  const auto initial = h.sample(macro.mesh(), options.datum_time);
  return semigroup_T(std::span<const double>(initial), s_grid, macro, options);
}

void write_macro_csv(std::ostream& out, const MacroSolution& macro) {
  out << "# schema=macro/v1\n";
  out << "t,u,rho\n";
  out.precision(17);
  for (std::size_t g = 0; g < macro.times().size(); ++g) {
    const auto slice = macro.slice(g);
    for (int i = 0; i < macro.mesh().nodes(); ++i) {
      out << macro.times()[g] << ',' << macro.mesh().node(i) << ',' << slice[i] << '\n';
    }
  }
}

void write_semigroup_csv(std::ostream& out, const SemigroupSurface& surface) {
  out << "# schema=semigroup/v1\n";
  out << "s,u,TH\n";
  out.precision(17);
  for (std::size_t g = 0; g < surface.s_grid.size(); ++g) {
    for (int i = 0; i < surface.mesh.nodes(); ++i) {
      out << surface.s_grid[g] << ',' << surface.mesh.node(i) << ',' << surface.values[g][i] << '\n';
    }
  }
}

}  // namespace stirlab
