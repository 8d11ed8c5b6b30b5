#include "stirlab/discrete_profile.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

namespace {

constexpr double kRangeSlack = 1e-8;

void check_range(std::span<const double> rho, double t) {
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (!(rho[i] >= -kRangeSlack && rho[i] <= 1.0 + kRangeSlack)) {
      std::ostringstream msg;
      msg << "profile left [0, 1] at t = " << t << ", index " << i << ": " << rho[i];
      throw ConvergenceError(msg.str());
    }
  }
}

void validate_grid(std::span<const double> t_grid) {
  if (t_grid.empty() || t_grid[0] != 0.0) throw DomainError("t_grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("t_grid must be strictly increasing");
  }
}

// Boundary part eps^-1 (j/2)(1_{I+} D_+ rho - 1_{I-} D_- rho), added to `out`.
void add_boundary_term(const ModelParams& params, std::span<const double> rho,
                       std::span<double> out) {
  if (params.j() == 0.0) return;
  const int n = params.n();
  const int last = params.num_sites() - 1;
  const double scale = 0.5 * params.j() * n;
  double suffix = 1.0;  // product of rho over sites to the right of x
  for (int i = last; i > last - params.k(); --i) {
    out[i] += scale * (1.0 - rho[i]) * suffix;
    suffix *= rho[i];
  }
  double prefix = 1.0;  // product of (1 - rho) over sites to the left of x
  for (int i = 0; i < params.k(); ++i) {
    out[i] -= scale * rho[i] * prefix;
    prefix *= 1.0 - rho[i];
  }
}

void boundary_term(const ModelParams& params, std::span<const double> rho,
                   std::vector<double>& out) {
  std::fill(out.begin(), out.end(), 0.0);
  add_boundary_term(params, rho, out);
}

// y = (I + c Delta) x with the reflecting Laplacian.
void apply_explicit(std::span<const double> x, double c, std::vector<double>& y) {
  const std::size_t s = x.size();
  if (s == 1) {
    y[0] = x[0];
    return;
  }
  y[0] = x[0] + c * (x[1] - x[0]);
  for (std::size_t i = 1; i + 1 < s; ++i) y[i] = x[i] + c * (x[i + 1] + x[i - 1] - 2.0 * x[i]);
  y[s - 1] = x[s - 1] + c * (x[s - 2] - x[s - 1]);
}

// Solves (I - c Delta) y = rhs in place (Thomas algorithm).
void solve_implicit(double c, std::vector<double>& rhs, std::vector<double>& scratch) {
  const std::size_t s = rhs.size();
  if (s == 1) return;
  scratch.resize(s);
  auto diag = [&](std::size_t i) { return (i == 0 || i + 1 == s) ? 1.0 + c : 1.0 + 2.0 * c; };
  double denom = diag(0);
  scratch[0] = -c / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < s; ++i) {
    denom = diag(i) + c * scratch[i - 1];
    scratch[i] = -c / denom;
    rhs[i] = (rhs[i] + c * rhs[i - 1]) / denom;
  }
  for (std::size_t i = s - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

class ImexStepper {
 public:
  explicit ImexStepper(const ModelParams& params)
      : params_(params), s_(params.num_sites()), b0_(s_), b1_(s_), pred_(s_), rhs_(s_) {}

  // Crank-Nicolson on the diffusion, Heun on the boundary term.
  void step(std::span<const double> rho, double dt, std::vector<double>& out) {
    const double c = 0.25 * dt * params_.n() * params_.n();
    boundary_term(params_, rho, b0_);
    apply_explicit(rho, c, rhs_);
    for (std::size_t i = 0; i < s_; ++i) pred_[i] = rhs_[i] + dt * b0_[i];
    solve_implicit(c, pred_, scratch_);
    boundary_term(params_, pred_, b1_);
    out.resize(s_);
    for (std::size_t i = 0; i < s_; ++i) out[i] = rhs_[i] + 0.5 * dt * (b0_[i] + b1_[i]);
    solve_implicit(c, out, scratch_);
  }

 private:
  const ModelParams& params_;
  std::size_t s_;
  std::vector<double> b0_, b1_, pred_, rhs_, scratch_;
};

void rk4_step(const ModelParams& params, std::vector<double>& rho, double dt,
              std::vector<std::vector<double>>& work) {
  const std::size_t s = rho.size();
  auto& k1 = work[0];
  auto& k2 = work[1];
  auto& k3 = work[2];
  auto& k4 = work[3];
  auto& tmp = work[4];
  profile_rhs(params, rho, k1);
  for (std::size_t i = 0; i < s; ++i) tmp[i] = rho[i] + 0.5 * dt * k1[i];
  profile_rhs(params, tmp, k2);
  for (std::size_t i = 0; i < s; ++i) tmp[i] = rho[i] + 0.5 * dt * k2[i];
  profile_rhs(params, tmp, k3);
  for (std::size_t i = 0; i < s; ++i) tmp[i] = rho[i] + dt * k3[i];
  profile_rhs(params, tmp, k4);
  for (std::size_t i = 0; i < s; ++i) {
    rho[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
}

}  // namespace

DiscreteProfileGrid::DiscreteProfileGrid(ModelParams params, std::vector<double> times,
                                         std::vector<std::vector<double>> values)
    : params_(params), times_(std::move(times)), values_(std::move(values)) {}

std::size_t DiscreteProfileGrid::time_index(double t) const {
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (std::abs(times_[i] - t) <= 1e-12) return i;
  }
  std::ostringstream msg;
  msg << "time " << t << " is not on the profile grid";
  throw DomainError(msg.str());
}

Integrator parse_integrator(const std::string& name) {
  if (name == "imex") return Integrator::Imex;
  if (name == "rk4") return Integrator::Rk4;
  throw ConfigError("unknown integrator '" + name + "' (expected imex or rk4)");
}

void profile_rhs(const ModelParams& params, std::span<const double> rho, std::span<double> out) {
  const double c = 0.5 * params.n() * params.n();
  std::vector<double> lap(rho.size());
  apply_explicit(rho, 1.0, lap);
  for (std::size_t i = 0; i < rho.size(); ++i) out[i] = c * (lap[i] - rho[i]);
  add_boundary_term(params, rho, out);
}

DiscreteProfileGrid solve_rho_eps(const ModelParams& params, const InitialProfile& u0,
                                  std::span<const double> t_grid,
                                  const ProfileSolverOptions& options) {
  validate_grid(t_grid);
  u0.validate();
  const int s = params.num_sites();
  const double eps = params.epsilon();
  std::vector<double> rho(s);
  for (int i = 0; i < s; ++i) rho[i] = u0(eps * (i - params.n()));

  std::vector<std::vector<double>> values;
  values.push_back(rho);
  std::size_t steps = 0;
  double t = 0.0;

  if (options.integrator == Integrator::Rk4) {
    const double dt_nominal = options.dt_scale * eps * eps / 4.0;
    std::vector<std::vector<double>> work(5, std::vector<double>(s));
    for (std::size_t g = 1; g < t_grid.size(); ++g) {
      const double target = t_grid[g];
      const auto n_steps = static_cast<std::size_t>(std::ceil((target - t) / dt_nominal - 1e-9));
      const double dt = (target - t) / static_cast<double>(std::max<std::size_t>(n_steps, 1));
      for (std::size_t k = 0; k < std::max<std::size_t>(n_steps, 1); ++k) {
        rk4_step(params, rho, dt, work);
        if (++steps > options.max_steps) throw ConvergenceError("rk4: step budget exhausted");
      }
      t = target;
      check_range(rho, t);
      values.push_back(rho);
    }
    return {params, {t_grid.begin(), t_grid.end()}, std::move(values)};
  }

  // IMEX with step doubling: compare one step of dt with two of dt/2, keep the
  // Richardson-extrapolated value.
  ImexStepper stepper(params);
  std::vector<double> big, half, small;
  double dt = eps * eps;
  const double dt_min = 1e-6 * eps * eps;
  for (std::size_t g = 1; g < t_grid.size(); ++g) {
    const double target = t_grid[g];
    while (t < target) {
      const bool last = t + dt >= target * (1.0 - 1e-14);
      const double h = last ? target - t : dt;
      stepper.step(rho, h, big);
      stepper.step(rho, 0.5 * h, half);
      stepper.step(half, 0.5 * h, small);
      double diff = 0.0;
      for (int i = 0; i < s; ++i) diff = std::max(diff, std::abs(small[i] - big[i]));
      const double err = diff / 3.0;
      if (++steps > options.max_steps) throw ConvergenceError("imex: step budget exhausted");
      const double factor =
          err > 0.0 ? std::clamp(0.9 * std::cbrt(options.tolerance / err), 0.2, 2.0) : 2.0;
      if (err <= options.tolerance) {
        for (int i = 0; i < s; ++i) rho[i] = small[i] + (small[i] - big[i]) / 3.0;
        t = last ? target : t + h;
        if (!last || factor < 1.0) dt = h * factor;
      } else {
        dt = h * factor;
        if (dt < dt_min) {
          std::ostringstream msg;
          msg << "imex step-size control failed at t = " << t << ": dt = " << dt
              << " below minimum, local error " << err;
          throw ConvergenceError(msg.str());
        }
      }
    }
    check_range(rho, t);
    values.push_back(rho);
  }
  return {params, {t_grid.begin(), t_grid.end()}, std::move(values)};
}

std::vector<double> discrete_gradient_stats(const DiscreteProfileGrid& grid) {
  std::vector<double> out;
  for (std::size_t i = 0; i < grid.times().size(); ++i) {
    const auto slice = grid.slice(i);
    double sup = 0.0;
    for (std::size_t x = 0; x + 1 < slice.size(); ++x) {
      sup = std::max(sup, std::abs(slice[x] - slice[x + 1]));
    }
    out.push_back(sup);
  }
  return out;
}

std::vector<MomentEstimate> mc_discrete_profile(const SimulationPlan& plan,
                                                const InitialSampler& sampler, double t,
                                                const EngineOptions& options) {
  plan.validate();
  if (std::find(plan.snapshot_times.begin(), plan.snapshot_times.end(), t) ==
      plan.snapshot_times.end()) {
    throw DomainError("time is not a snapshot time of the plan");
  }
  std::vector<Functional> functionals;
  for (Site x = plan.params.first_site(); x <= plan.params.last_site(); ++x) {
    functionals.push_back([x, t](const TrajectoryRecord& r) { return double(r.at(t)(x)); });
  }
  return estimate_moments(plan, sampler, functionals, options);
}

void write_profile_csv(std::ostream& out, const DiscreteProfileGrid& grid) {
  out << "# schema=profile/v1\n";
  out << "t,x,rho_eps\n";
  out.precision(17);
  for (std::size_t i = 0; i < grid.times().size(); ++i) {
    const auto slice = grid.slice(i);
    for (int k = 0; k < static_cast<int>(slice.size()); ++k) {
      out << grid.times()[i] << ',' << k - grid.params().n() << ',' << slice[k] << '\n';
    }
  }
}

}  // namespace stirlab
