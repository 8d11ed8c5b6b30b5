#pragma once

// Deterministic auxiliary profile rho_eps(x, t): the lattice heat equation
// with reflecting ends plus the boundary products applied to the profile.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stirlab/core_model.hpp"
#include "stirlab/ctmc_engine.hpp"
#include "stirlab/initial_profile.hpp"

namespace stirlab {

class DiscreteProfileGrid {
 public:
  DiscreteProfileGrid(ModelParams params, std::vector<double> times,
                      std::vector<std::vector<double>> values);

  const ModelParams& params() const { return params_; }
  const std::vector<double>& times() const { return times_; }

  // Index of a grid time equal to `t` (to 1e-12); throws DomainError otherwise.
  std::size_t time_index(double t) const;
  std::span<const double> slice(std::size_t time_index) const { return values_[time_index]; }
  std::span<const double> at_time(double t) const { return values_[time_index(t)]; }
  double at(std::size_t time_index, Site x) const { return values_[time_index][x + params_.n()]; }

 private:
  ModelParams params_;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
};

enum class Integrator { Imex, Rk4 };

Integrator parse_integrator(const std::string& name);

struct ProfileSolverOptions {
  Integrator integrator = Integrator::Imex;
  double tolerance = 1e-9;   // imex: local sup-norm error per step
  double dt_scale = 1.0;     // rk4: dt = dt_scale * eps^2 / 4
  std::size_t max_steps = 50'000'000;
};

// The right-hand side 1/2 Delta_eps rho + eps^-1 (j/2)(1_{I+} D_+ rho - 1_{I-} D_- rho).
void profile_rhs(const ModelParams& params, std::span<const double> rho, std::span<double> out);

// Requires t_grid sorted with t_grid[0] = 0. Throws ConvergenceError when the
// step-size control fails or the solution leaves [-1e-8, 1 + 1e-8].
DiscreteProfileGrid solve_rho_eps(const ModelParams& params, const InitialProfile& u0,
                                  std::span<const double> t_grid,
                                  const ProfileSolverOptions& options = {});

// sup_x |rho(x,t) - rho(x+1,t)| for each grid time.
std::vector<double> discrete_gradient_stats(const DiscreteProfileGrid& grid);

// Monte Carlo rho_t^eps(x) = E[eta_t(x)] for every site; `t` must be a
// snapshot time of the plan.
std::vector<MomentEstimate> mc_discrete_profile(const SimulationPlan& plan,
                                                const InitialSampler& sampler, double t,
                                                const EngineOptions& options = {});

// "# schema=profile/v1" (t,x,rho_eps).
void write_profile_csv(std::ostream& out, const DiscreteProfileGrid& grid);

}  // namespace stirlab
