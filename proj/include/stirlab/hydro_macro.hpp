#pragma once

// Macroscopic layer: the heat equation on [-1, 1] with nonlinear flux
// conditions, its Duhamel (integral) form, the linearized time-dependent
// Robin semigroup and the boundary-compatible test functions.

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stirlab/initial_profile.hpp"

namespace stirlab {

// Dtilde_+(rho) = j (1 - rho^K), Dtilde_-(rho) = j (1 - (1 - rho)^K) and their
// derivatives. rho must lie in [0, 1] up to 1e-9.
double dtilde_plus(double rho, int k, double j);
double dtilde_minus(double rho, int k, double j);
double dtilde_plus_prime(double rho, int k, double j);
double dtilde_minus_prime(double rho, int k, double j);

// Uniform grid on [-1, 1] with `nodes` points.
class Mesh {
 public:
  explicit Mesh(int nodes);
  int nodes() const { return nodes_; }
  int intervals() const { return nodes_ - 1; }
  double h() const { return 2.0 / intervals(); }
  double node(int i) const { return -1.0 + h() * i; }

 private:
  int nodes_;
};

class MacroSolution {
 public:
  MacroSolution(Mesh mesh, int k, double j, std::vector<double> times,
                std::vector<std::vector<double>> values, std::vector<double> trace_times,
                std::vector<double> trace_left, std::vector<double> trace_right);

  const Mesh& mesh() const { return mesh_; }
  int k() const { return k_; }
  double j() const { return j_; }
  const std::vector<double>& times() const { return times_; }
  std::span<const double> slice(std::size_t i) const { return values_[i]; }
  std::size_t time_index(double t) const;  // exact grid time (1e-12) or DomainError

  // Linear interpolation between stored slices (exact on grid times).
  std::vector<double> profile_at(double t) const;
  // Piecewise-linear in u on the stored slice at grid time index i.
  double value(std::size_t time_index, double u) const;

  // rho(-1, t) and rho(1, t) from the dense boundary traces.
  double left(double t) const;
  double right(double t) const;
  double t_max() const { return trace_times_.back(); }

  const std::vector<double>& trace_times() const { return trace_times_; }

 private:
  double trace(const std::vector<double>& v, double t) const;

  Mesh mesh_;
  int k_;
  double j_;
  std::vector<double> times_;
  std::vector<std::vector<double>> values_;
  std::vector<double> trace_times_, trace_left_, trace_right_;
};

struct RobinOptions {
  int mesh_nodes = 401;
  double dt = 0.0;                  // 0 = mesh spacing
  int startup_substeps = 4;         // implicit Euler substeps replacing the first step
  double refine_window = 0.25;      // steps ramp from dt/8 up to dt over this initial layer
  double spatial_tolerance = 1e-4;  // rejects meshes with h^2 above this
  double newton_tolerance = 1e-14;
};

// Method of lines with ghost nodes: d_u rho(-1) = Dtilde_-(rho(-1)),
// d_u rho(1) = Dtilde_+(rho(1)); Crank-Nicolson with a Newton solve of the
// boundary nonlinearity. t_grid must start at 0.
MacroSolution solve_robin(const InitialProfile& u0, int k, double j,
                          std::span<const double> t_grid, const RobinOptions& options = {});

struct IntegralFormOptions {
  int mesh_nodes = 401;
  int time_nodes = 400;             // graded nodes T (i/n)^2 before merging the output grid
  double picard_tolerance = 1e-13;  // sup-change stopping rule per node
  int max_picard_iterations = 200;
  int max_refinements = 4;          // node doublings when a slab fails to contract
  int quadrature_points = 16;       // Gauss-Legendre points per panel
};

// Neumann heat kernel on [-1, 1] by images (generator Delta/2).
double neumann_kernel(double t, double x, double r);

// Independent solution of the Duhamel form by product integration of the
// image kernel against piecewise-linear boundary fluxes.
MacroSolution solve_integral_form(const InitialProfile& u0, int k, double j,
                                  std::span<const double> t_grid,
                                  const IntegralFormOptions& options = {});

class TestFunction {
 public:
  using Fn = std::function<double(double u, double t)>;

  TestFunction(std::string name, Fn value, Fn du, Fn duu, Fn dt);
  // Time-independent H from f, f', f''.
  static TestFunction stationary(std::string name, std::function<double(double)> f,
                                 std::function<double(double)> df,
                                 std::function<double(double)> d2f);

  const std::string& name() const { return name_; }
  double operator()(double u, double t) const { return value_(u, t); }
  double du(double u, double t) const { return du_(u, t); }
  double duu(double u, double t) const { return duu_(u, t); }
  double dt(double u, double t) const { return dt_(u, t); }
  bool time_independent() const { return time_independent_; }

  std::vector<double> sample(const Mesh& mesh, double t) const;

 private:
  std::string name_;
  Fn value_, du_, duu_, dt_;
  bool time_independent_ = false;
};

// H + alpha(t) phi_- + beta(t) phi_+ where phi_+- are C^2 bumps of width
// `width` at -1 and 1 with phi(+-1) = 0 and phi'(+-1) = 1, chosen so that
// d_u H_t(-1) = Dtilde'_-(rho(-1,t)) H_t(-1) and d_u H_t(1) = Dtilde'_+(rho(1,t)) H_t(1).
TestFunction boundary_blend(const TestFunction& shape, const MacroSolution& macro,
                            double width = 0.25);

struct TestFunctionResidual {
  double t;
  double left;   // d_u H(-1) - Dtilde'_-(rho(-1,t)) H(-1)
  double right;  // d_u H(1) - Dtilde'_+(rho(1,t)) H(1)
};

struct TestFunctionCheck {
  bool passes;
  double max_residual;
  std::vector<TestFunctionResidual> residuals;
};

TestFunctionCheck check_test_function(const TestFunction& h, const MacroSolution& macro,
                                      std::span<const double> t_grid, double tolerance = 1e-6);

enum class SemigroupClock {
  Forward,   // coefficients at rho(s): the literal reading
  Backward,  // coefficients at rho(t_ref - s): propagator from t_ref back to t_ref - s
};

struct SemigroupOptions {
  SemigroupClock clock = SemigroupClock::Forward;
  double t_ref = 0.0;      // Backward clock only
  double datum_time = 0.0; // H is sampled as H(., datum_time)
  double dt = 0.0;         // 0 = mesh spacing of the macro solution
  int startup_substeps = 4;
  double refine_window = 0.25;
};

struct SemigroupSurface {
  Mesh mesh;
  std::vector<double> s_grid;
  std::vector<std::vector<double>> values;

  std::size_t index(double s) const;
};

// Linear heat flow with d_u phi(-1) = Dtilde'_-(rho(-1,.)) phi(-1) and
// d_u phi(1) = Dtilde'_+(rho(1,.)) phi(1), started from H; s_grid sorted,
// starting at 0. Output mesh equals the macro mesh.
SemigroupSurface semigroup_T(const TestFunction& h, std::span<const double> s_grid,
                             const MacroSolution& macro, const SemigroupOptions& options = {});

// The same flow started from arbitrary mesh values.
SemigroupSurface semigroup_T(std::span<const double> initial, std::span<const double> s_grid,
                             const MacroSolution& macro, const SemigroupOptions& options = {});

// "# schema=macro/v1" (t,u,rho) and "# schema=semigroup/v1" (s,u,TH).
void write_macro_csv(std::ostream& out, const MacroSolution& macro);
void write_semigroup_csv(std::ostream& out, const SemigroupSurface& surface);

}  // namespace stirlab
