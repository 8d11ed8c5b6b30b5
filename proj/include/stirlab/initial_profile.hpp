#pragma once

#include <functional>
#include <string>
#include <vector>

namespace stirlab {

// Macroscopic initial density u0 : [-1, 1] -> [0, 1].
class InitialProfile {
 public:
  InitialProfile(std::string name, std::function<double(double)> u0);

  double operator()(double u) const { return u0_(u); }
  const std::string& name() const { return name_; }

  // Throws DomainError if any of `samples` points in [-1, 1] leaves [0, 1].
  void validate(int samples = 2001) const;

 private:
  std::string name_;
  std::function<double(double)> u0_;
};

InitialProfile constant_profile(double value);
// u0(u) = a + b u.
InitialProfile linear_profile(double a, double b);
// u0(u) = mean + amplitude cos(pi (u + 1) / 2).
InitialProfile cosine_profile(double mean, double amplitude);

// Preset lookup used by config files: "constant" {c}, "linear" {a, b},
// "cosine" {mean, amplitude}.
InitialProfile make_profile(const std::string& preset, const std::vector<double>& args);

}  // namespace stirlab
