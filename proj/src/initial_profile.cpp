#include "stirlab/initial_profile.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "stirlab/errors.hpp"

namespace stirlab {

InitialProfile::InitialProfile(std::string name, std::function<double(double)> u0)
    : name_(std::move(name)), u0_(std::move(u0)) {}

void InitialProfile::validate(int samples) const {
  for (int i = 0; i < samples; ++i) {
    const double u = -1.0 + 2.0 * i / (samples - 1);
    const double v = u0_(u);
    if (!(v >= 0.0 && v <= 1.0)) {
      std::ostringstream msg;
      msg << "initial profile '" << name_ << "' takes value " << v << " at u = " << u
          << ", outside [0, 1]";
      throw DomainError(msg.str());
    }
  }
}

InitialProfile constant_profile(double value) {
  std::ostringstream name;
  name << "constant(" << value << ")";
  return {name.str(), [value](double) { return value; }};
}

InitialProfile linear_profile(double a, double b) {
  std::ostringstream name;
  name << "linear(" << a << "," << b << ")";
  return {name.str(), [a, b](double u) { return a + b * u; }};
}

InitialProfile cosine_profile(double mean, double amplitude) {
  std::ostringstream name;
  name << "cosine(" << mean << "," << amplitude << ")";
  return {name.str(), [mean, amplitude](double u) {
            return mean + amplitude * std::cos(std::numbers::pi * (u + 1.0) / 2.0);
          }};
}

InitialProfile make_profile(const std::string& preset, const std::vector<double>& args) {
  auto need = [&](std::size_t count) {
    if (args.size() != count) {
      std::ostringstream msg;
      msg << "profile preset '" << preset << "' takes " << count << " parameter(s), got "
          << args.size();
      throw ConfigError(msg.str());
    }
  };
  InitialProfile out = [&]() -> InitialProfile {
    if (preset == "constant") {
      need(1);
      return constant_profile(args[0]);
    }
    if (preset == "linear") {
      need(2);
      return linear_profile(args[0], args[1]);
    }
    if (preset == "cosine") {
      need(2);
      return cosine_profile(args[0], args[1]);
    }
    throw ConfigError("unknown profile preset '" + preset + "'");
  }();
  out.validate();
  return out;
}

}  // namespace stirlab
