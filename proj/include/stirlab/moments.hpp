#pragma once

#include <cmath>
#include <cstddef>

#include "stirlab/errors.hpp"

namespace stirlab {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  void merge(const CompensatedSum& other) {
    add(other.sum_);
    add(other.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// Monte Carlo estimate: sample mean, standard error sd/sqrt(M), sample count M.
struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// Streaming mean / standard-error reducer. Merging is done in a fixed block
// order by the engine, which makes results independent of the thread count.
class MomentAccumulator {
 public:
  void add(double x) {
    sum_.add(x);
    sum_sq_.add(x * x);
    ++count_;
  }
  void merge(const MomentAccumulator& other) {
    sum_.merge(other.sum_);
    sum_sq_.merge(other.sum_sq_);
    count_ += other.count_;
  }
  std::size_t count() const { return count_; }

  MomentEstimate estimate() const {
    if (count_ == 0) throw DomainError("MomentAccumulator: no samples");
    const double n = static_cast<double>(count_);
    const double mean = sum_.value() / n;
    double se = 0.0;
    if (count_ > 1) {
      const double var = (sum_sq_.value() - n * mean * mean) / (n - 1.0);
      se = var > 0.0 ? std::sqrt(var / n) : 0.0;
    }
    return {mean, se, count_};
  }

 private:
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
  std::size_t count_ = 0;
};

}  // namespace stirlab
