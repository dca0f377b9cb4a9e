#pragma once

#include <cstddef>
#include <span>

namespace timetk::metrics {

// |target| below this is left out of the MAPE mean (and counted).
inline constexpr double kMapeZeroThreshold = 1e-8;

struct MetricSet {
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double rse = 0.0;
  double mape = 0.0;
  std::size_t count = 0;
  std::size_t mape_excluded = 0;
};

// Streaming accumulation so large test sets need not be held in memory.
// Target mean/spread use Welford's update, which keeps the RSE denominator
// accurate without a second pass.
class Accumulator {
 public:
  void add(std::span<const double> pred, std::span<const double> target);
  MetricSet result() const;
  std::size_t count() const { return count_; }

 private:
  std::size_t count_ = 0;
  double sq_err_ = 0.0;
  double abs_err_ = 0.0;
  double target_mean_ = 0.0;
  double target_m2_ = 0.0;
  double ape_sum_ = 0.0;
  std::size_t ape_count_ = 0;
  std::size_t ape_excluded_ = 0;
};

// Throws DataError on empty or mismatched input.
MetricSet compute(std::span<const double> pred, std::span<const double> target);

}  // namespace timetk::metrics
