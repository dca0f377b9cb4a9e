#include "timetk/metrics.hpp"

#include <cmath>
#include <string>

#include "timetk/error.hpp"

namespace timetk::metrics {

void Accumulator::add(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw DataError("metric inputs differ in size: " + std::to_string(pred.size()) + " vs " +
                    std::to_string(target.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double y = target[i];
    const double err = y - pred[i];
    sq_err_ += err * err;
    abs_err_ += std::abs(err);
    ++count_;
    const double delta = y - target_mean_;
    target_mean_ += delta / static_cast<double>(count_);
    target_m2_ += delta * (y - target_mean_);
    if (std::abs(y) < kMapeZeroThreshold) {
      ++ape_excluded_;
    } else {
      ape_sum_ += std::abs(err / y);
      ++ape_count_;
    }
  }
}

MetricSet Accumulator::result() const {
  if (count_ == 0) throw DataError("metrics of an empty set");
  MetricSet m;
  const double n = static_cast<double>(count_);
  m.count = count_;
  m.mse = sq_err_ / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = abs_err_ / n;
  // Constant targets leave RSE undefined; report 0 for a perfect fit, inf otherwise.
  if (target_m2_ > 0.0) {
    m.rse = std::sqrt(sq_err_) / std::sqrt(target_m2_);
  } else {
    m.rse = sq_err_ == 0.0 ? 0.0 : INFINITY;
  }
  m.mape = ape_count_ > 0 ? ape_sum_ / static_cast<double>(ape_count_) : 0.0;
  m.mape_excluded = ape_excluded_;
  return m;
}

MetricSet compute(std::span<const double> pred, std::span<const double> target) {
  Accumulator acc;
  acc.add(pred, target);
  return acc.result();
}

}  // namespace timetk::metrics
