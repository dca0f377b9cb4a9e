#pragma once

#include <string>
#include <utility>

#include "timetk/autodiff.hpp"

namespace timetk {

// Per-instance, per-variate statistics of one lookback batch, [B, N, 1].
// Treated as constants: no gradient flows through them.
struct RevinState {
  Tensor mean;
  Tensor stdev;
};

// Reversible instance normalization over the time axis of [B, N, L] input.
// Population variance; the standard deviation is clamped below at eps so
// constant variates normalize to zero instead of failing.
class Revin {
 public:
  Revin(std::string name, std::size_t variates, bool affine = true, double eps = 1e-5);

  std::pair<Var, RevinState> normalize(const Var& x) const;
  Var denormalize(const Var& y, const RevinState& state) const;

  ParameterList parameters() const;

  std::size_t variates() const { return variates_; }
  bool affine() const { return affine_; }
  double eps() const { return eps_; }
  const Parameter& gamma() const { return gamma_; }
  const Parameter& beta() const { return beta_; }

 private:
  std::size_t variates_;
  bool affine_;
  double eps_;
  Parameter gamma_;
  Parameter beta_;
};

}  // namespace timetk
