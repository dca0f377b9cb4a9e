#include "timetk/revin.hpp"

#include <algorithm>
#include <cmath>

#include "timetk/error.hpp"
#include "timetk/ops.hpp"

namespace timetk {

Revin::Revin(std::string name, std::size_t variates, bool affine, double eps)
    : variates_(variates),
      affine_(affine),
      eps_(eps),
      gamma_(make_parameter(name + ".gamma", Tensor({variates}, 1.0), affine)),
      beta_(make_parameter(name + ".beta", Tensor({variates}, 0.0), affine)) {}

std::pair<Var, RevinState> Revin::normalize(const Var& x) const {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != variates_)
    throw ShapeError("RevIN expects [B, " + std::to_string(variates_) + ", L], got " + shape_str(s));
  const std::size_t batch = s[0], n = s[1], len = s[2];
  if (len < 2) throw ShapeError("RevIN needs a lookback of at least 2 steps");

  RevinState state{Tensor({batch, n, 1}), Tensor({batch, n, 1})};
  const auto& v = x.value();
  for (std::size_t row = 0; row < batch * n; ++row) {
    const double* p = v.data().data() + row * len;
    double mu = 0.0;
    for (std::size_t t = 0; t < len; ++t) mu += p[t];
    mu /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) var += (p[t] - mu) * (p[t] - mu);
    var /= static_cast<double>(len);
    state.mean[row] = mu;
    state.stdev[row] = std::max(std::sqrt(var), eps_);
  }

  Var out = (x - constant(state.mean)) / constant(state.stdev);
  if (affine_) {
    out = out * ops::reshape(gamma_.var, {n, 1}) + ops::reshape(beta_.var, {n, 1});
  }
  return {out, std::move(state)};
}

Var Revin::denormalize(const Var& y, const RevinState& state) const {
  const Shape& s = y.shape();
  const Shape& ms = state.mean.shape();
  if (s.size() != 3 || ms.size() != 3 || s[0] != ms[0] || s[1] != ms[1] || s[1] != variates_)
    throw ShapeError("RevIN denormalize: output " + shape_str(s) + " does not match state " + shape_str(ms));
  Var out = y;
  if (affine_) {
    const std::size_t n = s[1];
    out = (out - ops::reshape(beta_.var, {n, 1})) / ops::reshape(gamma_.var, {n, 1});
  }
  return out * constant(state.stdev) + constant(state.mean);
}

ParameterList Revin::parameters() const {
  if (!affine_) return {};
  return {gamma_, beta_};
}

}  // namespace timetk
