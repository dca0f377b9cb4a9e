#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "timetk/autodiff.hpp"

// Differentiable tensor operations. Binary elementwise ops broadcast with
// numpy rules; every op rejects non-finite results with NumericError.
namespace timetk::ops {

Shape broadcast_shape(const Shape& a, const Shape& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var neg(const Var& x);
Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double s);
Var exp(const Var& x);
Var square(const Var& x);
Var sqrt(const Var& x);
// Exact (erf-based) GELU.
Var gelu(const Var& x);

Var sum(const Var& x);
Var mean(const Var& x);
Var sum_axis(const Var& x, int axis, bool keepdim = false);
Var mean_axis(const Var& x, int axis, bool keepdim = false);

// [..., m, k] x [..., k, n] -> [..., m, n]; batch dims broadcast.
Var matmul(const Var& a, const Var& b);

Var permute(const Var& x, const std::vector<std::size_t>& perm);
Var transpose(const Var& x, int axis0, int axis1);
Var reshape(const Var& x, Shape shape);

Var concat(const std::vector<Var>& parts, int axis);
// Elements start, start+step, ... along `axis`; count == 0 takes as many as fit.
Var slice_strided(const Var& x, int axis, std::size_t start, std::size_t step, std::size_t count = 0);

// Max-subtracted softmax along `axis`.
Var softmax(const Var& x, int axis);

// Normalizes over the last axis, then applies gamma/beta of shape [D].
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Inverted dropout: zeroes with probability `rate`, rescales survivors.
Var dropout(const Var& x, double rate, std::mt19937_64& rng);

}  // namespace timetk::ops

namespace timetk {

inline Var operator+(const Var& a, const Var& b) { return ops::add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return ops::sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return ops::mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return ops::div(a, b); }
inline Var operator-(const Var& x) { return ops::neg(x); }
inline Var operator*(const Var& x, double s) { return ops::scale(x, s); }
inline Var operator*(double s, const Var& x) { return ops::scale(x, s); }
inline Var operator+(const Var& x, double s) { return ops::add_scalar(x, s); }

}  // namespace timetk
