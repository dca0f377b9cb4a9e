#include "timetk/ops.hpp"

#include <cmath>
#include <numbers>

#include "timetk/error.hpp"

namespace timetk::ops {

namespace {

// Flat source offsets of each output element for a broadcast pair.
struct BroadcastMap {
  Shape out;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> strides(r, 0);
  const auto own = row_major_strides(in);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t ax = r - in.size() + i;
    strides[ax] = in[i] == 1 ? 0 : own[i];
  }
  return strides;
}

BroadcastMap make_map(const Shape& a, const Shape& b) {
  BroadcastMap map;
  map.out = broadcast_shape(a, b);
  const std::size_t r = map.out.size();
  const auto sa = aligned_strides(a, map.out);
  const auto sb = aligned_strides(b, map.out);
  const std::size_t n = shape_numel(map.out);
  map.ia.resize(n);
  map.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < n; ++i) {
    map.ia[i] = oa;
    map.ib[i] = ob;
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < map.out[ax]) break;
      oa -= sa[ax] * idx[ax];
      ob -= sb[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return map;
}

// outer x n x inner view around one axis.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class F, class DA, class DB>
Var binary(const Var& a, const Var& b, F f, DA da, DB db, const char* op) {
  if (a.shape() == b.shape()) {
    const auto& x = a.value();
    const auto& y = b.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x[i], y[i]);
    return make_result(std::move(out), {a, b}, [da, db](Node& self) {
      Node& pa = *self.parents[0];
      Node& pb = *self.parents[1];
      const auto& g = self.grad;
      for (std::size_t i = 0; i < g.numel(); ++i) {
        const double xv = pa.value[i], yv = pb.value[i];
        if (pa.requires_grad) pa.grad[i] += da(xv, yv) * g[i];
        if (pb.requires_grad) pb.grad[i] += db(xv, yv) * g[i];
      }
    }, op);
  }
  auto map = std::make_shared<const BroadcastMap>(make_map(a.shape(), b.shape()));
  const auto& x = a.value();
  const auto& y = b.value();
  Tensor out(map->out);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(x[map->ia[i]], y[map->ib[i]]);
  return make_result(std::move(out), {a, b}, [map, da, db](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    const auto& g = self.grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      const std::size_t ja = map->ia[i], jb = map->ib[i];
      const double xv = pa.value[ja], yv = pb.value[jb];
      if (pa.requires_grad) pa.grad[ja] += da(xv, yv) * g[i];
      if (pb.requires_grad) pb.grad[jb] += db(xv, yv) * g[i];
    }
  }, op);
}

// dfdx receives (input, output).
template <class F, class D>
Var unary(const Var& x, F f, D dfdx, const char* op) {
  const auto& in = x.value();
  Tensor out(in.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(in[i]);
  return make_result(std::move(out), {x}, [dfdx](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i)
      p.grad[i] += dfdx(p.value[i], self.value[i]) * self.grad[i];
  }, op);
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

Var add(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; }, "add");
}

Var sub(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; }, "sub");
}

Var mul(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; }, "mul");
}

Var div(const Var& a, const Var& b) {
  return binary(a, b, [](double x, double y) { return x / y; },
                [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); }, "div");
}

Var neg(const Var& x) {
  return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; }, "neg");
}

Var scale(const Var& x, double s) {
  return unary(x, [s](double v) { return s * v; }, [s](double, double) { return s; }, "scale");
}

Var add_scalar(const Var& x, double s) {
  return unary(x, [s](double v) { return v + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Var exp(const Var& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; }, "exp");
}

Var square(const Var& x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; }, "square");
}

Var sqrt(const Var& x) {
  return unary(x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; }, "sqrt");
}

Var gelu(const Var& x) {
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      },
      "gelu");
}

Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(Tensor::scalar(s), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    const double g = self.grad[0];
    for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  }, "sum");
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var sum_axis(const Var& x, int axis, bool keepdim) {
  const std::size_t ax = x.value().normalize_axis(axis);
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[ax] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  }
  Tensor out(out_shape);
  const auto& in = x.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i) out[o * s.inner + i] += in[(o * s.n + k) * s.inner + i];
  return make_result(std::move(out), {x}, [s](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.n; ++k)
        for (std::size_t i = 0; i < s.inner; ++i) p.grad[(o * s.n + k) * s.inner + i] += self.grad[o * s.inner + i];
  }, "sum_axis");
}

Var mean_axis(const Var& x, int axis, bool keepdim) {
  const double n = static_cast<double>(x.value().dim(axis));
  return scale(sum_axis(x, axis, keepdim), 1.0 / n);
}

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2)
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(sa) + " and " + shape_str(sb));
  const std::size_t m = sa[sa.size() - 2], k = sa.back(), n = sb.back();
  if (sb[sb.size() - 2] != k)
    throw ShapeError("matmul inner dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
  const Shape batch_a(sa.begin(), sa.end() - 2);
  const Shape batch_b(sb.begin(), sb.end() - 2);
  std::shared_ptr<const BroadcastMap> map;
  try {
    map = std::make_shared<const BroadcastMap>(make_map(batch_a, batch_b));
  } catch (const ShapeError&) {
    throw ShapeError("matmul batch dimensions differ: " + shape_str(sa) + " x " + shape_str(sb));
  }
  Shape out_shape = map->out;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t batches = map->ia.size();
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const double* A = av.data().data() + map->ia[bi] * m * k;
    const double* B = bv.data().data() + map->ib[bi] * k * n;
    double* C = out.data().data() + bi * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = A[i * k + p];
        for (std::size_t j = 0; j < n; ++j) C[i * n + j] += aip * B[p * n + j];
      }
  }
  return make_result(std::move(out), {a, b}, [map, m, k, n](Node& self) {
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    for (std::size_t bi = 0; bi < map->ia.size(); ++bi) {
      const double* G = self.grad.data().data() + bi * m * n;
      const double* A = pa.value.data().data() + map->ia[bi] * m * k;
      const double* B = pb.value.data().data() + map->ib[bi] * k * n;
      if (pa.requires_grad) {
        double* dA = pa.grad.data().data() + map->ia[bi] * m * k;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
            dA[i * k + p] += acc;
          }
      }
      if (pb.requires_grad) {
        double* dB = pb.grad.data().data() + map->ib[bi] * k * n;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += aip * G[i * n + j];
          }
      }
    }
  }, "matmul");
}

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  const Shape& in_shape = x.shape();
  const std::size_t r = in_shape.size();
  if (perm.size() != r) throw ShapeError("permute rank mismatch for shape " + shape_str(in_shape));
  std::vector<bool> seen(r, false);
  for (auto p : perm) {
    if (p >= r || seen[p]) throw ShapeError("invalid permutation for shape " + shape_str(in_shape));
    seen[p] = true;
  }
  Shape out_shape(r);
  const auto in_strides = row_major_strides(in_shape);
  std::vector<std::size_t> strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in_shape[perm[i]];
    strides[i] = in_strides[perm[i]];
  }
  const std::size_t n = x.value().numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*src)[i] = off;
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      off += strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      off -= strides[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  Tensor out(out_shape);
  for (std::size_t i = 0; i < n; ++i) out[i] = x.value()[(*src)[i]];
  return make_result(std::move(out), {x}, [src](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad[(*src)[i]] += self.grad[i];
  }, "permute");
}

Var transpose(const Var& x, int axis0, int axis1) {
  std::vector<std::size_t> perm(x.shape().size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::swap(perm[x.value().normalize_axis(axis0)], perm[x.value().normalize_axis(axis1)]);
  return permute(x, perm);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return make_result(std::move(out), {x}, [](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad[i] += self.grad[i];
  }, "reshape");
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  const std::size_t ax = parts.front().value().normalize_axis(axis);
  auto lengths = std::make_shared<std::vector<std::size_t>>();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == first[i];
    if (!ok) throw ShapeError("concat shape mismatch: " + shape_str(first) + " vs " + shape_str(s));
    lengths->push_back(s[ax]);
    total += s[ax];
  }
  Shape out_shape = first;
  out_shape[ax] = total;
  const AxisSplit s = split_at(out_shape, ax);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& v = parts[pi].value();
    const std::size_t len = (*lengths)[pi];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < len * s.inner; ++k)
        out[(o * s.n + offset) * s.inner + k] = v[o * len * s.inner + k];
    offset += len;
  }
  return make_result(std::move(out), parts, [lengths, s](Node& self) {
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      Node& p = *self.parents[pi];
      const std::size_t len = (*lengths)[pi];
      if (p.requires_grad)
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t k = 0; k < len * s.inner; ++k)
            p.grad[o * len * s.inner + k] += self.grad[(o * s.n + offset) * s.inner + k];
      offset += len;
    }
  }, "concat");
}

Var slice_strided(const Var& x, int axis, std::size_t start, std::size_t step, std::size_t count) {
  const std::size_t ax = x.value().normalize_axis(axis);
  const std::size_t dim = x.shape()[ax];
  if (step == 0) throw ShapeError("slice step must be positive");
  if (start >= dim)
    throw ShapeError("slice start " + std::to_string(start) + " out of range for axis of length " + std::to_string(dim));
  const std::size_t fit = (dim - start + step - 1) / step;
  if (count == 0) count = fit;
  if (count > fit)
    throw ShapeError("slice of " + std::to_string(count) + " elements from " + std::to_string(start) + " step " +
                     std::to_string(step) + " exceeds axis length " + std::to_string(dim));
  const AxisSplit s = split_at(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = count;
  Tensor out(out_shape);
  const auto& in = x.value();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t c = 0; c < count; ++c) {
      const std::size_t src = (o * s.n + start + c * step) * s.inner;
      const std::size_t dst = (o * count + c) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) out[dst + i] = in[src + i];
    }
  return make_result(std::move(out), {x}, [s, start, step, count](Node& self) {
    Node& p = *self.parents[0];
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t c = 0; c < count; ++c) {
        const std::size_t src = (o * s.n + start + c * step) * s.inner;
        const std::size_t dst = (o * count + c) * s.inner;
        for (std::size_t i = 0; i < s.inner; ++i) p.grad[src + i] += self.grad[dst + i];
      }
  }, "slice_strided");
}

Var softmax(const Var& x, int axis) {
  const std::size_t ax = x.value().normalize_axis(axis);
  const AxisSplit s = split_at(x.shape(), ax);
  const auto& in = x.value();
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double mx = in[base];
      for (std::size_t k = 1; k < s.n; ++k) mx = std::max(mx, in[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.n; ++k) {
        const double e = std::exp(in[base + k * s.inner] - mx);
        out[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.n; ++k) out[base + k * s.inner] /= z;
    }
  return make_result(std::move(out), {x}, [s](Node& self) {
    Node& p = *self.parents[0];
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.n * s.inner + i;
        double dot = 0.0;
        for (std::size_t k = 0; k < s.n; ++k) dot += g[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.n; ++k) {
          const std::size_t j = base + k * s.inner;
          p.grad[j] += y[j] * (g[j] - dot);
        }
      }
  }, "softmax");
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const std::size_t d = x.shape().empty() ? 1 : x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    throw ShapeError("layer_norm affine params must be [" + std::to_string(d) + "], input " + shape_str(x.shape()));
  Var centered = x - mean_axis(x, -1, true);
  Var var = mean_axis(square(centered), -1, true);
  Var normed = centered / sqrt(var + eps);
  return normed * gamma + beta;
}

Var dropout(const Var& x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be in [0, 1)");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  const double s = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.numel(); ++i) mask[i] = keep(rng) ? s : 0.0;
  return mul(x, constant(std::move(mask)));
}

}  // namespace timetk::ops
