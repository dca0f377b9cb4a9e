#pragma once

// Test-only reference implementations. Everything here is written with
// plain loops over std::vector and shares no code path with the library
// operations it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "timetk/autodiff.hpp"
#include "timetk/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

inline timetk::Tensor random_tensor(timetk::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  timetk::Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

inline double max_abs_diff(const timetk::Tensor& a, const timetk::Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// C[m,n] = A[m,k] B[k,n], row-major.
inline Vec matmul(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

inline double gaussian_rbf(double x, double center, double h) {
  const double r = x - center;
  return std::exp(-(r * r) / (2.0 * h * h));
}

// Layer norm over rows of length d.
inline Vec layer_norm_rows(const Vec& x, std::size_t d, const Vec& gamma, const Vec& beta, double eps) {
  Vec out(x.size());
  for (std::size_t r = 0; r < x.size() / d; ++r) {
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += x[r * d + i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (x[r * d + i] - mu) * (x[r * d + i] - mu);
    var /= static_cast<double>(d);
    for (std::size_t i = 0; i < d; ++i)
      out[r * d + i] = (x[r * d + i] - mu) / std::sqrt(var + eps) * gamma[i] + beta[i];
  }
  return out;
}

// f_j(x) = sum_i sum_k w[(i*K + k), j] * phi(|x_i - c_k|) for each row of x.
inline Vec rbf_network(const Vec& x, std::size_t in_dim, std::size_t out_dim, const Vec& centers, double h,
                       const Vec& w) {
  const std::size_t rows = x.size() / in_dim;
  const std::size_t k = centers.size();
  Vec out(rows * out_dim, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out_dim; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < in_dim; ++i)
        for (std::size_t c = 0; c < k; ++c) s += w[(i * k + c) * out_dim + j] * gaussian_rbf(x[r * in_dim + i], centers[c], h);
      out[r * out_dim + j] = s;
    }
  return out;
}

struct AttentionWeights {
  Vec wq, wk, wv, wo;
};

// Per-batch, per-head loop. q: [B, Sq, D], kv: [B, Skv, D]. Returns
// [B, Sq, D]; optionally the softmax weights [B, H, Sq, Skv].
inline Vec attention(const Vec& q, const Vec& k, const Vec& v, std::size_t batch, std::size_t sq, std::size_t skv,
                     std::size_t d, std::size_t heads, const AttentionWeights& w, Vec* probs_out = nullptr) {
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Vec out(batch * sq * d, 0.0);
  if (probs_out) probs_out->assign(batch * heads * sq * skv, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    const Vec qp = matmul(Vec(q.begin() + b * sq * d, q.begin() + (b + 1) * sq * d), w.wq, sq, d, d);
    const Vec kp = matmul(Vec(k.begin() + b * skv * d, k.begin() + (b + 1) * skv * d), w.wk, skv, d, d);
    const Vec vp = matmul(Vec(v.begin() + b * skv * d, v.begin() + (b + 1) * skv * d), w.wv, skv, d, d);
    Vec concat(sq * d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < sq; ++i) {
        Vec logits(skv);
        for (std::size_t j = 0; j < skv; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += qp[i * d + h * dh + e] * kp[j * d + h * dh + e];
          logits[j] = s * scale;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) {
          l = std::exp(l - mx);
          z += l;
        }
        for (std::size_t j = 0; j < skv; ++j) {
          const double p = logits[j] / z;
          if (probs_out) (*probs_out)[((b * heads + h) * sq + i) * skv + j] = p;
          for (std::size_t e = 0; e < dh; ++e) concat[i * d + h * dh + e] += p * vp[j * d + h * dh + e];
        }
      }
    }
    const Vec o = matmul(concat, w.wo, sq, d, d);
    std::copy(o.begin(), o.end(), out.begin() + b * sq * d);
  }
  return out;
}

inline Vec to_vec(const timetk::Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

// Central differences over every trainable coordinate; returns the largest
// |a - n| / max(|a|, |n|, floor).
inline double finite_difference_error(const timetk::ParameterList& params, const std::function<timetk::Var()>& loss,
                                      double step = 1e-5, double floor = 1e-6) {
  for (const auto& p : params) {
    timetk::Var v = p.var;
    v.zero_grad();
  }
  timetk::backward(loss());
  double worst = 0.0;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    timetk::Var v = p.var;
    const timetk::Tensor analytic = v.grad();
    for (std::size_t j = 0; j < v.value().numel(); ++j) {
      const double saved = v.value()[j];
      v.mutable_value()[j] = saved + step;
      const double up = loss().value().item();
      v.mutable_value()[j] = saved - step;
      const double down = loss().value().item();
      v.mutable_value()[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[j] - numeric) / std::max({std::abs(analytic[j]), std::abs(numeric), floor});
      worst = std::max(worst, err);
    }
    v.zero_grad();
  }
  return worst;
}

}  // namespace oracle
