#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "timetk/autodiff.hpp"

namespace timetk::nn {

// Forward-pass context. Dropout is active only when `training` is set and
// an RNG is supplied.
struct Mode {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng);

class Linear {
 public:
  Linear(std::string name, std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng, bool bias = true);

  // [..., in_dim] -> [..., out_dim]
  Var forward(const Var& x) const;
  ParameterList parameters() const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }
  bool has_bias() const { return has_bias_; }

 private:
  std::size_t in_dim_, out_dim_;
  bool has_bias_;
  Parameter weight_;
  Parameter bias_;
};

class LayerNorm {
 public:
  LayerNorm(std::string name, std::size_t dim, double eps = 1e-5);

  Var forward(const Var& x) const;
  ParameterList parameters() const { return {gamma_, beta_}; }

  const Parameter& gamma() const { return gamma_; }
  const Parameter& beta() const { return beta_; }
  double eps() const { return eps_; }

 private:
  double eps_;
  Parameter gamma_;
  Parameter beta_;
};

// Scaled dot-product attention over [B, S, model_dim] tokens, no mask.
// Query length may differ from key/value length.
class MultiHeadAttention {
 public:
  MultiHeadAttention(std::string name, std::size_t model_dim, std::size_t num_heads, double dropout,
                     std::mt19937_64& rng);

  struct Output {
    Var out;      // [B, Sq, model_dim]
    Var weights;  // [B, heads, Sq, Skv], after softmax and before dropout
  };

  Var forward(const Var& q, const Var& k, const Var& v, const Mode& mode = {}) const;
  Output forward_with_weights(const Var& q, const Var& k, const Var& v, const Mode& mode = {}) const;
  ParameterList parameters() const { return {wq_, wk_, wv_, wo_}; }

  std::size_t model_dim() const { return model_dim_; }
  std::size_t num_heads() const { return num_heads_; }
  double dropout() const { return dropout_; }
  const Parameter& wq() const { return wq_; }
  const Parameter& wk() const { return wk_; }
  const Parameter& wv() const { return wv_; }
  const Parameter& wo() const { return wo_; }

 private:
  Var split_heads(const Var& x) const;

  std::size_t model_dim_, num_heads_;
  double dropout_;
  Parameter wq_, wk_, wv_, wo_;
};

// Fixed Gaussian RBF centers and a shared bandwidth.
struct RbfGrid {
  std::vector<double> centers;
  double bandwidth = 1.0;

  // K points uniformly on [lo, hi], bandwidth = grid spacing. Needs K >= 2.
  static RbfGrid uniform(std::size_t k, double lo = -2.0, double hi = 2.0);
  void validate() const;
  std::size_t size() const { return centers.size(); }
};

// [..., D] -> [..., D*K], feature (d, k) at d*K + k:
//   exp(-(x_d - c_k)^2 / (2 h^2))
Var rbf_features(const Var& x, const RbfGrid& grid);

// FastKAN-style layer: optional layer norm, Gaussian RBF expansion of every
// input coordinate, then a linear map. Each output is a sum over inputs of
// learned univariate functions phi_ij(x_i) = sum_k W[(i,k), j] * rbf_k(x_i).
class RbfKanLayer {
 public:
  RbfKanLayer(std::string name, std::size_t in_dim, std::size_t out_dim, RbfGrid grid, bool prenorm,
              std::mt19937_64& rng);

  Var forward(const Var& x) const;
  ParameterList parameters() const;

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const RbfGrid& grid() const { return grid_; }
  bool prenorm() const { return prenorm_; }
  const Parameter& weights() const { return weights_; }
  const LayerNorm& norm() const { return norm_; }

 private:
  std::size_t in_dim_, out_dim_;
  RbfGrid grid_;
  bool prenorm_;
  LayerNorm norm_;
  Parameter weights_;
};

// linear -> GELU -> linear
class MlpBlock {
 public:
  MlpBlock(std::string name, std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, std::mt19937_64& rng);

  Var forward(const Var& x) const;
  ParameterList parameters() const;

  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

// Single-channel 1-D convolution along the last axis with zero "same"
// padding (cross-correlation, odd kernel).
class Conv1dBlock {
 public:
  Conv1dBlock(std::string name, std::size_t dim, std::size_t kernel_size, std::mt19937_64& rng);

  Var forward(const Var& x) const;
  ParameterList parameters() const { return {kernel_, bias_}; }

  std::size_t dim() const { return dim_; }
  std::size_t kernel_size() const { return kernel_size_; }
  const Parameter& kernel() const { return kernel_; }
  const Parameter& bias() const { return bias_; }

 private:
  std::size_t dim_, kernel_size_;
  Parameter kernel_;
  Parameter bias_;
};

}  // namespace timetk::nn
