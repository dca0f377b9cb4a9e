#include "timetk/layers.hpp"

#include <cmath>

#include "timetk/error.hpp"
#include "timetk/ops.hpp"

namespace timetk::nn {

namespace {

void require_last_dim(const Var& x, std::size_t d, const char* layer) {
  if (x.shape().empty() || x.shape().back() != d)
    throw ShapeError(std::string(layer) + " expects last dim " + std::to_string(d) + ", got " + shape_str(x.shape()));
}

}  // namespace

Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

Linear::Linear(std::string name, std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng, bool bias)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      has_bias_(bias),
      weight_(make_parameter(name + ".weight", uniform_init({in_dim, out_dim}, in_dim, rng))),
      bias_(make_parameter(name + ".bias", Tensor({out_dim}, 0.0), bias)) {}

Var Linear::forward(const Var& x) const {
  require_last_dim(x, in_dim_, "Linear");
  Var y = x.shape().size() == 1 ? ops::reshape(ops::matmul(ops::reshape(x, {1, in_dim_}), weight_.var), {out_dim_})
                                 : ops::matmul(x, weight_.var);
  return has_bias_ ? y + bias_.var : y;
}

ParameterList Linear::parameters() const {
  if (has_bias_) return {weight_, bias_};
  return {weight_};
}

LayerNorm::LayerNorm(std::string name, std::size_t dim, double eps)
    : eps_(eps),
      gamma_(make_parameter(name + ".gamma", Tensor({dim}, 1.0))),
      beta_(make_parameter(name + ".beta", Tensor({dim}, 0.0))) {}

Var LayerNorm::forward(const Var& x) const { return ops::layer_norm(x, gamma_.var, beta_.var, eps_); }

MultiHeadAttention::MultiHeadAttention(std::string name, std::size_t model_dim, std::size_t num_heads,
                                       double dropout, std::mt19937_64& rng)
    : model_dim_(model_dim), num_heads_(num_heads), dropout_(dropout) {
  if (num_heads == 0 || model_dim % num_heads != 0)
    throw ConfigError("attention heads (" + std::to_string(num_heads) + ") must divide model dim (" +
                      std::to_string(model_dim) + ")");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("attention dropout must be in [0, 1)");
  wq_ = make_parameter(name + ".wq", uniform_init({model_dim, model_dim}, model_dim, rng));
  wk_ = make_parameter(name + ".wk", uniform_init({model_dim, model_dim}, model_dim, rng));
  wv_ = make_parameter(name + ".wv", uniform_init({model_dim, model_dim}, model_dim, rng));
  wo_ = make_parameter(name + ".wo", uniform_init({model_dim, model_dim}, model_dim, rng));
}

// [B, S, D] -> [B, H, S, D/H]
Var MultiHeadAttention::split_heads(const Var& x) const {
  const Shape& s = x.shape();
  return ops::permute(ops::reshape(x, {s[0], s[1], num_heads_, model_dim_ / num_heads_}), {0, 2, 1, 3});
}

MultiHeadAttention::Output MultiHeadAttention::forward_with_weights(const Var& q, const Var& k, const Var& v,
                                                                    const Mode& mode) const {
  for (const Var* t : {&q, &k, &v})
    if (t->shape().size() != 3 || t->shape()[2] != model_dim_)
      throw ShapeError("attention expects [B, S, " + std::to_string(model_dim_) + "], got " + shape_str(t->shape()));
  if (k.shape() != v.shape() || q.shape()[0] != k.shape()[0])
    throw ShapeError("attention q/k/v shapes incompatible: " + shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                     ", " + shape_str(v.shape()));

  const std::size_t batch = q.shape()[0], sq = q.shape()[1];
  const double scale = 1.0 / std::sqrt(static_cast<double>(model_dim_ / num_heads_));

  Var qh = split_heads(ops::matmul(q, wq_.var));
  Var kh = split_heads(ops::matmul(k, wk_.var));
  Var vh = split_heads(ops::matmul(v, wv_.var));
  Var scores = ops::matmul(qh, ops::transpose(kh, -2, -1)) * scale;
  Var weights = ops::softmax(scores, -1);
  Var used = weights;
  if (mode.training && mode.rng != nullptr && dropout_ > 0.0) used = ops::dropout(weights, dropout_, *mode.rng);
  Var context = ops::matmul(used, vh);
  Var merged = ops::reshape(ops::permute(context, {0, 2, 1, 3}), {batch, sq, model_dim_});
  return {ops::matmul(merged, wo_.var), weights};
}

Var MultiHeadAttention::forward(const Var& q, const Var& k, const Var& v, const Mode& mode) const {
  return forward_with_weights(q, k, v, mode).out;
}

RbfGrid RbfGrid::uniform(std::size_t k, double lo, double hi) {
  if (k < 2) throw ConfigError("uniform RBF grid needs at least 2 centers");
  if (!(hi > lo)) throw ConfigError("RBF grid range must satisfy lo < hi");
  RbfGrid g;
  const double spacing = (hi - lo) / static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i) g.centers.push_back(lo + spacing * static_cast<double>(i));
  g.bandwidth = spacing;
  return g;
}

void RbfGrid::validate() const {
  if (centers.empty()) throw ConfigError("RBF grid has no centers");
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (!(centers[i] > centers[i - 1])) throw ConfigError("RBF centers must be strictly increasing");
  if (!(bandwidth > 0.0)) throw ConfigError("RBF bandwidth must be positive");
}

Var rbf_features(const Var& x, const RbfGrid& grid) {
  const std::size_t k = grid.size();
  Shape expanded = x.shape();
  expanded.push_back(1);
  Shape flat = x.shape();
  flat.back() *= k;
  Var centers = constant(Tensor({k}, grid.centers));
  Var dist = ops::reshape(x, expanded) - centers;
  const double coeff = -1.0 / (2.0 * grid.bandwidth * grid.bandwidth);
  return ops::reshape(ops::exp(ops::square(dist) * coeff), flat);
}

RbfKanLayer::RbfKanLayer(std::string name, std::size_t in_dim, std::size_t out_dim, RbfGrid grid, bool prenorm,
                         std::mt19937_64& rng)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      grid_(std::move(grid)),
      prenorm_(prenorm),
      norm_(name + ".norm", in_dim) {
  grid_.validate();
  const std::size_t fan_in = in_dim * grid_.size();
  weights_ = make_parameter(name + ".weights", uniform_init({fan_in, out_dim}, fan_in, rng));
}

Var RbfKanLayer::forward(const Var& x) const {
  require_last_dim(x, in_dim_, "RbfKanLayer");
  Var z = prenorm_ ? norm_.forward(x) : x;
  Var phi = rbf_features(z, grid_);
  if (phi.shape().size() == 1) return ops::reshape(ops::matmul(ops::reshape(phi, {1, phi.shape()[0]}), weights_.var), {out_dim_});
  return ops::matmul(phi, weights_.var);
}

ParameterList RbfKanLayer::parameters() const {
  if (prenorm_) return {norm_.gamma(), norm_.beta(), weights_};
  return {weights_};
}

MlpBlock::MlpBlock(std::string name, std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim,
                   std::mt19937_64& rng)
    : first_(name + ".fc1", in_dim, hidden_dim, rng), second_(name + ".fc2", hidden_dim, out_dim, rng) {}

Var MlpBlock::forward(const Var& x) const { return second_.forward(ops::gelu(first_.forward(x))); }

ParameterList MlpBlock::parameters() const {
  ParameterList out = first_.parameters();
  for (auto& p : second_.parameters()) out.push_back(p);
  return out;
}

Conv1dBlock::Conv1dBlock(std::string name, std::size_t dim, std::size_t kernel_size, std::mt19937_64& rng)
    : dim_(dim), kernel_size_(kernel_size) {
  if (kernel_size == 0 || kernel_size % 2 == 0) throw ConfigError("conv1d kernel size must be odd");
  kernel_ = make_parameter(name + ".kernel", uniform_init({kernel_size}, kernel_size, rng));
  bias_ = make_parameter(name + ".bias", Tensor({1}, 0.0));
}

Var Conv1dBlock::forward(const Var& x) const {
  require_last_dim(x, dim_, "Conv1dBlock");
  const std::size_t pad = kernel_size_ / 2;
  Var padded = x;
  if (pad > 0) {
    Shape pad_shape = x.shape();
    pad_shape.back() = pad;
    Var zeros = constant(Tensor(pad_shape, 0.0));
    padded = ops::concat({zeros, x, zeros}, -1);
  }
  Var out;
  for (std::size_t j = 0; j < kernel_size_; ++j) {
    Var tap = ops::slice_strided(kernel_.var, 0, j, 1, 1);
    Var term = ops::slice_strided(padded, -1, j, 1, dim_) * tap;
    out = out.defined() ? out + term : term;
  }
  return out + bias_.var;
}

}  // namespace timetk::nn
