#include "timetk/model.hpp"

#include <cmath>
#include "json.hpp"

#include "timetk/error.hpp"
#include "timetk/mote.hpp"
#include "timetk/ops.hpp"

namespace timetk {

namespace {

constexpr std::array<std::string_view, 7> kVariantNames = {"full",    "moti-only", "mote-only",   "no-trans",
                                                           "no-kan",  "mlp-swap",  "conv1d-swap"};

bool has_attention(Variant v) { return v != Variant::MoteOnly && v != Variant::NoTrans; }

TimeTkModel::Mixer make_mixer(const ModelConfig& c, const std::string& name, std::mt19937_64& rng) {
  const std::size_t t = c.sub_length();
  switch (c.variant) {
    case Variant::NoKan:
      return std::monostate{};
    case Variant::MlpSwap:
      return nn::MlpBlock(name, t, c.mlp_hidden ? c.mlp_hidden : 2 * t, t, rng);
    case Variant::Conv1dSwap:
      return nn::Conv1dBlock(name, t, c.conv_kernel, rng);
    default:
      return nn::RbfKanLayer(name, t, t, nn::RbfGrid::uniform(c.rbf_k, c.rbf_lo, c.rbf_hi), c.kan_prenorm, rng);
  }
}

Var apply_mixer(const TimeTkModel::Mixer& mixer, const Var& x) {
  return std::visit(
      [&x](const auto& m) -> Var {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) {
          return x;
        } else {
          return m.forward(x);
        }
      },
      mixer);
}

ParameterList mixer_parameters(const TimeTkModel::Mixer& mixer) {
  return std::visit(
      [](const auto& m) -> ParameterList {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, std::monostate>) {
          return {};
        } else {
          return m.parameters();
        }
      },
      mixer);
}

std::vector<TimeTkModel::Block> build_blocks(const ModelConfig& c, std::mt19937_64& rng) {
  c.validate();
  std::vector<TimeTkModel::Block> blocks;
  const std::size_t o = c.effective_offsets();
  for (std::size_t b = 0; b < c.depth; ++b) {
    const std::string prefix = "blocks." + std::to_string(b);
    TimeTkModel::Block block;
    if (c.per_offset_kan && o > 1) {
      for (std::size_t u = 0; u < o; ++u) block.mixers.push_back(make_mixer(c, prefix + ".mikan." + std::to_string(u), rng));
    } else {
      block.mixers.push_back(make_mixer(c, prefix + ".mikan", rng));
    }
    if (has_attention(c.variant)) {
      block.self_attn.emplace(prefix + ".self_attn", c.sub_length(), c.heads, c.dropout, rng);
      block.cross_attn.emplace(prefix + ".cross_attn", c.lookback, c.heads, c.dropout, rng);
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

Tensor slice_batch(const Tensor& t, std::size_t start, std::size_t count) {
  Shape s = t.shape();
  const std::size_t row = t.numel() / s[0];
  s[0] = count;
  std::vector<double> data(t.data().begin() + static_cast<std::ptrdiff_t>(start * row),
                           t.data().begin() + static_cast<std::ptrdiff_t>((start + count) * row));
  return Tensor(s, std::move(data));
}

}  // namespace

std::string_view variant_name(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

Variant parse_variant(std::string_view tag) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == tag) return kAllVariants[i];
  throw ConfigError("unknown variant tag '" + std::string(tag) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (variates == 0) fail("variates must be positive");
  if (lookback < 2) fail("lookback must be at least 2");
  if (horizon == 0) fail("horizon must be positive");
  if (offsets == 0 || offsets > lookback) fail("offsets must satisfy 1 <= O <= L");
  if (lookback % offsets != 0)
    fail("lookback L=" + std::to_string(lookback) + " is not divisible by offset count O=" + std::to_string(offsets));
  if (heads == 0) fail("heads must be positive");
  if (has_attention(variant) && sub_length() % heads != 0)
    fail("sub-sequence length T=" + std::to_string(sub_length()) + " is not divisible by heads=" + std::to_string(heads));
  if (rbf_k < 2) fail("rbf_k must be at least 2");
  if (!(rbf_hi > rbf_lo)) fail("rbf range must satisfy lo < hi");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (depth == 0) fail("depth must be positive");
  if (conv_kernel == 0 || conv_kernel % 2 == 0) fail("conv_kernel must be odd");
}

TimeTkModel::TimeTkModel(ModelConfig config)
    : config_(std::move(config)),
      init_rng_(config_.seed),
      revin_("revin", config_.variates, config_.revin_affine),
      blocks_(build_blocks(config_, init_rng_)),
      head_("head", config_.lookback, config_.horizon, init_rng_) {}

Var TimeTkModel::run_block(const Block& block, const Var& x, const nn::Mode& mode, ForwardTrace::Block* trace) const {
  const std::size_t o = config_.effective_offsets();
  const std::size_t batch = x.shape()[0];
  mote::OffsetBundle bundle = mote::split(x, o);

  // All offsets travel through the shared layers as one [O*B, N, T] batch.
  Var mixed;
  if (block.mixers.size() == 1) {
    mixed = apply_mixer(block.mixers.front(), o == 1 ? bundle.subs.front() : ops::concat(bundle.subs, 0));
  } else {
    std::vector<Var> parts;
    for (std::size_t u = 0; u < o; ++u) parts.push_back(apply_mixer(block.mixers[u], bundle.subs[u]));
    mixed = ops::concat(parts, 0);
  }

  Var interacted;
  switch (config_.variant) {
    case Variant::MoteOnly:
      interacted = mixed;
      break;
    case Variant::NoTrans:
      interacted = mixed + mixed;
      break;
    default:
      interacted = mixed + block.self_attn->forward(mixed, mixed, mixed, mode);
  }

  mote::OffsetBundle out_bundle = bundle;
  for (std::size_t u = 0; u < o; ++u)
    out_bundle.subs[u] = o == 1 ? interacted : ops::slice_strided(interacted, 0, u * batch, 1, batch);
  Var query = mote::reassemble(out_bundle);

  Var fused = block.cross_attn ? x + block.cross_attn->forward(query, x, x, mode) : x + query;

  if (trace) {
    for (std::size_t u = 0; u < o; ++u) {
      trace->mixed.push_back(slice_batch(mixed.value(), u * batch, batch));
      trace->interacted.push_back(slice_batch(interacted.value(), u * batch, batch));
    }
    trace->query = query.value();
    trace->fused = fused.value();
  }
  return fused;
}

Var TimeTkModel::forward(const Var& x, const nn::Mode& mode, ForwardTrace* trace) const {
  const Shape& s = x.shape();
  if (s.size() != 3 || s[1] != config_.variates || s[2] != config_.lookback)
    throw ShapeError("model expects [B, " + std::to_string(config_.variates) + ", " + std::to_string(config_.lookback) +
                     "], got " + shape_str(s));
  auto [normed, state] = revin_.normalize(x);
  if (trace) trace->normalized = normed.value();
  Var h = normed;
  for (const auto& block : blocks_) {
    ForwardTrace::Block* bt = nullptr;
    if (trace) bt = &trace->blocks.emplace_back();
    h = run_block(block, h, mode, bt);
  }
  Var y = head_.forward(h);
  if (trace) trace->head = y.value();
  return revin_.denormalize(y, state);
}

Tensor TimeTkModel::predict(const Tensor& x) const {
  NoGradGuard guard;
  return forward(constant(x)).value();
}

ParameterList TimeTkModel::parameters() const {
  ParameterList out = revin_.parameters();
  for (const auto& block : blocks_) {
    for (const auto& m : block.mixers)
      for (auto& p : mixer_parameters(m)) out.push_back(p);
    if (block.self_attn)
      for (auto& p : block.self_attn->parameters()) out.push_back(p);
    if (block.cross_attn)
      for (auto& p : block.cross_attn->parameters()) out.push_back(p);
  }
  for (auto& p : head_.parameters()) out.push_back(p);
  check_unique_names(out);
  return out;
}

std::size_t TimeTkModel::parameter_count() const { return count_scalars(parameters()); }

namespace {

nlohmann::json summarize(const Tensor& t) {
  double lo = t[0], hi = t[0], sum = 0.0;
  for (double v : t.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    sum += v;
  }
  const double mean = sum / static_cast<double>(t.numel());
  double sq = 0.0;
  for (double v : t.data()) sq += (v - mean) * (v - mean);
  return {{"shape", t.shape()},
          {"mean", mean},
          {"std", std::sqrt(sq / static_cast<double>(t.numel()))},
          {"min", lo},
          {"max", hi}};
}

}  // namespace

std::string trace_to_json(const ForwardTrace& trace) {
  nlohmann::json j;
  j["normalized"] = summarize(trace.normalized);
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : trace.blocks) {
    nlohmann::json jb;
    jb["mixed"] = nlohmann::json::array();
    for (const auto& t : b.mixed) jb["mixed"].push_back(summarize(t));
    jb["interacted"] = nlohmann::json::array();
    for (const auto& t : b.interacted) jb["interacted"].push_back(summarize(t));
    jb["query"] = summarize(b.query);
    jb["fused"] = summarize(b.fused);
    j["blocks"].push_back(jb);
  }
  j["head"] = summarize(trace.head);
  return j.dump(2);
}

}  // namespace timetk
