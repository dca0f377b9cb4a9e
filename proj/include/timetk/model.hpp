#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "timetk/layers.hpp"
#include "timetk/revin.hpp"

namespace timetk {

enum class Variant {
  Full,       // RevIN -> MOTE -> MI-KAN -> per-offset MSA -> cross-attention fusion -> head
  MotiOnly,   // no multi-offset split (O treated as 1); KAN and both attention stages kept
  MoteOnly,   // MOTE + MI-KAN, no attention: A_u = M'_u, H = X + A
  NoTrans,    // attention replaced by identity, residuals kept: A_u = 2 M'_u, H = X + A
  NoKan,      // MI-KAN replaced by identity
  MlpSwap,    // MI-KAN replaced by linear -> GELU -> linear
  Conv1dSwap  // MI-KAN replaced by a same-padded 1-D convolution
};

inline constexpr std::array<Variant, 7> kAllVariants = {Variant::Full,    Variant::MotiOnly, Variant::MoteOnly,
                                                        Variant::NoTrans, Variant::NoKan,    Variant::MlpSwap,
                                                        Variant::Conv1dSwap};

std::string_view variant_name(Variant v);
// Throws ConfigError for unknown tags.
Variant parse_variant(std::string_view tag);

struct ModelConfig {
  std::size_t variates = 7;
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t offsets = 4;
  std::size_t heads = 8;
  std::size_t rbf_k = 8;
  double rbf_lo = -2.0;
  double rbf_hi = 2.0;
  double dropout = 0.1;
  bool kan_prenorm = true;
  bool revin_affine = true;
  bool per_offset_kan = false;
  std::size_t depth = 1;
  std::size_t mlp_hidden = 0;  // 0 -> 2 * sub-sequence length
  std::size_t conv_kernel = 3;
  Variant variant = Variant::Full;
  std::uint64_t seed = 2024;

  void validate() const;
  // Offsets actually used by the variant (MotiOnly disables the split).
  std::size_t effective_offsets() const { return variant == Variant::MotiOnly ? 1 : offsets; }
  std::size_t sub_length() const { return lookback / effective_offsets(); }
};

// Intermediate tensors of one forward pass, recorded on request.
struct ForwardTrace {
  struct Block {
    std::vector<Tensor> mixed;        // M'_u, each [B, N, T]
    std::vector<Tensor> interacted;   // A_u, each [B, N, T]
    Tensor query;                     // A, [B, N, L]
    Tensor fused;                     // H, [B, N, L]
  };
  Tensor normalized;                  // RevIN output, [B, N, L]
  std::vector<Block> blocks;
  Tensor head;                        // before denormalization, [B, N, F]
};

class TimeTkModel {
 public:
  explicit TimeTkModel(ModelConfig config);

  // [B, N, L] -> [B, N, F]
  Var forward(const Var& x, const nn::Mode& mode = {}, ForwardTrace* trace = nullptr) const;
  Tensor predict(const Tensor& x) const;

  ParameterList parameters() const;
  std::size_t parameter_count() const;
  const ModelConfig& config() const { return config_; }

  using Mixer = std::variant<std::monostate, nn::RbfKanLayer, nn::MlpBlock, nn::Conv1dBlock>;
  struct Block {
    std::vector<Mixer> mixers;  // one shared, or one per offset
    std::optional<nn::MultiHeadAttention> self_attn;
    std::optional<nn::MultiHeadAttention> cross_attn;
  };

  const Revin& revin() const { return revin_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const nn::Linear& head() const { return head_; }

 private:
  Var run_block(const Block& block, const Var& x, const nn::Mode& mode, ForwardTrace::Block* trace) const;

  ModelConfig config_;
  std::mt19937_64 init_rng_;
  Revin revin_;
  std::vector<Block> blocks_;
  nn::Linear head_;
};

// JSON dump of trace shapes and summary statistics.
std::string trace_to_json(const ForwardTrace& trace);

}  // namespace timetk
