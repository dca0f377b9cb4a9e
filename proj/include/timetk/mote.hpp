#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "timetk/autodiff.hpp"

// Multi-offset token embedding: a length-L series becomes O interleaved
// phases of length T = L / O. Phase u holds x[u], x[u + O], x[u + 2O], ...
namespace timetk::mote {

inline constexpr std::string_view kSplitSemantics = "strided phase-u stride-O interleave: sub[u][t] = x[u + t*O]";

enum class PadMode {
  None,           // L % O != 0 is a configuration error
  ReplicateLeft,  // prepend copies of the earliest value until O | L
};

struct OffsetBundle {
  std::size_t offset = 1;
  std::vector<Var> subs;  // each [..., T]
  std::size_t source_length = 0;
  std::size_t pad = 0;    // replicated steps prepended before splitting
};

// Splits along the last axis.
OffsetBundle split(const Var& x, std::size_t offset, PadMode pad = PadMode::None);

// Inverse interleave: out[u + t*O] = subs[u][t]; drops any left padding.
Var reassemble(const OffsetBundle& bundle);

}  // namespace timetk::mote
