#include "timetk/mote.hpp"

#include "timetk/error.hpp"
#include "timetk/ops.hpp"

namespace timetk::mote {

OffsetBundle split(const Var& x, std::size_t offset, PadMode pad) {
  if (x.shape().empty()) throw ShapeError("MOTE split needs a time axis");
  const std::size_t len = x.shape().back();
  if (offset == 0 || offset > len)
    throw ConfigError("offset count O=" + std::to_string(offset) + " must satisfy 1 <= O <= L=" + std::to_string(len));

  OffsetBundle bundle;
  bundle.offset = offset;
  bundle.source_length = len;
  Var source = x;
  if (len % offset != 0) {
    if (pad == PadMode::None)
      throw ConfigError("lookback L=" + std::to_string(len) + " is not divisible by offset count O=" +
                        std::to_string(offset));
    bundle.pad = offset - len % offset;
    std::vector<Var> parts(bundle.pad, ops::slice_strided(x, -1, 0, 1, 1));
    parts.push_back(x);
    source = ops::concat(parts, -1);
  }
  for (std::size_t u = 0; u < offset; ++u) bundle.subs.push_back(ops::slice_strided(source, -1, u, offset));
  return bundle;
}

Var reassemble(const OffsetBundle& bundle) {
  if (bundle.subs.size() != bundle.offset || bundle.subs.empty())
    throw ShapeError("offset bundle holds " + std::to_string(bundle.subs.size()) + " sub-sequences for O=" +
                     std::to_string(bundle.offset));
  const Shape& sub_shape = bundle.subs.front().shape();
  for (const auto& s : bundle.subs)
    if (s.shape() != sub_shape)
      throw ShapeError("inconsistent sub-sequence shapes " + shape_str(sub_shape) + " vs " + shape_str(s.shape()));
  if (sub_shape.empty()) throw ShapeError("sub-sequences need a time axis");
  const std::size_t t_len = sub_shape.back();
  const std::size_t full = t_len * bundle.offset;
  if (full != bundle.source_length + bundle.pad)
    throw ShapeError("sub-sequence length " + std::to_string(t_len) + " x O=" + std::to_string(bundle.offset) +
                     " does not cover source length " + std::to_string(bundle.source_length));
  if (bundle.offset == 1 && bundle.pad == 0) return bundle.subs.front();

  Shape column = sub_shape;
  column.push_back(1);
  std::vector<Var> columns;
  columns.reserve(bundle.offset);
  for (const auto& s : bundle.subs) columns.push_back(ops::reshape(s, column));
  Shape flat = sub_shape;
  flat.back() = full;
  Var out = ops::reshape(ops::concat(columns, -1), flat);
  if (bundle.pad > 0) out = ops::slice_strided(out, -1, bundle.pad, 1, bundle.source_length);
  return out;
}

}  // namespace timetk::mote
