#include "timetk/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "timetk/error.hpp"

namespace timetk::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

template <class T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void save(const std::filesystem::path& path, const ParameterList& params) {
  check_unique_names(params);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(params.size()));
  for (const auto& p : params) {
    put(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put(os, static_cast<std::uint8_t>(p.trainable ? 1 : 0));
    const Tensor& t = p.var.value();
    put(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<Entry> read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a timetk checkpoint: " + path.string());
  const auto version = get<std::uint32_t>(is, path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  const auto count = get<std::uint64_t>(is, path);
  std::vector<Entry> entries;
  for (std::uint64_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = get<std::uint32_t>(is, path);
    e.name.resize(name_len);
    if (!is.read(e.name.data(), name_len)) throw DataError("truncated checkpoint " + path.string());
    e.trainable = get<std::uint8_t>(is, path) != 0;
    const auto rank = get<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>(is, path));
    std::vector<double> data(shape_numel(shape));
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
      throw DataError("truncated checkpoint " + path.string());
    e.value = Tensor(std::move(shape), std::move(data));
    entries.push_back(std::move(e));
  }
  return entries;
}

void load(const std::filesystem::path& path, const ParameterList& params) {
  auto entries = read(path);
  std::unordered_map<std::string, Entry*> by_name;
  for (auto& e : entries) by_name[e.name] = &e;
  if (by_name.size() != params.size())
    throw DataError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint is missing parameter " + p.name);
    if (it->second->value.shape() != p.var.shape())
      throw DataError("checkpoint shape " + shape_str(it->second->value.shape()) + " for " + p.name +
                      " does not match model shape " + shape_str(p.var.shape()));
  }
  for (const auto& p : params) {
    Var v = p.var;
    v.mutable_value() = by_name[p.name]->value;
  }
}

std::vector<Tensor> snapshot(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.var.value());
  return out;
}

void restore(const ParameterList& params, const std::vector<Tensor>& values) {
  if (values.size() != params.size()) throw ShapeError("snapshot size does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Var v = params[i].var;
    if (values[i].shape() != v.shape()) throw ShapeError("snapshot shape mismatch for " + params[i].name);
    v.mutable_value() = values[i];
  }
}

}  // namespace timetk::checkpoint
