#include "timetk/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "timetk/error.hpp"

namespace timetk::data {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      out.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(trim(field));
  return out;
}

bool is_missing(const std::string& f) {
  if (f.empty()) return true;
  std::string lower(f);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == "nan" || lower == "na" || lower == "null" || lower == "none";
}

std::optional<double> parse_number(const std::string& f) {
  double v = 0.0;
  const char* end = f.data() + f.size();
  auto [ptr, ec] = std::from_chars(f.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Numeric timestamps compare numerically, anything else lexicographically
// (ISO-8601 strings sort correctly that way).
bool time_less(const std::string& a, const std::string& b) {
  const auto na = parse_number(a);
  const auto nb = parse_number(b);
  if (na && nb) return *na < *nb;
  return a < b;
}

}  // namespace

Dataset load_csv(const CsvOptions& options) {
  std::ifstream in(options.path);
  if (!in) throw DataError("cannot open data file " + options.path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("data file " + options.path.string() + " is empty");
  const auto header = split_fields(line);
  if (header.size() < 2) throw DataError("CSV needs a timestamp column and at least one variate");

  std::vector<std::size_t> picks;
  Dataset d;
  if (options.columns.empty()) {
    for (std::size_t c = 1; c < header.size(); ++c) picks.push_back(c);
  } else {
    for (const auto& name : options.columns) {
      auto it = std::find(header.begin() + 1, header.end(), name);
      if (it == header.end()) throw DataError("column '" + name + "' not found in " + options.path.string());
      picks.push_back(static_cast<std::size_t>(it - header.begin()));
    }
  }
  for (auto c : picks) d.columns.push_back(header[c]);
  d.variates = picks.size();

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::string& f = fields[picks[i]];
      if (is_missing(f)) {
        if (options.missing == MissingPolicy::Reject || rows.empty())
          throw DataError("row " + std::to_string(row_no) + ", column '" + header[picks[i]] + "': missing value");
        row[i] = rows.back()[i];
        continue;
      }
      const auto v = parse_number(f);
      if (!v)
        throw DataError("row " + std::to_string(row_no) + ", column '" + header[picks[i]] + "': cannot parse '" + f + "'");
      row[i] = *v;
    }
    d.timestamps.push_back(fields[0]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("data file " + options.path.string() + " has no data rows");

  bool monotone = true;
  for (std::size_t i = 1; i < d.timestamps.size() && monotone; ++i)
    monotone = !time_less(d.timestamps[i], d.timestamps[i - 1]);
  if (!monotone) {
    if (options.sort_by_time) {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return time_less(d.timestamps[a], d.timestamps[b]); });
      std::vector<std::string> ts;
      std::vector<std::vector<double>> sorted;
      for (auto i : order) {
        ts.push_back(d.timestamps[i]);
        sorted.push_back(std::move(rows[i]));
      }
      d.timestamps = std::move(ts);
      rows = std::move(sorted);
      d.warnings.push_back("timestamps were not monotonic; rows sorted by time");
    } else {
      d.warnings.push_back("timestamps are not monotonic; rows kept in file order");
    }
  }

  if (options.max_rows > 0 && rows.size() > options.max_rows) {
    rows.resize(options.max_rows);
    d.timestamps.resize(options.max_rows);
  }
  d.length = rows.size();
  d.values.reserve(d.length * d.variates);
  for (const auto& r : rows) d.values.insert(d.values.end(), r.begin(), r.end());
  return d;
}

SplitRatio parse_split_ratio(const std::string& s) {
  if (s == "6:2:2") return SplitRatio::R622;
  if (s == "7:1:2") return SplitRatio::R712;
  throw ConfigError("split ratio must be \"6:2:2\" or \"7:1:2\", got \"" + s + "\"");
}

std::string split_ratio_name(SplitRatio r) { return r == SplitRatio::R622 ? "6:2:2" : "7:1:2"; }

SplitBounds split_bounds(std::size_t length, SplitRatio ratio) {
  // Integer tenths so floor() is exact.
  const std::size_t train_tenths = ratio == SplitRatio::R622 ? 6 : 7;
  const std::size_t val_tenths = ratio == SplitRatio::R622 ? 2 : 1;
  SplitBounds b;
  b.train_end = length * train_tenths / 10;
  b.val_begin = b.train_end;
  b.val_end = b.val_begin + length * val_tenths / 10;
  b.test_begin = b.val_end;
  b.test_end = length;
  return b;
}

Scaler Scaler::fit(const Dataset& d, std::size_t begin, std::size_t end) {
  if (end <= begin) throw DataError("cannot fit scaler on an empty training split");
  Scaler s;
  s.mean.assign(d.variates, 0.0);
  s.stdev.assign(d.variates, 0.0);
  const double n = static_cast<double>(end - begin);
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t v = 0; v < d.variates; ++v) s.mean[v] += d.at(t, v);
  for (auto& m : s.mean) m /= n;
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t v = 0; v < d.variates; ++v) s.stdev[v] += (d.at(t, v) - s.mean[v]) * (d.at(t, v) - s.mean[v]);
  for (auto& sd : s.stdev) {
    sd = std::sqrt(sd / n);
    if (sd == 0.0) sd = 1.0;
  }
  return s;
}

SplitSeries extract(const Dataset& d, std::size_t begin, std::size_t end, const Scaler& scaler) {
  if (end > d.length || begin > end) throw DataError("split range out of bounds");
  SplitSeries s;
  s.length = end - begin;
  s.variates = d.variates;
  s.origin = begin;
  s.values.reserve(s.length * s.variates);
  for (std::size_t t = begin; t < end; ++t)
    for (std::size_t v = 0; v < d.variates; ++v) s.values.push_back(scaler.transform(d.at(t, v), v));
  return s;
}

std::size_t window_count(std::size_t split_length, std::size_t lookback, std::size_t horizon) {
  if (split_length < lookback + horizon)
    throw DataError("split of length " + std::to_string(split_length) + " is too short: windows need L+F=" +
                    std::to_string(lookback + horizon) + " rows");
  return split_length - lookback - horizon + 1;
}

std::vector<WindowSample> make_windows(const SplitSeries& split, std::size_t lookback, std::size_t horizon) {
  const std::size_t count = window_count(split.length, lookback, horizon);
  const std::size_t n = split.variates;
  std::vector<WindowSample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    WindowSample s{Tensor({n, lookback}), Tensor({n, horizon}), split.origin + w};
    for (std::size_t v = 0; v < n; ++v) {
      for (std::size_t t = 0; t < lookback; ++t) s.input[v * lookback + t] = split.values[(w + t) * n + v];
      for (std::size_t t = 0; t < horizon; ++t) s.target[v * horizon + t] = split.values[(w + lookback + t) * n + v];
    }
    out.push_back(std::move(s));
  }
  return out;
}

WindowSet stack_windows(const std::vector<WindowSample>& windows) {
  if (windows.empty()) throw DataError("no windows to stack");
  const Shape& in = windows.front().input.shape();
  const Shape& tg = windows.front().target.shape();
  WindowSet set{Tensor({windows.size(), in[0], in[1]}), Tensor({windows.size(), tg[0], tg[1]}), {}};
  const std::size_t in_size = windows.front().input.numel(), tg_size = windows.front().target.numel();
  for (std::size_t w = 0; w < windows.size(); ++w) {
    std::copy(windows[w].input.data().begin(), windows[w].input.data().end(), set.inputs.data().begin() + w * in_size);
    std::copy(windows[w].target.data().begin(), windows[w].target.data().end(), set.targets.data().begin() + w * tg_size);
    set.origins.push_back(windows[w].origin);
  }
  return set;
}

std::pair<Tensor, Tensor> gather(const WindowSet& set, const std::vector<std::size_t>& indices) {
  const Shape& is = set.inputs.shape();
  const Shape& ts = set.targets.shape();
  Tensor x({indices.size(), is[1], is[2]});
  Tensor y({indices.size(), ts[1], ts[2]});
  const std::size_t in_size = is[1] * is[2], tg_size = ts[1] * ts[2];
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const std::size_t w = indices[b];
    if (w >= set.size()) throw DataError("window index out of range");
    std::copy_n(set.inputs.data().begin() + w * in_size, in_size, x.data().begin() + b * in_size);
    std::copy_n(set.targets.data().begin() + w * tg_size, tg_size, y.data().begin() + b * tg_size);
  }
  return {std::move(x), std::move(y)};
}

PreparedData prepare(const CsvOptions& csv, SplitRatio ratio, std::size_t lookback, std::size_t horizon) {
  PreparedData p;
  p.dataset = load_csv(csv);
  p.bounds = split_bounds(p.dataset.length, ratio);
  p.scaler = Scaler::fit(p.dataset, p.bounds.train_begin, p.bounds.train_end);
  auto windows = [&](std::size_t begin, std::size_t end) {
    return stack_windows(make_windows(extract(p.dataset, begin, end, p.scaler), lookback, horizon));
  };
  p.train = windows(p.bounds.train_begin, p.bounds.train_end);
  p.val = windows(p.bounds.val_begin, p.bounds.val_end);
  p.test = windows(p.bounds.test_begin, p.bounds.test_end);
  return p;
}

}  // namespace timetk::data
