#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "timetk/tensor.hpp"

namespace timetk::data {

enum class MissingPolicy { Reject, ForwardFill };

struct CsvOptions {
  std::filesystem::path path;
  std::vector<std::string> columns;  // empty: every column after the timestamp
  MissingPolicy missing = MissingPolicy::Reject;
  bool sort_by_time = false;         // stable-sort rows whose timestamps go backwards
  std::size_t max_rows = 0;          // 0: all rows; otherwise the first max_rows after sorting
};

// Time-major table: values[t * variates + n].
struct Dataset {
  std::vector<std::string> timestamps;
  std::vector<std::string> columns;
  std::vector<double> values;
  std::size_t length = 0;
  std::size_t variates = 0;
  std::vector<std::string> warnings;

  double at(std::size_t t, std::size_t n) const { return values[t * variates + n]; }
};

// Header row required; first column is the timestamp, the rest numeric.
// Parse failures name the offending row (1-based, header = row 1) and column.
Dataset load_csv(const CsvOptions& options);

enum class SplitRatio { R622, R712 };

SplitRatio parse_split_ratio(const std::string& s);
std::string split_ratio_name(SplitRatio r);

// Half-open row ranges of a chronological split.
struct SplitBounds {
  std::size_t train_begin = 0, train_end = 0;
  std::size_t val_begin = 0, val_end = 0;
  std::size_t test_begin = 0, test_end = 0;
};

SplitBounds split_bounds(std::size_t length, SplitRatio ratio);

// Per-variate standardization fitted on training rows only.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stdev;

  static Scaler fit(const Dataset& d, std::size_t begin, std::size_t end);
  double transform(double v, std::size_t n) const { return (v - mean[n]) / stdev[n]; }
  double inverse(double v, std::size_t n) const { return v * stdev[n] + mean[n]; }
};

// One split, time-major, standardized.
struct SplitSeries {
  std::vector<double> values;
  std::size_t length = 0;
  std::size_t variates = 0;
  std::size_t origin = 0;  // first row in the source dataset
};

SplitSeries extract(const Dataset& d, std::size_t begin, std::size_t end, const Scaler& scaler);

struct WindowSample {
  Tensor input;   // [N, L]
  Tensor target;  // [N, F]
  std::size_t origin = 0;  // dataset row of input[.., 0]
};

std::size_t window_count(std::size_t split_length, std::size_t lookback, std::size_t horizon);
// Stride-1 windows; target immediately follows the input.
std::vector<WindowSample> make_windows(const SplitSeries& split, std::size_t lookback, std::size_t horizon);

// All windows of a split stacked for batching.
struct WindowSet {
  Tensor inputs;   // [W, N, L]
  Tensor targets;  // [W, N, F]
  std::vector<std::size_t> origins;

  std::size_t size() const { return origins.size(); }
  std::size_t variates() const { return inputs.shape()[1]; }
};

WindowSet stack_windows(const std::vector<WindowSample>& windows);
// Rows `indices` of a set, as [B, N, L] and [B, N, F].
std::pair<Tensor, Tensor> gather(const WindowSet& set, const std::vector<std::size_t>& indices);

struct PreparedData {
  Dataset dataset;
  SplitBounds bounds;
  Scaler scaler;
  WindowSet train, val, test;
};

PreparedData prepare(const CsvOptions& csv, SplitRatio ratio, std::size_t lookback, std::size_t horizon);

}  // namespace timetk::data
