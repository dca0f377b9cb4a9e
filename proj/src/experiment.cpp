#include "timetk/experiment.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "timetk/checkpoint.hpp"
#include "timetk/error.hpp"
#include "timetk/mote.hpp"

namespace timetk::experiment {

using nlohmann::json;

namespace {

bool is_count(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config" + where() + " must be an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) fail(key, "a boolean");
      out = v->get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!is_count(*v)) fail(key, "a non-negative integer");
      out = v->get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  template <class T>
  void get_list(const char* key, std::vector<T>& out) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_array()) fail(key, "an array");
    std::vector<T> items;
    for (const auto& e : *v) {
      if constexpr (std::is_integral_v<T>) {
        if (!is_count(e)) fail(key, "an array of non-negative integers");
      } else {
        if (!e.is_string()) fail(key, "an array of strings");
      }
      items.push_back(e.get<T>());
    }
    out = std::move(items);
  }

  std::string key_path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ConfigError("config key '" + key_path(key) + "' must be " + expected);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + key_path(k.c_str()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "" : " section '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string missing_name(data::MissingPolicy m) { return m == data::MissingPolicy::Reject ? "reject" : "ffill"; }

data::MissingPolicy parse_missing(const std::string& s) {
  if (s == "reject") return data::MissingPolicy::Reject;
  if (s == "ffill") return data::MissingPolicy::ForwardFill;
  throw ConfigError("dataset.missing must be \"reject\" or \"ffill\", got \"" + s + "\"");
}

std::string format_name(ReportFormat f) { return f == ReportFormat::Json ? "json" : "csv-table"; }

ReportFormat parse_format(const std::string& s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv-table") return ReportFormat::CsvTable;
  throw ConfigError("report_format must be \"json\" or \"csv-table\", got \"" + s + "\"");
}

std::string checkpoint_name(Variant v, std::size_t horizon) {
  return "model_" + std::string(variant_name(v)) + "_h" + std::to_string(horizon) + ".ckpt";
}

data::CsvOptions csv_options(const DatasetConfig& d) {
  if (d.path.empty()) throw ConfigError("dataset.path is required");
  return {d.path, d.columns, d.missing, d.sort_by_time, d.max_rows};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (horizons.empty()) throw ConfigError("horizons must list at least one horizon");
  for (std::size_t h : horizons) {
    ModelConfig probe = model;
    probe.variates = 1;
    probe.horizon = h;
    probe.validate();
  }
  schedule.validate();
  if (!(optimizer.lr >= 0.0)) throw ConfigError("optimizer.lr must be non-negative");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ConfigError("optimizer betas must be in [0, 1)");
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
  if (!(optimizer.max_grad_norm >= 0.0)) throw ConfigError("optimizer.max_grad_norm must be non-negative");
  if (!(optimizer.lr_decay > 0.0)) throw ConfigError("optimizer.lr_decay must be positive");
  if (ablation.variants.empty()) throw ConfigError("ablation.variants must not be empty");
  if (ablation.repeats == 0) throw ConfigError("ablation.repeats must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader top(j, "");

  if (const json* d = top.find("dataset")) {
    ObjectReader r(*d, "dataset");
    r.get("path", c.dataset.path);
    r.get_list("columns", c.dataset.columns);
    std::string s = data::split_ratio_name(c.dataset.split);
    r.get("split", s);
    c.dataset.split = data::parse_split_ratio(s);
    s = missing_name(c.dataset.missing);
    r.get("missing", s);
    c.dataset.missing = parse_missing(s);
    r.get("sort_by_time", c.dataset.sort_by_time);
    r.get("max_rows", c.dataset.max_rows);
    s = c.dataset.raw_scale_metrics ? "raw" : "standardized";
    r.get("metric_scale", s);
    if (s != "raw" && s != "standardized")
      throw ConfigError("dataset.metric_scale must be \"standardized\" or \"raw\", got \"" + s + "\"");
    c.dataset.raw_scale_metrics = s == "raw";
    r.finish();
  }

  if (const json* m = top.find("model")) {
    ObjectReader r(*m, "model");
    r.get("lookback", c.model.lookback);
    r.get("offsets", c.model.offsets);
    r.get("heads", c.model.heads);
    r.get("rbf_k", c.model.rbf_k);
    r.get("rbf_lo", c.model.rbf_lo);
    r.get("rbf_hi", c.model.rbf_hi);
    r.get("dropout", c.model.dropout);
    r.get("kan_prenorm", c.model.kan_prenorm);
    r.get("revin_affine", c.model.revin_affine);
    r.get("per_offset_kan", c.model.per_offset_kan);
    r.get("depth", c.model.depth);
    r.get("mlp_hidden", c.model.mlp_hidden);
    r.get("conv_kernel", c.model.conv_kernel);
    r.finish();
  }

  std::string variant(variant_name(c.model.variant));
  top.get("variant", variant);
  c.model.variant = parse_variant(variant);

  if (const json* t = top.find("train")) {
    ObjectReader r(*t, "train");
    r.get("max_epochs", c.schedule.max_epochs);
    r.get("patience", c.schedule.patience);
    r.get("batch_size", c.schedule.batch_size);
    r.get("shuffle", c.schedule.shuffle);
    r.finish();
  }

  if (const json* o = top.find("optimizer")) {
    ObjectReader r(*o, "optimizer");
    r.get("lr", c.optimizer.lr);
    r.get("beta1", c.optimizer.beta1);
    r.get("beta2", c.optimizer.beta2);
    r.get("eps", c.optimizer.eps);
    r.get("max_grad_norm", c.optimizer.max_grad_norm);
    r.get("lr_decay", c.optimizer.lr_decay);
    r.finish();
  }

  top.get_list("horizons", c.horizons);
  top.get("seed", c.seed);
  top.get("output_dir", c.output_dir);
  std::string fmt = format_name(c.report_format);
  top.get("report_format", fmt);
  c.report_format = parse_format(fmt);

  if (const json* a = top.find("ablation")) {
    ObjectReader r(*a, "ablation");
    std::vector<std::string> tags;
    r.get_list("variants", tags);
    if (r.find("variants")) {
      c.ablation.variants.clear();
      for (const auto& tag : tags) c.ablation.variants.push_back(parse_variant(tag));
    }
    r.get("repeats", c.ablation.repeats);
    r.finish();
  }

  top.finish();
  c.schedule.seed = c.seed;
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json variants = json::array();
  for (Variant v : c.ablation.variants) variants.push_back(std::string(variant_name(v)));
  const ModelConfig& m = c.model;
  return {
      {"dataset",
       {{"path", c.dataset.path},
        {"columns", c.dataset.columns},
        {"split", data::split_ratio_name(c.dataset.split)},
        {"missing", missing_name(c.dataset.missing)},
        {"sort_by_time", c.dataset.sort_by_time},
        {"max_rows", c.dataset.max_rows},
        {"metric_scale", c.dataset.raw_scale_metrics ? "raw" : "standardized"}}},
      {"model",
       {{"lookback", m.lookback},
        {"offsets", m.offsets},
        {"heads", m.heads},
        {"rbf_k", m.rbf_k},
        {"rbf_lo", m.rbf_lo},
        {"rbf_hi", m.rbf_hi},
        {"dropout", m.dropout},
        {"kan_prenorm", m.kan_prenorm},
        {"revin_affine", m.revin_affine},
        {"per_offset_kan", m.per_offset_kan},
        {"depth", m.depth},
        {"mlp_hidden", m.mlp_hidden},
        {"conv_kernel", m.conv_kernel}}},
      {"variant", std::string(variant_name(m.variant))},
      {"train",
       {{"max_epochs", c.schedule.max_epochs},
        {"patience", c.schedule.patience},
        {"batch_size", c.schedule.batch_size},
        {"shuffle", c.schedule.shuffle}}},
      {"optimizer",
       {{"lr", c.optimizer.lr},
        {"beta1", c.optimizer.beta1},
        {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps},
        {"max_grad_norm", c.optimizer.max_grad_norm},
        {"lr_decay", c.optimizer.lr_decay}}},
      {"horizons", c.horizons},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"report_format", format_name(c.report_format)},
      {"ablation", {{"variants", variants}, {"repeats", c.ablation.repeats}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void apply(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) {
    c.seed = *o.seed;
    c.schedule.seed = *o.seed;
  }
  if (o.horizon) c.horizons = {*o.horizon};
  if (o.variant) c.model.variant = *o.variant;
  if (o.output_dir) c.output_dir = *o.output_dir;
  c.validate();
}

json metrics_to_json(const metrics::MetricSet& m) {
  return {{"mse", m.mse},   {"mae", m.mae},     {"rmse", m.rmse},
          {"rse", m.rse},   {"mape", m.mape},   {"count", m.count},
          {"mape_excluded", m.mape_excluded}};
}

metrics::MetricSet evaluate(const TimeTkModel& model, const data::PreparedData& prepared, bool raw_scale,
                            std::size_t batch_size) {
  const data::WindowSet& set = prepared.test;
  if (set.size() == 0) throw DataError("test split has no windows");
  const std::size_t n = set.variates(), f = set.targets.shape()[2];
  metrics::Accumulator acc;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) idx.push_back(i);
    auto [x, y] = data::gather(set, idx);
    Tensor pred = model.predict(x);
    if (raw_scale) {
      for (std::size_t i = 0; i < pred.numel(); ++i) {
        const std::size_t var = (i / f) % n;
        pred[i] = prepared.scaler.inverse(pred[i], var);
        y[i] = prepared.scaler.inverse(y[i], var);
      }
    }
    acc.add(pred.data(), y.data());
  }
  return acc.result();
}

ModelConfig model_config_for(const ExperimentConfig& c, std::size_t variates, std::size_t horizon, Variant variant,
                             std::uint64_t seed) {
  ModelConfig m = c.model;
  m.variates = variates;
  m.horizon = horizon;
  m.variant = variant;
  m.seed = seed;
  return m;
}

RunResult train_one(const ExperimentConfig& c, const data::PreparedData& prepared, std::size_t horizon,
                    Variant variant, std::uint64_t seed, const std::filesystem::path& checkpoint_path) {
  TimeTkModel model(model_config_for(c, prepared.dataset.variates, horizon, variant, seed));
  train::TrainSchedule schedule = c.schedule;
  schedule.seed = seed;
  RunResult r;
  r.variant = variant;
  r.horizon = horizon;
  r.seed = seed;
  r.parameter_count = model.parameter_count();
  r.train = train::fit(model, prepared.train, prepared.val, schedule, c.optimizer);
  r.test = evaluate(model, prepared, c.dataset.raw_scale_metrics);
  if (!checkpoint_path.empty()) {
    checkpoint::save(checkpoint_path, model.parameters());
    r.checkpoint = checkpoint_path.filename().string();
  }
  return r;
}

json build_report(const ExperimentConfig& c, const std::string& command, const std::vector<RunResult>& runs,
                  double wall_time_sec) {
  json rows = json::array();
  json timing_rows = json::array();
  for (const auto& r : runs) {
    json row = {{"variant", std::string(variant_name(r.variant))},
                {"horizon", r.horizon},
                {"seed", r.seed},
                {"parameter_count", r.parameter_count},
                {"metrics", metrics_to_json(r.test)}};
    if (!r.train.epochs.empty()) row["train"] = r.train.to_json();
    if (!r.checkpoint.empty()) row["checkpoint"] = r.checkpoint;
    rows.push_back(std::move(row));
    timing_rows.push_back(r.train.wall_time_sec);
  }
  return {
      {"tool", {{"name", "timetk"}, {"version", kToolVersion}}},
      {"command", command},
      {"config", config_to_json(c)},
      {"seed", c.seed},
      {"mote",
       {{"offsets", c.model.offsets},
        {"effective_offsets", c.model.effective_offsets()},
        {"split_semantics", std::string(mote::kSplitSemantics)}}},
      {"metric_scale", c.dataset.raw_scale_metrics ? "raw" : "standardized"},
      {"runs", rows},
      {"timing", {{"wall_time_sec", wall_time_sec}, {"train_sec", timing_rows}}},
  };
}

std::string table_csv(const std::vector<RunResult>& runs) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,horizon,seed,mse,mae,rmse,rse,mape,mape_excluded,parameter_count,best_epoch,stopped_epoch\n";
  for (const auto& r : runs) {
    os << variant_name(r.variant) << ',' << r.horizon << ',' << r.seed << ',' << r.test.mse << ',' << r.test.mae << ','
       << r.test.rmse << ',' << r.test.rse << ',' << r.test.mape << ',' << r.test.mape_excluded << ','
       << r.parameter_count << ',' << r.train.best_epoch << ',' << r.train.stopped_epoch << '\n';
  }
  return os.str();
}

void write_report(const std::filesystem::path& dir, const json& report, const std::vector<RunResult>& runs,
                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (stem + ".json")) << report.dump(2) << '\n';
  std::ofstream(dir / (stem == "report" ? "table.csv" : stem + ".csv")) << table_csv(runs);
}

std::vector<RunResult> run_train(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path out = c.output_dir;
  std::filesystem::create_directories(out);
  std::vector<RunResult> runs;
  for (std::size_t h : c.horizons) {
    auto prepared = data::prepare(csv_options(c.dataset), c.dataset.split, c.model.lookback, h);
    runs.push_back(train_one(c, prepared, h, c.model.variant, c.seed, out / checkpoint_name(c.model.variant, h)));
  }
  write_report(out, build_report(c, "train", runs, seconds_since(t0)), runs);
  return runs;
}

std::vector<RunResult> run_eval(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::filesystem::path out = c.output_dir;
  std::vector<RunResult> runs;
  for (std::size_t h : c.horizons) {
    auto prepared = data::prepare(csv_options(c.dataset), c.dataset.split, c.model.lookback, h);
    TimeTkModel model(model_config_for(c, prepared.dataset.variates, h, c.model.variant, c.seed));
    const auto path = out / checkpoint_name(c.model.variant, h);
    if (!std::filesystem::exists(path)) throw DataError("checkpoint " + path.string() + " not found; run train first");
    checkpoint::load(path, model.parameters());
    RunResult r;
    r.variant = c.model.variant;
    r.horizon = h;
    r.seed = c.seed;
    r.parameter_count = model.parameter_count();
    r.test = evaluate(model, prepared, c.dataset.raw_scale_metrics);
    r.checkpoint = path.filename().string();
    runs.push_back(std::move(r));
  }
  write_report(out, build_report(c, "eval", runs, seconds_since(t0)), runs, "eval");
  return runs;
}

std::vector<RunResult> run_ablate(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<RunResult> rows;
  for (std::size_t h : c.horizons) {
    auto prepared = data::prepare(csv_options(c.dataset), c.dataset.split, c.model.lookback, h);
    for (Variant v : c.ablation.variants) {
      RunResult mean;
      for (std::size_t rep = 0; rep < c.ablation.repeats; ++rep) {
        RunResult r = train_one(c, prepared, h, v, c.seed + rep);
        if (rep == 0) {
          mean = r;
          continue;
        }
        mean.test.mse += r.test.mse;
        mean.test.mae += r.test.mae;
        mean.test.rmse += r.test.rmse;
        mean.test.rse += r.test.rse;
        mean.test.mape += r.test.mape;
      }
      const double k = static_cast<double>(c.ablation.repeats);
      mean.test.mse /= k;
      mean.test.mae /= k;
      mean.test.rmse /= k;
      mean.test.rse /= k;
      mean.test.mape /= k;
      rows.push_back(std::move(mean));
    }
  }
  write_report(c.output_dir, build_report(c, "ablate", rows, seconds_since(t0)), rows, "ablation");
  return rows;
}

std::vector<GradCheckLine> run_gradcheck(std::uint64_t seed, std::size_t seeds_per_variant, double tolerance) {
  std::vector<GradCheckLine> lines;
  for (Variant v : kAllVariants) {
    for (std::size_t s = 0; s < seeds_per_variant; ++s) {
      ModelConfig m;
      m.variates = 2;
      m.lookback = 8;
      m.horizon = 4;
      m.offsets = 2;
      m.heads = 2;
      m.rbf_k = 4;
      m.dropout = 0.0;
      m.variant = v;
      m.seed = seed + s;
      TimeTkModel model(m);
      std::mt19937_64 rng(seed + s);
      std::normal_distribution<double> d(0.0, 1.0);
      Tensor x({3, 2, 8}), y({3, 2, 4});
      for (auto& e : x.data()) e = d(rng);
      for (auto& e : y.data()) e = d(rng);
      lines.push_back({std::string(variant_name(v)), seed + s, train::grad_check(model, x, y, tolerance)});
    }
  }
  return lines;
}

SynthKind parse_synth_kind(const std::string& s) {
  if (s == "sine") return SynthKind::Sine;
  if (s == "trend") return SynthKind::Trend;
  throw ConfigError("synthetic kind must be \"sine\" or \"trend\", got \"" + s + "\"");
}

std::vector<double> synth_series(const SynthOptions& o) {
  if (o.length == 0 || o.variates == 0) throw ConfigError("synthetic length and variates must be positive");
  if (o.noise < 0.0) throw ConfigError("synthetic noise must be non-negative");
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> amp(0.5, 1.5), phase(0.0, 2.0 * std::numbers::pi), slope(-2.0, 2.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Per-variate shape parameters first, so they do not depend on the length.
  std::vector<std::vector<std::pair<double, double>>> waves(o.variates);
  std::vector<double> slopes(o.variates), intercepts(o.variates);
  for (std::size_t n = 0; n < o.variates; ++n) {
    for (std::size_t k = 0; k < o.periods.size(); ++k) waves[n].emplace_back(amp(rng), phase(rng));
    slopes[n] = slope(rng);
    intercepts[n] = amp(rng);
  }

  std::vector<double> values(o.length * o.variates);
  for (std::size_t t = 0; t < o.length; ++t) {
    const double tt = static_cast<double>(t);
    for (std::size_t n = 0; n < o.variates; ++n) {
      double v = 0.0;
      if (o.kind == SynthKind::Sine) {
        for (std::size_t k = 0; k < o.periods.size(); ++k)
          v += waves[n][k].first * std::sin(2.0 * std::numbers::pi * tt / o.periods[k] + waves[n][k].second);
      } else {
        v = intercepts[n] + slopes[n] * tt / static_cast<double>(o.length);
      }
      values[t * o.variates + n] = v + o.noise * noise(rng);
    }
  }
  return values;
}

void write_synth_csv(const std::filesystem::path& path, const SynthOptions& o) {
  const auto values = synth_series(o);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "t";
  for (std::size_t n = 0; n < o.variates; ++n) out << ",v" << n;
  out << '\n';
  for (std::size_t t = 0; t < o.length; ++t) {
    out << t;
    for (std::size_t n = 0; n < o.variates; ++n) out << ',' << values[t * o.variates + n];
    out << '\n';
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kConfigError;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const std::filesystem::filesystem_error*>(&e))
    return kDataError;
  if (dynamic_cast<const NumericError*>(&e)) return kDiverged;
  return kUsage;
}

}  // namespace timetk::experiment
