#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "timetk/data.hpp"
#include "timetk/metrics.hpp"
#include "timetk/model.hpp"
#include "timetk/training.hpp"

// Config-driven experiment runner shared by the command-line tool and the
// acceptance harness. The config grammar is documented in docs/config-format.md.
namespace timetk::experiment {

inline constexpr const char* kToolVersion = "0.1.0";

// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kConfigError = 2,
  kDataError = 3,
  kDiverged = 4,
  kCheckFailed = 5,
};

enum class ReportFormat { Json, CsvTable };

struct DatasetConfig {
  std::string path;
  std::vector<std::string> columns;
  data::SplitRatio split = data::SplitRatio::R622;
  data::MissingPolicy missing = data::MissingPolicy::Reject;
  bool sort_by_time = false;
  std::size_t max_rows = 0;
  bool raw_scale_metrics = false;  // default: metrics on the standardized scale
};

struct AblationConfig {
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::size_t repeats = 1;  // seeds seed, seed+1, ...
};

// `model.variates`, `model.horizon` and `model.seed` are derived at run
// time from the data, the horizon list and `seed`.
struct ExperimentConfig {
  DatasetConfig dataset;
  ModelConfig model;
  train::TrainSchedule schedule;
  train::AdamConfig optimizer;
  std::vector<std::size_t> horizons = {96, 192, 336, 720};
  std::uint64_t seed = 2024;
  std::string output_dir = "runs";
  ReportFormat report_format = ReportFormat::Json;
  AblationConfig ablation;

  void validate() const;
};

// Missing keys keep their defaults; unknown keys and ill-typed values raise
// ConfigError naming the key path.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::optional<Variant> variant;
  std::optional<std::string> output_dir;
};

void apply(ExperimentConfig& c, const Overrides& o);

// One trained and evaluated (variant, horizon, seed) cell.
struct RunResult {
  Variant variant = Variant::Full;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::size_t parameter_count = 0;
  metrics::MetricSet test;
  train::TrainReport train;
  std::string checkpoint;  // file name inside the output directory, empty if none
};

nlohmann::json metrics_to_json(const metrics::MetricSet& m);

// Test-split metrics of `model`; raw scale undoes the scaler per variate.
metrics::MetricSet evaluate(const TimeTkModel& model, const data::PreparedData& prepared, bool raw_scale,
                            std::size_t batch_size = 64);

// Model configuration of one run: data-derived variates plus the horizon.
ModelConfig model_config_for(const ExperimentConfig& c, std::size_t variates, std::size_t horizon, Variant variant,
                             std::uint64_t seed);

// Trains one cell on already prepared data.
RunResult train_one(const ExperimentConfig& c, const data::PreparedData& prepared, std::size_t horizon,
                    Variant variant, std::uint64_t seed, const std::filesystem::path& checkpoint_path = {});

// Canonical report. Everything except the "timing" object is a
// deterministic function of the config, the data file and the binary.
nlohmann::json build_report(const ExperimentConfig& c, const std::string& command, const std::vector<RunResult>& runs,
                            double wall_time_sec);

// One row per run; the header is shared by every subcommand.
std::string table_csv(const std::vector<RunResult>& runs);

// Writes report.json and table.csv (or `<stem>.json` / `<stem>.csv`).
void write_report(const std::filesystem::path& dir, const nlohmann::json& report, const std::vector<RunResult>& runs,
                  const std::string& stem = "report");

// Subcommands. Each throws the library error types; main() maps them to
// exit codes via exit_code_for.
std::vector<RunResult> run_train(const ExperimentConfig& c);
std::vector<RunResult> run_eval(const ExperimentConfig& c);
// Averages over `ablation.repeats` seeds; one row per (variant, horizon).
std::vector<RunResult> run_ablate(const ExperimentConfig& c);

struct GradCheckLine {
  std::string variant;
  std::uint64_t seed = 0;
  train::CheckReport report;
};

// Finite-difference check of every variant on a small model.
std::vector<GradCheckLine> run_gradcheck(std::uint64_t seed, std::size_t seeds_per_variant, double tolerance = 1e-4);

enum class SynthKind { Sine, Trend };

struct SynthOptions {
  SynthKind kind = SynthKind::Sine;
  std::size_t length = 2000;
  std::size_t variates = 2;
  std::vector<double> periods = {24.0, 96.0};
  double noise = 0.1;
  std::uint64_t seed = 2024;
};

SynthKind parse_synth_kind(const std::string& s);
// Time-major series, values[t * variates + n].
std::vector<double> synth_series(const SynthOptions& o);
// CSV with an integer time column and columns v0, v1, ...
void write_synth_csv(const std::filesystem::path& path, const SynthOptions& o);

int exit_code_for(const std::exception& e);

}  // namespace timetk::experiment
