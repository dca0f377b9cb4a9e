// timetk: train | eval | ablate | gradcheck | synth

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "timetk/experiment.hpp"

namespace ex = timetk::experiment;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  std::string variant;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "experiment config file (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides output_dir)");
  sub->add_option("--seed", f.seed, "random seed (overrides seed)");
  sub->add_option("--horizon", f.horizon, "run a single horizon instead of the configured list");
  sub->add_option("--variant", f.variant, "variant tag (overrides variant)");
}

ex::ExperimentConfig resolve(const CommonFlags& f) {
  ex::ExperimentConfig c = ex::load_config(f.config);
  ex::Overrides o;
  o.seed = f.seed;
  o.horizon = f.horizon;
  if (!f.variant.empty()) o.variant = timetk::parse_variant(f.variant);
  if (!f.out.empty()) o.output_dir = f.out;
  ex::apply(c, o);
  return c;
}

void print_runs(const ex::ExperimentConfig& c, const std::vector<ex::RunResult>& runs) {
  if (c.report_format == ex::ReportFormat::CsvTable) {
    std::cout << ex::table_csv(runs);
    return;
  }
  for (const auto& r : runs)
    std::printf("%-12s F=%-4zu seed=%-6llu mse=%.6f mae=%.6f rmse=%.6f rse=%.6f mape=%.6f params=%zu\n",
                std::string(timetk::variant_name(r.variant)).c_str(), r.horizon,
                static_cast<unsigned long long>(r.seed), r.test.mse, r.test.mae, r.test.rmse, r.test.rse, r.test.mape,
                r.parameter_count);
  std::printf("reports written to %s\n", c.output_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-offset KAN/attention forecaster"};
  app.set_version_flag("--version", std::string(ex::kToolVersion));
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, ablate_f;
  auto* train_cmd = app.add_subcommand("train", "train each configured horizon and write a report");
  add_common(train_cmd, train_f);
  auto* eval_cmd = app.add_subcommand("eval", "evaluate saved checkpoints on the test split");
  add_common(eval_cmd, eval_f);
  auto* ablate_cmd = app.add_subcommand("ablate", "train every ablation variant and write a comparison table");
  add_common(ablate_cmd, ablate_f);

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every variant on a small model");
  std::uint64_t grad_seed = 2024;
  std::size_t grad_seeds = 3;
  double grad_tol = 1e-4;
  grad_cmd->add_option("--seed", grad_seed, "first seed")->capture_default_str();
  grad_cmd->add_option("--seeds", grad_seeds, "seeds per variant")->capture_default_str()->check(CLI::PositiveNumber);
  grad_cmd->add_option("--tolerance", grad_tol, "maximum relative error")->capture_default_str();

  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset CSV");
  ex::SynthOptions synth;
  std::string synth_kind = "sine", synth_out;
  synth_cmd->add_option("--out", synth_out, "output CSV path")->required();
  synth_cmd->add_option("--kind", synth_kind, "sine | trend")->capture_default_str();
  synth_cmd->add_option("--length", synth.length, "rows")->capture_default_str();
  synth_cmd->add_option("--variates", synth.variates, "columns after the time column")->capture_default_str();
  synth_cmd->add_option("--periods", synth.periods, "sine periods")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ex::kUsage;
  }

  try {
    if (*train_cmd) {
      auto c = resolve(train_f);
      print_runs(c, ex::run_train(c));
    } else if (*eval_cmd) {
      auto c = resolve(eval_f);
      print_runs(c, ex::run_eval(c));
    } else if (*ablate_cmd) {
      auto c = resolve(ablate_f);
      print_runs(c, ex::run_ablate(c));
    } else if (*grad_cmd) {
      bool ok = true;
      for (const auto& line : ex::run_gradcheck(grad_seed, grad_seeds, grad_tol)) {
        std::printf("%s %-12s seed=%-6llu max_rel=%.3e coords=%zu worst=%s[%zu]\n", line.report.passed ? "PASS" : "FAIL",
                    line.variant.c_str(), static_cast<unsigned long long>(line.seed), line.report.max_rel_error,
                    line.report.coordinates, line.report.worst_parameter.c_str(), line.report.worst_index);
        ok = ok && line.report.passed;
      }
      return ok ? ex::kOk : ex::kCheckFailed;
    } else if (*synth_cmd) {
      synth.kind = ex::parse_synth_kind(synth_kind);
      ex::write_synth_csv(synth_out, synth);
      std::printf("wrote %zu rows x %zu variates to %s\n", synth.length, synth.variates, synth_out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return ex::exit_code_for(e);
  }
  return ex::kOk;
}
