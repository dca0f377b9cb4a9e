#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "timetk/error.hpp"
#include "timetk/experiment.hpp"

using namespace timetk;
namespace ex = timetk::experiment;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "timetk_experiment_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + TIMETK_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// A small end-to-end configuration over a synthetic file.
json small_run(const fs::path& dir) {
  ex::SynthOptions o;
  o.length = 400;
  o.seed = 3;
  ex::write_synth_csv(dir / "data.csv", o);
  return {{"dataset", {{"path", (dir / "data.csv").string()}}},
          {"model", {{"lookback", 16}, {"offsets", 4}, {"heads", 2}, {"rbf_k", 4}}},
          {"train", {{"max_epochs", 2}, {"patience", 1}, {"batch_size", 32}}},
          {"horizons", {8, 4}},
          {"seed", 5},
          {"output_dir", (dir / "out").string()},
          {"ablation", {{"variants", {"full", "no-kan"}}}}};
}

}  // namespace

TEST_SUITE("experiment-config") {
  TEST_CASE("defaults follow the benchmark setup") {
    auto c = ex::config_from_json(json::object());
    CHECK(c.model.lookback == 96);
    CHECK(c.horizons == std::vector<std::size_t>{96, 192, 336, 720});
    CHECK(c.schedule.patience == 3);
    CHECK(c.dataset.split == data::SplitRatio::R622);
    CHECK(c.seed == 2024);
    CHECK(c.ablation.variants.size() == kAllVariants.size());
  }

  TEST_CASE("serialization round trips losslessly") {
    json j = {{"dataset",
               {{"path", "x.csv"},
                {"columns", {"a", "b"}},
                {"split", "7:1:2"},
                {"missing", "ffill"},
                {"sort_by_time", true},
                {"max_rows", 123},
                {"metric_scale", "raw"}}},
              {"model", {{"lookback", 48}, {"offsets", 2}, {"heads", 3}, {"rbf_lo", -1.25}, {"dropout", 0.3}}},
              {"variant", "conv1d-swap"},
              {"train", {{"max_epochs", 7}, {"patience", 2}, {"shuffle", false}}},
              {"optimizer", {{"lr", 0.1 + 0.2}, {"lr_decay", 0.95}}},
              {"horizons", {12, 24}},
              {"seed", 99},
              {"report_format", "csv-table"},
              {"ablation", {{"variants", {"full", "mote-only"}}, {"repeats", 3}}}};
    auto c = ex::config_from_json(j);
    CHECK(c.optimizer.lr == 0.1 + 0.2);
    CHECK(c.model.variant == Variant::Conv1dSwap);
    CHECK(c.schedule.seed == 99);
    const json once = ex::config_to_json(c);
    const json twice = ex::config_to_json(ex::config_from_json(json::parse(once.dump())));
    CHECK(once == twice);
    CHECK(once.dump() == twice.dump());
    CHECK(ex::config_from_json(once).optimizer.lr == c.optimizer.lr);
  }

  TEST_CASE("unknown keys are rejected with their path") {
    auto message = [](const json& j) {
      try {
        ex::config_from_json(j);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(message({{"sed", 1}}).find("'sed'") != std::string::npos);
    CHECK(message({{"model", {{"offset", 4}}}}).find("'model.offset'") != std::string::npos);
    CHECK(message({{"train", {{"epochs", 4}}}}).find("'train.epochs'") != std::string::npos);
  }

  TEST_CASE("ill-typed and invalid values are rejected") {
    CHECK_THROWS_AS(ex::config_from_json({{"seed", -1}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"model", {{"lookback", "96"}}}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"train", {{"shuffle", 1}}}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"horizons", json::array()}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"variant", "nope"}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"model", {{"offsets", 5}}}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"dataset", {{"split", "5:5:0"}}}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"report_format", "xml"}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"model", 3}}), ConfigError);
    CHECK_THROWS_AS(ex::config_from_json({{"optimizer", {{"beta1", 1.0}}}}), ConfigError);
  }

  TEST_CASE("comments are allowed in config files") {
    auto dir = scratch("comments");
    std::ofstream(dir / "c.json") << "{\n  // lookback\n  \"model\": {\"lookback\": 64}\n}\n";
    CHECK(ex::load_config(dir / "c.json").model.lookback == 64);
    std::ofstream(dir / "bad.json") << "{ \"model\": ";
    CHECK_THROWS_AS(ex::load_config(dir / "bad.json"), ConfigError);
    CHECK_THROWS_AS(ex::load_config(dir / "missing.json"), ConfigError);
  }

  TEST_CASE("command-line overrides") {
    auto c = ex::config_from_json(json::object());
    ex::Overrides o;
    o.seed = 7;
    o.horizon = 24;
    o.variant = Variant::NoKan;
    o.output_dir = "elsewhere";
    ex::apply(c, o);
    CHECK(c.seed == 7);
    CHECK(c.schedule.seed == 7);
    CHECK(c.horizons == std::vector<std::size_t>{24});
    CHECK(c.model.variant == Variant::NoKan);
    CHECK(c.output_dir == "elsewhere");
  }
}

TEST_SUITE("experiment-runs") {
  TEST_CASE("synthetic series are deterministic and seed dependent") {
    ex::SynthOptions o;
    o.length = 300;
    auto a = ex::synth_series(o), b = ex::synth_series(o);
    CHECK(a == b);
    o.seed = 1;
    CHECK(ex::synth_series(o) != a);
    o.kind = ex::SynthKind::Trend;
    o.noise = 0.0;
    auto t = ex::synth_series(o);
    const double step = t[2] - t[0];
    for (std::size_t i = 2; i + 2 < t.size(); i += 2) CHECK(std::abs((t[i + 2] - t[i]) - step) <= 1e-12);
    CHECK(ex::parse_synth_kind("trend") == ex::SynthKind::Trend);
    CHECK_THROWS_AS(ex::parse_synth_kind("square"), ConfigError);
  }

  TEST_CASE("train, eval and ablate write consistent reports") {
    auto dir = scratch("runs");
    auto c = ex::config_from_json(small_run(dir));
    auto trained = ex::run_train(c);
    REQUIRE(trained.size() == 2);
    CHECK(fs::exists(dir / "out" / "model_full_h8.ckpt"));
    CHECK(fs::exists(dir / "out" / "model_full_h4.ckpt"));
    json report = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report["mote"]["offsets"] == 4);
    CHECK(report["mote"]["split_semantics"].get<std::string>().find("u + t*O") != std::string::npos);
    CHECK(report["metric_scale"] == "standardized");
    CHECK(report["runs"].size() == 2);
    CHECK(report["config"] == ex::config_to_json(c));

    auto evaluated = ex::run_eval(c);
    REQUIRE(evaluated.size() == 2);
    CHECK(evaluated[0].test.mse == trained[0].test.mse);
    CHECK(evaluated[1].test.mae == trained[1].test.mae);

    auto rows = ex::run_ablate(c);
    CHECK(rows.size() == 4);
    const std::string table = slurp(dir / "out" / "ablation.csv");
    const std::string main_table = slurp(dir / "out" / "table.csv");
    CHECK(table.substr(0, table.find('\n')) == main_table.substr(0, main_table.find('\n')));
    std::size_t lines = 0;
    for (char ch : table) lines += ch == '\n';
    CHECK(lines == 5);
  }

  TEST_CASE("raw-scale metrics undo the scaler") {
    auto dir = scratch("raw");
    json j = small_run(dir);
    j["horizons"] = {4};
    j["dataset"]["metric_scale"] = "raw";
    auto raw = ex::run_train(ex::config_from_json(j));
    j["dataset"]["metric_scale"] = "standardized";
    auto std_scale = ex::run_eval(ex::config_from_json(j));
    CHECK(raw[0].test.mse != std_scale[0].test.mse);
  }

  TEST_CASE("eval without a checkpoint is a data error") {
    auto dir = scratch("nockpt");
    auto c = ex::config_from_json(small_run(dir));
    CHECK_THROWS_AS(ex::run_eval(c), DataError);
  }

  TEST_CASE("gradcheck harness passes on the small model") {
    for (const auto& line : ex::run_gradcheck(1, 1)) {
      CAPTURE(line.variant);
      CHECK(line.report.passed);
    }
  }

  TEST_CASE("exit codes map error kinds") {
    CHECK(ex::exit_code_for(ConfigError("x")) == ex::kConfigError);
    CHECK(ex::exit_code_for(ShapeError("x")) == ex::kConfigError);
    CHECK(ex::exit_code_for(DataError("x")) == ex::kDataError);
    CHECK(ex::exit_code_for(NumericError("x")) == ex::kDiverged);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("subcommands and exit codes") {
    auto dir = scratch("cli");
    const fs::path log = dir / "log.txt";
    json cfg = small_run(dir);
    std::ofstream(dir / "ok.json") << cfg.dump();
    const std::string ok = "--config \"" + (dir / "ok.json").string() + "\"";

    CHECK(cli("train " + ok, log) == 0);
    const std::string first = slurp(dir / "out" / "table.csv");
    json r1 = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(cli("train " + ok, log) == 0);
    json r2 = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(slurp(dir / "out" / "table.csv") == first);
    r1.erase("timing");
    r2.erase("timing");
    CHECK(r1.dump() == r2.dump());

    CHECK(cli("eval " + ok + " --horizon 4", log) == 0);
    CHECK(cli("train " + ok + " --horizon 4 --seed 9 --variant no-kan --out \"" + (dir / "alt").string() + "\"", log) ==
          0);
    json alt = json::parse(slurp(dir / "alt" / "report.json"));
    CHECK(alt["seed"] == 9);
    CHECK(alt["runs"][0]["variant"] == "no-kan");
    CHECK(alt["runs"].size() == 1);

    CHECK(cli("gradcheck --seeds 1", log) == ex::kOk);
    CHECK(cli("gradcheck --seeds 1 --tolerance 1e-30", log) == ex::kCheckFailed);
    CHECK(cli("synth --out \"" + (dir / "s.csv").string() + "\" --length 50 --kind trend", log) == 0);
    CHECK(fs::exists(dir / "s.csv"));

    json typo = cfg;
    typo["modle"] = json::object();
    std::ofstream(dir / "typo.json") << typo.dump();
    CHECK(cli("train --config \"" + (dir / "typo.json").string() + "\"", log) == ex::kConfigError);
    CHECK(slurp(log).find("modle") != std::string::npos);

    json nodata = cfg;
    nodata["dataset"]["path"] = (dir / "absent.csv").string();
    std::ofstream(dir / "nodata.json") << nodata.dump();
    CHECK(cli("train --config \"" + (dir / "nodata.json").string() + "\"", log) == ex::kDataError);

    json diverge = cfg;
    diverge["optimizer"] = {{"lr", 1e300}};
    std::ofstream(dir / "diverge.json") << diverge.dump();
    CHECK(cli("train --config \"" + (dir / "diverge.json").string() + "\"", log) == ex::kDiverged);

    CHECK(cli("frobnicate", log) == ex::kUsage);
    CHECK(cli("train", log) == ex::kUsage);
    CHECK(cli("--help", log) == 0);
  }
}
