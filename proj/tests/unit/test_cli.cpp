#include <doctest.h>

#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "rcsnet/cli.hpp"
#include "rcsnet/container.hpp"

using namespace rcsnet;
namespace fs = std::filesystem;

namespace {

// Silences stdout and stderr for the duration of a call.
struct Quiet {
  std::ostringstream sink;
  std::streambuf* out = std::cout.rdbuf(sink.rdbuf());
  std::streambuf* err = std::cerr.rdbuf(sink.rdbuf());
  ~Quiet() {
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
  }
};

int run(const std::vector<std::string>& args) {
  Quiet q;
  return run_cli(args);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rcsnet_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with the configuration code") {
  CHECK(run({}) == kExitConfig);
  CHECK(run({"no-such-command"}) == kExitConfig);
  CHECK(run({"train", "--epochs", "many"}) == kExitConfig);
  CHECK(run({"--help"}) == kExitOk);
}

TEST_CASE("invalid settings exit with the configuration code") {
  const fs::path dir = fresh_dir("cli_bad");
  CHECK(run({"synth", "--data-dir", (dir / "d").string(), "--hw", "10"}) == kExitConfig);
  CHECK(run({"train", "--data-dir", (dir / "missing").string(), "--output-dir", (dir / "o").string()}) == kExitConfig);
  CHECK(run({"train", "--config", (dir / "nope.json").string()}) == kExitConfig);
  write_text(dir / "bad.json", "{\"epochs\": 2, \"typo\": 1}");
  CHECK(run({"train", "--config", (dir / "bad.json").string()}) == kExitConfig);
  CHECK(run({"train", "--data-dir", (dir / "d").string(), "--t-in", "4"}) == kExitConfig);
}

TEST_CASE("flags override the config file") {
  const fs::path dir = fresh_dir("cli_prec");
  write_text(dir / "c.json", "{\"synth\": {\"hw\": 12, \"t\": 30, \"movies\": 3}, \"seed\": 5, \"data_dir\": \"" +
                                 (dir / "data").string() + "\"}");
  REQUIRE(run({"synth", "--config", (dir / "c.json").string(), "--hw", "16", "--seed", "9"}) == kExitOk);
  const auto j = read_json(dir / "data" / "synth" / "resolved_config.json");
  CHECK(j["synth"]["hw"] == 16);
  CHECK(j["synth"]["t"] == 30);
  CHECK(j["synth"]["seed"] == 9);
  CHECK(j["seed"] == 9);
  const auto movie = read_tensor(dir / "data" / "synth" / "movie_000.gtc");
  CHECK(movie.shape() == Shape{30, 16, 16, 8});
}

TEST_CASE("synth, topology, train, eval, predict and baseline produce their artifacts") {
  const fs::path dir = fresh_dir("cli_flow");
  const std::string data = (dir / "data").string(), out = (dir / "run").string();
  REQUIRE(run({"synth", "--data-dir", data, "--hw", "16", "--t", "30", "--movies", "8"}) == kExitOk);
  REQUIRE(run({"topology", "--data-dir", data, "--output-dir", out}) == kExitOk);
  const auto prior = read_gtc(dir / "run" / "prior.gtc");
  CHECK(prior.tensor.shape() == Shape{7, 16, 16});
  CHECK(prior.channels.size() == 7);
  const fs::path explicit_out = dir / "priors" / "p.gtc";
  REQUIRE(run({"topology", "--road", (dir / "data" / "synth" / "road.gtc").string(), "--out", explicit_out.string()}) ==
          kExitOk);
  CHECK(read_text(explicit_out) == read_text(dir / "run" / "prior.gtc"));

  const std::vector<std::string> model{"--t-in", "9", "--t-out", "3", "--base-channels", "2", "--hidden", "4"};
  std::vector<std::string> train{"train", "--data-dir", data, "--output-dir", out, "--epochs", "1", "--batch", "4"};
  train.insert(train.end(), model.begin(), model.end());
  REQUIRE(run(train) == kExitOk);
  for (const char* f : {"split.json", "resolved_config.json", "train_log.jsonl", "epochs.jsonl", "checkpoint"})
    CHECK(fs::exists(dir / "run" / f));

  REQUIRE(run({"eval", "--data-dir", data, "--output-dir", out, "--split", "val"}) == kExitOk);
  const auto ev = read_json(dir / "run" / "eval_val.json");
  CHECK(ev["model"] == "rcsnet");
  CHECK(ev["split"] == "val");
  CHECK(fs::exists(dir / "run" / "eval_val_horizons.csv"));

  REQUIRE(run({"predict", "--data-dir", data, "--output-dir", out, "--dump-gates"}) == kExitOk);
  const auto fc = read_gtc(dir / "run" / "predict_test" / "forecast.gtc");
  CHECK(fc.tensor.dim() == 5);
  CHECK(fc.tensor.size(1) == 3);
  CHECK(fc.tensor.size(3) == 16);
  CHECK(fs::exists(dir / "run" / "predict_test" / "error_heatmap.gtc"));
  CHECK(fs::exists(dir / "run" / "predict_test" / "gates_synth_direction.gtc"));

  REQUIRE(run({"baseline", "--data-dir", data, "--output-dir", out, "--t-in", "9", "--t-out", "3"}) == kExitOk);
  const auto bl = read_json(dir / "run" / "baseline_test.json");
  CHECK(bl["model"] == "historical_average");
  REQUIRE(run({"eval", "--data-dir", data, "--output-dir", out}) == kExitOk);
  const auto et = read_json(dir / "run" / "eval_test.json");
  auto keys = [](const nlohmann::json& j) {
    std::vector<std::string> k;
    for (auto it = j.begin(); it != j.end(); ++it) k.push_back(it.key());
    return k;
  };
  CHECK(keys(et) == keys(bl));
  REQUIRE(!et["horizons"].empty());
  CHECK(et["horizons"].size() == bl["horizons"].size());
  CHECK(keys(et["horizons"][0]) == keys(bl["horizons"][0]));

  CHECK(run({"eval", "--data-dir", data, "--output-dir", out, "--checkpoint", (dir / "none").string()}) == kExitConfig);
}

}
