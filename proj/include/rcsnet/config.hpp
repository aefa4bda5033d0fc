#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rcsnet/metrics.hpp"
#include "rcsnet/trainer.hpp"

namespace rcsnet {

struct SynthSettings {
  std::uint64_t seed = 42;
  std::size_t hw = 32;
  std::size_t t = 48;
  std::size_t movies = 20;
  std::string city = "synth";
};

struct RunConfig {
  TrainConfig train;
  std::string data_dir = "data";
  std::string road_map;  // optional override used for every city
  std::string output_dir = "runs/default";
  std::string split = "test";
  double theta_act = kThetaAct;
  std::size_t minutes_per_frame = kMinutesPerFrame;
  std::vector<std::size_t> horizons;  // empty: default horizons that fit T_out
  SynthSettings synth;

  void validate() const;
  std::vector<std::size_t> resolved_horizons() const;
};

// Flat keys mirror TrainConfig; "loss", "branches" and "synth" are nested.
// Unknown keys anywhere raise ConfigError.
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

nlohmann::ordered_json train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::ordered_json norm_stats_json(const NormStats& stats);
NormStats norm_stats_from_json(const nlohmann::json& j);

}  // namespace rcsnet
