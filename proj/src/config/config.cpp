#include "rcsnet/config.hpp"

#include <set>

#include "rcsnet/container.hpp"

namespace rcsnet {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Reads optional keys from one JSON object and rejects anything it did not read.
class StrictObject {
 public:
  StrictObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename V>
  void read(const char* key, V& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ordered_json branches_json(const std::array<BranchSpec, 3>& b) {
  ordered_json out = ordered_json::array();
  for (const auto& s : b) out.push_back({{"name", s.name}, {"k", s.k}, {"d", s.d}});
  return out;
}

std::array<BranchSpec, 3> branches_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("branches: expected an array of 3 branch specs");
  std::array<BranchSpec, 3> out = default_branch_specs();
  for (std::size_t i = 0; i < 3; ++i) {
    StrictObject o(j[i], "branches[" + std::to_string(i) + "]");
    o.read("name", out[i].name);
    o.read("k", out[i].k);
    o.read("d", out[i].d);
    o.finish();
  }
  return out;
}

void read_train_fields(StrictObject& o, TrainConfig& c) {
  o.read("seed", c.seed);
  o.read("lr0", c.lr0);
  o.read("weight_decay", c.weight_decay);
  o.read("batch", c.batch);
  o.read("epochs", c.epochs);
  o.read("clip_norm", c.clip_norm);
  o.read("stride", c.stride);
  o.read("t_in", c.model.t_in);
  o.read("t_out", c.model.t_out);
  o.read("base_channels", c.model.base_channels);
  o.read("hidden", c.model.hidden);
  o.read("road_branch_channels", c.model.road_branch_channels);
  o.read("pool_k", c.model.pool_k);
  o.read("zero_prior", c.model.zero_prior);
  if (const json* b = o.child("branches")) c.model.branches = branches_from_json(*b);
  if (const json* l = o.child("loss")) {
    StrictObject lo(*l, "loss");
    lo.read("lambda_s", c.loss.lambda_s);
    lo.read("lambda_t", c.loss.lambda_t);
    lo.read("lambda_e", c.loss.lambda_e);
    lo.read("gamma", c.loss.gamma);
    lo.read("tau", c.loss.tau);
    lo.finish();
  }
}

void write_train_fields(ordered_json& j, const TrainConfig& c) {
  j["seed"] = c.seed;
  j["lr0"] = c.lr0;
  j["weight_decay"] = c.weight_decay;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["clip_norm"] = c.clip_norm;
  j["stride"] = c.stride;
  j["t_in"] = c.model.t_in;
  j["t_out"] = c.model.t_out;
  j["base_channels"] = c.model.base_channels;
  j["hidden"] = c.model.hidden;
  j["road_branch_channels"] = c.model.road_branch_channels;
  j["pool_k"] = c.model.pool_k;
  j["zero_prior"] = c.model.zero_prior;
  j["branches"] = branches_json(c.model.branches);
  j["loss"] = {{"lambda_s", c.loss.lambda_s},
               {"lambda_t", c.loss.lambda_t},
               {"lambda_e", c.loss.lambda_e},
               {"gamma", c.loss.gamma},
               {"tau", c.loss.tau}};
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (theta_act < 0) throw ConfigError("theta_act must be >= 0");
  if (minutes_per_frame == 0) throw ConfigError("minutes_per_frame must be >= 1");
  for (std::size_t m : horizons) {
    if (m == 0) throw ConfigError("horizons must be >= 1 minute");
    if (horizon_frame(m, minutes_per_frame) >= train.model.t_out) {
      throw ConfigError("horizon t+" + std::to_string(m) + " exceeds T_out = " + std::to_string(train.model.t_out));
    }
  }
  if (synth.hw < 8 || synth.hw % 4 != 0) throw ConfigError("synth.hw must be a multiple of 4 and >= 8");
  if (synth.t < 24) throw ConfigError("synth.t must be >= 24");
  if (synth.movies < 1) throw ConfigError("synth.movies must be >= 1");
  if (synth.city.empty()) throw ConfigError("synth.city must not be empty");
  parse_split(split);
}

std::vector<std::size_t> RunConfig::resolved_horizons() const {
  return horizons.empty() ? default_horizons(train.model.t_out, minutes_per_frame) : horizons;
}

ordered_json train_config_json(const TrainConfig& config) {
  ordered_json j;
  write_train_fields(j, config);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  StrictObject o(j, "config");
  read_train_fields(o, c);
  o.finish();
  return c;
}

ordered_json to_json(const RunConfig& c) {
  ordered_json j;
  j["data_dir"] = c.data_dir;
  j["road_map"] = c.road_map;
  j["output_dir"] = c.output_dir;
  j["split"] = c.split;
  write_train_fields(j, c.train);
  j["theta_act"] = c.theta_act;
  j["minutes_per_frame"] = c.minutes_per_frame;
  j["horizons"] = c.resolved_horizons();
  j["synth"] = {{"seed", c.synth.seed},
                {"hw", c.synth.hw},
                {"t", c.synth.t},
                {"movies", c.synth.movies},
                {"city", c.synth.city}};
  return j;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  StrictObject o(j, "config");
  o.read("data_dir", c.data_dir);
  o.read("road_map", c.road_map);
  o.read("output_dir", c.output_dir);
  o.read("split", c.split);
  read_train_fields(o, c.train);
  o.read("theta_act", c.theta_act);
  o.read("minutes_per_frame", c.minutes_per_frame);
  o.read("horizons", c.horizons);
  if (const json* s = o.child("synth")) {
    StrictObject so(*s, "synth");
    so.read("seed", c.synth.seed);
    so.read("hw", c.synth.hw);
    so.read("t", c.synth.t);
    so.read("movies", c.synth.movies);
    so.read("city", c.synth.city);
    so.finish();
  }
  o.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return run_config_from_json(j, std::move(base));
}

ordered_json norm_stats_json(const NormStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

NormStats norm_stats_from_json(const json& j) {
  NormStats s;
  StrictObject o(j, "norm");
  o.read("mean", s.mean);
  o.read("std", s.std);
  o.finish();
  return s;
}

}  // namespace rcsnet
