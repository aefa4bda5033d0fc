#include "rcsnet/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "rcsnet/config.hpp"
#include "rcsnet/container.hpp"
#include "rcsnet/data.hpp"
#include "rcsnet/log.hpp"
#include "rcsnet/metrics.hpp"
#include "rcsnet/synth.hpp"
#include "rcsnet/topology.hpp"
#include "rcsnet/trainer.hpp"

namespace rcsnet {

namespace fs = std::filesystem;

namespace {

// Flag values; anything left unset falls back to the config file, then to defaults.
struct Overrides {
  std::string config_path;
  std::optional<std::string> data_dir, output_dir, road_map, split;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch, base_channels, hidden, t_in, t_out, stride, pool_k;
  std::optional<double> lr0, weight_decay, clip_norm, tau, theta_act, gamma;
  bool zero_prior = false;
  std::optional<std::size_t> hw, t, movies;
  std::optional<std::string> city;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("-c,--config", o.config_path, "JSON run configuration");
  app->add_option("--data-dir", o.data_dir, "Dataset root (<root>/<city>/movie_*.gtc)");
  app->add_option("--output-dir", o.output_dir, "Run output directory");
  app->add_option("--road-map", o.road_map, "Road map used for every city");
  app->add_option("--seed", o.seed, "Random seed");
}

void add_model(CLI::App* app, Overrides& o) {
  app->add_option("--t-in", o.t_in, "Input frames");
  app->add_option("--t-out", o.t_out, "Forecast frames");
  app->add_option("--stride", o.stride, "Sliding window stride");
  app->add_option("--base-channels", o.base_channels, "Base channel width");
  app->add_option("--hidden", o.hidden, "Decoder hidden size");
  app->add_option("--pool-k", o.pool_k, "Topology pooling window");
  app->add_option("--tau", o.tau, "Road mask threshold");
  app->add_option("--theta-act", o.theta_act, "Activity threshold for structure metrics");
  app->add_flag("--zero-prior", o.zero_prior, "Replace the topology prior with zeros");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c;
  if (!o.config_path.empty()) c = load_run_config(o.config_path);
  if (o.data_dir) c.data_dir = *o.data_dir;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.road_map) c.road_map = *o.road_map;
  if (o.split) c.split = *o.split;
  if (o.seed) {
    c.train.seed = *o.seed;
    c.synth.seed = *o.seed;
  }
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch) c.train.batch = *o.batch;
  if (o.base_channels) c.train.model.base_channels = *o.base_channels;
  if (o.hidden) c.train.model.hidden = *o.hidden;
  if (o.t_in) c.train.model.t_in = *o.t_in;
  if (o.t_out) c.train.model.t_out = *o.t_out;
  if (o.stride) c.train.stride = *o.stride;
  if (o.pool_k) c.train.model.pool_k = *o.pool_k;
  if (o.lr0) c.train.lr0 = *o.lr0;
  if (o.weight_decay) c.train.weight_decay = *o.weight_decay;
  if (o.clip_norm) c.train.clip_norm = *o.clip_norm;
  if (o.tau) c.train.loss.tau = *o.tau;
  if (o.gamma) c.train.loss.gamma = *o.gamma;
  if (o.theta_act) c.theta_act = *o.theta_act;
  if (o.zero_prior) c.train.model.zero_prior = true;
  if (o.hw) c.synth.hw = *o.hw;
  if (o.t) c.synth.t = *o.t;
  if (o.movies) c.synth.movies = *o.movies;
  if (o.city) c.synth.city = *o.city;
  c.validate();
  return c;
}

void write_resolved(const fs::path& dir, const RunConfig& c, const std::string& name = "resolved_config.json") {
  fs::create_directories(dir);
  write_text(dir / name, to_json(c).dump(2) + "\n");
}

DatasetOptions dataset_options(const RunConfig& c) {
  DatasetOptions d;
  d.t_in = c.train.model.t_in;
  d.t_out = c.train.model.t_out;
  d.stride = c.train.stride;
  if (!c.road_map.empty()) d.road_override = c.road_map;
  return d;
}

SplitPlan plan_for(const RunConfig& c) { return split_files(discover_movies(c.data_dir), c.train.seed); }

std::vector<MovieFile> split_files_of(const SplitPlan& plan, Split s) {
  switch (s) {
    case Split::Train: return plan.train();
    case Split::Val: return plan.val();
    case Split::Test: return plan.test();
  }
  return {};
}

fs::path checkpoint_dir(const RunConfig& c, const std::string& flag) {
  return flag.empty() ? fs::path(c.output_dir) / "checkpoint" : fs::path(flag);
}

// ---- subcommands -------------------------------------------------------------

int cmd_synth(const RunConfig& c) {
  const fs::path dir = fs::path(c.data_dir) / c.synth.city;
  fs::create_directories(dir);
  SynthProfile profile;
  const auto channels = traffic_channel_names();
  Tensor road;
  for (std::size_t k = 0; k < c.synth.movies; ++k) {
    profile.t_offset = k * c.synth.t;
    const SynthCity city = synth_city(c.synth.seed, c.synth.hw, c.synth.hw, c.synth.t, profile);
    char name[32];
    std::snprintf(name, sizeof name, "movie_%03zu.gtc", k);
    write_tensor(dir / name, city.movie, {"T", "H", "W", "C"}, channels);
    road = city.road;
  }
  write_tensor(dir / "road.gtc", road, {"H", "W"}, {"road"});
  write_resolved(dir, c);
  std::cout << "wrote " << c.synth.movies << " movies of " << c.synth.t << " frames (" << c.synth.hw << "x"
            << c.synth.hw << ") to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_topology(const RunConfig& c, const std::string& road_flag, const std::string& out_flag) {
  fs::path road_file = road_flag.empty() ? fs::path(c.road_map) : fs::path(road_flag);
  if (road_file.empty()) road_file = road_path(c.data_dir, c.synth.city);
  const RoadMap road = normalize_road(read_tensor(road_file));
  const TopologyPrior prior = extract_prior(road, c.train.model.pool_k);
  const auto& names = prior_channel_names();
  fs::path file = out_flag;
  if (file.empty()) {
    const fs::path out = c.output_dir;
    fs::create_directories(out);
    write_resolved(out, c);
    file = out / "prior.gtc";
  } else if (file.has_parent_path()) {
    fs::create_directories(file.parent_path());
  }
  write_tensor(file, prior.channels, {"C", "H", "W"}, {names.begin(), names.end()});
  std::cout << "wrote topology prior " << shape_str(prior.channels.shape()) << " to " << file.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& c) {
  const fs::path out = c.output_dir;
  write_resolved(out, c);
  const SplitPlan plan = plan_for(c);
  nlohmann::ordered_json split_json = nlohmann::ordered_json::object();
  for (const auto& cs : plan.cities) {
    auto names = [](const std::vector<MovieFile>& v) {
      std::vector<std::string> n;
      for (const auto& f : v) n.push_back(f.path.filename().string());
      return n;
    };
    split_json[cs.city] = {{"train", names(cs.train)}, {"val", names(cs.val)}, {"test", names(cs.test)}};
  }
  write_text(out / "split.json", split_json.dump(2) + "\n");

  const NormStats stats = fit_norm_stats(Dataset::load_raw(plan.train()));
  const DatasetOptions opts = dataset_options(c);
  const Dataset train_set(plan.train(), c.data_dir, stats, opts);
  const Dataset val_set(plan.val(), c.data_dir, stats, opts);
  std::cerr << "train samples " << train_set.size() << ", val samples " << val_set.size() << "\n";

  std::string step_log, epoch_log;
  TrainHooks hooks;
  hooks.checkpoint_dir = out / "checkpoint";
  hooks.diagnostics_dir = out / "diagnostics";
  hooks.on_step = [&](const StepRecord& r) { step_log += r.to_json() + "\n"; };
  hooks.on_epoch = [&](const EpochRecord& e) {
    nlohmann::ordered_json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss},
                             {"improved", e.improved}};
    epoch_log += j.dump() + "\n";
    std::cerr << "epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss
              << (e.improved ? " *" : "") << "\n";
  };
  try {
    const TrainResult r = train(c.train, train_set, val_set, hooks);
    write_text(out / "train_log.jsonl", step_log);
    write_text(out / "epochs.jsonl", epoch_log);
    std::cout << "best epoch " << r.best_epoch << " val_loss " << r.best.val_loss << "; checkpoint "
              << (out / "checkpoint").string() << "\n";
  } catch (...) {
    write_text(out / "train_log.jsonl", step_log);
    write_text(out / "epochs.jsonl", epoch_log);
    throw;
  }
  return kExitOk;
}

struct SplitData {
  Checkpoint ckpt;
  Dataset data;
};

SplitData load_split(const RunConfig& c, const fs::path& ckpt_dir) {
  SplitData s;
  s.ckpt = load_checkpoint(ckpt_dir);
  const SplitPlan plan = plan_for(c);
  const auto files = split_files_of(plan, parse_split(c.split));
  if (files.empty()) throw ValidationError(std::string("split '") + c.split + "' has no files");
  DatasetOptions opts = dataset_options(c);
  opts.t_in = s.ckpt.config.model.t_in;
  opts.t_out = s.ckpt.config.model.t_out;
  opts.stride = s.ckpt.config.stride;
  s.data = Dataset(files, c.data_dir, s.ckpt.stats, opts);
  if (s.data.empty()) throw ValidationError(std::string("split '") + c.split + "' has no samples");
  return s;
}

// Denormalized, cropped forecasts of every sample in dataset order.
template <typename F>
void for_each_forecast(const Model<float>& model, const Dataset& data, std::size_t batch_size, F&& fn) {
  NoGradGuard guard;
  for (const auto& members : data.batches(batch_size)) {
    const Batch b = data.batch(members);
    const auto& city = data.city(b.city);
    ForwardTrace<float> trace;
    const Tensor yhat = model.forward(b.x, city.road, &trace);
    const Tensor raw = crop_spatial(invert_norm_forecast(yhat, data.stats()), city.height, city.width);
    const std::size_t per = raw.numel() / members.size();
    auto d = raw.data();
    for (std::size_t i = 0; i < members.size(); ++i) {
      Tensor one({raw.size(1), raw.size(2), raw.size(3), raw.size(4)},
                 std::vector<float>(d.begin() + std::ptrdiff_t(i * per), d.begin() + std::ptrdiff_t((i + 1) * per)));
      fn(members[i], one, trace, b.city);
    }
  }
}

std::vector<std::size_t> horizons_for(const RunConfig& c, std::size_t t_out) {
  if (!c.horizons.empty()) return c.horizons;
  return default_horizons(t_out, c.minutes_per_frame);
}

void write_report(const fs::path& out, const std::string& stem, const MetricReport& r) {
  fs::create_directories(out);
  write_text(out / (stem + ".json"), r.to_json());
  write_text(out / (stem + "_horizons.csv"), r.horizon_csv());
  std::cout << "mae " << r.error.mae << " rmse " << r.error.rmse << " road_mae " << r.road_mae << " offroad "
            << r.offroad_activation_rate << " recall " << r.road_coverage_recall << "\n";
}

RoadMap cropped_road(const Dataset::City& city) {
  return make_road_map(crop_spatial(city.road.grid, city.height, city.width));
}

int cmd_eval(const RunConfig& c, const std::string& ckpt_flag) {
  const SplitData s = load_split(c, checkpoint_dir(c, ckpt_flag));
  const auto model = model_from_checkpoint(s.ckpt);
  const std::size_t t_out = s.ckpt.config.model.t_out;
  MetricAccumulator acc(t_out, s.ckpt.config.loss.tau, c.theta_act, c.minutes_per_frame, horizons_for(c, t_out));
  for_each_forecast(model, s.data, s.ckpt.config.batch, [&](std::size_t idx, const Tensor& f, auto&, std::size_t city) {
    acc.add(f, s.data.raw_target(idx), cropped_road(s.data.city(city)));
  });
  const MetricReport r = acc.report(s.ckpt.config.model.zero_prior ? "rcsnet_zero_prior" : "rcsnet", c.split);
  write_report(c.output_dir, "eval_" + c.split, r);
  write_resolved(c.output_dir, c, "eval_" + c.split + "_config.json");
  return kExitOk;
}

int cmd_baseline(const RunConfig& c) {
  const SplitPlan plan = plan_for(c);
  const auto files = split_files_of(plan, parse_split(c.split));
  if (files.empty()) throw ValidationError(std::string("split '") + c.split + "' has no files");
  const NormStats stats = fit_norm_stats(Dataset::load_raw(plan.train()));
  const Dataset data(files, c.data_dir, stats, dataset_options(c));
  if (data.empty()) throw ValidationError(std::string("split '") + c.split + "' has no samples");
  const std::size_t t_out = c.train.model.t_out;
  MetricAccumulator acc(t_out, c.train.loss.tau, c.theta_act, c.minutes_per_frame, horizons_for(c, t_out));
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(historical_average(data.raw_input(i), t_out), data.raw_target(i), cropped_road(data.city(data.refs()[i].city)));
  }
  const MetricReport r = acc.report("historical_average", c.split);
  write_report(c.output_dir, "baseline_" + c.split, r);
  write_resolved(c.output_dir, c, "baseline_" + c.split + "_config.json");
  return kExitOk;
}

int cmd_predict(const RunConfig& c, const std::string& ckpt_flag, bool dump_gates) {
  const SplitData s = load_split(c, checkpoint_dir(c, ckpt_flag));
  const auto model = model_from_checkpoint(s.ckpt);
  const fs::path out = fs::path(c.output_dir) / ("predict_" + c.split);
  fs::create_directories(out);
  std::vector<float> all;
  Shape frame_shape;
  std::vector<double> heat;
  std::size_t heat_count = 0;
  std::vector<bool> gates_written(s.data.cities().size(), false);
  for_each_forecast(model, s.data, s.ckpt.config.batch,
                    [&](std::size_t idx, const Tensor& f, const ForwardTrace<float>& trace, std::size_t city) {
                      const Tensor y = s.data.raw_target(idx);
                      frame_shape = f.shape();
                      all.insert(all.end(), f.data().begin(), f.data().end());
                      const std::size_t t = f.size(0), ch = f.size(1), hw = f.size(2) * f.size(3);
                      if (heat.empty()) heat.assign(hw, 0.0);
                      auto a = f.data();
                      auto b = y.data();
                      for (std::size_t k = 0; k < t * ch; ++k)
                        for (std::size_t p = 0; p < hw; ++p) heat[p] += std::abs(double(a[k * hw + p]) - double(b[k * hw + p]));
                      heat_count += t * ch;
                      if (dump_gates && !gates_written[city]) {
                        const auto& cd = s.data.city(city);
                        const std::string stem = "gates_" + cd.name;
                        write_tensor(out / (stem + "_channel.gtc"), trace.gates.channel.detach());
                        write_tensor(out / (stem + "_spatial.gtc"), trace.gates.spatial.detach());
                        write_tensor(out / (stem + "_direction.gtc"), trace.gates.direction.detach());
                        gates_written[city] = true;
                      }
                    });
  Shape shape{s.data.size()};
  shape.insert(shape.end(), frame_shape.begin(), frame_shape.end());
  GtcFile forecast;
  forecast.tensor = Tensor(shape, std::move(all));
  forecast.axes = {"N", "T", "C", "H", "W"};
  forecast.channels = traffic_channel_names();
  write_gtc(out / "forecast.gtc", forecast);
  std::vector<float> hv(heat.size());
  for (std::size_t p = 0; p < heat.size(); ++p) hv[p] = float(heat[p] / double(std::max<std::size_t>(1, heat_count)));
  write_tensor(out / "error_heatmap.gtc", Tensor({frame_shape[2], frame_shape[3]}, std::move(hv)), {"H", "W"},
               {"mean_abs_error"});
  write_resolved(out, c);
  std::cout << "wrote " << s.data.size() << " forecasts to " << (out / "forecast.gtc").string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Road-conditioned traffic movie forecasting"};
  app.require_subcommand(1);
  Overrides o;
  std::string ckpt_flag, road_flag, topo_out;
  bool dump_gates = false;

  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic city");
  add_common(synth, o);
  synth->add_option("--hw", o.hw, "Grid height and width (multiple of 4)");
  synth->add_option("--t", o.t, "Frames per movie");
  synth->add_option("--movies", o.movies, "Number of movie files");
  synth->add_option("--city", o.city, "City id (subdirectory name)");

  auto* topo = app.add_subcommand("topology", "Dump the 7-channel topology prior of a road map");
  add_common(topo, o);
  topo->add_option("--road", road_flag, "Road map GTC1 file");
  topo->add_option("--out", topo_out, "Prior file (default <output>/prior.gtc)");
  topo->add_option("--pool-k", o.pool_k, "Pooling window");
  topo->add_option("--city", o.city, "City whose road map is used when --road is absent");

  auto* tr = app.add_subcommand("train", "Train and keep the best checkpoint");
  add_common(tr, o);
  add_model(tr, o);
  tr->add_option("--epochs", o.epochs, "Epochs");
  tr->add_option("--batch", o.batch, "Batch size");
  tr->add_option("--lr0", o.lr0, "Initial learning rate");
  tr->add_option("--weight-decay", o.weight_decay, "AdamW weight decay");
  tr->add_option("--clip-norm", o.clip_norm, "Global gradient norm limit");
  tr->add_option("--gamma", o.gamma, "Road-region loss weight");

  auto* ev = app.add_subcommand("eval", "Metric report of a checkpoint on a split");
  add_common(ev, o);
  ev->add_option("--checkpoint", ckpt_flag, "Checkpoint directory (default <output>/checkpoint)");
  ev->add_option("--split", o.split, "train, val or test");
  ev->add_option("--theta-act", o.theta_act, "Activity threshold");

  auto* pr = app.add_subcommand("predict", "Write forecasts and an error heatmap");
  add_common(pr, o);
  pr->add_option("--checkpoint", ckpt_flag, "Checkpoint directory (default <output>/checkpoint)");
  pr->add_option("--split", o.split, "train, val or test");
  pr->add_flag("--dump-gates", dump_gates, "Also write fusion gate maps per city");

  auto* bl = app.add_subcommand("baseline", "Historical Average report on a split");
  add_common(bl, o);
  bl->add_option("--split", o.split, "train, val or test");
  bl->add_option("--t-in", o.t_in, "Input frames");
  bl->add_option("--t-out", o.t_out, "Forecast frames");
  bl->add_option("--stride", o.stride, "Sliding window stride");
  bl->add_option("--tau", o.tau, "Road mask threshold");
  bl->add_option("--theta-act", o.theta_act, "Activity threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const RunConfig c = resolve(o);
    if (synth->parsed()) return cmd_synth(c);
    if (topo->parsed()) return cmd_topology(c, road_flag, topo_out);
    if (tr->parsed()) return cmd_train(c);
    if (ev->parsed()) return cmd_eval(c, ckpt_flag);
    if (pr->parsed()) return cmd_predict(c, ckpt_flag, dump_gates);
    if (bl->parsed()) return cmd_baseline(c);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"rcsnet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(int(argv.size()), argv.data());
}

}  // namespace rcsnet
