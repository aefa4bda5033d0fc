#include "rcsnet/trainer.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

#include "rcsnet/config.hpp"
#include "rcsnet/container.hpp"
#include "rcsnet/log.hpp"

namespace rcsnet {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  model.validate();
  loss.validate();
}

template <typename T>
void adamw_step(std::span<BasicTensor<T>> params, AdamState<T>& state, double lr, double weight_decay,
                const AdamOptions& opt) {
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), {});
    state.v.assign(params.size(), {});
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    auto data = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != data.size()) {
      m.assign(data.size(), T(0));
      v.assign(data.size(), T(0));
    }
    const bool has_grad = p.has_grad();
    std::span<const T> g = has_grad ? p.grad() : std::span<const T>();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double gj = has_grad ? double(g[j]) : 0.0;
      const double mj = opt.beta1 * double(m[j]) + (1.0 - opt.beta1) * gj;
      const double vj = opt.beta2 * double(v[j]) + (1.0 - opt.beta2) * gj * gj;
      m[j] = T(mj);
      v[j] = T(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + opt.eps);
      const double pj = double(data[j]);
      data[j] = T(pj - lr * update - lr * weight_decay * pj);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
  if (total_steps == 0) return lr0;
  if (step > total_steps) throw ParameterError("cosine_lr: step exceeds total steps");
  const double lr = lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * double(step) / double(total_steps)));
  return std::max(0.0, lr);
}

template <typename T>
double global_grad_norm(std::span<const BasicTensor<T>> params) {
  double sq = 0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += double(g) * double(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_gradients(std::span<BasicTensor<T>> params, double max_norm) {
  if (!(max_norm > 0)) throw ParameterError("clip norm must be positive");
  const double norm = global_grad_norm<T>(std::span<const BasicTensor<T>>(params.data(), params.size()));
  if (!std::isfinite(norm)) throw NumericError("gradient norm is not finite");
  if (norm <= max_norm) return 1.0;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.has_grad()) continue;
    for (T& g : p.mutable_grad()) g = T(double(g) * factor);
  }
  return factor;
}

template void adamw_step(std::span<BasicTensor<float>>, AdamState<float>&, double, double, const AdamOptions&);
template void adamw_step(std::span<BasicTensor<double>>, AdamState<double>&, double, double, const AdamOptions&);
template double clip_gradients(std::span<BasicTensor<float>>, double);
template double clip_gradients(std::span<BasicTensor<double>>, double);
template double global_grad_norm(std::span<const BasicTensor<float>>);
template double global_grad_norm(std::span<const BasicTensor<double>>);

std::string StepRecord::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["batch"] = batch;
  j["pred"] = pred;
  j["struct"] = structure;
  j["temp"] = temp;
  j["edge"] = edge;
  j["total"] = total;
  j["lr"] = lr;
  j["grad_norm"] = grad_norm;
  return j.dump();
}

// ---- checkpoints -------------------------------------------------------------

namespace {

std::string file_stem(const std::string& name) {
  std::string s = name;
  for (char& c : s) {
    if (c == '/' || c == '\\') c = '_';
  }
  return s;
}

std::vector<BasicTensor<float>> handles(Model<float>& model) {
  std::vector<BasicTensor<float>> out;
  for (auto& [name, t] : model.parameters()) out.push_back(t);
  return out;
}

}  // namespace

Checkpoint make_checkpoint(Model<float>& model, const AdamState<float>& opt, const TrainConfig& config,
                           const NormStats& stats, std::size_t epoch, std::size_t step, double val_loss) {
  Checkpoint c;
  c.config = config;
  c.stats = stats;
  c.epoch = epoch;
  c.step = step;
  c.val_loss = val_loss;
  for (auto& [name, t] : model.parameters()) {
    auto d = t.data();
    c.params.emplace_back(name, Tensor(t.shape(), std::vector<float>(d.begin(), d.end())));
  }
  c.optimizer = opt;
  return c;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir / "params");
  fs::create_directories(dir / "optimizer");
  nlohmann::ordered_json manifest;
  manifest["format"] = "rcsnet-checkpoint";
  manifest["version"] = 1;
  manifest["epoch"] = ckpt.epoch;
  manifest["step"] = ckpt.step;
  manifest["val_loss"] = ckpt.val_loss;
  manifest["optimizer_step"] = ckpt.optimizer.step;
  manifest["config"] = train_config_json(ckpt.config);
  manifest["norm"] = norm_stats_json(ckpt.stats);
  auto list = nlohmann::ordered_json::array();
  const bool with_moments = ckpt.optimizer.m.size() == ckpt.params.size();
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& [name, t] = ckpt.params[i];
    const std::string stem = file_stem(name);
    write_tensor(dir / "params" / (stem + ".gtc"), t);
    nlohmann::ordered_json entry{{"name", name}, {"shape", t.shape()}, {"file", "params/" + stem + ".gtc"}};
    if (with_moments) {
      write_tensor(dir / "optimizer" / (stem + ".m.gtc"), Tensor(t.shape(), ckpt.optimizer.m[i]));
      write_tensor(dir / "optimizer" / (stem + ".v.gtc"), Tensor(t.shape(), ckpt.optimizer.v[i]));
      entry["moments"] = {"optimizer/" + stem + ".m.gtc", "optimizer/" + stem + ".v.gtc"};
    }
    list.push_back(entry);
  }
  manifest["params"] = list;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  Checkpoint c;
  try {
    if (manifest.at("format") != "rcsnet-checkpoint") throw FormatError(dir.string() + ": not a checkpoint");
    c.epoch = manifest.at("epoch").get<std::size_t>();
    c.step = manifest.at("step").get<std::size_t>();
    c.val_loss = manifest.at("val_loss").get<double>();
    c.config = train_config_from_json(manifest.at("config"));
    c.stats = norm_stats_from_json(manifest.at("norm"));
    c.optimizer.step = manifest.at("optimizer_step").get<std::size_t>();
    for (const auto& entry : manifest.at("params")) {
      const std::string name = entry.at("name").get<std::string>();
      Tensor t = read_tensor(dir / entry.at("file").get<std::string>());
      if (t.shape() != entry.at("shape").get<Shape>()) throw FormatError(name + ": shape differs from manifest");
      if (entry.contains("moments")) {
        const Tensor m = read_tensor(dir / entry["moments"][0].get<std::string>());
        const Tensor v = read_tensor(dir / entry["moments"][1].get<std::string>());
        c.optimizer.m.emplace_back(m.data().begin(), m.data().end());
        c.optimizer.v.emplace_back(v.data().begin(), v.data().end());
      }
      c.params.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": invalid manifest: " + e.what());
  }
  if (!c.optimizer.m.empty() && c.optimizer.m.size() != c.params.size()) {
    throw FormatError(dir.string() + ": optimizer moments are incomplete");
  }
  return c;
}

Model<float> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = Model<float>::create(ckpt.config.model, ckpt.config.seed);
  auto params = model.parameters();
  if (params.size() != ckpt.params.size()) throw FormatError("checkpoint parameter count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != ckpt.params[i].first || params[i].second.shape() != ckpt.params[i].second.shape()) {
      throw FormatError("checkpoint parameter " + ckpt.params[i].first + " does not match the model layout");
    }
    auto src = ckpt.params[i].second.data();
    std::copy(src.begin(), src.end(), params[i].second.mutable_data().begin());
  }
  return model;
}

// ---- data workers ------------------------------------------------------------

std::size_t worker_threads_from_env() {
  const char* env = std::getenv("RCSNET_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0) throw ConfigError(std::string("RCSNET_THREADS must be a non-negative integer, got ") + env);
  return std::size_t(v);
}

namespace {

// Materializes batches on worker threads through a bounded window. Batches
// are handed out strictly in list order whatever the worker count.
class BatchQueue {
 public:
  BatchQueue(const Dataset& data, const std::vector<std::vector<std::size_t>>& plan, std::size_t workers,
             std::size_t capacity, std::size_t first_id)
      : data_(data), plan_(plan), capacity_(std::max<std::size_t>(1, capacity)), first_id_(first_id) {
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { run(); });
  }

  ~BatchQueue() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  Batch next() {
    const std::size_t want = consumed_;
    if (threads_.empty()) {
      ++consumed_;
      return data_.batch(plan_.at(want), first_id_ + want);
    }
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return ready_.count(want) || error_; });
    if (error_) std::rethrow_exception(error_);
    Batch b = std::move(ready_.at(want));
    ready_.erase(want);
    ++consumed_;
    lock.unlock();
    cv_.notify_all();
    return b;
  }

 private:
  void run() {
    for (;;) {
      std::size_t idx = 0;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return stop_ || (issued_ < plan_.size() && issued_ < consumed_ + capacity_); });
        if (stop_) return;
        idx = issued_++;
      }
      try {
        Batch b = data_.batch(plan_[idx], first_id_ + idx);
        std::lock_guard lock(mu_);
        ready_.emplace(idx, std::move(b));
      } catch (...) {
        std::lock_guard lock(mu_);
        if (!error_) error_ = std::current_exception();
      }
      cv_.notify_all();
    }
  }

  const Dataset& data_;
  const std::vector<std::vector<std::size_t>>& plan_;
  std::size_t capacity_, first_id_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::size_t, Batch> ready_;
  std::size_t issued_ = 0;
  std::size_t consumed_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

Tensor forward_batch(const Model<float>& model, const Dataset& data, const Batch& b) {
  return model.forward(b.x, data.city(b.city).road);
}

void dump_bad_batch(const TrainHooks& hooks, const Batch& b, std::size_t step, std::size_t epoch,
                    const std::string& what) {
  std::string members;
  for (std::size_t m : b.members) members += (members.empty() ? "" : ",") + std::to_string(m);
  log::warn("non-finite value at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(b.id) + ", samples [" + members + "]): " + what);
  if (hooks.diagnostics_dir) {
    fs::create_directories(*hooks.diagnostics_dir);
    nlohmann::ordered_json j{{"step", step}, {"epoch", epoch}, {"batch", b.id}, {"samples", b.members}, {"error", what}};
    write_text(*hooks.diagnostics_dir / "nonfinite_batch.json", j.dump(2) + "\n");
    write_tensor(*hooks.diagnostics_dir / "nonfinite_batch_x.gtc", b.x);
  }
}

}  // namespace

double evaluate_loss(const Model<float>& model, const Dataset& data, const LossWeights& weights,
                     std::size_t batch_size) {
  NoGradGuard guard;
  double sum = 0;
  std::size_t n = 0;
  for (const auto& members : data.batches(batch_size)) {
    const Batch b = data.batch(members);
    const Tensor yhat = forward_batch(model, data, b);
    const auto loss = total_loss(yhat, b.y, data.city(b.city).road, weights);
    sum += loss.total_value() * double(members.size());
    n += members.size();
  }
  return n ? sum / double(n) : 0.0;
}

TrainResult train(const TrainConfig& config, const Dataset& train_set, const Dataset& val_set,
                  const TrainHooks& hooks) {
  config.validate();
  if (train_set.empty()) throw ValidationError("training split has no samples");
  if (val_set.empty()) log::warn("validation split is empty; model selection falls back to the training loss");

  auto model = Model<float>::create(config.model, config.seed);
  auto params = handles(model);
  AdamState<float> opt;
  const std::size_t steps_per_epoch = train_set.batches(config.batch).size();
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const std::size_t workers = hooks.workers ? *hooks.workers : worker_threads_from_env();

  TrainResult result;
  std::optional<double> best;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto plan = train_set.batches(config.batch, config.seed + epoch);
    BatchQueue queue(train_set, plan, workers, 2, epoch * steps_per_epoch);
    double epoch_sum = 0;
    std::size_t epoch_n = 0;
    for (std::size_t k = 0; k < plan.size(); ++k, ++step) {
      const Batch b = queue.next();
      const double lr = cosine_lr(step, total_steps, config.lr0);
      StepRecord rec;
      try {
        for (auto& p : params) p.zero_grad();
        const Tensor yhat = forward_batch(model, train_set, b);
        const auto loss = total_loss(yhat, b.y, train_set.city(b.city).road, config.loss);
        if (!std::isfinite(loss.total_value())) throw NumericError("total loss is not finite");
        backward(loss.total);
        rec.grad_norm = global_grad_norm<float>(std::span<const BasicTensor<float>>(params));
        clip_gradients<float>(params, config.clip_norm);
        adamw_step<float>(params, opt, lr, config.weight_decay);
        rec.pred = loss.pred;
        rec.structure = loss.structure;
        rec.temp = loss.temp;
        rec.edge = loss.edge;
        rec.total = loss.total_value();
      } catch (const NumericError& e) {
        dump_bad_batch(hooks, b, step, epoch, e.what());
        throw NumericError(std::string(e.what()) + " (step " + std::to_string(step) + ", batch " +
                           std::to_string(b.id) + ")");
      }
      rec.step = step;
      rec.epoch = epoch;
      rec.batch = b.id;
      rec.lr = lr;
      epoch_sum += rec.total * double(b.members.size());
      epoch_n += b.members.size();
      result.steps.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
    }

    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = epoch_sum / double(std::max<std::size_t>(1, epoch_n));
    er.val_loss = val_set.empty() ? er.train_loss : evaluate_loss(model, val_set, config.loss, config.batch);
    if (!std::isfinite(er.val_loss)) throw NumericError("validation loss is not finite at epoch " + std::to_string(epoch));
    er.improved = !best || er.val_loss < *best;
    if (er.improved) {
      best = er.val_loss;
      result.best = make_checkpoint(model, opt, config, train_set.stats(), epoch, step, er.val_loss);
      result.best_epoch = epoch;
      if (hooks.checkpoint_dir) save_checkpoint(*hooks.checkpoint_dir, result.best);
    }
    result.epochs.push_back(er);
    if (hooks.on_epoch) hooks.on_epoch(er);
  }
  return result;
}

}  // namespace rcsnet
