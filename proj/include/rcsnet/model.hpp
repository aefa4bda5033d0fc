#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rcsnet/decoder.hpp"
#include "rcsnet/fusion.hpp"
#include "rcsnet/layers.hpp"
#include "rcsnet/temporal_encoder.hpp"
#include "rcsnet/topology.hpp"

namespace rcsnet {

struct ModelConfig {
  std::size_t channels = kTrafficChannels;
  std::size_t t_in = 12;
  std::size_t t_out = 12;
  std::size_t base_channels = 32;
  std::size_t hidden = 128;
  std::size_t road_branch_channels = 16;
  std::size_t pool_k = kDefaultPoolK;
  std::array<BranchSpec, 3> branches = default_branch_specs();
  // Ablation: feed an all-zero topology prior to the road encoder.
  bool zero_prior = false;

  std::size_t road_channels() const { return base_channels; }
  std::size_t temporal_channels() const { return 2 * base_channels; }

  // Throws ConfigError on any inconsistent value.
  void validate() const;
};

template <typename T>
struct ModelParams {
  RoadEncoderParams<T> road;
  TemporalEncoderParams<T> temporal;
  FusionParams<T> fusion;
  DecoderParams<T> decoder;

  void visit(const ParamVisitor<T>& f);
};

template <typename T>
struct ForwardTrace {
  FusionGates<T> gates;
  BasicTensor<T> road_feature;
  BasicTensor<T> temporal_feature;
};

template <typename T>
class Model {
 public:
  static Model create(const ModelConfig& config, std::uint64_t seed);

  // x (B,C,T_in,H,W) normalized, road (1,H,W) -> forecast (B,T_out,8,H,W).
  BasicTensor<T> forward(const BasicTensor<T>& x, const RoadMap& road, ForwardTrace<T>* trace = nullptr) const;

  // Prior fed to the road encoder (zeros under the ablation).
  Tensor prior_for(const RoadMap& road) const;

  const ModelConfig& config() const { return config_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  // Handles share storage with the model.
  std::vector<NamedTensor<T>> parameters();
  std::size_t parameter_count();

  // Copies values (by name) from another model with the same configuration.
  template <typename U>
  void copy_from(Model<U>& other);

 private:
  ModelConfig config_;
  ModelParams<T> params_;
};

template <typename T>
template <typename U>
void Model<T>::copy_from(Model<U>& other) {
  auto dst = parameters();
  auto src = other.parameters();
  if (dst.size() != src.size()) throw ConfigError("copy_from: parameter count mismatch");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].first != src[i].first || dst[i].second.shape() != src[i].second.shape()) {
      throw ConfigError("copy_from: parameter layout mismatch at " + dst[i].first);
    }
    auto out = dst[i].second.mutable_data();
    auto in = src[i].second.data();
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<T>(in[j]);
  }
}

}  // namespace rcsnet
