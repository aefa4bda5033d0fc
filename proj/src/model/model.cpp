#include "rcsnet/model.hpp"

#include <string>

namespace rcsnet {

void ModelConfig::validate() const {
  if (channels != kTrafficChannels) throw ConfigError("traffic channel count must be 8");
  if (t_in < 1 || t_out < 1) throw ConfigError("T_in and T_out must be >= 1");
  if (base_channels < 1 || hidden < 1 || road_branch_channels < 1) {
    throw ConfigError("channel sizes must be positive");
  }
  if (pool_k % 2 == 0) throw ConfigError("pool_k must be odd");
  validate_branches(branches, t_in);
}

template <typename T>
void ModelParams<T>::visit(const ParamVisitor<T>& f) {
  road.visit("road", f);
  temporal.visit("temporal", f);
  fusion.visit("fusion", f);
  decoder.visit("decoder", f);
}

template <typename T>
Model<T> Model<T>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamInit init(seed);
  Model m;
  m.config_ = config;
  m.params_.road = RoadEncoderParams<T>::make(init, config.road_channels(), config.road_branch_channels);
  m.params_.temporal =
      TemporalEncoderParams<T>::make(init, config.channels, config.base_channels, config.branches);
  m.params_.fusion = FusionParams<T>::make(init, config.temporal_channels(), config.road_channels());
  m.params_.decoder = DecoderParams<T>::make(init, config.temporal_channels(), config.hidden);
  return m;
}

template <typename T>
Tensor Model<T>::prior_for(const RoadMap& road) const {
  if (config_.zero_prior) return Tensor::zeros({kPriorChannels, road.height(), road.width()});
  return extract_prior(road, config_.pool_k).channels;
}

template <typename T>
BasicTensor<T> Model<T>::forward(const BasicTensor<T>& x, const RoadMap& road, ForwardTrace<T>* trace) const {
  const Shape& xs = x.shape();
  if (xs.size() != 5 || xs[1] != config_.channels || xs[2] != config_.t_in) {
    throw DimensionError("model input must be (B,8,T_in,H,W) with T_in = " + std::to_string(config_.t_in) +
                         ", got " + shape_str(xs));
  }
  if (xs[3] != road.height() || xs[4] != road.width()) {
    throw DimensionError("road map " + shape_str(road.grid.shape()) + " does not match input " + shape_str(xs));
  }
  const BasicTensor<T> prior = prior_for(road).template cast<T>();
  const auto road_feature = encode_road(prior, params_.road);
  const auto temporal_feature = encode_traffic(x, params_.temporal);
  const auto fused = fuse(temporal_feature, road_feature, params_.fusion, trace ? &trace->gates : nullptr);
  if (trace) {
    trace->road_feature = road_feature;
    trace->temporal_feature = temporal_feature;
  }
  return decode(fused, params_.decoder, config_.t_out);
}

template <typename T>
std::vector<NamedTensor<T>> Model<T>::parameters() {
  std::vector<NamedTensor<T>> out;
  params_.visit([&out](const std::string& name, BasicTensor<T>& t) { out.emplace_back(name, t); });
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template class Model<float>;
template class Model<double>;

}  // namespace rcsnet
