#pragma once

#include <cstddef>
#include <string>

#include "rcsnet/layers.hpp"
#include "rcsnet/tensor.hpp"

namespace rcsnet {

inline constexpr std::size_t kDirectionGates = 4;

template <typename T>
struct FusionParams {
  // P_r: 1x1 conv, per-sample per-channel standardization with learned
  // scale/shift, ReLU.
  Conv2dLayer<T> road_proj;
  BasicTensor<T> norm_scale, norm_shift;
  // P_c: C_t -> C_t/4 -> C_t bottleneck.
  LinearLayer<T> channel_fc1, channel_fc2;
  // P_s: 1x1 conv to a single spatial gate.
  Conv2dLayer<T> spatial;
  // P_dir: 3x3 conv, ReLU, 1x1 conv to four gates.
  Conv2dLayer<T> dir_conv, dir_out;
  // P_f: 3x3 conv, ReLU, 3x3 conv. The second layer starts at zero.
  Conv2dLayer<T> fuse1, fuse2;

  static FusionParams make(ParamInit& init, std::size_t temporal_channels, std::size_t road_channels);
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
};

// Optional capture of the intermediate gates.
template <typename T>
struct FusionGates {
  BasicTensor<T> channel;    // (1,C_t,1,1)
  BasicTensor<T> spatial;    // (1,1,H,W)
  BasicTensor<T> direction;  // (1,4,H,W)
};

// F_temp (B,C_t,H,W), F_road (C_r,H,W) -> F_temp + P_f([F_temp*A_c*A_s; P_r(F_road); G_dir]).
// The road feature is shared across the batch.
template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& f_temp, const BasicTensor<T>& f_road, const FusionParams<T>& params,
                    FusionGates<T>* gates = nullptr);

}  // namespace rcsnet
