#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>

#include "rcsnet/layers.hpp"
#include "rcsnet/tensor.hpp"

namespace rcsnet {

// Static road layout, shape (1,H,W), values in [0,1], H and W >= 8.
struct RoadMap {
  Tensor grid;

  std::size_t height() const { return grid.size(1); }
  std::size_t width() const { return grid.size(2); }
};

// Validates range and extent; throws ValidationError or DimensionError.
RoadMap make_road_map(Tensor grid);

enum class PriorChannel : std::size_t { Occupancy = 0, Centerline, Edge, OrientX, OrientY, Connectivity, Intersection };

inline constexpr std::size_t kPriorChannels = 7;
inline constexpr std::size_t kDefaultPoolK = 5;

const std::array<std::string, kPriorChannels>& prior_channel_names();

// Channels ordered [occ, cen, edge, ori_x, ori_y, con, int]; shape (7,H,W).
struct TopologyPrior {
  Tensor channels;

  Tensor channel(PriorChannel c) const;
};

// Zero-padded 3x3 Sobel responses, each (1,H,W). Gx uses rows
// [-1 0 1; -2 0 2; -1 0 1] as a correlation stencil, Gy its transpose.
std::pair<Tensor, Tensor> sobel_gradients(const RoadMap& road);

// Zero-padded 3x3 Laplacian [0 1 0; 1 -4 1; 0 1 0], shape (1,H,W).
Tensor laplacian(const RoadMap& road);

TopologyPrior extract_prior(const RoadMap& road, std::size_t pool_k = kDefaultPoolK);

// Multi-scale road encoder: three two-layer conv branches at full, 1/2 and
// 1/4 resolution, concatenated and fused by a 1x1 convolution.
template <typename T>
struct RoadEncoderParams {
  struct Branch {
    Conv2dLayer<T> first, second;
  };
  std::array<Branch, 3> branches;
  Conv2dLayer<T> fuse;

  static RoadEncoderParams make(ParamInit& init, std::size_t road_channels, std::size_t branch_channels = 16);
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
  std::size_t out_channels() const { return fuse.weight.size(0); }
};

// prior (7,H,W) with H, W divisible by 4 -> road feature (C_r,H,W).
template <typename T>
BasicTensor<T> encode_road(const BasicTensor<T>& prior, const RoadEncoderParams<T>& params);

}  // namespace rcsnet
