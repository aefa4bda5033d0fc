#include "rcsnet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rcsnet/ops.hpp"

namespace rcsnet {

RoadMap make_road_map(Tensor grid) {
  const Shape& s = grid.shape();
  if (s.size() != 3 || s[0] != 1) throw DimensionError("road map must be (1,H,W), got " + shape_str(s));
  if (s[1] < 8 || s[2] < 8) throw DimensionError("road map must be at least 8x8, got " + shape_str(s));
  for (float v : grid.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("road map values must lie in [0,1]");
  }
  return RoadMap{std::move(grid)};
}

const std::array<std::string, kPriorChannels>& prior_channel_names() {
  static const std::array<std::string, kPriorChannels> names{"occ", "cen", "edge", "ori_x",
                                                             "ori_y", "con", "int"};
  return names;
}

Tensor TopologyPrior::channel(PriorChannel c) const {
  return slice(channels, 0, static_cast<std::size_t>(c), 1);
}

namespace {

// Zero-padded 3x3 correlation, evaluated in double.
Tensor64 stencil64(const Tensor64& grid, const std::array<double, 9>& kernel) {
  NoGradGuard no_grad;
  const std::size_t h = grid.size(1), w = grid.size(2);
  const Tensor64 x = reshape(grid, {1, 1, h, w});
  const Tensor64 k({1, 1, 3, 3}, std::vector<double>(kernel.begin(), kernel.end()));
  return reshape(conv2d(x, k, Tensor64(), 1, 1, 1), {1, h, w});
}

constexpr std::array<double, 9> kSobelX{-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr std::array<double, 9> kSobelY{-1, -2, -1, 0, 0, 0, 1, 2, 1};
constexpr std::array<double, 9> kLaplacian{0, 1, 0, 1, -4, 1, 0, 1, 0};

// G / sqrt(Gx^2 + Gy^2 + eps) rounded toward zero, so the stored pair keeps
// ori_x^2 + ori_y^2 < 1 after float rounding.
Tensor orientation(const Tensor64& gx, const Tensor64& gy, bool x_axis) {
  auto a = gx.data();
  auto b = gy.data();
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = (x_axis ? a[i] : b[i]) / std::sqrt(a[i] * a[i] + b[i] * b[i] + kSqrtEps);
    float f = static_cast<float>(v);
    if (std::abs(double(f)) > std::abs(v)) f = std::nextafter(f, 0.0f);
    out[i] = f;
  }
  return Tensor(gx.shape(), std::move(out));
}

}  // namespace

std::pair<Tensor, Tensor> sobel_gradients(const RoadMap& road) {
  const Tensor64 grid = road.grid.cast<double>();
  return {stencil64(grid, kSobelX).cast<float>(), stencil64(grid, kSobelY).cast<float>()};
}

Tensor laplacian(const RoadMap& road) { return stencil64(road.grid.cast<double>(), kLaplacian).cast<float>(); }

// Channels are computed in double and rounded once when stored.
TopologyPrior extract_prior(const RoadMap& road, std::size_t pool_k) {
  if (pool_k % 2 == 0) throw ParameterError("pool_k must be odd, got " + std::to_string(pool_k));
  NoGradGuard no_grad;
  const Tensor64 occ = road.grid.cast<double>();
  const Tensor64 con = avg_pool2d(occ, pool_k);
  // Double smoothing peaks along road interiors: a differentiable centerline proxy.
  const Tensor64 cen = avg_pool2d(con, pool_k);
  const Tensor64 gx = stencil64(occ, kSobelX);
  const Tensor64 gy = stencil64(occ, kSobelY);
  const Tensor64 edge = sqrt_eps(add(square(gx), square(gy)));
  const Tensor64 inter = mul(con, abs(stencil64(occ, kLaplacian)));
  return TopologyPrior{concat<float>({road.grid, cen.cast<float>(), edge.cast<float>(), orientation(gx, gy, true),
                                      orientation(gx, gy, false), con.cast<float>(), inter.cast<float>()},
                                     0)};
}

template <typename T>
RoadEncoderParams<T> RoadEncoderParams<T>::make(ParamInit& init, std::size_t road_channels,
                                                std::size_t branch_channels) {
  RoadEncoderParams p;
  for (auto& b : p.branches) {
    b.first = Conv2dLayer<T>::make(init, branch_channels, kPriorChannels, 3);
    b.second = Conv2dLayer<T>::make(init, branch_channels, branch_channels, 3);
  }
  p.fuse = Conv2dLayer<T>::make(init, road_channels, 3 * branch_channels, 1);
  return p;
}

template <typename T>
void RoadEncoderParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string name = prefix + ".branch" + std::to_string(i + 1);
    branches[i].first.visit(name + ".conv1", f);
    branches[i].second.visit(name + ".conv2", f);
  }
  fuse.visit(prefix + ".fuse", f);
}

template <typename T>
BasicTensor<T> encode_road(const BasicTensor<T>& prior, const RoadEncoderParams<T>& params) {
  const Shape& s = prior.shape();
  if (s.size() != 3 || s[0] != kPriorChannels) {
    throw DimensionError("encode_road expects a (7,H,W) prior, got " + shape_str(s));
  }
  const std::size_t h = s[1], w = s[2];
  if (h % 4 || w % 4) throw DimensionError("encode_road needs H and W divisible by 4, got " + shape_str(s));
  const auto x = reshape(prior, {1, kPriorChannels, h, w});
  auto branch = [&](const typename RoadEncoderParams<T>::Branch& b, const BasicTensor<T>& in) {
    return b.second(relu(b.first(in)));
  };
  std::vector<BasicTensor<T>> parts;
  parts.push_back(branch(params.branches[0], x));
  for (std::size_t i = 1; i < 3; ++i) {
    const std::size_t factor = std::size_t{1} << i;
    auto coarse = branch(params.branches[i], downsample_avg(x, factor));
    parts.push_back(upsample_linear(coarse, h, w));
  }
  auto fused = params.fuse(concat(parts, 1));
  return reshape(fused, {params.out_channels(), h, w});
}

template struct RoadEncoderParams<float>;
template struct RoadEncoderParams<double>;
template BasicTensor<float> encode_road(const BasicTensor<float>&, const RoadEncoderParams<float>&);
template BasicTensor<double> encode_road(const BasicTensor<double>&, const RoadEncoderParams<double>&);

}  // namespace rcsnet
