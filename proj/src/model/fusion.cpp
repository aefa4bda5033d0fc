#include "rcsnet/fusion.hpp"

#include <algorithm>
#include <vector>

#include "rcsnet/ops.hpp"

namespace rcsnet {

template <typename T>
FusionParams<T> FusionParams<T>::make(ParamInit& init, std::size_t temporal_channels,
                                      std::size_t road_channels) {
  const std::size_t ct = temporal_channels;
  const std::size_t bottleneck = std::max<std::size_t>(1, ct / 4);
  FusionParams p;
  p.road_proj = Conv2dLayer<T>::make(init, ct, road_channels, 1);
  p.norm_scale = init.constant<T>({ct}, 1.0);
  p.norm_shift = init.constant<T>({ct}, 0.0);
  p.channel_fc1 = LinearLayer<T>::make(init, bottleneck, ct, true);
  p.channel_fc2 = LinearLayer<T>::make(init, ct, bottleneck, true);
  p.spatial = Conv2dLayer<T>::make(init, 1, road_channels, 1);
  p.dir_conv = Conv2dLayer<T>::make(init, ct, road_channels, 3);
  p.dir_out = Conv2dLayer<T>::make(init, kDirectionGates, ct, 1);
  p.fuse1 = Conv2dLayer<T>::make(init, ct, 2 * ct + kDirectionGates, 3);
  p.fuse2 = Conv2dLayer<T>::zeros(ct, ct, 3);
  return p;
}

template <typename T>
void FusionParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  road_proj.visit(prefix + ".road_proj", f);
  f(prefix + ".road_norm.scale", norm_scale);
  f(prefix + ".road_norm.shift", norm_shift);
  channel_fc1.visit(prefix + ".channel_fc1", f);
  channel_fc2.visit(prefix + ".channel_fc2", f);
  spatial.visit(prefix + ".spatial", f);
  dir_conv.visit(prefix + ".dir_conv", f);
  dir_out.visit(prefix + ".dir_out", f);
  fuse1.visit(prefix + ".fuse1", f);
  fuse2.visit(prefix + ".fuse2", f);
}

namespace {

// Per-channel standardization over spatial positions, then affine.
template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& x, const BasicTensor<T>& scale_c,
                             const BasicTensor<T>& shift_c) {
  const std::size_t b = x.size(0), c = x.size(1);
  const Shape col{b, c, 1, 1};
  const auto centered = sub(x, reshape(gap(x), col));
  const auto stddev = sqrt_eps(reshape(gap(square(centered)), col));
  const auto normed = div(centered, stddev);
  return add(mul(normed, reshape(scale_c, {1, c, 1, 1})), reshape(shift_c, {1, c, 1, 1}));
}

}  // namespace

template <typename T>
BasicTensor<T> fuse(const BasicTensor<T>& f_temp, const BasicTensor<T>& f_road, const FusionParams<T>& params,
                    FusionGates<T>* gates) {
  const Shape& ts = f_temp.shape();
  const Shape& rs = f_road.shape();
  if (ts.size() != 4) throw DimensionError("fuse expects F_temp (B,C_t,H,W), got " + shape_str(ts));
  if (rs.size() != 3) throw DimensionError("fuse expects F_road (C_r,H,W), got " + shape_str(rs));
  if (ts[2] != rs[1] || ts[3] != rs[2]) {
    throw DimensionError("fuse spatial mismatch: traffic " + shape_str(ts) + ", road " + shape_str(rs));
  }
  const std::size_t batch = ts[0], ct = ts[1], h = ts[2], w = ts[3];
  const auto road = reshape(f_road, {1, rs[0], h, w});

  const auto road_proj = relu(instance_norm(params.road_proj(road), params.norm_scale, params.norm_shift));
  if (road_proj.size(1) != ct) {
    throw DimensionError("fuse: projected road channels do not match traffic channels " + shape_str(ts));
  }
  const auto a_c = reshape(sigmoid(params.channel_fc2(relu(params.channel_fc1(gap(road_proj))))), {1, ct, 1, 1});
  const auto a_s = sigmoid(params.spatial(road));
  const auto modulated = mul(mul(f_temp, a_c), a_s);
  const auto g_dir = sigmoid(params.dir_out(relu(params.dir_conv(road))));

  const auto cat = concat<T>({modulated, broadcast_to(road_proj, {batch, ct, h, w}),
                              broadcast_to(g_dir, {batch, kDirectionGates, h, w})},
                             1);
  const auto refined = params.fuse2(relu(params.fuse1(cat)));
  if (gates) {
    gates->channel = a_c;
    gates->spatial = a_s;
    gates->direction = g_dir;
  }
  return add(f_temp, refined);
}

template struct FusionParams<float>;
template struct FusionParams<double>;
template BasicTensor<float> fuse(const BasicTensor<float>&, const BasicTensor<float>&, const FusionParams<float>&,
                                 FusionGates<float>*);
template BasicTensor<double> fuse(const BasicTensor<double>&, const BasicTensor<double>&,
                                  const FusionParams<double>&, FusionGates<double>*);

}  // namespace rcsnet
