#include "rcsnet/decoder.hpp"

#include <cmath>
#include <vector>

namespace rcsnet {

template <typename T>
DecoderParams<T> DecoderParams<T>::make(ParamInit& init, std::size_t feature_channels, std::size_t hidden) {
  const std::size_t cf = feature_channels;
  DecoderParams p;
  p.context1 = Conv2dLayer<T>::make(init, cf, cf, 3);
  p.context2 = Conv2dLayer<T>::make(init, cf, cf, 3);
  p.init_hidden = LinearLayer<T>::make(init, hidden, cf, false);
  const double bound = 1.0 / std::sqrt(double(hidden));
  auto& g = p.gru;
  g.w_z = init.uniform<T>({hidden, cf}, bound);
  g.u_z = init.uniform<T>({hidden, hidden}, bound);
  g.b_z = init.uniform<T>({hidden}, bound);
  g.w_r = init.uniform<T>({hidden, cf}, bound);
  g.u_r = init.uniform<T>({hidden, hidden}, bound);
  g.b_r = init.uniform<T>({hidden}, bound);
  g.w_n = init.uniform<T>({hidden, cf}, bound);
  g.u_n = init.uniform<T>({hidden, hidden}, bound);
  g.b_n = init.uniform<T>({hidden}, bound);
  p.embed = LinearLayer<T>::make(init, cf, hidden, false);
  p.step = Conv2dLayer<T>::make(init, cf, cf, 3);
  p.volume_head = Conv2dLayer<T>::make(init, kDirections, cf, 1);
  p.speed_head = Conv2dLayer<T>::make(init, kDirections, cf, 1);
  return p;
}

template <typename T>
void DecoderParams<T>::visit(const std::string& prefix, const ParamVisitor<T>& f) {
  context1.visit(prefix + ".context1", f);
  context2.visit(prefix + ".context2", f);
  init_hidden.visit(prefix + ".init_hidden", f);
  f(prefix + ".gru.w_z", gru.w_z);
  f(prefix + ".gru.u_z", gru.u_z);
  f(prefix + ".gru.b_z", gru.b_z);
  f(prefix + ".gru.w_r", gru.w_r);
  f(prefix + ".gru.u_r", gru.u_r);
  f(prefix + ".gru.b_r", gru.b_r);
  f(prefix + ".gru.w_n", gru.w_n);
  f(prefix + ".gru.u_n", gru.u_n);
  f(prefix + ".gru.b_n", gru.b_n);
  embed.visit(prefix + ".embed", f);
  step.visit(prefix + ".step", f);
  volume_head.visit(prefix + ".volume_head", f);
  speed_head.visit(prefix + ".speed_head", f);
}

template <typename T>
BasicTensor<T> decode(const BasicTensor<T>& f_rt, const DecoderParams<T>& params, std::size_t t_out) {
  if (t_out < 1) throw ParameterError("decode requires T_out >= 1");
  if (f_rt.dim() != 4) throw DimensionError("decode expects (B,C_f,H,W), got " + shape_str(f_rt.shape()));
  const std::size_t batch = f_rt.size(0), cf = f_rt.size(1);
  const auto context = params.context2(relu(params.context1(f_rt)));
  auto z = gap(context);
  auto h = tanh(params.init_hidden(z));
  std::vector<BasicTensor<T>> frames;
  frames.reserve(t_out);
  for (std::size_t k = 0; k < t_out; ++k) {
    h = gru_cell_step(z, h, params.gru);
    const auto embedding = reshape(params.embed(h), {batch, cf, 1, 1});
    const auto step_feature = add(context, embedding);
    const auto q = relu(params.step(step_feature));
    frames.push_back(interleave(params.volume_head(q), params.speed_head(q)));
    z = gap(step_feature);
  }
  return stack(frames, 1);
}

template struct DecoderParams<float>;
template struct DecoderParams<double>;
template BasicTensor<float> decode(const BasicTensor<float>&, const DecoderParams<float>&, std::size_t);
template BasicTensor<double> decode(const BasicTensor<double>&, const DecoderParams<double>&, std::size_t);

}  // namespace rcsnet
