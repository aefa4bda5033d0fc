#pragma once

#include <cstddef>
#include <string>

#include "rcsnet/layers.hpp"
#include "rcsnet/ops.hpp"
#include "rcsnet/tensor.hpp"

namespace rcsnet {

inline constexpr std::size_t kTrafficChannels = 8;
inline constexpr std::size_t kDirections = 4;

template <typename T>
struct DecoderParams {
  Conv2dLayer<T> context1, context2;  // shared spatial context, conv-ReLU-conv
  LinearLayer<T> init_hidden;         // C_f -> hidden, no bias
  GruCellParams<T> gru;               // input C_f, state hidden
  LinearLayer<T> embed;               // hidden -> C_f, no bias
  Conv2dLayer<T> step;                // 3x3 + ReLU on S_k
  Conv2dLayer<T> volume_head, speed_head;  // 1x1 -> 4, linear outputs

  static DecoderParams make(ParamInit& init, std::size_t feature_channels, std::size_t hidden);
  void visit(const std::string& prefix, const ParamVisitor<T>& f);
  std::size_t hidden() const { return init_hidden.weight.size(0); }
};

// F_rt (B,C_f,H,W) -> forecast (B,T_out,8,H,W), channels [vol0,spd0,...,vol3,spd3].
//   C = context(F_rt); z_0 = GAP(C); h_0 = tanh(W_h z_0)
//   h_k = GRU(z_{k-1}, h_{k-1}); S_k = C + W_e h_k; Q_k = step(S_k)
//   frame_k = interleave(vol(Q_k), spd(Q_k)); z_k = GAP(S_k)
template <typename T>
BasicTensor<T> decode(const BasicTensor<T>& f_rt, const DecoderParams<T>& params, std::size_t t_out);

}  // namespace rcsnet
